"""Shared builders for the test suite."""

import numpy as np

from pintbounds import operators as ops


def raw_stepper(m, dt=1.0):
    """Wrap an explicit matrix as a Stepper without a scheme derivation."""
    m = np.asarray(m, dtype=complex)
    s = np.linalg.svd(m, compute_uv=False)
    rho = float(np.max(np.abs(np.linalg.eigvals(m)))) if m.size else 0.0
    rcond = float(s[-1] / s[0]) if s[0] > 0 else 0.0
    src = ops.SpatialOperator(m, "raw")
    return ops.Stepper(m, ops.SchemeSpec("backward-euler", dt), src,
                       float(s[0]), rho, rcond)


def raw_pair(phi, psi, k):
    return ops.make_pair(raw_stepper(phi), raw_stepper(psi), k)


def random_contraction(rng, d, norm_bound=0.9):
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return m * (norm_bound / np.linalg.svd(m, compute_uv=False)[0])


def heat_pair(nx=8, dt=0.02, k=4, scheme="backward-euler", theta=None,
              attach_eig=True):
    spatial = ops.build_spatial("laplacian-1d-dirichlet", nx, 1.0 / (nx + 1))
    kw = {} if theta is None else {"theta": theta}
    fine = ops.build_stepper(spatial, ops.SchemeSpec(scheme, dt, **kw))
    coarse = ops.build_stepper(spatial, ops.SchemeSpec(scheme, dt * k, **kw))
    return ops.make_pair(fine, coarse, k, attach_eig=attach_eig)
