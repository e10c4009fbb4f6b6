"""Hermitian tridiagonal minimum-eigenvalue solver.

Bisection on the Sturm sequence. The inner recurrence runs in a compiled
extension when available and falls back to pure Python otherwise; a phase
similarity reduces the Hermitian problem to real symmetric form, so only the
off-diagonal magnitudes enter.
"""

from __future__ import annotations

import numpy as np

try:
    from ._sturm import min_eig as _min_eig
    COMPILED = True
except ImportError:       # pragma: no cover - depends on build environment
    from ._sturm_py import min_eig as _min_eig
    COMPILED = False

BISECT_ITERS = 120


def tridiag_min_eig(diag, off) -> float:
    """Smallest eigenvalue of the Hermitian tridiagonal matrix with the given
    diagonal and first superdiagonal."""
    d = np.asarray(diag)
    if d.ndim != 1 or d.size == 0:
        raise ValueError("diagonal must be a nonempty 1-d array")
    if np.iscomplexobj(d):
        if np.max(np.abs(d.imag)) > 1e-12 * max(1.0, np.max(np.abs(d))):
            raise ValueError("Hermitian matrix needs a real diagonal")
        d = d.real
    d = np.ascontiguousarray(d, dtype=float)
    b = np.abs(np.asarray(off, dtype=complex))
    if b.shape != (d.size - 1,):
        raise ValueError("off-diagonal length must be n - 1")
    if d.size == 1:
        return float(d[0])
    r = np.zeros_like(d)
    r[:-1] += b
    r[1:] += b
    lo = float(np.min(d - r))
    hi = float(np.max(d + r))
    b2 = np.ascontiguousarray(b * b, dtype=float)
    return float(_min_eig(d, b2, lo, hi, BISECT_ITERS))
