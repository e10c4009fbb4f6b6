"""Spatial operators and one-step time integrators.

Builds the spatial operator L of u_t = L u, and the fine/coarse time-stepping
matrices Phi and Psi as stability functions R(dt*L) of one-step schemes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

COMMUTATION_TOL = 1e-12
DECOMPOSITION_TOL = 1e-10
RCOND_CAP = 1e-12


@dataclass(frozen=True)
class Eigendecomposition:
    values: np.ndarray
    vectors: np.ndarray      # columns are eigenvectors
    vectors_inv: np.ndarray

    @property
    def is_unitary(self) -> bool:
        u = self.vectors
        return np.linalg.norm(u @ u.conj().T - np.eye(u.shape[0])) <= 1e-10 * u.shape[0]


@dataclass(frozen=True)
class SpatialOperator:
    matrix: np.ndarray
    label: str
    eig: Eigendecomposition | None = None

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("spatial operator must be a square matrix")
        if not np.isfinite(m).all():
            raise ValueError("spatial operator has non-finite entries")
        if self.eig is not None:
            e = self.eig
            defect = np.linalg.norm(e.vectors @ np.diag(e.values) @ e.vectors_inv - m)
            scale = max(1.0, np.linalg.norm(m))
            if defect > DECOMPOSITION_TOL * scale:
                raise ValueError("eigendecomposition does not reproduce the operator")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _parse_entry(tok: str) -> complex:
    tok = tok.strip().replace("i", "j")
    return complex(tok)


def _read_matrix_file(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            toks = line.replace(",", " ").split()
            try:
                rows.append([_parse_entry(t) for t in toks])
            except ValueError as exc:
                raise ValueError(f"malformed matrix file {path!r}: {exc}") from exc
    if not rows:
        raise ValueError(f"matrix file {path!r} is empty")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() != len(rows):
        raise ValueError(f"matrix file {path!r} is not square")
    return np.array(rows, dtype=complex)


def build_spatial(kind: str, n: int | None = None, h: float = 1.0,
                  velocity: float = 1.0, path=None) -> SpatialOperator:
    """Assemble a spatial operator.

    kind: 'laplacian-1d-dirichlet' (needs n, h), 'advection-1d-upwind'
    (needs n, velocity, h), or 'from-file' (needs path).
    """
    if kind == "laplacian-1d-dirichlet":
        if n is None or n < 1:
            raise ValueError("laplacian-1d-dirichlet needs n >= 1")
        if h <= 0:
            raise ValueError("mesh width must be positive")
        m = (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1)
             + np.diag(np.ones(n - 1), -1)) / h**2
        ell = np.arange(1, n + 1)
        values = (-2.0 + 2.0 * np.cos(ell * np.pi / (n + 1))) / h**2
        j = np.arange(1, n + 1)
        u = np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(j, ell) * np.pi / (n + 1))
        eig = Eigendecomposition(values.astype(complex), u.astype(complex),
                                 u.T.astype(complex))
        return SpatialOperator(m.astype(complex), f"laplacian-1d-dirichlet(n={n},h={h})", eig)
    if kind == "advection-1d-upwind":
        if n is None or n < 1:
            raise ValueError("advection-1d-upwind needs n >= 1")
        if h <= 0:
            raise ValueError("mesh width must be positive")
        m = (-velocity / h) * np.eye(n) + (velocity / h) * np.diag(np.ones(n - 1), -1)
        return SpatialOperator(m.astype(complex),
                               f"advection-1d-upwind(n={n},v={velocity},h={h})")
    if kind == "from-file":
        if path is None:
            raise ValueError("from-file needs a path")
        return SpatialOperator(_read_matrix_file(path), f"from-file({path})")
    raise ValueError(f"unknown spatial operator kind {kind!r}")


_SDIRK2_GAMMA = 1.0 - 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class SchemeSpec:
    kind: str
    dt: float
    theta: float | None = None
    numerator: tuple | None = None     # ascending polynomial coefficients
    denominator: tuple | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.kind == "theta":
            if self.theta is None or not 0.0 <= self.theta <= 1.0:
                raise ValueError("theta scheme needs theta in [0, 1]")
        elif self.kind == "custom-rational":
            if not self.numerator or not self.denominator:
                raise ValueError("custom-rational needs numerator and denominator")
            if self.denominator[0] == 0:
                raise ValueError("custom-rational denominator needs nonzero constant term")
        elif self.kind not in ("forward-euler", "backward-euler", "rk4", "sdirk2"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")


def rational_coefficients(scheme: SchemeSpec) -> tuple[tuple, tuple]:
    """Ascending numerator/denominator coefficients of the stability function."""
    if scheme.kind == "forward-euler":
        return (1.0, 1.0), (1.0,)
    if scheme.kind == "backward-euler":
        return (1.0,), (1.0, -1.0)
    if scheme.kind == "theta":
        return (1.0, 1.0 - scheme.theta), (1.0, -scheme.theta)
    if scheme.kind == "rk4":
        return (1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0), (1.0,)
    if scheme.kind == "sdirk2":
        g = _SDIRK2_GAMMA
        return (1.0, 1.0 - 2.0 * g), (1.0, -2.0 * g, g * g)
    return tuple(scheme.numerator), tuple(scheme.denominator)


def _polyval_matrix(coeffs, z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    for c in reversed(coeffs):
        out = out @ z + c * np.eye(z.shape[0])
    return out


def stability_eval(scheme: SchemeSpec, z: np.ndarray) -> np.ndarray:
    """Scheme stability function on scalar arguments z = dt*lambda (vectorized)."""
    num, den = rational_coefficients(scheme)
    z = np.asarray(z, dtype=complex)
    p = sum(c * z**i for i, c in enumerate(num))
    q = sum(c * z**i for i, c in enumerate(den))
    return p / q


def stability_matrix(scheme: SchemeSpec, z: np.ndarray) -> np.ndarray:
    """Scheme stability function of a matrix argument Z = dt*L."""
    num, den = rational_coefficients(scheme)
    p = _polyval_matrix(num, z)
    if len(den) == 1:
        return p / den[0]
    q = _polyval_matrix(den, z)
    try:
        return np.linalg.solve(q, p)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular implicit solve for scheme {scheme.kind}") from exc


def _rcond(m: np.ndarray) -> float:
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0:
        return 0.0
    return float(s[-1] / s[0])


@dataclass(frozen=True)
class Stepper:
    matrix: np.ndarray
    scheme: SchemeSpec
    source: SpatialOperator
    norm: float
    spectral_radius: float
    rcond: float

    @property
    def strongly_stable(self) -> bool:
        return self.norm < 1.0

    @property
    def spectrally_stable(self) -> bool:
        return self.spectral_radius < 1.0

    @property
    def invertible(self) -> bool:
        return self.rcond > RCOND_CAP

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def build_stepper(L: SpatialOperator, scheme: SchemeSpec) -> Stepper:
    z = scheme.dt * L.matrix
    m = stability_matrix(scheme, z)
    if not np.isfinite(m).all():
        raise ValueError("overflow in stability-function evaluation")
    s = np.linalg.svd(m, compute_uv=False)
    rho = float(np.max(np.abs(np.linalg.eigvals(m))))
    rcond = float(s[-1] / s[0]) if s[0] > 0 else 0.0
    return Stepper(m, scheme, L, float(s[0]), rho, rcond)


def rk4_defect(L: SpatialOperator, dt: float) -> np.ndarray:
    """Difference RK4(2*dt) - RK4(dt)^2 in closed polynomial form."""
    m = L.matrix
    n = m.shape[0]
    eye = np.eye(n)
    inner = eye + (5 * dt / 18) * m + (dt**2 / 18) * (m @ m) + (dt**3 / 144) * (m @ m @ m)
    m5 = np.linalg.matrix_power(m, 5)
    return -(dt**5 / 4) * m5 @ inner


def matrix_power(m: np.ndarray, k: int) -> np.ndarray:
    # repeated multiplication; k stays small at desk scale
    out = np.eye(m.shape[0], dtype=m.dtype)
    for _ in range(k):
        out = out @ m
    return out


@dataclass(frozen=True)
class SharedEigendecomposition:
    fine_values: np.ndarray    # eigenvalues of Phi
    coarse_values: np.ndarray  # eigenvalues of Psi
    vectors: np.ndarray
    vectors_inv: np.ndarray
    normal: bool


@dataclass(frozen=True)
class StepperPair:
    fine: Stepper
    coarse: Stepper
    k: int
    commuting: bool
    shared_eig: SharedEigendecomposition | None = None

    def __post_init__(self):
        if self.fine.dim != self.coarse.dim:
            raise ValueError("fine and coarse steppers must have identical dimension")
        if self.k < 1:
            raise ValueError("coarsening factor must be positive")

    @property
    def dim(self) -> int:
        return self.fine.dim

    @property
    def fine_power(self) -> np.ndarray:
        return matrix_power(self.fine.matrix, self.k)

    @property
    def coarse_defect(self) -> np.ndarray:
        """Psi - Phi^k, the quantity every bound is built from."""
        return self.coarse.matrix - self.fine_power


def make_pair(fine: Stepper, coarse: Stepper, k: int,
              attach_eig: bool = True) -> StepperPair:
    phi, psi = fine.matrix, coarse.matrix
    comm = np.linalg.norm(phi @ psi - psi @ phi)
    commuting = comm <= COMMUTATION_TOL * max(1e-300, np.linalg.norm(phi) * np.linalg.norm(psi))

    shared = None
    if attach_eig and fine.source is coarse.source and fine.source.eig is not None:
        e = fine.source.eig
        lam = stability_eval(fine.scheme, fine.scheme.dt * e.values)
        mu = stability_eval(coarse.scheme, coarse.scheme.dt * e.values)
        scale = max(1.0, np.linalg.norm(phi), np.linalg.norm(psi))
        ok = (np.linalg.norm(e.vectors @ np.diag(lam) @ e.vectors_inv - phi) <=
              DECOMPOSITION_TOL * scale and
              np.linalg.norm(e.vectors @ np.diag(mu) @ e.vectors_inv - psi) <=
              DECOMPOSITION_TOL * scale)
        if ok and np.all(np.abs(mu) < 1.0):
            shared = SharedEigendecomposition(lam, mu, e.vectors, e.vectors_inv,
                                              e.is_unitary)
    return StepperPair(fine, coarse, k, commuting, shared)


@dataclass(frozen=True)
class PairDiagnostics:
    commutator_norm: float
    defect_rcond: float
    defect_invertible: bool
    fine_strongly_stable: bool
    coarse_strongly_stable: bool
    fine_spectrally_stable: bool
    coarse_spectrally_stable: bool
    max_abs_coarse_eig: float | None


def verify_pair(pair: StepperPair, rcond_cap: float = RCOND_CAP) -> PairDiagnostics:
    phi, psi = pair.fine.matrix, pair.coarse.matrix
    comm = float(np.linalg.norm(phi @ psi - psi @ phi))
    rc = _rcond(pair.coarse_defect)
    max_mu = None
    if pair.shared_eig is not None:
        max_mu = float(np.max(np.abs(pair.shared_eig.coarse_values)))
    return PairDiagnostics(
        commutator_norm=comm,
        defect_rcond=rc,
        defect_invertible=rc > rcond_cap,
        fine_strongly_stable=pair.fine.strongly_stable,
        coarse_strongly_stable=pair.coarse.strongly_stable,
        fine_spectrally_stable=pair.fine.spectrally_stable,
        coarse_spectrally_stable=pair.coarse.spectrally_stable,
        max_abs_coarse_eig=max_mu,
    )
