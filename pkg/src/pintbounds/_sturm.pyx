# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Sturm-sequence bisection kernel."""


def min_eig(double[::1] d, double[::1] b2, double lo, double hi, int iters):
    """Smallest eigenvalue of the real symmetric tridiagonal matrix with
    diagonal d and squared off-diagonal b2, by bisection on the Sturm
    sequence count over [lo, hi]."""
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t i
    cdef int it, cnt
    cdef double mid, q
    for it in range(iters):
        mid = 0.5 * (lo + hi)
        q = d[0] - mid
        cnt = 1 if q < 0.0 else 0
        for i in range(1, n):
            if q == 0.0:
                q = 1e-300
            q = d[i] - mid - b2[i - 1] / q
            if q < 0.0:
                cnt += 1
        if cnt >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
