"""Pure-Python Sturm-sequence bisection kernel (fallback backend)."""


def min_eig(d, b2, lo, hi, iters):
    """Smallest eigenvalue of the real symmetric tridiagonal matrix with
    diagonal d and squared off-diagonal b2, by bisection on the Sturm
    sequence count over [lo, hi]."""
    n = len(d)
    for _ in range(iters):
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
