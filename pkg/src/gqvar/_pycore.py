"""Pure numpy fallback for the compiled kernels in ``_core.pyx``.

Signatures and results match the compiled module; only speed differs.
"""

import math

import numpy as np
from scipy.linalg import matmul_toeplitz


def _fsum_rows(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        return float(x)
    return math.fsum(x.ravel())


def lag_triple_sum(rho, n):
    """Sum of rho(j-k) rho(k-l) rho(j-l) over [0, n)^3 by lag counting."""
    rho = np.ascontiguousarray(rho, dtype=np.float64)
    if rho.shape[0] < n:
        raise ValueError("rho must hold at least n lags")
    total = []
    for a in range(n):
        b = np.arange(-(n - 1), n - a)
        span = np.where(b >= 0, a + b, np.where(b >= -a, a, -b))
        terms = (n - span) * rho[a] * rho[np.abs(b)] * rho[np.abs(a + b)]
        line = math.fsum(terms)
        total.append(2.0 * line if a > 0 else line)
    return math.fsum(total)


def toeplitz_square_sums(rho, n):
    """Return ``(sum(T * T @ T), sum((T @ T) ** 2))`` for T = Toeplitz(rho[:n])."""
    rho = np.ascontiguousarray(rho, dtype=np.float64)
    if rho.shape[0] < n:
        raise ValueError("rho must hold at least n lags")
    r = rho[:n]
    first = matmul_toeplitz((r, r), r)
    s3, s4 = [], []
    for d in range(n):
        inc = r[1:n - d] * r[d + 1:n] - r[n - 1:d:-1] * r[n - 1 - d:0:-1]
        diag = first[d] + np.concatenate(([0.0], np.cumsum(inc)))
        w = 1.0 if d == 0 else 2.0
        s4.append(w * math.fsum(diag * diag))
        s3.append(w * r[d] * math.fsum(diag))
    return math.fsum(s3), math.fsum(s4)


def brute_triple_sum(theta):
    theta = np.asarray(theta, dtype=np.float64)
    return float(np.einsum("jk,kl,jl->", theta, theta, theta, optimize=False))


def brute_cyclic_quad_sum(theta):
    theta = np.asarray(theta, dtype=np.float64)
    return float(np.einsum("ij,jk,kl,li->", theta, theta, theta, theta, optimize=False))


def hadamard_sum(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    return _fsum_rows(a * b)


def nested_sigma_sq(theta):
    theta = np.asarray(theta, dtype=np.float64)
    n = theta.shape[0]
    inc = np.empty(n)
    for m in range(n):
        row = theta[m, :m]
        inc[m] = 2.0 * theta[m, m] ** 2 + 4.0 * math.fsum(row * row)
    return np.cumsum(inc)


def simplex_sum(v, r):
    """Sum of prod r_i^(v_i - 1) over positive integers with sum r_i < r (l <= 3)."""
    v = np.asarray(v, dtype=np.float64)
    l = v.shape[0]
    if l < 1 or l > 3:
        raise ValueError("simplex_sum supports 1 <= l <= 3")
    if r < 2:
        return 0.0
    q = np.arange(1, r, dtype=np.float64)
    prefix = np.concatenate(([0.0], np.cumsum(q ** (v[-1] - 1.0))))
    if l == 1:
        return float(prefix[r - 1])
    if l == 2:
        r1 = np.arange(1, r - 1)
        return math.fsum(r1 ** (v[0] - 1.0) * prefix[r - 1 - r1])
    parts = []
    for r1 in range(1, r - 2):
        r2 = np.arange(1, r - 1 - r1)
        inner = math.fsum(r2 ** (v[1] - 1.0) * prefix[r - 1 - r1 - r2])
        parts.append(r1 ** (v[0] - 1.0) * inner)
    return math.fsum(parts)
