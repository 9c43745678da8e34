# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the structured sums.

Every function here has a numpy twin in :mod:`gqvar._pycore` with the same
signature; :mod:`gqvar._kernels` picks one at import time.
"""

import numpy as np

from libc.math cimport fabs, pow


cdef inline void _acc(double* s, double* c, double x) noexcept nogil:
    # Neumaier two-term accumulation
    cdef double t = s[0] + x
    if fabs(s[0]) >= fabs(x):
        c[0] += (s[0] - t) + x
    else:
        c[0] += (x - t) + s[0]
    s[0] = t


def lag_triple_sum(const double[::1] rho, Py_ssize_t n):
    """Sum of rho(j-k) rho(k-l) rho(j-l) over [0, n)^3 by lag counting.

    ``rho[r]`` holds the even sequence at lag ``r >= 0``; needs ``len(rho) >= n``.
    """
    if rho.shape[0] < n:
        raise ValueError("rho must hold at least n lags")
    cdef double s = 0.0, c = 0.0, line_s, line_c, term
    cdef Py_ssize_t a, b, span, ab
    with nogil:
        for a in range(n):
            line_s = 0.0
            line_c = 0.0
            for b in range(-(n - 1), n - a):
                if b >= 0:
                    span = a + b
                elif b >= -a:
                    span = a
                else:
                    span = -b
                ab = a + b
                if ab < 0:
                    ab = -ab
                term = (n - span) * rho[a] * rho[b if b >= 0 else -b] * rho[ab]
                _acc(&line_s, &line_c, term)
            # (a, b) and (-a, -b) realise the same count and product
            if a > 0:
                _acc(&s, &c, 2.0 * line_s)
                _acc(&s, &c, 2.0 * line_c)
            else:
                _acc(&s, &c, line_s)
                _acc(&s, &c, line_c)
    return s + c


def toeplitz_square_sums(const double[::1] rho, Py_ssize_t n):
    """Return ``(sum(T * T @ T), sum((T @ T) ** 2))`` for T = Toeplitz(rho[:n]).

    Entries of T @ T are walked diagonal by diagonal with the shift
    recurrence, so the cost is O(n^2) and memory O(n).
    """
    if rho.shape[0] < n:
        raise ValueError("rho must hold at least n lags")
    cdef double[::1] first = np.empty(n, dtype=np.float64)
    cdef double fs, fc, cur_s, cur_c, v, w
    cdef double s3 = 0.0, c3 = 0.0, s4 = 0.0, c4 = 0.0
    cdef double d3s, d3c, d4s, d4c
    cdef Py_ssize_t d, i, j, lag
    with nogil:
        for d in range(n):
            fs = 0.0
            fc = 0.0
            for j in range(n):
                lag = j - d
                if lag < 0:
                    lag = -lag
                _acc(&fs, &fc, rho[j] * rho[lag])
            first[d] = fs + fc
        for d in range(n):
            w = 1.0 if d == 0 else 2.0
            cur_s = first[d]
            cur_c = 0.0
            d3s = 0.0
            d3c = 0.0
            d4s = 0.0
            d4c = 0.0
            for i in range(n - d):
                v = cur_s + cur_c
                _acc(&d4s, &d4c, v * v)
                _acc(&d3s, &d3c, v)
                if i < n - 1 - d:
                    _acc(&cur_s, &cur_c, rho[i + 1] * rho[i + d + 1])
                    _acc(&cur_s, &cur_c, -rho[n - 1 - i] * rho[n - 1 - i - d])
            _acc(&s4, &c4, w * (d4s + d4c))
            _acc(&s3, &c3, w * rho[d] * (d3s + d3c))
    return s3 + c3, s4 + c4


def brute_triple_sum(const double[:, ::1] theta):
    """Literal triple loop: sum over j, k, l of theta[j,k] theta[k,l] theta[j,l]."""
    cdef Py_ssize_t n = theta.shape[0], j, k, l
    cdef double s = 0.0, c = 0.0, jk
    with nogil:
        for j in range(n):
            for k in range(n):
                jk = theta[j, k]
                for l in range(n):
                    _acc(&s, &c, jk * theta[k, l] * theta[j, l])
    return s + c


def brute_cyclic_quad_sum(const double[:, ::1] theta):
    """Literal quadruple loop: theta[i,j] theta[j,k] theta[k,l] theta[l,i]."""
    cdef Py_ssize_t n = theta.shape[0], i, j, k, l
    cdef double s = 0.0, c = 0.0, ij, ijk
    with nogil:
        for i in range(n):
            for j in range(n):
                ij = theta[i, j]
                for k in range(n):
                    ijk = ij * theta[j, k]
                    for l in range(n):
                        _acc(&s, &c, ijk * theta[k, l] * theta[l, i])
    return s + c


def hadamard_sum(const double[:, ::1] a, const double[:, ::1] b):
    """Compensated sum of the entrywise product of two equal-shape matrices."""
    if a.shape[0] != b.shape[0] or a.shape[1] != b.shape[1]:
        raise ValueError("shape mismatch")
    cdef Py_ssize_t i, j
    cdef double s = 0.0, c = 0.0
    with nogil:
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                _acc(&s, &c, a[i, j] * b[i, j])
    return s + c


def nested_sigma_sq(const double[:, ::1] theta):
    """Second moments of the nested quadratic variations Z_1, ..., Z_n.

    out[k-1] = 2 * sum_{i,j<k} theta[i,j]^2, built incrementally in O(n^2).
    """
    cdef Py_ssize_t n = theta.shape[0], m, i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double s = 0.0, c = 0.0, rs, rc, x
    with nogil:
        for m in range(n):
            rs = 0.0
            rc = 0.0
            for i in range(m):
                x = theta[m, i]
                _acc(&rs, &rc, x * x)
            x = theta[m, m]
            _acc(&s, &c, 2.0 * x * x)
            _acc(&s, &c, 4.0 * (rs + rc))
            out[m] = s + c
    return out_arr


def simplex_sum(const double[::1] v, Py_ssize_t r):
    """Sum of prod r_i^(v_i - 1) over positive integers with sum r_i < r (l <= 3)."""
    cdef Py_ssize_t l = v.shape[0], m, r1, r2
    if l < 1 or l > 3:
        raise ValueError("simplex_sum supports 1 <= l <= 3")
    if r < 2:
        return 0.0
    # prefix[m] = sum_{q=1}^{m} q^(v_last - 1)
    cdef double[::1] prefix = np.zeros(r, dtype=np.float64)
    cdef double[::1] pw0 = np.zeros(r, dtype=np.float64)
    cdef double[::1] pw1 = np.zeros(r, dtype=np.float64)
    cdef double ps = 0.0, pc = 0.0, s = 0.0, c = 0.0, inner_s, inner_c
    with nogil:
        for m in range(1, r):
            _acc(&ps, &pc, pow(<double>m, v[l - 1] - 1.0))
            prefix[m] = ps + pc
            pw0[m] = pow(<double>m, v[0] - 1.0)
            if l == 3:
                pw1[m] = pow(<double>m, v[1] - 1.0)
        if l == 1:
            s = prefix[r - 1]
        elif l == 2:
            for r1 in range(1, r - 1):
                _acc(&s, &c, pw0[r1] * prefix[r - 1 - r1])
        else:
            for r1 in range(1, r - 2):
                inner_s = 0.0
                inner_c = 0.0
                for r2 in range(1, r - 1 - r1):
                    _acc(&inner_s, &inner_c, pw1[r2] * prefix[r - 1 - r1 - r2])
                _acc(&s, &c, pw0[r1] * (inner_s + inner_c))
    return s + c
