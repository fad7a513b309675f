# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot loops: regulated orthant integration and ordered pair sums.

The pure-Python twin lives in ``_kernels_py.py``; both expose the same
functions with identical semantics.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport hypot

cnp.import_array()

ctypedef double complex cplx


cdef inline double cabs(cplx z) noexcept nogil:
    return hypot(z.real, z.imag)


cdef double _factorial(long n) noexcept nogil:
    cdef double out = 1.0
    cdef long k
    for k in range(2, n + 1):
        out *= k
    return out


def orthant_laurent(const cplx[::1] coeffs,
                    const cplx[:, ::1] exponents,
                    const cnp.int64_t[:, ::1] powers,
                    double zero_tol):
    """Laurent coefficients of a regulated sum of orthant integrals.

    Each term ``c * prod_i s_i**n_i * exp(-zeta_i s_i)`` is integrated over
    the positive orthant after the shift ``zeta_i -> zeta_i + eta``.

    Parameters
    ----------
    coeffs : (K,) complex
    exponents : (K, m) complex
    powers : (K, m) int64
    zero_tol : float
        Exponents with modulus below this are treated as exactly zero.

    Returns
    -------
    ndarray of complex
        ``out[k]`` is the coefficient of ``eta**(-k)``; ``out[0]`` is the
        finite part.
    """
    cdef Py_ssize_t K = exponents.shape[0]
    cdef Py_ssize_t m = exponents.shape[1]
    cdef Py_ssize_t i, v, j, k, deg
    cdef long n, p, pmax = 0
    cdef cplx z, pref, ck, acc
    # largest possible pole order
    for i in range(K):
        p = 0
        for v in range(m):
            if cabs(exponents[i, v]) <= zero_tol:
                p += powers[i, v] + 1
        if p > pmax:
            pmax = p
    out_arr = np.zeros(pmax + 1, dtype=np.complex128)
    cdef cplx[::1] out = out_arr
    series_arr = np.zeros(pmax + 1, dtype=np.complex128)
    cdef cplx[::1] S = series_arr
    with nogil:
        for i in range(K):
            pref = coeffs[i]
            if pref == 0:
                continue
            p = 0
            for v in range(m):
                n = powers[i, v]
                z = exponents[i, v]
                if cabs(z) <= zero_tol:
                    p += n + 1
                    pref = pref * _factorial(n)
                else:
                    pref = pref * _factorial(n)
                    for k in range(n + 1):
                        pref = pref / z
            S[0] = 1.0
            for k in range(1, p + 1):
                S[k] = 0.0
            if p > 0:
                for v in range(m):
                    z = exponents[i, v]
                    if cabs(z) <= zero_tol:
                        continue
                    n = powers[i, v]
                    # multiply S by (1 + eta/z)^(-(n+1)) truncated at degree p
                    for deg in range(p, 0, -1):
                        acc = 0.0
                        ck = 1.0
                        for k in range(1, deg + 1):
                            ck = ck * (-(n + k) / <double>k) / z
                            acc = acc + ck * S[deg - k]
                        S[deg] = S[deg] + acc
            for j in range(p + 1):
                out[p - j] = out[p - j] + pref * S[j]
    return out_arr


def ordered_pair_sum(const cplx[:, ::1] P):
    """Sum over perfect matchings of ``prod P[j, k]`` with ``j < k``.

    Parameters
    ----------
    P : (n, n) complex
        Only the strict upper triangle is read.

    Returns
    -------
    complex
        Zero for odd ``n``; one for ``n = 0``.
    """
    cdef Py_ssize_t n = P.shape[0]
    if n % 2 == 1:
        return 0j
    if n == 0:
        return 1.0 + 0j
    if n > 26:
        raise ValueError("ordered_pair_sum supports at most 26 operators")
    cdef Py_ssize_t full = (1 << n) - 1
    table_arr = np.zeros(full + 1, dtype=np.complex128)
    cdef cplx[::1] f = table_arr
    cdef Py_ssize_t mask, first, j, rest
    cdef cplx acc
    f[0] = 1.0
    with nogil:
        for mask in range(1, full + 1):
            first = 0
            while not (mask >> first) & 1:
                first += 1
            rest = mask ^ (1 << first)
            if rest == 0:
                continue
            acc = 0.0
            for j in range(first + 1, n):
                if (rest >> j) & 1:
                    acc = acc + P[first, j] * f[rest ^ (1 << j)]
            f[mask] = acc
    return complex(f[full])
