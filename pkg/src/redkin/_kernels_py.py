"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``."""
from __future__ import annotations

from math import factorial

import numpy as np


def _complete_homogeneous(inv: np.ndarray, p_max: int) -> np.ndarray:
    """Complete homogeneous symmetric polynomials h_0..h_p_max per row.

    ``inv`` is (K, m) with zeros in masked positions.
    """
    K = inv.shape[0]
    h = np.zeros((K, p_max + 1), dtype=complex)
    h[:, 0] = 1.0
    for col in range(inv.shape[1]):
        x = inv[:, col]
        # h_k(new) = sum_j x^j h_{k-j}(old) -> h_k += x h_{k-1}(new)
        for k in range(1, p_max + 1):
            h[:, k] = h[:, k] + x * h[:, k - 1]
    return h


def _laurent_simple(coeffs, exponents, zero_tol):
    """All powers zero: fully vectorized closed form."""
    zero = np.abs(exponents) <= zero_tol
    p = zero.sum(axis=1)
    safe = np.where(zero, 1.0, exponents)
    inv = np.where(zero, 0.0, 1.0 / safe)
    pref = coeffs * np.prod(np.where(zero, 1.0, inv), axis=1)
    p_max = int(p.max()) if p.size else 0
    out = np.zeros(p_max + 1, dtype=complex)
    if p_max == 0:
        out[0] = pref.sum()
        return out
    h = _complete_homogeneous(inv, p_max)
    # coefficient of eta^(j - p) is pref * (-1)^j h_j, for j = 0..p
    signs = (-1.0) ** np.arange(p_max + 1)
    for pv in np.unique(p):
        sel = p == pv
        for j in range(pv + 1):
            out[pv - j] += np.sum(pref[sel] * signs[j] * h[sel, j])
    return out


def orthant_laurent(coeffs, exponents, powers, zero_tol):
    """Laurent coefficients of a regulated sum of orthant integrals.

    See the compiled version for the full description. ``out[k]`` is the
    coefficient of ``eta**(-k)``.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    exponents = np.asarray(exponents, dtype=complex)
    if powers is None or not np.any(powers):
        return _laurent_simple(coeffs, exponents, zero_tol)
    powers = np.asarray(powers, dtype=np.int64)
    zero = np.abs(exponents) <= zero_tol
    pole = np.where(zero, powers + 1, 0).sum(axis=1)
    p_max = int(pole.max()) if pole.size else 0
    out = np.zeros(p_max + 1, dtype=complex)
    for i in range(coeffs.shape[0]):
        pref = coeffs[i]
        if pref == 0:
            continue
        p = int(pole[i])
        series = np.zeros(p + 1, dtype=complex)
        series[0] = 1.0
        for v in range(exponents.shape[1]):
            n = int(powers[i, v])
            z = exponents[i, v]
            pref = pref * factorial(n)
            if zero[i, v]:
                continue
            pref = pref / z ** (n + 1)
            if p == 0:
                continue
            k = np.arange(1, p + 1)
            ck = np.cumprod(-(n + k) / k / z)
            factor = np.concatenate(([1.0], ck))
            series = np.convolve(series, factor)[: p + 1]
        out[p - np.arange(p + 1)] += pref * series
    return out


def ordered_pair_sum(P):
    """Sum over perfect matchings of ``prod P[j, k]`` with ``j < k``."""
    P = np.asarray(P, dtype=complex)
    n = P.shape[0]
    if n % 2 == 1:
        return 0j
    if n == 0:
        return 1.0 + 0j
    table = {0: 1.0 + 0j}
    full = (1 << n) - 1

    def solve(mask):
        if mask in table:
            return table[mask]
        first = (mask & -mask).bit_length() - 1
        rest = mask ^ (1 << first)
        acc = 0j
        j = first + 1
        while j < n:
            if (rest >> j) & 1:
                acc += P[first, j] * solve(rest ^ (1 << j))
            j += 1
        table[mask] = acc
        return acc

    return complex(solve(full))
