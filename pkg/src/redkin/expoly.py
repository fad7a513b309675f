"""Exponential polynomials on the positive orthant and their regulated integrals.

An :class:`ExpPoly` is a finite sum of monomials
``c * prod_i s_i**n_i * exp(-sum_i zeta_i s_i)`` in variables ``s_1..s_m``.
Integration uses ``int_0^inf s^n exp(-zeta s) ds = n! / zeta^(n+1)`` per
variable after a common shift ``zeta_i -> zeta_i + eta``; the result is a
Laurent series in ``eta`` whose finite part is the answer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import orthant_laurent

__all__ = ["DivergenceError", "ExpPoly", "integrate_orthant", "check_poles", "term_scale"]


class DivergenceError(ArithmeticError):
    """A regulated integral kept a pole after all terms were combined."""


@dataclass(frozen=True)
class ExpPoly:
    """Sum of monomials ``coeffs[k] * s**powers[k] * exp(-exponents[k] . s)``.

    Parameters
    ----------
    coeffs : (K,) complex
    exponents : (K, m) complex
    powers : (K, m) int, optional
        Defaults to all zeros (pure exponentials).
    """

    coeffs: np.ndarray
    exponents: np.ndarray
    powers: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        e = np.asarray(self.exponents, dtype=complex)
        if e.ndim == 1:
            e = e.reshape(c.size, -1)
        p = self.powers
        p = np.zeros(e.shape, dtype=np.int64) if p is None else np.asarray(p, dtype=np.int64).reshape(e.shape)
        if np.any(p < 0):
            raise ValueError("powers must be nonnegative")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "exponents", e)
        object.__setattr__(self, "powers", p)

    @property
    def num_vars(self) -> int:
        return self.exponents.shape[1]

    @classmethod
    def exponential(cls, coeff, exponent, power=None) -> "ExpPoly":
        exponent = np.atleast_1d(np.asarray(exponent, dtype=complex))
        pw = None if power is None else np.atleast_2d(power)
        return cls(np.array([coeff]), exponent[None, :], pw)

    @classmethod
    def zero(cls, m: int) -> "ExpPoly":
        return cls(np.zeros(0, dtype=complex), np.zeros((0, m), dtype=complex))

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        if other.num_vars != self.num_vars:
            raise ValueError("variable count mismatch")
        return ExpPoly(
            np.concatenate([self.coeffs, other.coeffs]),
            np.vstack([self.exponents, other.exponents]),
            np.vstack([self.powers, other.powers]),
        )

    def __mul__(self, other):
        if np.isscalar(other):
            return ExpPoly(self.coeffs * other, self.exponents, self.powers)
        if other.num_vars != self.num_vars:
            raise ValueError("variable count mismatch")
        K1, K2, m = self.coeffs.size, other.coeffs.size, self.num_vars
        c = np.multiply.outer(self.coeffs, other.coeffs).ravel()
        e = (self.exponents[:, None, :] + other.exponents[None, :, :]).reshape(K1 * K2, m)
        p = (self.powers[:, None, :] + other.powers[None, :, :]).reshape(K1 * K2, m)
        return ExpPoly(c, e, p)

    __rmul__ = __mul__

    def canonical(self, decimals: int = 12) -> "ExpPoly":
        """Merge monomials with identical exponents and powers; drop zeros."""
        if self.coeffs.size == 0:
            return self
        key = np.hstack([
            np.round(self.exponents.real, decimals),
            np.round(self.exponents.imag, decimals),
            self.powers.astype(float),
        ])
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.ravel()
        c = np.zeros(len(uniq), dtype=complex)
        np.add.at(c, inv, self.coeffs)
        first = np.zeros(len(uniq), dtype=int)
        first[inv[::-1]] = np.arange(len(inv))[::-1]
        keep = c != 0
        return ExpPoly(c[keep], self.exponents[first][keep], self.powers[first][keep])

    def __call__(self, s) -> np.ndarray:
        """Evaluate at points ``s`` of shape (..., m)."""
        s = np.asarray(s, dtype=float)
        mono = np.prod(s[..., None, :] ** self.powers, axis=-1)
        return np.sum(self.coeffs * mono * np.exp(-np.einsum("...m,km->...k", s, self.exponents)), axis=-1)

    def laurent(self, zero_tol: float = 1e-12) -> np.ndarray:
        """Laurent coefficients of the regulated integral; ``out[k]`` multiplies ``eta**-k``."""
        if self.coeffs.size == 0:
            return np.zeros(1, dtype=complex)
        powers = self.powers if np.any(self.powers) else None
        return orthant_laurent(self.coeffs, self.exponents, powers, zero_tol)


def check_poles(laurent_terms, scale: float, rel_tol: float = 1e-8, what: str = "integral") -> None:
    """Raise :class:`DivergenceError` if any pole coefficient exceeds ``rel_tol * scale``."""
    for k, coef in enumerate(laurent_terms):
        if k == 0:
            continue
        size = float(np.max(np.abs(coef)))
        if size > rel_tol * max(scale, np.finfo(float).tiny):
            raise DivergenceError(
                f"divergent-after-cancellation: {what} keeps an eta^-{k} pole of size {size:.3e} "
                f"(relative {size / max(scale, 1e-300):.3e})"
            )


def integrate_orthant(f: ExpPoly, zero_tol: float = 1e-12, rel_tol: float = 1e-8) -> complex:
    """Regulated integral of ``f`` over the positive orthant.

    Parameters
    ----------
    f : ExpPoly
        The full integrand (all terms that must cancel together).
    zero_tol : float
        Exponents of modulus below this count as exactly zero.
    rel_tol : float
        Pole coefficients larger than ``rel_tol`` times the largest single
        term contribution raise :class:`DivergenceError`.

    Returns
    -------
    complex
        The ``eta -> 0`` limit.
    """
    lt = f.laurent(zero_tol)
    check_poles(lt, term_scale(f, zero_tol), rel_tol)
    return complex(lt[0])


def term_scale(f: ExpPoly, zero_tol: float = 1e-12) -> float:
    """Largest magnitude ``|c| prod n!/|zeta|^(n+1)`` over single monomials.

    Zero exponents contribute a factor one; this is the size of the
    leading Laurent coefficient of each monomial taken alone.
    """
    if f.coeffs.size == 0:
        return 0.0
    absz = np.abs(f.exponents)
    zero = absz <= zero_tol
    fact = np.vectorize(math.factorial)(f.powers).astype(float)
    mag = np.where(zero, fact, fact / np.where(zero, 1.0, absz) ** (f.powers + 1))
    return float(np.max(np.abs(f.coeffs) * np.prod(mag, axis=1)))
