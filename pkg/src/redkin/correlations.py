"""Bath pair correlation functions as sums of decaying complex exponentials.

A correlation ``C_ab(t) = <B_a(t) B_b>`` is stored for ``t >= 0`` as
``sum_k a_k exp(-z_k t)`` with ``Re z_k > 0``. Negative times follow from
``C_ab(-t) = conj(C_ba(t))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .kernels import ordered_pair_sum
from .operators import ValidationError

__all__ = [
    "ExpSum",
    "CorrelationMatrix",
    "correlation_eval",
    "half_fourier",
    "wick_moment",
    "lorentzian_correlation",
    "random_correlation_matrix",
    "pairings",
]


@dataclass(frozen=True)
class ExpSum:
    """``C(t) = sum_k amplitudes[k] * exp(-rates[k] * t)`` for ``t >= 0``.

    Parameters
    ----------
    amplitudes : array_like of complex
    rates : array_like of complex
        Every rate needs a strictly positive real part.
    """

    amplitudes: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex))
        z = np.atleast_1d(np.asarray(self.rates, dtype=complex))
        if a.shape != z.shape or a.ndim != 1:
            raise ValidationError("amplitudes and rates must be 1-D arrays of equal length")
        if np.any(z.real <= 0):
            bad = z[z.real <= 0]
            raise ValidationError(
                f"decay requirement violated: Re z must be > 0 (got {bad.tolist()}); "
                "correlations have to decay faster than any power of t"
            )
        a.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "rates", z)

    def __len__(self) -> int:
        return self.amplitudes.size

    def __call__(self, t):
        """Evaluate at ``t >= 0`` (scalar or array)."""
        t = np.asarray(t, dtype=float)
        return np.sum(self.amplitudes * np.exp(-np.multiply.outer(t, self.rates)), axis=-1)

    def conj(self) -> "ExpSum":
        return ExpSum(self.amplitudes.conj(), self.rates.conj())

    def scaled(self, factor: complex) -> "ExpSum":
        return ExpSum(self.amplitudes * factor, self.rates)

    def __add__(self, other: "ExpSum") -> "ExpSum":
        return ExpSum(
            np.concatenate([self.amplitudes, other.amplitudes]),
            np.concatenate([self.rates, other.rates]),
        )

    def half_fourier(self, omega):
        """``int_0^inf exp(i omega s) C(s) ds = sum_k a_k / (z_k - i omega)``."""
        omega = np.asarray(omega, dtype=float)
        return np.sum(self.amplitudes / (self.rates - 1j * np.multiply.outer(omega, np.ones_like(self.rates))), axis=-1)

    def to_json(self) -> list:
        return [
            {"a": [float(a.real), float(a.imag)], "z": [float(z.real), float(z.imag)]}
            for a, z in zip(self.amplitudes, self.rates)
        ]

    @classmethod
    def from_json(cls, items: Sequence[Mapping]) -> "ExpSum":
        a = [complex(*it["a"]) for it in items]
        z = [complex(*it["z"]) for it in items]
        return cls(np.array(a, dtype=complex), np.array(z, dtype=complex))


class CorrelationMatrix:
    """Pair correlations ``C_ab`` for coupling labels ``a, b``.

    Parameters
    ----------
    labels : sequence of str
        Coupling indices, in the order used by the system couplings.
    entries : mapping
        ``(a, b) -> ExpSum``. Missing pairs are treated as absent (an error
        when evaluated), not as zero.
    beta : float, optional
        Inverse temperature, used only for diagnostics.
    """

    def __init__(self, labels: Sequence[str], entries: Mapping, beta: float | None = None):
        self.labels = tuple(str(lab) for lab in labels)
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("duplicate coupling labels")
        self.entries: dict[tuple[str, str], ExpSum] = {}
        for key, val in entries.items():
            a, b = (str(k) for k in key)
            if a not in self.labels or b not in self.labels:
                raise ValidationError(f"entry ({a},{b}) uses an unknown label")
            if not isinstance(val, ExpSum):
                val = ExpSum(*val)
            self.entries[(a, b)] = val
        self.beta = None if beta is None else float(beta)

    def __repr__(self):
        return f"CorrelationMatrix(labels={self.labels}, entries={len(self.entries)})"

    def entry(self, a, b) -> ExpSum:
        try:
            return self.entries[(str(a), str(b))]
        except KeyError:
            raise KeyError(f"missing correlation entry ({a},{b})") from None

    def has(self, a, b) -> bool:
        return (str(a), str(b)) in self.entries

    def eval(self, a, b, t):
        """``C_ab(t)`` for real ``t`` of either sign (scalar or array)."""
        t = np.asarray(t, dtype=float)
        pos = t >= 0
        out = np.zeros(t.shape, dtype=complex)
        if np.any(pos):
            out[pos] = self.entry(a, b)(t[pos])
        if np.any(~pos):
            out[~pos] = np.conj(self.entry(b, a)(-t[~pos]))
        return out if out.ndim else complex(out)

    def half_fourier(self, a, b, omega):
        return self.entry(a, b).half_fourier(omega)

    def static_matrix(self) -> np.ndarray:
        """``[C_ab(0)]`` with zeros for absent pairs."""
        n = len(self.labels)
        M = np.zeros((n, n), dtype=complex)
        for (a, b), es in self.entries.items():
            M[self.labels.index(a), self.labels.index(b)] = np.sum(es.amplitudes)
        return M

    def diagnostics(self, tol: float = 1e-10) -> list[str]:
        """Structural problems, empty when the matrix is consistent."""
        issues = []
        M = self.static_matrix()
        dev = float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0
        if dev > tol:
            issues.append(f"correlation symmetry violation: static matrix not Hermitian (dev {dev:.3e})")
        for a, b in self.entries:
            if (b, a) not in self.entries:
                issues.append(f"correlation entry ({b},{a}) missing while ({a},{b}) is present")
        return issues

    def fingerprint_payload(self) -> dict:
        return self.to_json()

    def to_json(self) -> dict:
        out = {
            "labels": list(self.labels),
            "entries": {f"{a},{b}": es.to_json() for (a, b), es in sorted(self.entries.items())},
        }
        if self.beta is not None:
            out["beta"] = self.beta
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "CorrelationMatrix":
        labels = data["labels"]
        entries = {}
        for key, items in data["entries"].items():
            a, b = key.split(",")
            entries[(a.strip(), b.strip())] = ExpSum.from_json(items)
        return cls(labels, entries, data.get("beta"))

    @classmethod
    def single(cls, es: ExpSum, label: str = "0", beta=None) -> "CorrelationMatrix":
        return cls([label], {(label, label): es}, beta)


def correlation_eval(cm: CorrelationMatrix, a, b, t: float) -> complex:
    """Pair correlation ``C_ab(t)``; negative times use ``conj(C_ba(-t))``."""
    return cm.eval(a, b, t)


def half_fourier(cm: CorrelationMatrix, a, b, omega: float) -> complex:
    """One-sided transform ``int_0^inf exp(i omega s) C_ab(s) ds`` in closed form."""
    return complex(cm.half_fourier(a, b, omega))


def wick_moment(cm: CorrelationMatrix, ops: Sequence[tuple]) -> complex:
    """Gaussian moment ``<B_{a1}(t1) ... B_{an}(tn)>``.

    Parameters
    ----------
    cm : CorrelationMatrix
    ops : sequence of (label, time)
        Operators in the written (left to right) order.

    Returns
    -------
    complex
        Sum over all pairings ``j < k`` of ``prod C_{a_j a_k}(t_j - t_k)``.
        Exactly zero for odd ``n``.
    """
    n = len(ops)
    if n % 2 == 1:
        return 0j
    if n == 0:
        return 1.0 + 0j
    P = np.zeros((n, n), dtype=complex)
    for j in range(n):
        for k in range(j + 1, n):
            (aj, tj), (ak, tk) = ops[j], ops[k]
            P[j, k] = cm.eval(aj, ak, float(tj) - float(tk))
    return ordered_pair_sum(P)


def lorentzian_correlation(gamma0: float, kappa: float, omega_c: float) -> ExpSum:
    """Single-pole correlation ``(gamma0 kappa / 2) exp(-(kappa + i omega_c) t)``.

    Its spectral density is a Lorentzian of width ``kappa`` centred at
    ``omega_c`` with height ``gamma0 / (2 pi)`` at resonance.
    """
    if gamma0 <= 0 or kappa <= 0:
        raise ValidationError("gamma0 and kappa must be positive")
    return ExpSum(np.array([0.5 * gamma0 * kappa]), np.array([kappa + 1j * omega_c]))


def random_correlation_matrix(labels: Sequence[str], n_poles: int, rng: np.random.Generator) -> CorrelationMatrix:
    """Random physically structured correlation matrix.

    Built as ``C_ab(t) = sum_k v_ka conj(v_kb) exp(-z_k t)``, which has a
    Hermitian positive semidefinite static matrix.
    """
    labels = [str(lab) for lab in labels]
    n = len(labels)
    z = rng.uniform(0.3, 2.0, n_poles) + 1j * rng.uniform(-2.0, 2.0, n_poles)
    v = (rng.normal(size=(n_poles, n)) + 1j * rng.normal(size=(n_poles, n))) / np.sqrt(2 * n_poles)
    entries = {}
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            entries[(a, b)] = ExpSum(v[:, i] * v[:, j].conj(), z)
    return CorrelationMatrix(labels, entries)


def pairings(n: int) -> Iterable[list[tuple[int, int]]]:
    """Enumerate all perfect matchings of ``range(n)``.

    Each matching is a list of pairs ``(j, k)`` with ``j < k``, ordered by
    their first element. Odd ``n`` yields nothing.
    """
    idx = list(range(n))

    def rec(rest):
        if not rest:
            yield []
            return
        first = rest[0]
        for k in range(1, len(rest)):
            pair = (first, rest[k])
            remaining = rest[1:k] + rest[k + 1:]
            for tail in rec(remaining):
                yield [pair] + tail

    if n % 2:
        return iter(())
    return rec(idx)

