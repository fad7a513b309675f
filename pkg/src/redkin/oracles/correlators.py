"""Two-time correlators: semigroup (regression) predictions and kinetic-state bath correlations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from ..correlations import CorrelationMatrix, ExpSum
from ..generators import GeneratorBundle
from ..model import OpenSystem
from ..operators import ValidationError, unvec, vec

__all__ = ["QRTReport", "qrt_predict", "qrt_compare", "shifted_half_fourier", "kinetic_correlator"]


@dataclass
class QRTReport:
    """Deviation of the semigroup prediction from an exact two-time function."""

    pairs: np.ndarray
    predicted: np.ndarray
    exact: np.ndarray
    abs_dev: np.ndarray
    rel_dev: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(self.abs_dev.max()) if self.abs_dev.size else 0.0

    @property
    def max_rel(self) -> float:
        return float(self.rel_dev.max()) if self.rel_dev.size else 0.0

    def to_json(self) -> dict:
        return {"max_abs": self.max_abs, "max_rel": self.max_rel, "n_pairs": int(len(self.pairs))}


def qrt_predict(bundle, A2, A1, pairs, rho0) -> np.ndarray:
    """``Tr[A2 Phi(t2 - t1) (A1 Phi(t1) rho0)]`` with ``Phi(t) = exp(G t)``.

    Parameters
    ----------
    bundle : GeneratorBundle or ndarray
        Total generator.
    A2, A1 : array_like
        System operators (later and earlier time).
    pairs : sequence of (t1, t2)
        Requires ``t2 >= t1 >= 0``.
    rho0 : array_like
        Reduced state at time zero.
    """
    G = bundle.total if isinstance(bundle, GeneratorBundle) else np.asarray(bundle, dtype=complex)
    A1 = np.asarray(A1, dtype=complex)
    A2 = np.asarray(A2, dtype=complex)
    d = A1.shape[0]
    v0 = vec(np.asarray(rho0, dtype=complex))
    out = []
    for t1, t2 in pairs:
        if t2 < t1 or t1 < 0:
            raise ValidationError("time pairs need t2 >= t1 >= 0")
        r1 = unvec(expm(G * t1) @ v0, d)
        x = unvec(expm(G * (t2 - t1)) @ vec(A1 @ r1), d)
        out.append(np.trace(A2 @ x))
    return np.array(out)


def qrt_compare(bundle, A2, A1, pairs, exact, rho0) -> QRTReport:
    """Compare the regression prediction with exact correlators.

    ``rel_dev`` divides by ``max |exact|`` over all pairs so that zeros of the
    exact function do not blow it up.
    """
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    exact = np.asarray(exact, dtype=complex)
    pred = qrt_predict(bundle, A2, A1, pairs, rho0)
    dev = np.abs(pred - exact)
    scale = float(np.max(np.abs(exact))) if exact.size else 1.0
    return QRTReport(pairs, pred, exact, dev, dev / max(scale, np.finfo(float).tiny))


def shifted_half_fourier(cm: CorrelationMatrix, b, a, tau: float, omega: float) -> complex:
    """``int_0^inf exp(i omega s) C_ba(tau + s) ds`` for real ``tau``.

    For negative ``tau`` the part of the path with negative argument uses
    ``C_ba(-u) = conj(C_ab(u))``.
    """
    es = cm.entry(b, a)
    if tau >= 0:
        return complex(np.sum(es.amplitudes * np.exp(-es.rates * tau) / (es.rates - 1j * omega)))
    T = -tau
    tail = np.exp(1j * omega * T) * np.sum(es.amplitudes / (es.rates - 1j * omega))
    back: ExpSum = cm.entry(a, b)
    ac, zc = back.amplitudes.conj(), back.rates.conj()
    head = np.sum(ac * (np.exp(1j * omega * T) - np.exp(-zc * T)) / (1j * omega + zc))
    return complex(tail + head)


def kinetic_correlator(rho, T, beta, tau: float, system: OpenSystem, cm: CorrelationMatrix,
                       lam: float, order: int = 1) -> complex:
    """``<T (x) B_beta(tau)>`` in the first-order kinetic state built from ``rho``.

    With ``T_a(-s) = sum_w exp(i w s) T_a(w)`` the first-order value is

    ``-i lam sum_a sum_w [Tr(T T_a(w) rho) X_ba(tau, w) - Tr(T rho T_a(w)) conj(X_ba(tau, -w))]``

    where ``X_ba(tau, w) = int_0^inf exp(i w s) C_ba(tau + s) ds``.

    Parameters
    ----------
    rho : array_like
        Reduced state (Schroedinger picture).
    T : array_like
        System observable.
    beta : str
        Bath label.
    tau : float
        Bath-operator time shift.
    order : {0, 1}
        Order 0 is the bath mean, zero for a Gaussian bath.
    """
    if order not in (0, 1):
        raise ValidationError("kinetic correlators are implemented for order 0 and 1")
    if order == 0 or lam == 0:
        return 0j
    rho = np.asarray(rho, dtype=complex)
    T = np.asarray(T, dtype=complex)
    total = 0j
    for a in system.labels:
        if not np.any(system.couplings[a]):
            continue
        if not cm.has(beta, a) or not cm.has(a, beta):
            raise KeyError(f"missing correlation entry for ({beta},{a})")
        for w, Ta in system.bohr[a]:
            x1 = shifted_half_fourier(cm, beta, a, tau, w)
            x2 = np.conj(shifted_half_fourier(cm, beta, a, tau, -w))
            total += np.trace(T @ Ta @ rho) * x1 - np.trace(T @ rho @ Ta) * x2
    return complex(-1j * lam * total)
