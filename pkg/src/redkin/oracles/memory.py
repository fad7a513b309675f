"""Single-excitation amplitude of a damped qubit: exact memory-kernel dynamics.

With one excitation shared between a qubit and a bosonic bath at zero
temperature, the excited amplitude obeys

    dc/dt = -lam^2 int_0^t K(t - s) c(s) ds,     K(t) = C(t) exp(i omega0 t),

in the frame rotating with the qubit.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from ..operators import ValidationError
from .dephasing import _single

__all__ = [
    "damped_qubit_memory",
    "damped_qubit_closed_form",
    "memory_poles",
    "damped_qubit_exact_rates",
]


def damped_qubit_memory(cm, lam: float, times, omega0: float = 0.0, rtol: float = 1e-12, atol: float = 1e-14) -> np.ndarray:
    """Amplitude ``c(t)`` with ``c(0) = 1``.

    Each exponential in the kernel gets an auxiliary variable
    ``y_k(t) = int_0^t a_k exp(-(z_k - i omega0)(t - s)) c(s) ds``, which turns
    the integro-differential equation into a linear ODE integrated with DOP853.

    Parameters
    ----------
    cm : CorrelationMatrix or ExpSum
        Vacuum correlation ``<B(t) B^dagger>``.
    lam : float
    times : array_like
        Ascending sample times starting at or after zero.
    omega0 : float
        Qubit splitting; the kernel is taken in the qubit's rotating frame.
    """
    es = _single(cm)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValidationError("times must be ascending and nonnegative")
    a = es.amplitudes
    z = es.rates - 1j * omega0
    K = a.size

    def rhs(_, y):
        c, aux = y[0], y[1:]
        return np.concatenate(([-lam ** 2 * aux.sum()], a * c - z * aux))

    y0 = np.zeros(K + 1, dtype=complex)
    y0[0] = 1.0
    sol = solve_ivp(rhs, (0.0, float(times[-1])), y0, method="DOP853", t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"memory-kernel integration failed: {sol.message}")
    return sol.y[0]


def damped_qubit_closed_form(gamma0: float, kappa: float, lam: float, t) -> np.ndarray:
    """``c(t) = exp(-kappa t/2) [cosh(d t/2) + (kappa/d) sinh(d t/2)]``.

    ``d = sqrt(kappa^2 - 2 gamma0 kappa lam^2)`` (complex when negative under
    the root). Valid for the resonant kernel ``(gamma0 kappa/2) exp(-kappa t)``.
    """
    t = np.asarray(t, dtype=float)
    d = np.sqrt(complex(kappa ** 2 - 2 * gamma0 * kappa * lam ** 2))
    if abs(d) < 1e-14:
        return np.exp(-kappa * t / 2) * (1 + kappa * t / 2)
    return np.exp(-kappa * t / 2) * (np.cosh(d * t / 2) + kappa / d * np.sinh(d * t / 2))


def memory_poles(cm, lam: float, omega0: float = 0.0) -> np.ndarray:
    """Roots ``p`` of ``p + lam^2 sum_k a_k / (p + z_k - i omega0) = 0``.

    The Laplace transform of ``c`` is ``1 / (p + lam^2 K~(p))``; its poles set
    the exponential decay of the amplitude.
    """
    es = _single(cm)
    z = es.rates - 1j * omega0
    prod_all = np.poly1d([1.0])
    for zk in z:
        prod_all = prod_all * np.poly1d([1.0, zk])
    poly = np.poly1d([1.0, 0.0]) * prod_all
    for k, ak in enumerate(es.amplitudes):
        rest = np.poly1d([1.0])
        for j, zj in enumerate(z):
            if j != k:
                rest = rest * np.poly1d([1.0, zj])
        poly = poly + lam ** 2 * ak * rest
    return np.roots(poly.coeffs)


def damped_qubit_exact_rates(gamma0: float, kappa: float, lam: float) -> dict:
    """Asymptotic decay rates of the exact resonant single-pole model.

    Returns
    -------
    dict
        ``amplitude = (kappa - d)/2`` and ``population = kappa - d`` with
        ``d = sqrt(kappa^2 - 2 gamma0 kappa lam^2)``, computed without
        cancellation as ``kappa - d = 2 gamma0 kappa lam^2 / (kappa + d)``.
    """
    d = np.sqrt(kappa ** 2 - 2 * gamma0 * kappa * lam ** 2)
    pop = 2 * gamma0 * kappa * lam ** 2 / (kappa + d)
    return {"amplitude": pop / 2, "population": pop}
