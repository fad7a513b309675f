"""Exact coherence of a qubit whose coupling commutes with its Hamiltonian."""
from __future__ import annotations

import numpy as np

from ..correlations import ExpSum
from ..operators import ValidationError

__all__ = ["dephasing_exponent", "dephasing_exact", "dephasing_rate"]


def _single(cm) -> ExpSum:
    if isinstance(cm, ExpSum):
        return cm
    if len(cm.labels) != 1 or len(cm.entries) != 1:
        raise ValidationError("pure dephasing oracle needs a single-entry correlation matrix")
    return next(iter(cm.entries.values()))


def dephasing_exponent(cm, lam: float, t) -> np.ndarray:
    """``4 lam^2 int_0^t (t - u) chi(u) du`` with ``chi = Re C``.

    For ``C = sum a exp(-z u)``:
    ``int_0^t (t-u) a exp(-z u) du = a (t/z - (1 - exp(-z t))/z^2)``.
    """
    es = _single(cm)
    t = np.asarray(t, dtype=float)
    a, z = es.amplitudes, es.rates
    tt = t[..., None]
    inner = a * (tt / z + np.expm1(-z * tt) / z ** 2)
    return 4 * lam ** 2 * np.real(np.sum(inner, axis=-1))


def dephasing_exact(cm, lam: float, omega0: float, t, frame: str = "interaction") -> np.ndarray:
    """Exact coherence factor ``rho_01(t) / rho_01(0)`` for ``T = sz``.

    Parameters
    ----------
    cm : CorrelationMatrix or ExpSum
        Single pair correlation of the Gaussian bath.
    lam : float
    omega0 : float
        Qubit splitting, ``H_S = (omega0/2) sz``.
    t : float or array
    frame : {"interaction", "schroedinger"}
        The Schroedinger frame multiplies by the free phase ``exp(-i omega0 t)``.

    Notes
    -----
    The two branches of ``sz`` see displacements of opposite sign, so the
    imaginary part of ``C`` contributes equal phases to both and drops out
    of the coherence: the factor is real in the interaction frame.
    """
    f = np.exp(-dephasing_exponent(cm, lam, t))
    if frame.startswith("schr"):
        f = f * np.exp(-1j * omega0 * np.asarray(t, dtype=float))
    elif frame != "interaction":
        raise ValidationError(f"unknown frame {frame!r}")
    return f


def dephasing_rate(cm, lam: float) -> float:
    """Asymptotic decay rate ``4 lam^2 Re int_0^inf C``."""
    es = _single(cm)
    return float(4 * lam ** 2 * np.real(es.half_fourier(0.0)))
