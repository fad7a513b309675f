"""Propagation of the autonomous master equation, steady states and slippage."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .correlations import CorrelationMatrix
from .generators import GeneratorBundle, redfield_generator
from .model import OpenSystem
from .operators import ValidationError, liouvillian, unvec, vec

__all__ = [
    "Trajectory",
    "PositivityReport",
    "propagate",
    "propagator",
    "steady_state",
    "slippage_operator",
    "slipped_initial_state",
    "positivity_monitor",
    "state_diagnostics",
]


def state_diagnostics(rho: np.ndarray) -> tuple[float, float, float]:
    """(trace deviation, Hermiticity deviation, minimum eigenvalue)."""
    tr_dev = float(abs(np.trace(rho) - 1))
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    lo = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    return tr_dev, herm, lo


@dataclass
class Trajectory:
    """Sampled reduced states with per-sample diagnostics."""

    times: np.ndarray
    states: np.ndarray
    trace_dev: np.ndarray = field(default=None)
    herm_dev: np.ndarray = field(default=None)
    min_eig: np.ndarray = field(default=None)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=complex)
        if self.trace_dev is None:
            diag = np.array([state_diagnostics(r) for r in self.states]).reshape(-1, 3)
            self.trace_dev, self.herm_dev, self.min_eig = diag[:, 0], diag[:, 1], diag[:, 2]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def element(self, i: int, j: int) -> np.ndarray:
        return self.states[:, i, j]

    def to_csv(self, header: dict | None = None) -> str:
        """CSV text; an optional JSON header is written as a leading ``#`` line."""
        import json

        buf = io.StringIO()
        if header is not None:
            buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
        d = self.dim
        cols = ["t"]
        for j in range(d):
            for i in range(d):
                cols += [f"re_{i}{j}", f"im_{i}{j}"]
        cols += ["trace_dev", "herm_dev", "min_eig"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for k, t in enumerate(self.times):
            row = [repr(float(t))]
            for j in range(d):
                for i in range(d):
                    z = self.states[k, i, j]
                    row += [repr(float(z.real)), repr(float(z.imag))]
            row += [repr(float(self.trace_dev[k])), repr(float(self.herm_dev[k])), repr(float(self.min_eig[k]))]
            w.writerow(row)
        return buf.getvalue()


def propagator(G: np.ndarray, t: float) -> np.ndarray:
    """``exp(G t)`` for a constant generator."""
    return expm(G * t)


def _total(bundle_or_matrix) -> np.ndarray:
    if isinstance(bundle_or_matrix, GeneratorBundle):
        return bundle_or_matrix.total
    return np.asarray(bundle_or_matrix, dtype=complex)


def propagate(bundle, rho0, times, t_start: float = 0.0, check: bool = True) -> Trajectory:
    """Exact exponentiation of the total generator on the vectorized state.

    Parameters
    ----------
    bundle : GeneratorBundle or ndarray
    rho0 : array_like
        Initial state at ``t_start``.
    times : array_like
        Ascending sample times (absolute; the propagation runs over
        ``t - t_start``).
    check : bool
        Validate ``rho0`` as a density matrix (Hermitian with unit trace).
    """
    G = _total(bundle)
    rho0 = np.asarray(rho0, dtype=complex)
    times = np.asarray(times, dtype=float)
    if check:
        from .operators import check_hermitian

        check_hermitian(rho0, "rho0", 1e-10)
        if abs(np.trace(rho0) - 1) > 1e-10:
            raise ValidationError("rho0 must have unit trace")
    if np.any(np.diff(times) < 0):
        raise ValidationError("time grid must be ascending")
    if not np.all(np.isfinite(G)) or not np.all(np.isfinite(rho0)):
        raise ValidationError("non-finite entries in generator or state")
    d = rho0.shape[0]
    v0 = vec(rho0)
    states = np.empty((len(times), d, d), dtype=complex)
    # uniform grids reuse one step propagator only as a consistency check; each
    # sample is exponentiated directly to avoid error accumulation
    for k, t in enumerate(times):
        states[k] = unvec(expm(G * (t - t_start)) @ v0, d)
    return Trajectory(times, states)


def steady_state(bundle, tol: float = 1e-9):
    """Normalized, Hermitized null vector of the total generator.

    Returns
    -------
    (ndarray or None, bool)
        The state (None if no null vector within ``tol``) and a flag that is
        true when the numerical null space is one-dimensional.
    """
    G = _total(bundle)
    d = int(round(np.sqrt(G.shape[0])))
    _, s, Vh = np.linalg.svd(G)
    thresh = tol * max(1.0, float(s[0]))
    null = Vh[s <= thresh].conj()
    if null.shape[0] == 0:
        return None, False
    tr = np.eye(d).reshape(-1, order="F")
    weights = null @ tr
    v = null[int(np.argmax(np.abs(weights)))]
    rho = unvec(v, d)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    return rho, bool(null.shape[0] == 1)


def _expint(x: np.ndarray, t0: float) -> np.ndarray:
    """``(exp(x t0) - 1)/x`` with the ``x -> 0`` limit ``t0``."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x * t0) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, t0 * (1 + x * t0 / 2), np.expm1(x * t0) / safe)


def slippage_operator(system: OpenSystem, cm: CorrelationMatrix, t0: float) -> np.ndarray:
    """Second-order slip ``S`` in the interaction picture at ``t0``.

    ``Tr_R`` of the time-ordered second-order term of the propagator acting on
    ``rho (x) rho_R`` equals ``lambda^2 S rho``. In terms of Bohr components,

    ``S X = -sum J_ba(w', w) [T_b(w'), T_a(w) X] - conj-branch [T_b(w'), X T_a(w)]``

    with ``J = int_0^t0 dt1 int_0^t1 dt2 exp(-i w' t1 - i w t2) C_ba(t1 - t2)``.
    """
    from .operators import left_superop, right_superop, sandwich_superop

    system.check_bath(cm)
    d = system.dim
    S = np.zeros((d * d, d * d), dtype=complex)
    if t0 == 0:
        return S
    for a in system.labels:
        for b in system.labels:
            if not np.any(system.couplings[a]) or not np.any(system.couplings[b]):
                continue
            es = cm.entry(b, a)
            for w, Ta in system.bohr[a]:
                for wp, Tb in system.bohr[b]:
                    q = -1j * (w + wp)
                    p = 1j * w - es.rates
                    J = np.sum(es.amplitudes / p * (_expint(q + p, t0) - _expint(q, t0)))
                    pc = 1j * w - es.rates.conj()
                    Jc = np.sum(es.amplitudes.conj() / pc * (_expint(q + pc, t0) - _expint(q, t0)))
                    comm_left = left_superop(Tb @ Ta) - sandwich_superop(Ta, Tb)
                    comm_right = sandwich_superop(Tb, Ta) - right_superop(Ta @ Tb)
                    S -= J * comm_left - Jc * comm_right
    return S


def slipped_initial_state(rho, system: OpenSystem, cm: CorrelationMatrix, lam: float, t0: float,
                          order: int = 2, resum: bool = True) -> np.ndarray:
    """Reduced state at ``t0`` from the truncated time-ordered series.

    Parameters
    ----------
    rho : array_like
        Product-state system part at time zero.
    lam : float
    t0 : float
        Bridge time (several bath correlation times).
    order : {0, 1, 2}
        Order 1 adds nothing (odd bath moment).
    resum : bool
        If true, return ``exp((G0 + lam^2 G2) t0) (1 + lam^2 D) rho`` with
        ``D = S - int_0^t0 U_S(-s) G2 U_S(s) ds``. This equals the plain
        series ``U_S(t0) (1 + lam^2 S) rho`` to second order but carries the
        growth linear in ``t0`` through the semigroup, which keeps it
        accurate when ``lam^2 t0`` is not small.
    """
    if t0 < 0:
        raise ValidationError("t0 must be nonnegative")
    if order > 2 or order < 0:
        raise NotImplementedError("slippage is implemented up to second order")
    rho = np.asarray(rho, dtype=complex)
    d = system.dim
    G0 = -1j * liouvillian(system.H)
    U = expm(G0 * t0)
    if order < 2 or lam == 0 or t0 == 0:
        return unvec(U @ vec(rho), d)
    S = slippage_operator(system, cm, t0)
    if not resum:
        out = unvec(U @ (vec(rho) + lam ** 2 * (S @ vec(rho))), d)
        return 0.5 * (out + out.conj().T)
    G2 = redfield_generator(system, cm)
    # integral of the interaction-picture G2 in the eigenbasis of G0
    E, V = np.linalg.eigh(system.H)
    W = np.kron(V.conj(), V)
    nu = -1j * (E[:, None] - E[None, :]).reshape(-1, order="F")
    G2e = np.linalg.solve(W, G2 @ W)
    I2 = W @ (G2e * _expint(nu[None, :] - nu[:, None], t0)) @ np.linalg.inv(W)
    D = S - I2
    v = expm((G0 + lam ** 2 * G2) * t0) @ (vec(rho) + lam ** 2 * (D @ vec(rho)))
    out = unvec(v, d)
    return 0.5 * (out + out.conj().T)


@dataclass
class PositivityReport:
    """Per-sample minimum eigenvalues and flagged violations."""

    min_eig: np.ndarray
    flagged: np.ndarray
    tol: float
    initial_window_only: bool
    worst: float

    @property
    def violated(self) -> bool:
        return bool(self.flagged.size)

    def summary(self) -> str:
        if not self.violated:
            return f"no eigenvalue below {-self.tol:g} (worst {self.worst:.3e})"
        where = "only in the initial window" if self.initial_window_only else "beyond the initial window"
        return f"{self.flagged.size} samples below {-self.tol:g}, worst {self.worst:.3e}, {where}"


def positivity_monitor(traj: Trajectory, tol: float = 1e-8, window_fraction: float = 0.2) -> PositivityReport:
    """Flag samples with minimum eigenvalue below ``-tol``.

    ``initial_window_only`` is true when every flagged sample lies in the
    first ``window_fraction`` of the time span.
    """
    m = np.asarray(traj.min_eig)
    flagged = np.nonzero(m < -tol)[0]
    t = traj.times
    cut = t[0] + window_fraction * (t[-1] - t[0])
    initial = bool(flagged.size) and bool(np.all(t[flagged] <= cut))
    return PositivityReport(m, flagged, tol, initial, float(m.min()))
