"""Exact dynamics of the system coupled to a finite set of bosonic modes.

The bath operators are ``B_a = sum_j g_j (c_a b_j + conj(c_a) b_j^dagger)``
with one complex weight ``c_a`` per coupling label, so that at zero
temperature ``<B_a(t) B_b> = c_a conj(c_b) sum_j g_j^2 exp(-i w_j t)``.

Two exact strategies are available:

``"conditional"``
    All couplings are diagonal in the eigenbasis of ``H_S``. Each system
    basis state then drives every mode independently, and the reduced state
    is a product of single-mode overlaps computed in a Fock space truncated
    at ``n_max`` quanta (thermal initial modes allowed).
``"excitation"``
    General couplings. The joint Hilbert space is truncated to at most
    ``n_cap`` bath quanta in total and diagonalized densely. For
    excitation-conserving couplings (rotating-wave damped qubit) with
    ``n_cap = 1`` this is exact.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from ..correlations import ExpSum, lorentzian_correlation
from ..dynamics import Trajectory
from ..model import OpenSystem
from ..operators import ValidationError

__all__ = [
    "FiniteBathSpec",
    "FiniteBathResult",
    "discretize_bath",
    "finite_bath_evolve",
]


@dataclass
class FiniteBathSpec:
    """Discrete bath: mode frequencies, couplings and truncation.

    Attributes
    ----------
    omegas, couplings : ndarray
        ``w_j`` and real ``g_j``.
    n_max : int
        Per-mode Fock truncation (conditional strategy).
    beta : float or None
        Inverse temperature of the initial bath state; None is zero temperature.
    errors : dict
        Reconstruction errors of the target correlation (see :func:`discretize_bath`).
    """

    omegas: np.ndarray
    couplings: np.ndarray
    n_max: int = 8
    beta: float | None = None
    errors: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def num_modes(self) -> int:
        return self.omegas.size

    @property
    def spacing(self) -> float:
        return float(np.min(np.diff(np.sort(self.omegas)))) if self.num_modes > 1 else np.inf

    @property
    def recurrence_time(self) -> float:
        """``2 pi / dw``; continuum behaviour only holds before this time."""
        return 2 * np.pi / self.spacing

    def occupations(self) -> np.ndarray:
        if self.beta is None:
            return np.zeros(self.num_modes)
        return 1.0 / np.expm1(self.beta * self.omegas)

    def correlation(self, t) -> np.ndarray:
        """``sum_j g_j^2 [(n_j + 1) exp(-i w_j t) + n_j exp(i w_j t)]``."""
        t = np.asarray(t, dtype=float)
        n = self.occupations()
        ph = np.exp(-1j * np.multiply.outer(t, self.omegas))
        g2 = self.couplings ** 2
        return np.sum(g2 * ((n + 1) * ph + n * ph.conj()), axis=-1)

    def to_json(self) -> dict:
        return {
            "modes": [[float(w), float(g)] for w, g in zip(self.omegas, self.couplings)],
            "n_max": int(self.n_max),
            "beta": self.beta,
            "errors": {k: float(v) for k, v in self.errors.items()},
        }


def _spectral_density(es: ExpSum):
    """``J(w) = Re(sum a / (z - i w)) / pi`` so that ``C(t) = int J(w) exp(-iwt) dw``."""
    return lambda w: np.real(es.half_fourier(w)) / np.pi


def discretize_bath(target, M: int, window: tuple[float, float], t_max: float = 5.0,
                    beta: float | None = None, n_max: int = 8, n_t: int = 1001,
                    threshold: float = 0.02) -> FiniteBathSpec:
    """Sample a spectral density on a uniform midpoint grid.

    Parameters
    ----------
    target : ExpSum or (gamma0, kappa, omega_c)
        Zero-temperature correlation to reproduce, or Lorentzian parameters.
    M : int
        Number of modes (``M = 1`` places a single mode at the window centre).
    window : (float, float)
        Frequency interval ``[lo, hi]``.
    t_max : float
        Reconstruction errors are measured on ``[0, t_max]``.
    threshold : float
        Relative error above which a warning is recorded.

    Returns
    -------
    FiniteBathSpec
        ``errors`` holds ``sup_rel`` (max error over ``C(0)``), ``rms_rel``
        (root-mean-square error over ``C(0)``), ``tail_mass`` (spectral weight
        outside the window over ``C(0)``) and ``negative_mass`` (weight of
        negative spectral density that was clipped).
    """
    if M < 1:
        raise ValidationError("need at least one mode")
    es = lorentzian_correlation(*target) if not isinstance(target, ExpSum) else target
    lo, hi = map(float, window)
    if hi <= lo:
        raise ValidationError("window must have hi > lo")
    J = _spectral_density(es)
    dw = (hi - lo) / M
    omegas = lo + (np.arange(M) + 0.5) * dw
    Jw = J(omegas)
    neg = float(np.sum(np.clip(-Jw, 0, None)) * dw)
    g = np.sqrt(np.clip(Jw, 0, None) * dw)
    fb = FiniteBathSpec(omegas, g, n_max=n_max, beta=beta)
    t = np.linspace(0.0, t_max, n_t)
    exact = es(t)
    c0 = abs(exact[0]) if abs(exact[0]) > 0 else 1.0
    # the zero-temperature reconstruction is compared with the zero-temperature target
    diff = np.abs(FiniteBathSpec(omegas, g).correlation(t) - exact)
    inside = quad(J, lo, hi, limit=400, points=[float(np.real(z.imag)) for z in es.rates if lo < z.imag < hi] or None)[0]
    fb.errors = {
        "sup_rel": float(diff.max() / c0),
        "rms_rel": float(np.sqrt(np.mean(diff ** 2)) / c0),
        "tail_mass": float(abs(np.real(exact[0]) - inside) / c0),
        "negative_mass": neg / c0,
        "t_max": float(t_max),
    }
    if fb.errors["sup_rel"] > threshold:
        fb.warnings.append(
            f"reconstruction error {fb.errors['sup_rel']:.3g} exceeds {threshold:g} on [0, {t_max:g}] "
            f"(spectral mass outside the window: {fb.errors['tail_mass']:.3g})"
        )
    return fb


@dataclass
class FiniteBathResult:
    """Reduced trajectory plus optional correlators and mean-force state."""

    trajectory: Trajectory
    strategy: str
    leakage: float
    correlators: list = field(default_factory=list)
    mean_force: np.ndarray | None = None
    warnings: list = field(default_factory=list)
    _joint: object = None

    def bath_expectation(self, T, label: str, tau: float) -> np.ndarray:
        """``<T (x) B_label(tau)>`` at every sample time (excitation strategy only)."""
        if self._joint is None:
            raise NotImplementedError("joint expectations need the excitation strategy")
        return self._joint.bath_expectation(T, label, tau)

    def joint_purity_drift(self) -> float:
        if self._joint is None:
            raise NotImplementedError("joint states are kept only by the excitation strategy")
        return self._joint.purity_drift()


def _diagonal_couplings(system: OpenSystem, tol: float = 1e-12) -> bool:
    V = system.spec.vectors
    for T in system.couplings.values():
        Te = V.conj().T @ T @ V
        if np.max(np.abs(Te - np.diag(np.diag(Te)))) > tol:
            return False
    return True


def finite_bath_evolve(system: OpenSystem, fb: FiniteBathSpec, lam: float, times, rho0,
                       weights: dict | None = None, two_time=None, mean_force_beta: float | None = None,
                       n_cap: int = 1, strategy: str = "auto", dim_cap: int = 8192,
                       leak_tol: float = 1e-6) -> FiniteBathResult:
    """Exact joint evolution from ``rho0 (x) rho_bath`` and its reduced states.

    Parameters
    ----------
    system : OpenSystem
    fb : FiniteBathSpec
    lam : float
    times : array_like
        Ascending sample times.
    rho0 : array_like
        Initial system state.
    weights : dict, optional
        ``{label: c_a}``; defaults to one for every label.
    two_time : sequence of (A2, A1, pairs), optional
        For each request, ``<A2(t2) A1(t1)>`` at every ``(t1, t2)`` in pairs.
    mean_force_beta : float, optional
        Also return ``Tr_R exp(-beta H) / Z``.
    n_cap : int
        Total bath quanta kept by the excitation strategy.
    strategy : {"auto", "conditional", "excitation"}
    dim_cap : int
        Largest joint dimension allowed.
    leak_tol : float
        Truncation leakage above this is reported in ``warnings``.
    """
    times = np.asarray(times, dtype=float)
    rho0 = np.asarray(rho0, dtype=complex)
    weights = {lab: 1.0 + 0j for lab in system.labels} if weights is None else {k: complex(v) for k, v in weights.items()}
    if strategy == "auto":
        strategy = "conditional" if _diagonal_couplings(system) else "excitation"
    if strategy == "conditional":
        runner = _Conditional(system, fb, lam, weights, rho0, dim_cap)
    elif strategy == "excitation":
        runner = _Excitation(system, fb, lam, weights, rho0, n_cap, dim_cap)
    else:
        raise ValidationError(f"unknown strategy {strategy!r}")
    states = runner.reduced_states(times)
    leak = runner.leakage(times)
    res = FiniteBathResult(Trajectory(times, states), strategy, leak)
    if leak > leak_tol:
        res.warnings.append(f"truncation leakage {leak:.3e} exceeds {leak_tol:g}")
    if fb.num_modes > 1 and times[-1] >= fb.recurrence_time:
        res.warnings.append(f"samples reach the recurrence time {fb.recurrence_time:.4g}")
    for A2, A1, pairs in (two_time or []):
        res.correlators.append(runner.two_time(np.asarray(A2, complex), np.asarray(A1, complex), pairs))
    if mean_force_beta is not None:
        res.mean_force = runner.mean_force(float(mean_force_beta))
    if isinstance(runner, _Excitation):
        res._joint = runner
    return res


class _Conditional:
    """Commuting couplings: product of single-mode overlaps per branch pair."""

    def __init__(self, system, fb, lam, weights, rho0, dim_cap):
        if fb.n_max + 1 > dim_cap:
            raise ValidationError("dimension cap exceeded")
        if fb.beta is not None and np.any(fb.omegas <= 0):
            raise ValidationError("thermal modes need positive frequencies")
        V = system.spec.vectors
        self.V = V
        self.E = np.real(np.diag(V.conj().T @ system.H @ V))
        self.rho = V.conj().T @ rho0 @ V
        K = system.dim
        mu = np.zeros(K, dtype=complex)
        for lab, T in system.couplings.items():
            mu += weights.get(lab, 0.0) * np.real(np.diag(V.conj().T @ T @ V))
        self.mu = mu
        n = fb.n_max + 1
        b = np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)
        num = np.diag(np.arange(n)).astype(float)
        M = fb.num_modes
        self.eps = np.empty((M, K, n))
        self.vec = np.empty((M, K, n, n), dtype=complex)
        for j in range(M):
            for k in range(K):
                h = fb.omegas[j] * num + lam * fb.couplings[j] * (mu[k] * b + np.conj(mu[k]) * b.conj().T)
                self.eps[j, k], self.vec[j, k] = np.linalg.eigh(h)
        if fb.beta is None:
            p = np.zeros((M, n))
            p[:, 0] = 1.0
        else:
            p = np.exp(-fb.beta * np.multiply.outer(fb.omegas, np.arange(n)))
            p /= p.sum(axis=1, keepdims=True)
        self.p = p
        self.K, self.n, self.M = K, n, M
        self.fb = fb
        self.lam = lam

    def _U(self, t):
        """(M, K, n, n) mode propagators at time t."""
        ph = np.exp(-1j * self.eps * t)
        return np.einsum("jkab,jkb,jkcb->jkac", self.vec, ph, self.vec.conj())

    def reduced_states(self, times):
        out = np.empty((len(times), self.K, self.K), dtype=complex)
        for i, t in enumerate(times):
            U = self._U(t)
            # overlap Tr[U_l^dagger U_k rho_j]
            ov = np.einsum("jlba,jkba,ja->jkl", U.conj(), U, self.p)
            fac = np.prod(ov, axis=0)
            ph = np.exp(-1j * np.subtract.outer(self.E, self.E) * t)
            out[i] = self.V @ (self.rho * ph * fac) @ self.V.conj().T
        return out

    def leakage(self, times):
        worst = 0.0
        for t in times:
            U = self._U(t)
            top = np.einsum("jka,ja->jk", np.abs(U[:, :, -1, :]) ** 2, self.p)
            worst = max(worst, float(top.max()))
        return worst

    def two_time(self, A2, A1, pairs):
        A2e = self.V.conj().T @ A2 @ self.V
        A1e = self.V.conj().T @ A1 @ self.V
        vals = []
        for t1, t2 in pairs:
            tau = t2 - t1
            U1, Ut, U2 = self._U(t1), self._U(tau), self._U(t2)
            # Tr[U_l(t2)^dagger U_m(tau) U_k(t1) rho_j] for all k, l, m
            X = np.einsum("jlba,jmbc,jkca,ja->jklm", U2.conj(), Ut, U1, self.p, optimize=True)
            bath = np.prod(X, axis=0)
            E = self.E
            ph = np.exp(-1j * (E[:, None, None] * t1 + E[None, None, :] * tau - E[None, :, None] * t2))
            vals.append(np.einsum("lm,mk,kl,klm->", A2e, A1e, self.rho, bath * ph))
        return np.array(vals)

    def mean_force(self, beta):
        w = np.empty(self.K)
        for k in range(self.K):
            z = np.sum(np.exp(-beta * (self.eps[:, k, :] - self.eps[:, k, :1])), axis=1)
            shift = np.sum(self.eps[:, k, 0])
            w[k] = -beta * (self.E[k] + shift) + np.sum(np.log(z))
        w = np.exp(w - w.max())
        rho = self.V @ np.diag(w / w.sum()) @ self.V.conj().T
        return rho


class _Excitation:
    """General couplings in a joint space with at most ``n_cap`` bath quanta."""

    def __init__(self, system, fb, lam, weights, rho0, n_cap, dim_cap):
        if fb.beta is not None:
            raise ValidationError("the excitation strategy starts from the bath vacuum only")
        M = fb.num_modes
        occ = [()]
        for n in range(1, n_cap + 1):
            occ += list(itertools.combinations_with_replacement(range(M), n))
        index = {o: i for i, o in enumerate(occ)}
        D = len(occ)
        d = system.dim
        if d * D > dim_cap:
            raise ValidationError(f"dimension cap exceeded: {d * D} > {dim_cap}")
        A = np.zeros((D, D), dtype=complex)  # sum_j g_j b_j
        for i, o in enumerate(occ):
            for j in set(o):
                lst = list(o)
                lst.remove(j)
                A[index[tuple(lst)], i] += fb.couplings[j] * np.sqrt(o.count(j))
        HR = np.diag([sum(fb.omegas[j] for j in o) for o in occ]).astype(complex)
        H = np.kron(system.H, np.eye(D)) + np.kron(np.eye(d), HR)
        for lab, T in system.couplings.items():
            c = weights.get(lab, 0.0)
            H = H + lam * np.kron(T, c * A + np.conj(c) * A.conj().T)
        self.E, self.V = np.linalg.eigh(H)
        self.d, self.D, self.occ, self.n_cap = d, D, occ, n_cap
        self.A, self.fb, self.lam, self.weights, self.system = A, fb, lam, weights, system
        p, phi = np.linalg.eigh(0.5 * (rho0 + rho0.conj().T))
        keep = p > 1e-15
        self.p = p[keep]
        psi0 = np.zeros((keep.sum(), d * D), dtype=complex)
        for i, v in enumerate(phi[:, keep].T):
            psi0[i, ::D] = v  # bath vacuum is index 0 of each system block
        self.coef0 = psi0 @ self.V.conj()  # components in the eigenbasis
        self._cache_t = None

    def states(self, t):
        """Pure joint states (n_pure, d*D) at time t."""
        return (self.coef0 * np.exp(-1j * self.E * t)) @ self.V.T

    def _all_states(self, times):
        if self._cache_t is not None and np.array_equal(self._cache_t[0], times):
            return self._cache_t[1]
        S = np.stack([self.states(t) for t in times])
        self._cache_t = (np.array(times), S)
        return S

    def reduced_states(self, times):
        S = self._all_states(times).reshape(len(times), -1, self.d, self.D)
        return np.einsum("p,tpaj,tpbj->tab", self.p, S, S.conj())

    def leakage(self, times):
        """Bound on population that would leave the truncated space.

        ``(int_0^t ||P_out H psi|| ds)^2`` with the coupling amplitude out of
        the top manifold, integrated by the trapezoidal rule on ``times``.
        """
        W = sum(np.conj(self.weights.get(lab, 0.0)) * T for lab, T in self.system.couplings.items())
        S = self._all_states(times).reshape(len(times), -1, self.d, self.D)
        g = self.fb.couplings
        top = [i for i, o in enumerate(self.occ) if len(o) == self.n_cap]
        rates = np.zeros(len(times))
        if self.n_cap == 1:
            phi = S[:, :, :, 1:]  # (t, pure, d, M)
            u = np.einsum("ab,tpbj->tpaj", W, phi)
            G = np.sum(g ** 2)
            U = np.sum(np.abs(u) ** 2, axis=(2, 3))
            cross = np.sum(np.abs(np.einsum("j,tpaj->tpa", g, u)) ** 2, axis=2)
            rates = self.lam * np.sqrt(np.einsum("p,tp->t", self.p, G * U + cross))
        else:
            for ti in range(len(times)):
                acc = 0.0
                for pi, pw in enumerate(self.p):
                    out: dict = {}
                    for i in top:
                        o = self.occ[i]
                        v = W @ S[ti, pi, :, i]
                        for j in range(len(g)):
                            key = tuple(sorted(o + (j,)))
                            amp = g[j] * np.sqrt(o.count(j) + 1)
                            out[key] = out.get(key, 0) + amp * v
                    acc += pw * sum(float(np.vdot(v, v).real) for v in out.values())
                rates[ti] = self.lam * np.sqrt(acc)
        if len(times) < 2:
            return 0.0
        integral = np.concatenate(([0.0], np.cumsum(0.5 * (rates[1:] + rates[:-1]) * np.diff(times))))
        return float(np.max(integral) ** 2)

    def two_time(self, A2, A1, pairs):
        I = np.eye(self.D)
        B1, B2 = np.kron(A1, I), np.kron(A2, I)
        vals = []
        for t1, t2 in pairs:
            s1 = self.states(t1)
            s2 = self.states(t2)
            x = (B1 @ s1.T)  # (dim, n_pure)
            x = self.V @ (np.exp(-1j * self.E * (t2 - t1))[:, None] * (self.V.conj().T @ x))
            vals.append(np.sum(self.p * np.einsum("pi,ip->p", s2.conj(), B2 @ x)))
        return np.array(vals)

    def bath_operator(self, label, tau):
        c = self.weights.get(label, 0.0)
        # free evolution of sum_j g_j b_j: phase by the energy gap of connected states
        HRd = np.array([sum(self.fb.omegas[j] for j in o) for o in self.occ])
        At = self.A * np.exp(1j * np.subtract.outer(HRd, HRd) * tau)
        return c * At + np.conj(c) * At.conj().T

    def bath_expectation(self, T, label, tau):
        Bt = self.bath_operator(label, tau)
        O = np.kron(np.asarray(T, complex), Bt)
        S = self._cache_t[1]
        return np.einsum("p,tpi,ij,tpj->t", self.p, S.conj(), O, S)

    def purity_drift(self):
        S = self._cache_t[1]
        norms = np.einsum("tpi,tpi->tp", S.conj(), S).real
        return float(np.max(np.abs(norms - 1)))

    def mean_force(self, beta):
        w = np.exp(-beta * (self.E - self.E.min()))
        rho = (self.V * w) @ self.V.conj().T
        red = np.einsum("ajbj->ab", rho.reshape(self.d, self.D, self.d, self.D))
        return red / np.trace(red)
