"""Closed-form second- and fourth-order generators, secular reduction and bundling.

All generators are Schroedinger-picture superoperators in the column-stacking
convention of :mod:`redkin.operators` and carry no power of the coupling
constant; :func:`total_generator` applies the weights ``lambda**r``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .correlations import CorrelationMatrix
from .expoly import check_poles
from .kernels import orthant_laurent
from .model import OpenSystem
from .operators import (
    ValidationError,
    commutator_superop,
    left_superop,
    liouvillian,
    right_superop,
    sandwich_superop,
)

__all__ = [
    "GeneratorBundle",
    "GKLSData",
    "redfield_generator",
    "redfield_fast",
    "secular_gkls",
    "gkls_generator",
    "fourth_order_fast",
    "total_generator",
    "trace_annihilation_error",
    "hermiticity_error",
]


@dataclass
class GeneratorBundle:
    """Truncated total generator ``-i L_S + sum_r lambda^r G_r``.

    Attributes
    ----------
    lam : float
    hamiltonian : ndarray
    parts : dict
        ``{order: superoperator}`` without the ``lambda**r`` weight.
    total : ndarray
    """

    lam: float
    hamiltonian: np.ndarray
    parts: dict = field(default_factory=dict)
    total: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def orders(self) -> list:
        return sorted(self.parts)

    def spectral_abscissa(self) -> float:
        """Largest real part of the total generator's eigenvalues."""
        return float(np.max(np.linalg.eigvals(self.total).real))

    def with_lambda(self, lam: float) -> "GeneratorBundle":
        return total_generator(self.parts, lam, self.hamiltonian)


def total_generator(parts: dict, lam: float, hamiltonian) -> GeneratorBundle:
    """Assemble ``-i L_S + sum_r lam**r G_r``.

    Parameters
    ----------
    parts : dict or sequence of (order, matrix)
        Orders must be distinct and positive.
    lam : float
    hamiltonian : array_like
    """
    items = list(parts.items()) if isinstance(parts, dict) else list(parts)
    orders = [r for r, _ in items]
    if len(set(orders)) != len(orders):
        raise ValidationError(f"duplicate orders in generator parts: {orders}")
    H = np.asarray(hamiltonian, dtype=complex)
    total = -1j * liouvillian(H)
    for r, G in items:
        if r < 1:
            raise ValidationError("parts must have order >= 1; order 0 is built in")
        total = total + lam ** r * np.asarray(G)
    return GeneratorBundle(float(lam), H, {r: np.asarray(G) for r, G in items}, total)


def trace_annihilation_error(G: np.ndarray) -> float:
    """Max-abs of ``Tr(G X)`` over the matrix-unit basis."""
    d = int(round(np.sqrt(G.shape[0])))
    tr = np.eye(d).reshape(-1, order="F")
    return float(np.max(np.abs(tr @ G)))


def hermiticity_error(G: np.ndarray, rng: np.random.Generator | None = None, samples: int = 5) -> float:
    """Max-abs of ``G(X^dagger) - (G X)^dagger`` on random operators."""
    rng = np.random.default_rng(0) if rng is None else rng
    d = int(round(np.sqrt(G.shape[0])))
    worst = 0.0
    for _ in range(samples):
        X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        a = (G @ X.conj().T.reshape(-1, order="F")).reshape(d, d, order="F")
        b = (G @ X.reshape(-1, order="F")).reshape(d, d, order="F").conj().T
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst


def redfield_generator(system: OpenSystem, cm: CorrelationMatrix) -> np.ndarray:
    """Second-order generator from half-line transforms of the correlations.

    ``G_2 X = -sum_{a,b,w} ( Gamma_ba(w) [T_b, T_a(w) X] - conj(Gamma_ba(-w)) [T_b, X T_a(w)] )``
    with ``Gamma_ba(w) = int_0^inf exp(iws) C_ba(s) ds``.
    """
    system.check_bath(cm)
    d = system.dim
    G = np.zeros((d * d, d * d), dtype=complex)
    for a in system.labels:
        for b in system.labels:
            Tb = system.couplings[b]
            if not np.any(Tb) or not np.any(system.couplings[a]):
                continue
            es = cm.entry(b, a)
            for w, Ta in system.bohr[a]:
                g_plus = complex(es.half_fourier(w))
                g_minus = complex(es.half_fourier(-w)).conjugate()
                first = left_superop(Tb @ Ta) - sandwich_superop(Ta, Tb)
                second = sandwich_superop(Tb, Ta) - right_superop(Ta @ Tb)
                G -= g_plus * first - g_minus * second
    return G


def redfield_fast(system: OpenSystem, cm: CorrelationMatrix, lam: float) -> GeneratorBundle:
    """Bundle with orders 0 and 2 built from :func:`redfield_generator`."""
    return total_generator({2: redfield_generator(system, cm)}, lam, system.H)


@dataclass
class GKLSData:
    """Secular second-order generator in GKLS form.

    Attributes
    ----------
    frequencies : ndarray
        Bohr frequencies carrying a channel.
    rates : dict
        ``{w: (n_labels, n_labels) Hermitian rate matrix}`` indexed ``[b, a]``.
    jumps : dict
        ``{w: list of T_a(w)}`` in label order.
    lamb_shift : ndarray
        Hermitian operator ``sum S_ba(w) T_b(w)^dagger T_a(w)``.
    min_rate_eigenvalue : float
    """

    frequencies: np.ndarray
    rates: dict
    jumps: dict
    lamb_shift: np.ndarray
    labels: tuple
    min_rate_eigenvalue: float = 0.0

    def to_json(self) -> dict:
        def mat(M):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(M)]

        return {
            "labels": list(self.labels),
            "channels": [{"omega": float(w), "rates": mat(self.rates[w])} for w in self.frequencies],
            "lamb_shift": {"dim": int(self.lamb_shift.shape[0]), "data": mat(self.lamb_shift)},
            "min_rate_eigenvalue": self.min_rate_eigenvalue,
        }

    def detailed_balance_ratio(self, w: float) -> float:
        """``tr gamma(-w) / tr gamma(w)``, to be compared with ``exp(-beta w)``."""
        up = min(self.rates, key=lambda x: abs(x + w))
        down = min(self.rates, key=lambda x: abs(x - w))
        return float(np.trace(self.rates[up]).real / np.trace(self.rates[down]).real)


def secular_gkls(system: OpenSystem, cm: CorrelationMatrix, psd_tol: float = 1e-10) -> GKLSData:
    """Secular reduction of the second-order generator.

    Only products ``T_b(w)^dagger ... T_a(w)`` at equal Bohr frequency are kept.
    Frequencies are grouped with the system's deduplication tolerance.

    Raises
    ------
    ValidationError
        Couplings not Hermitian, or a rate matrix with an eigenvalue below
        ``-psd_tol`` (unphysical correlation data).
    """
    if not system.is_hermitian_coupling():
        raise ValidationError("secular GKLS form needs Hermitian coupling operators")
    system.check_bath(cm)
    labels = system.labels
    n = len(labels)
    rates, jumps = {}, {}
    H_ls = np.zeros((system.dim, system.dim), dtype=complex)
    worst = np.inf
    for k, w in enumerate(system.frequencies):
        comps = [system.components[lab][k] for lab in labels]
        if not any(np.any(C) for C in comps):
            continue
        Gam = np.zeros((n, n), dtype=complex)
        for i, b in enumerate(labels):
            for j, a in enumerate(labels):
                if cm.has(b, a):
                    Gam[i, j] = complex(cm.half_fourier(b, a, w))
        gamma = Gam + Gam.conj().T
        S = (Gam - Gam.conj().T) / 2j
        for i in range(n):
            for j in range(n):
                H_ls += S[i, j] * comps[i].conj().T @ comps[j]
        ev = np.linalg.eigvalsh(0.5 * (gamma + gamma.conj().T))
        worst = min(worst, float(ev[0]))
        rates[float(w)] = gamma
        jumps[float(w)] = comps
    H_ls = 0.5 * (H_ls + H_ls.conj().T)
    freqs = np.array(sorted(rates))
    data = GKLSData(freqs, rates, jumps, H_ls, labels, float(worst if np.isfinite(worst) else 0.0))
    if data.min_rate_eigenvalue < -psd_tol:
        raise ValidationError(
            f"rate matrix not positive semidefinite (min eigenvalue {data.min_rate_eigenvalue:.3e}); "
            "the correlation data is unphysical"
        )
    return data


def gkls_generator(data: GKLSData) -> np.ndarray:
    """Superoperator of ``-i[H_LS, .] + sum gamma_ba (T_a X T_b^dagger - 1/2 {T_b^dagger T_a, X})``."""
    d = data.lamb_shift.shape[0]
    G = -1j * commutator_superop(data.lamb_shift)
    for w in data.frequencies:
        gamma, comps = data.rates[w], data.jumps[w]
        for i, Tb in enumerate(comps):
            for j, Ta in enumerate(comps):
                g = gamma[i, j]
                if g == 0:
                    continue
                K = Tb.conj().T @ Ta
                G += g * (sandwich_superop(Ta, Tb.conj().T) - 0.5 * (left_superop(K) + right_superop(K)))
    assert G.shape == (d * d, d * d)
    return G


def fourth_order_fast(system: OpenSystem, cm: CorrelationMatrix, rel_tol: float = 1e-8) -> np.ndarray:
    """Fourth-order generator for a single coupling ``H_I = T (x) B``.

    Uses the commutator form ``C(t) X = [T(t), X]`` and the correlation-weighted
    form ``D(v; t) X = C(v) T(t) X - conj(C(v)) X T(t)``:

    ``G_4 = C(0) int d^3s [ C(-s3) D(s2+s3; -s2-s3) D(s1+s2; -s1-s2-s3)
    + C(-s3) D(s2; -s2-s3) D(s1+s2+s3; -s1-s2-s3)
    - D(s1+s3; -s1-s3) C(-s3) D(s2; -s2-s3) ]``

    Every factor is a sum of exponentials in ``(s1, s2, s3)``, so the integral
    is a sum of products of inverse exponents.
    """
    if len(system.labels) != 1:
        raise ValidationError("fourth_order_fast handles one coupling term; use the engine for several")
    lab = system.labels[0]
    es = cm.entry(lab, lab)
    d = system.dim
    eig = list(system.bohr[lab])
    if not eig:
        return np.zeros((d * d, d * d), dtype=complex)

    # each option: (superoperator, coefficient, exponent vector over s1,s2,s3)
    def comm_options(form):
        form = np.asarray(form, dtype=float)
        return [(commutator_superop(C), 1.0 + 0j, -1j * w * form) for w, C in eig]

    def d_options(corr_form, op_form):
        corr_form = np.asarray(corr_form, dtype=float)
        op_form = np.asarray(op_form, dtype=float)
        out = []
        for w, C in eig:
            phase = -1j * w * op_form
            L, R = left_superop(C), right_superop(C)
            for a, z in zip(es.amplitudes, es.rates):
                out.append((L, a, phase + z * corr_form))
                out.append((R, -np.conj(a), phase + np.conj(z) * corr_form))
        return out

    s1, s2, s3 = np.eye(3)
    chains = [
        (1.0, [comm_options(s3), d_options(s2 + s3, s2 + s3), d_options(s1 + s2, s1 + s2 + s3)]),
        (1.0, [comm_options(s3), d_options(s2, s2 + s3), d_options(s1 + s2 + s3, s1 + s2 + s3)]),
        (-1.0, [d_options(s1 + s3, s1 + s3), comm_options(s3), d_options(s2, s2 + s3)]),
    ]
    scale = max(1.0, system.energy_scale(), float(np.abs(es.rates).max()))
    zero_tol = 1e-9 * scale
    total = [np.zeros((d * d, d * d), dtype=complex)]
    big = 0.0
    for sign, factors in chains:
        for combo in itertools.product(*factors):
            S = combo[0][0] @ combo[1][0] @ combo[2][0]
            coef = sign * combo[0][1] * combo[1][1] * combo[2][1]
            zeta = combo[0][2] + combo[1][2] + combo[2][2]
            lt = orthant_laurent(np.array([coef]), zeta[None, :], None, zero_tol)
            big = max(big, float(np.abs(lt).max() * np.abs(S).max()))
            while len(total) < len(lt):
                total.append(np.zeros_like(total[0]))
            for k, c in enumerate(lt):
                total[k] += c * S
    check_poles(total, big, rel_tol, "G_4 (single coupling)")
    return commutator_superop(system.couplings[lab]) @ total[0]
