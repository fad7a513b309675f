"""Order-by-order construction of the recovery map and the kinetic generators.

The recovery map is expanded as ``R = sum_r lambda^r R_r`` and the generator
as ``G = sum_r lambda^r G_r``. With ``R_0 rho = rho (x) rho_R`` the
higher orders follow from

    R_r = -int_0^inf ds U_0(s) { i L_I R_{r-1} + sum_{n=1}^r R_{r-n} G_n } U_S(-s)
    G_r = -i Tr_R[ L_I R_{r-1} ]

Every term is held symbolically as a :class:`KineticTerm`: a scalar, strings
of system operators acting on the left and on the right of ``rho``, the bath
operators still to be averaged, and Wick pairs that were already averaged.
Time arguments are integer linear forms ``t = -sum_i c_i s_i`` over the
integration variables. Bath averages are Gaussian (sum over pairings), and
the remaining multiple integral over the positive orthant is done in closed
form because every factor is an exponential.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .correlations import CorrelationMatrix, pairings
from .expoly import DivergenceError, check_poles
from .kernels import orthant_laurent
from .model import OpenSystem, matrix_fingerprint
from .operators import liouvillian

__all__ = [
    "KineticTerm",
    "TermSet",
    "PerturbationEngine",
    "recursion_step",
    "bath_average",
    "assemble_generator",
    "reduced_trace_check",
    "get_engine",
    "DivergenceError",
]

Form = tuple  # tuple[int, ...]


@dataclass(frozen=True)
class KineticTerm:
    """One symbolic term of ``R_r rho`` or of an averaged generator.

    Attributes
    ----------
    scalar : complex
    left, right : tuple of (label index, frequency index, form)
        System operators ``T_a(w)`` at time ``-form . s``; ``left[0]`` is
        outermost on the left, ``right[-1]`` outermost on the right.
    bath_left, bath_right : tuple of (label index, form)
        Bath operators multiplying ``rho_R`` from the left and right.
    pairs : tuple of (a, b, form_a, form_b)
        Averaged factors ``C_ab(t_a - t_b)``.
    num_vars : int
    """

    scalar: complex
    left: tuple
    right: tuple
    bath_left: tuple = ()
    bath_right: tuple = ()
    pairs: tuple = ()
    num_vars: int = 0

    @property
    def bath_string(self) -> tuple:
        """Bath operators in moment order: ``Tr[L rho_R R] = <R L>``."""
        return self.bath_right + self.bath_left

    def key(self):
        return (self.left, self.right, self.bath_left, self.bath_right, self.pairs, self.num_vars)


@dataclass
class TermSet:
    """Terms of one order, either of ``R_r`` or of an averaged ``G_r``."""

    order: int
    terms: list
    kind: str = "recovery"
    labels: tuple = ()
    frequencies: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return len(self.terms)

    def to_json(self) -> dict:
        """Debug dump: scalar, operator strings with (label, w, coeffs), bath string, pairs."""
        def op(o):
            a, k, form = o
            return [self.labels[a], float(self.frequencies[k]), list(form)]

        def bop(o):
            a, form = o
            return [self.labels[a], list(form)]

        out = []
        for t in self.terms:
            out.append({
                "scalar": [float(np.real(t.scalar)), float(np.imag(t.scalar))],
                "left": [op(o) for o in t.left],
                "right": [op(o) for o in t.right],
                "bath": [bop(o) for o in t.bath_string],
                "pairs": [[self.labels[a], self.labels[b], list(fa), list(fb)] for a, b, fa, fb in t.pairs],
                "num_vars": t.num_vars,
            })
        return {"order": self.order, "kind": self.kind, "terms": out}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _merge(terms: Iterable[KineticTerm]) -> list:
    """Combine terms with identical structure by adding their scalars."""
    acc: dict = {}
    proto: dict = {}
    for t in terms:
        k = t.key()
        if k in acc:
            acc[k] += t.scalar
        else:
            acc[k] = t.scalar
            proto[k] = t
    out = []
    for k, c in acc.items():
        if c != 0:
            p = proto[k]
            out.append(KineticTerm(c, p.left, p.right, p.bath_left, p.bath_right, p.pairs, p.num_vars))
    return out


def _pad(form: Form, before: int, after: int, shift: bool) -> Form:
    return (0,) * before + tuple(form) + (0,) * after + ((1,) if shift else ())


def _reform(t: KineticTerm, before: int, after: int, shift: bool):
    """Map every form of a term into a larger variable space."""
    left = tuple((a, k, _pad(f, before, after, shift)) for a, k, f in t.left)
    right = tuple((a, k, _pad(f, before, after, shift)) for a, k, f in t.right)
    bl = tuple((a, _pad(f, before, after, shift)) for a, f in t.bath_left)
    br = tuple((a, _pad(f, before, after, shift)) for a, f in t.bath_right)
    pairs = tuple((a, b, _pad(fa, before, after, shift), _pad(fb, before, after, shift)) for a, b, fa, fb in t.pairs)
    return left, right, bl, br, pairs


def _insertions(term: KineticTerm, channels, shift: bool) -> list:
    """Apply ``-i [H_I, .]`` (at time zero before an optional shift) to a term."""
    m = term.num_vars
    zero = (0,) * m
    out = []
    for a, k in channels:
        # left: -i T (x) B X
        out.append(KineticTerm(
            -1j * term.scalar,
            ((a, k, zero),) + term.left, term.right,
            ((a, zero),) + term.bath_left, term.bath_right,
            term.pairs, m,
        ))
        # right: +i X T (x) B
        out.append(KineticTerm(
            1j * term.scalar,
            term.left, term.right + ((a, k, zero),),
            term.bath_left, term.bath_right + ((a, zero),),
            term.pairs, m,
        ))
    if shift:
        shifted = []
        for t in out:
            left, right, bl, br, pairs = _reform(t, 0, 0, True)
            shifted.append(KineticTerm(t.scalar, left, right, bl, br, pairs, m + 1))
        out = shifted
    return out


def _compose(tau: KineticTerm, g: KineticTerm) -> KineticTerm:
    """``-U_0(s) R_{r-n} G_n U_S(-s)`` for one pair of terms.

    Variables are ordered as [generator vars][recovery vars][new s].
    """
    mg, mt = g.num_vars, tau.num_vars
    gl, gr, _, _, gp = _reform(g, 0, mt, True)
    tl, tr, tbl, tbr, tp = _reform(tau, mg, 0, True)
    return KineticTerm(
        -tau.scalar * g.scalar,
        tl + gl, gr + tr,
        tbl, tbr,
        tuple(sorted(tp + gp)),
        mg + mt + 1,
    )


def _average(term: KineticTerm) -> list:
    """Gaussian average of the bath string; empty list for odd length."""
    string = term.bath_string
    n = len(string)
    if n % 2:
        return []
    if n == 0:
        return [KineticTerm(term.scalar, term.left, term.right, (), (), term.pairs, term.num_vars)]
    out = []
    for matching in pairings(n):
        new = tuple((string[j][0], string[k][0], string[j][1], string[k][1]) for j, k in matching)
        out.append(KineticTerm(term.scalar, term.left, term.right, (), (),
                               tuple(sorted(term.pairs + new)), term.num_vars))
    return out


def recursion_step(r: int, recovery: dict, generators: dict, channels) -> list:
    """Terms of ``R_r`` from lower recovery orders and averaged generator terms.

    Parameters
    ----------
    r : int
        Order, ``r >= 1``.
    recovery : dict
        ``{n: list of KineticTerm}`` for ``n = 0..r-1``.
    generators : dict
        ``{n: list of averaged KineticTerm}`` for ``n = 1..r``.
    channels : sequence of (label index, frequency index)
    """
    if r < 1:
        raise ValueError("recursion_step needs r >= 1")
    for n in range(r):
        if n not in recovery:
            raise KeyError(f"missing recovery order {n}")
    for n in range(1, r + 1):
        if n not in generators:
            raise KeyError(f"missing generator order {n}")
    terms = []
    for t in recovery[r - 1]:
        terms.extend(_insertions(t, channels, shift=True))
    for n in range(1, r + 1):
        for g in generators[n]:
            for tau in recovery[r - n]:
                terms.append(_compose(tau, g))
    return _merge(terms)


class PerturbationEngine:
    """Memoized symbolic recursion bound to one system and one bath.

    Parameters
    ----------
    system : OpenSystem
    cm : CorrelationMatrix
    rel_tol : float
        Relative threshold for surviving regulator poles.
    """

    def __init__(self, system: OpenSystem, cm: CorrelationMatrix, rel_tol: float = 1e-8):
        system.check_bath(cm)
        self.system = system
        self.cm = cm
        self.rel_tol = rel_tol
        self.channels = system.channels()
        self.label_of = {lab: i for i, lab in enumerate(system.labels)}
        rates = [np.abs(es.rates).max() for es in cm.entries.values()]
        scale = max([system.energy_scale()] + rates)
        self.zero_tol = 1e-9 * scale
        self._recovery = {0: [KineticTerm(1.0 + 0j, (), ())]}
        self._gen_terms: dict = {}
        self._gen_mats: dict = {}
        self._lock = threading.Lock()
        self._pair_cache: dict = {}

    # ---- symbolic layer -------------------------------------------------
    def generator_terms(self, r: int) -> list:
        """Averaged terms of ``G_r`` (empty for odd ``r``), ``r >= 1``."""
        if r < 1:
            raise ValueError("generator terms exist for r >= 1")
        with self._lock:
            if r in self._gen_terms:
                return self._gen_terms[r]
        prev = self.recovery_terms(r - 1)
        out = []
        for t in prev:
            for ins in _insertions(t, self.channels, shift=False):
                out.extend(_average(ins))
        out = _merge(out)
        with self._lock:
            self._gen_terms[r] = out
        return out

    def recovery_terms(self, r: int) -> list:
        """Terms of ``R_r``."""
        with self._lock:
            if r in self._recovery:
                return self._recovery[r]
        recovery = {n: self.recovery_terms(n) for n in range(r)}
        generators = {n: self.generator_terms(n) for n in range(1, r + 1)}
        terms = recursion_step(r, recovery, generators, self.channels)
        with self._lock:
            self._recovery[r] = terms
        return terms

    def termset(self, r: int, kind: str = "recovery") -> TermSet:
        terms = self.recovery_terms(r) if kind == "recovery" else self.generator_terms(r)
        return TermSet(r, terms, kind, self.system.labels, self.system.frequencies)

    # ---- numeric layer --------------------------------------------------
    def _pair_expansion(self, a: int, b: int, fa: Form, fb: Form):
        key = (a, b, fa, fb)
        hit = self._pair_cache.get(key)
        if hit is not None:
            return hit
        d = np.array(fb, dtype=float) - np.array(fa, dtype=float)
        la, lb = self.system.labels[a], self.system.labels[b]
        if np.all(d >= 0):
            es = self.cm.entry(la, lb)
            amps, rates = es.amplitudes, np.multiply.outer(es.rates, d)
        elif np.all(d <= 0):
            es = self.cm.entry(lb, la)
            amps, rates = es.amplitudes.conj(), np.multiply.outer(es.rates.conj(), -d)
        else:
            raise ValueError(f"pair time difference {d} has mixed signs; recursion invariant broken")
        self._pair_cache[key] = (amps, rates)
        return amps, rates

    def integrand(self, term: KineticTerm):
        """Coefficients and exponents of one averaged term's exponential sum."""
        m = term.num_vars
        freqs = self.system.frequencies
        phase = np.zeros(m, dtype=complex)
        for a, k, f in term.left + term.right:
            if freqs[k] != 0:
                phase -= 1j * freqs[k] * np.asarray(f, dtype=float)
        coefs = np.array([term.scalar], dtype=complex)
        expos = phase[None, :]
        for a, b, fa, fb in term.pairs:
            amps, rates = self._pair_expansion(a, b, fa, fb)
            coefs = np.multiply.outer(coefs, amps).ravel()
            expos = (expos[:, None, :] + rates[None, :, :]).reshape(-1, m)
        return coefs, expos

    def _string_matrix(self, ops) -> np.ndarray:
        M = np.eye(self.system.dim, dtype=complex)
        for a, k, _ in ops:
            M = M @ self.system.components[self.system.labels[a]][k]
        return M

    def integrate(self, terms: list, what: str = "generator") -> np.ndarray:
        """Superoperator matrix of a list of averaged terms.

        Terms are grouped by their system operator strings, each group is
        integrated to a Laurent series in the regulator, and the poles are
        checked on the assembled matrix.
        """
        d = self.system.dim
        groups: dict = {}
        for t in terms:
            groups.setdefault((tuple((a, k) for a, k, _ in t.left), tuple((a, k) for a, k, _ in t.right)), []).append(t)
        total: list = [np.zeros((d * d, d * d), dtype=complex)]
        scale = 0.0
        for (lkey, rkey), ts in groups.items():
            parts = [self.integrand(t) for t in ts]
            coefs = np.concatenate([p[0] for p in parts])
            expos = np.vstack([p[1] for p in parts])
            lt = orthant_laurent(coefs, expos, None, self.zero_tol)
            L = self._string_matrix(ts[0].left)
            R = self._string_matrix(ts[0].right)
            S = np.kron(R.T, L)
            smax = float(np.max(np.abs(S)))
            absz = np.abs(expos)
            nz = absz > self.zero_tol
            mag = np.abs(coefs) * np.prod(np.where(nz, 1.0 / np.where(nz, absz, 1.0), 1.0), axis=1)
            scale = max(scale, float(mag.max()) * smax if mag.size else 0.0, float(np.abs(lt).max()) * smax)
            while len(total) < len(lt):
                total.append(np.zeros((d * d, d * d), dtype=complex))
            for k, c in enumerate(lt):
                if c != 0:
                    total[k] += c * S
        check_poles(total, scale, self.rel_tol, what)
        return total[0]

    def generator(self, r: int) -> np.ndarray:
        """Schroedinger-picture ``G_r`` as a ``d^2 x d^2`` matrix."""
        if r == 0:
            return -1j * liouvillian(self.system.H)
        with self._lock:
            if r in self._gen_mats:
                return self._gen_mats[r]
        terms = self.generator_terms(r)
        d = self.system.dim
        G = np.zeros((d * d, d * d), dtype=complex) if not terms else self.integrate(terms, f"G_{r}")
        with self._lock:
            self._gen_mats[r] = G
        return G

    def averaged_recovery(self, r: int) -> list:
        out = []
        for t in self.recovery_terms(r):
            out.extend(_average(t))
        return _merge(out)

    def reduced_trace(self, r: int) -> np.ndarray:
        """Superoperator of ``Tr_R R_r`` (identity for r = 0, zero otherwise)."""
        terms = self.averaged_recovery(r)
        d = self.system.dim
        if not terms:
            return np.zeros((d * d, d * d), dtype=complex)
        return self.integrate(terms, f"Tr_R R_{r}")


_ENGINES: dict = {}
_ENGINES_LOCK = threading.Lock()


def get_engine(system: OpenSystem, cm: CorrelationMatrix) -> PerturbationEngine:
    """Shared engine instance keyed by system and bath fingerprints."""
    key = (system.fingerprint(), matrix_fingerprint(extra=cm.to_json()))
    with _ENGINES_LOCK:
        eng = _ENGINES.get(key)
        if eng is None:
            eng = PerturbationEngine(system, cm)
            _ENGINES[key] = eng
    return eng


def bath_average(ts: TermSet, engine: PerturbationEngine, extra_insertion: bool = True) -> list:
    """Averaged terms paired with their exponential-sum integrands.

    Parameters
    ----------
    ts : TermSet
        Recovery terms of some order.
    engine : PerturbationEngine
        Supplies the channels and correlation data.
    extra_insertion : bool
        Apply ``-i [H_I, .]`` first (giving the next generator order).

    Returns
    -------
    list of ((left string, right string), ExpPoly)
        Empty when every bath string has odd length.
    """
    from .expoly import ExpPoly

    out = []
    for t in ts.terms:
        items = _insertions(t, engine.channels, shift=False) if extra_insertion else [t]
        for it in items:
            for avg in _average(it):
                c, e = engine.integrand(avg)
                key = (tuple((a, k) for a, k, _ in avg.left), tuple((a, k) for a, k, _ in avg.right))
                out.append((key, ExpPoly(c, e)))
    return out


def assemble_generator(r: int, system: OpenSystem, cm: CorrelationMatrix) -> np.ndarray:
    """``G_r`` through the symbolic recursion (memoized per system and bath)."""
    return get_engine(system, cm).generator(r)


def reduced_trace_check(r: int, system: OpenSystem, cm: CorrelationMatrix) -> float:
    """Max-abs entry of ``Tr_R R_r`` as a superoperator (should vanish for r >= 1)."""
    return float(np.max(np.abs(get_engine(system, cm).reduced_trace(r))))
