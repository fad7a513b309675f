"""Brute-force time-domain quadrature of the second- and fourth-order generators.

These integrate the superoperator-valued integrands directly, with the free
evolution of the couplings computed from the Hamiltonian's eigenvectors and
the correlations evaluated pointwise. No Bohr-frequency bookkeeping or
closed-form half-line transforms are involved, which makes them independent
checks of the engine and of the closed-form fast paths.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import cubature, quad_vec

from ..correlations import CorrelationMatrix
from ..model import OpenSystem
from ..operators import ValidationError, commutator_superop

__all__ = ["g2_quadrature", "g4_quadrature"]


class _FreeCouplings:
    """``T(t) = exp(iHt) T exp(-iHt)`` for batches of times."""

    def __init__(self, H, T):
        E, V = np.linalg.eigh(H)
        self.V = V
        self.E = E
        self.Te = V.conj().T @ np.asarray(T, dtype=complex) @ V

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ph = np.exp(1j * np.multiply.outer(t, self.E[:, None] - self.E[None, :]))
        return np.einsum("ij,njk,lk->nil", self.V, self.Te * ph, self.V.conj())


def _left(A):
    """Batched ``kron(I, A)`` (left multiplication on column-stacked vectors)."""
    n, d, _ = A.shape
    out = np.zeros((n, d, d, d, d), dtype=complex)
    for j in range(d):
        out[:, j, :, j, :] = A
    return out.reshape(n, d * d, d * d)


def _right(B):
    """Batched ``kron(B^T, I)`` (right multiplication)."""
    n, d, _ = B.shape
    out = np.zeros((n, d, d, d, d), dtype=complex)
    for i in range(d):
        out[:, :, i, :, i] = np.swapaxes(B, 1, 2)
    return out.reshape(n, d * d, d * d)


def g2_quadrature(system: OpenSystem, cm: CorrelationMatrix, epsabs: float = 1e-12,
                  epsrel: float = 1e-12) -> np.ndarray:
    """Second-order generator by adaptive quadrature over the memory time.

    ``G_2 X = -int_0^inf ds sum_ab ( C_ba(s) [T_b, T_a(-s) X] - C_ab(-s) [T_b, X T_a(-s)] )``
    """
    system.check_bath(cm)
    d = system.dim
    labels = [lab for lab in system.labels if np.any(system.couplings[lab])]
    free = {a: _FreeCouplings(system.H, system.couplings[a]) for a in labels}
    T = np.array([system.couplings[b] for b in labels])
    amps = [[cm.entry(b, a).amplitudes for b in labels] for a in labels]
    rates = [[cm.entry(b, a).rates for b in labels] for a in labels]
    eye = np.eye(d)
    # the integrand is bounded by sum |a| exp(-Re(z) s); cut where the tail is negligible
    bound = sum(np.sum(np.abs(x)) for row in amps for x in row) * max(1.0, float(np.max(np.abs(T))) ** 2) * 4
    slow = min(float(np.min(r.real)) for row in rates for r in row)
    cut = max(1.0, np.log(max(bound / (slow * epsabs), 1.0)) / slow)

    def f(s):
        acc = np.zeros((d * d, d * d), dtype=complex)
        for i, a in enumerate(labels):
            Ta = free[a](-s)[0]
            # C_ba(s) for every b; C_ab(-s) is its conjugate
            c = np.array([np.sum(amps[i][j] * np.exp(-rates[i][j] * s)) for j in range(len(labels))])
            Q = np.tensordot(c, T, axes=1)
            Qc = np.tensordot(c.conj(), T, axes=1)
            acc -= np.kron(eye, Q @ Ta) - np.kron(Q.T, Ta)
            acc += np.kron(Ta.T, Qc) - np.kron((Ta @ Qc).T, eye)
        return acc

    val, _ = quad_vec(f, 0.0, cut, epsabs=epsabs, epsrel=epsrel, limit=20000)
    return val


def g4_quadrature(system: OpenSystem, cm: CorrelationMatrix, rtol: float = 1e-7,
                  atol: float = 1e-12, max_subdivisions: int = 100000) -> np.ndarray:
    """Fourth-order generator for one coupling by 3-D adaptive cubature.

    With ``C(t) X = [T(t), X]`` and ``D(v; t) X = C(v) T(t) X - conj(C(v)) X T(t)``,

    ``G_4 = C(0) int d^3s [ C(-s3) D(s2+s3; -s2-s3) D(s1+s2; -s1-s2-s3)
    + C(-s3) D(s2; -s2-s3) D(s1+s2+s3; -s1-s2-s3)
    - D(s1+s3; -s1-s3) C(-s3) D(s2; -s2-s3) ]``

    Every chain carries at least one correlation factor decaying in each
    variable, so the orthant is truncated to a cube whose side makes the
    slowest correlation decay below ``atol`` relative to ``C(0)``.
    """
    if len(system.labels) != 1:
        raise ValidationError("the fourth-order quadrature handles a single coupling")
    lab = system.labels[0]
    es = cm.entry(lab, lab)
    T = system.couplings[lab]
    d = system.dim
    free = _FreeCouplings(system.H, T)

    def comm(t):
        A = free(t)
        return _left(A) - _right(A)

    def dsup(v, t):
        A = free(t)
        c = es(v)[:, None, None]
        return c * _left(A) - np.conj(c) * _right(A)

    def f(x):
        s1, s2, s3 = x[:, 0], x[:, 1], x[:, 2]
        C3 = comm(-s3)
        term = C3 @ dsup(s2 + s3, -s2 - s3) @ dsup(s1 + s2, -s1 - s2 - s3)
        term = term + C3 @ dsup(s2, -s2 - s3) @ dsup(s1 + s2 + s3, -s1 - s2 - s3)
        term = term - dsup(s1 + s3, -s1 - s3) @ C3 @ dsup(s2, -s2 - s3)
        flat = term.reshape(len(x), -1)
        return np.concatenate([flat.real, flat.imag], axis=1)

    slow = float(np.min(es.rates.real))
    side = np.log(max(np.sum(np.abs(es.amplitudes)), 1.0) / atol) / slow
    res = cubature(f, np.zeros(3), np.full(3, side), rule="gk21", rtol=rtol, atol=atol,
                   max_subdivisions=max_subdivisions)
    if res.status != "converged":
        raise RuntimeError(f"cubature did not converge (estimated error {np.max(res.error):.3e})")
    n = d ** 4
    integral = (res.estimate[:n] + 1j * res.estimate[n:]).reshape(d * d, d * d)
    return commutator_superop(T) @ integral
