"""System description shared by the engine, the fast generators and the oracles."""
from __future__ import annotations

import hashlib
import json
from typing import Mapping, Sequence

import numpy as np

from .correlations import CorrelationMatrix, ExpSum, lorentzian_correlation
from .operators import (
    ValidationError,
    bohr_decompose,
    check_hermitian,
    common_bohr_frequencies,
    eigendecompose,
    pauli,
)

__all__ = [
    "OpenSystem",
    "pure_dephasing_model",
    "damped_qubit_model",
    "spin_boson_model",
    "matrix_fingerprint",
]


def matrix_fingerprint(*arrays, extra=None) -> str:
    """SHA-256 over the raw bytes of complex arrays plus optional JSON data."""
    h = hashlib.sha256()
    for A in arrays:
        A = np.ascontiguousarray(np.asarray(A, dtype=complex))
        h.update(str(A.shape).encode())
        h.update(A.tobytes())
    if extra is not None:
        h.update(json.dumps(extra, sort_keys=True).encode())
    return h.hexdigest()


class OpenSystem:
    """System Hamiltonian plus coupling operators ``T_a`` keyed by label.

    Parameters
    ----------
    hamiltonian : array_like
        Hermitian ``d x d`` matrix.
    couplings : mapping label -> array_like
        System parts of ``H_I = sum_a T_a (x) B_a``. Labels must match the
        correlation matrix labels.
    degeneracy_tol : float, optional
        Passed to :func:`~redkin.operators.eigendecompose`; also used to
        deduplicate Bohr frequencies.
    """

    def __init__(self, hamiltonian, couplings: Mapping[str, np.ndarray], degeneracy_tol: float | None = None):
        H = np.asarray(hamiltonian, dtype=complex)
        check_hermitian(H, "H_S")
        self.H = H
        self.dim = H.shape[0]
        self.labels = tuple(str(k) for k in couplings)
        self.couplings = {}
        for lab, T in couplings.items():
            T = np.asarray(T, dtype=complex)
            if T.shape != H.shape:
                raise ValidationError(f"coupling {lab} has shape {T.shape}, expected {H.shape}")
            self.couplings[str(lab)] = T
        self.spec = eigendecompose(H, degeneracy_tol)
        self.frequencies = common_bohr_frequencies(self.spec)
        self.bohr = {lab: bohr_decompose(T, self.spec) for lab, T in self.couplings.items()}
        # components on the global frequency grid, zero where absent
        self.components = {}
        for lab, eig in self.bohr.items():
            comp = np.zeros((len(self.frequencies), self.dim, self.dim), dtype=complex)
            for w, C in eig:
                k = int(np.argmin(np.abs(self.frequencies - w)))
                comp[k] += C
            self.components[lab] = comp

    def __repr__(self):
        return f"OpenSystem(dim={self.dim}, labels={self.labels})"

    def is_hermitian_coupling(self, tol: float = 1e-12) -> bool:
        return all(np.max(np.abs(T - T.conj().T)) <= tol for T in self.couplings.values())

    def channels(self) -> list[tuple[int, int]]:
        """``(label index, frequency index)`` pairs with nonzero components."""
        out = []
        for a, lab in enumerate(self.labels):
            for k in range(len(self.frequencies)):
                if np.any(self.components[lab][k] != 0):
                    out.append((a, k))
        return out

    def energy_scale(self) -> float:
        f = np.abs(self.frequencies)
        return float(max(1.0, f.max() if f.size else 0.0))

    def fingerprint(self) -> str:
        return matrix_fingerprint(self.H, *[self.couplings[k] for k in self.labels], extra=list(self.labels))

    def check_bath(self, cm: CorrelationMatrix) -> None:
        """Raise if a pair of used couplings lacks a correlation entry."""
        used = [lab for lab in self.labels if np.any(self.couplings[lab] != 0)]
        for a in used:
            for b in used:
                if not cm.has(a, b):
                    raise ValidationError(f"missing correlation entry ({a},{b}) for used couplings")


def pure_dephasing_model(omega0: float = 1.0, correlation: ExpSum | None = None, label: str = "z"):
    """Qubit with ``H_S = (omega0/2) sz`` coupled through ``sz``.

    Returns
    -------
    (OpenSystem, CorrelationMatrix)
        The default correlation is ``C(t) = exp(-t)``.
    """
    p = pauli()
    if correlation is None:
        correlation = ExpSum(np.array([1.0]), np.array([1.0]))
    system = OpenSystem(0.5 * omega0 * p["z"], {label: p["z"]})
    return system, CorrelationMatrix.single(correlation, label)


def damped_qubit_model(gamma0: float = 1.0, kappa: float = 1.0, omega0: float = 1.0, detuning: float = 0.0):
    """Rotating-wave damped qubit written with two Hermitian bath operators.

    The coupling ``s+ (x) B + s- (x) B^dagger`` equals ``sx (x) X - sy (x) Y``
    with ``X = (B + B^dagger)/2`` and ``Y = (B - B^dagger)/(2i)``. The vacuum
    correlation ``<B(t) B^dagger>`` is Lorentzian, centred at
    ``omega0 + detuning``. Basis state 0 is the excited state.

    Returns
    -------
    (OpenSystem, CorrelationMatrix)
    """
    p = pauli()
    C = lorentzian_correlation(gamma0, kappa, omega0 + detuning)
    system = OpenSystem(0.5 * omega0 * p["z"], {"x": p["x"], "y": -p["y"]})
    cm = CorrelationMatrix(
        ["x", "y"],
        {
            ("x", "x"): C.scaled(0.25),
            ("y", "y"): C.scaled(0.25),
            ("x", "y"): C.scaled(0.25j),
            ("y", "x"): C.scaled(-0.25j),
        },
    )
    return system, cm


# weights c_a in B_a = sum_j g_j (c_a b_j + conj(c_a) b_j^dagger) reproducing the model above
DAMPED_QUBIT_BATH_WEIGHTS = {"x": 0.5 + 0j, "y": -0.5j}


def spin_boson_model(omega0: float = 1.0, correlation: ExpSum | None = None, label: str = "x"):
    """Qubit with ``H_S = (omega0/2) sz`` coupled through ``sx`` (no rotating-wave step)."""
    p = pauli()
    if correlation is None:
        correlation = lorentzian_correlation(1.0, 1.0, omega0)
    system = OpenSystem(0.5 * omega0 * p["z"], {label: p["x"]})
    return system, CorrelationMatrix.single(correlation, label)


def coupling_list(system: OpenSystem) -> Sequence[np.ndarray]:
    return [system.couplings[lab] for lab in system.labels]
