"""Dense operator and superoperator algebra on a finite system space.

Vectorization is column stacking throughout the package, so that
``vec(A X B) = (B.T kron A) vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "ValidationError",
    "SpectralData",
    "EigenopSet",
    "check_hermitian",
    "check_density_matrix",
    "vec",
    "unvec",
    "sandwich_superop",
    "left_superop",
    "right_superop",
    "commutator_superop",
    "anticommutator_superop",
    "liouvillian",
    "apply_superop",
    "eigendecompose",
    "bohr_decompose",
    "common_bohr_frequencies",
    "partial_trace",
    "free_conjugation",
    "pauli",
]


class ValidationError(ValueError):
    """Raised when an input fails a structural check."""


def pauli() -> dict[str, np.ndarray]:
    """Return the identity and Pauli matrices as complex arrays."""
    return {
        "i": np.eye(2, dtype=complex),
        "x": np.array([[0, 1], [1, 0]], dtype=complex),
        "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "z": np.array([[1, 0], [0, -1]], dtype=complex),
    }


def _as_square(A, name="matrix") -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {A.shape}")
    return A


def check_hermitian(A, name: str = "matrix", tol: float = 1e-12) -> float:
    """Raise if ``A`` is not Hermitian within ``tol`` (max-abs of A - A^dagger).

    Returns
    -------
    float
        The measured deviation.
    """
    A = _as_square(A, name)
    dev = float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0
    if dev > tol:
        raise ValidationError(f"hermiticity violation at {name}: max|A - A^dagger| = {dev:.3e}")
    return dev


def check_density_matrix(rho, name: str = "rho", tol: float = 1e-12, eig_tol: float = 1e-10):
    """Validate Hermiticity, unit trace and positivity of a density matrix."""
    rho = _as_square(rho, name)
    check_hermitian(rho, name, tol)
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise ValidationError(f"{name} has trace {tr:.6g}, expected 1")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -eig_tol:
        raise ValidationError(f"{name} has negative eigenvalue {lo:.3e}")
    return rho


def vec(X: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(X).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise ValidationError(f"cannot reshape vector of length {v.size} into a square matrix")
    return v.reshape(dim, dim, order="F")


def sandwich_superop(A, B) -> np.ndarray:
    """Superoperator matrix of ``X -> A X B`` in column-stacking convention."""
    A = _as_square(A, "A")
    B = _as_square(B, "B")
    if A.shape != B.shape:
        raise ValidationError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return np.kron(B.T, A)


def left_superop(A) -> np.ndarray:
    """Superoperator of ``X -> A X``."""
    A = _as_square(A, "A")
    return np.kron(np.eye(A.shape[0]), A)


def right_superop(B) -> np.ndarray:
    """Superoperator of ``X -> X B``."""
    B = _as_square(B, "B")
    return np.kron(B.T, np.eye(B.shape[0]))


def commutator_superop(T) -> np.ndarray:
    """Superoperator of ``X -> [T, X]``."""
    return left_superop(T) - right_superop(T)


def anticommutator_superop(T) -> np.ndarray:
    """Superoperator of ``X -> {T, X}``."""
    return left_superop(T) + right_superop(T)


def liouvillian(H) -> np.ndarray:
    """The commutator superoperator ``[H, .]`` of a Hamiltonian."""
    return commutator_superop(H)


def apply_superop(S: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Apply a superoperator matrix to an operator."""
    X = np.asarray(X)
    return unvec(S @ vec(X), X.shape[0])


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues with merged degeneracy classes.

    Attributes
    ----------
    eigenvalues : ndarray
        One representative (mean) energy per degeneracy class, ascending.
    projectors : list of ndarray
        Orthogonal projector onto each class.
    classes : list of tuple of int
        Indices of the raw ascending eigenvalues belonging to each class.
    vectors : ndarray
        Orthonormal eigenvectors (columns) in ascending order.
    raw_eigenvalues : ndarray
        Unmerged ascending eigenvalues.
    tol : float
        Tolerance used for merging; reused for Bohr-frequency deduplication.
    """

    eigenvalues: np.ndarray
    projectors: list
    classes: list
    vectors: np.ndarray
    raw_eigenvalues: np.ndarray
    tol: float

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]


def eigendecompose(H, degeneracy_tol: float | None = None) -> SpectralData:
    """Spectral decomposition of a Hermitian matrix with degeneracy merging.

    Parameters
    ----------
    H : array_like
        Hermitian matrix.
    degeneracy_tol : float, optional
        Eigenvalues closer than this (chained) are merged into one class.
        Defaults to ``1e-9 * max|eigenvalue|`` (with a floor of 1e-12).

    Returns
    -------
    SpectralData
    """
    H = _as_square(H, "H")
    check_hermitian(H, "H")
    evals, evecs = np.linalg.eigh(0.5 * (H + H.conj().T))
    if degeneracy_tol is None:
        scale = float(np.max(np.abs(evals))) if evals.size else 0.0
        degeneracy_tol = max(1e-9 * scale, 1e-12)
    classes: list[list[int]] = []
    for k, e in enumerate(evals):
        if classes and e - evals[classes[-1][-1]] <= degeneracy_tol:
            classes[-1].append(k)
        else:
            classes.append([k])
    energies = np.array([evals[c].mean() for c in classes])
    projectors = []
    for c in classes:
        V = evecs[:, c]
        projectors.append(V @ V.conj().T)
    return SpectralData(
        eigenvalues=energies,
        projectors=projectors,
        classes=[tuple(c) for c in classes],
        vectors=evecs,
        raw_eigenvalues=evals,
        tol=float(degeneracy_tol),
    )


@dataclass(frozen=True)
class EigenopSet:
    """Bohr-frequency decomposition ``T = sum_w T(w)``.

    With ``T(w) = sum_{e' - e = w} P(e) T P(e')`` one has
    ``exp(iHt) T(w) exp(-iHt) = exp(-iwt) T(w)``.
    """

    frequencies: np.ndarray
    components: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(zip(self.frequencies, self.components))

    def reconstruct(self, dim: int | None = None) -> np.ndarray:
        if not self.components:
            if dim is None:
                raise ValueError("empty set needs an explicit dimension")
            return np.zeros((dim, dim), dtype=complex)
        return np.sum(self.components, axis=0)

    def at_time(self, t: float) -> np.ndarray:
        """``exp(iHt) T exp(-iHt)`` assembled from the components."""
        out = np.zeros_like(self.components[0])
        for w, C in zip(self.frequencies, self.components):
            out = out + np.exp(-1j * w * t) * C
        return out


def _dedupe(values: Sequence[float], tol: float) -> np.ndarray:
    vals = np.sort(np.asarray(values, dtype=float))
    groups: list[list[float]] = []
    for v in vals:
        if groups and v - groups[-1][-1] <= tol:
            groups[-1].append(v)
        else:
            groups.append([v])
    out = np.array([np.mean(g) for g in groups])
    # snap the zero frequency exactly
    out[np.abs(out) <= tol] = 0.0
    return out


def common_bohr_frequencies(spec: SpectralData) -> np.ndarray:
    """All distinct Bohr frequencies ``e' - e`` of a spectrum, ascending."""
    e = spec.eigenvalues
    diffs = (e[None, :] - e[:, None]).ravel()
    return _dedupe(diffs, spec.tol)


def bohr_decompose(T, spec: SpectralData, zero_tol: float = 1e-14) -> EigenopSet:
    """Split an operator into Bohr-frequency components.

    Parameters
    ----------
    T : array_like
        System operator.
    spec : SpectralData
        Spectrum of the system Hamiltonian.
    zero_tol : float
        Components with max-abs below this are dropped.

    Returns
    -------
    EigenopSet
        Entries sorted by frequency; frequencies deduplicated with ``spec.tol``.
    """
    T = _as_square(T, "T")
    if T.shape[0] != spec.dim:
        raise ValidationError(f"dimension mismatch: operator {T.shape[0]} vs spectrum {spec.dim}")
    grid = common_bohr_frequencies(spec)
    comps = {k: np.zeros_like(T) for k in range(len(grid))}
    E = spec.eigenvalues
    for a, Pa in enumerate(spec.projectors):
        for b, Pb in enumerate(spec.projectors):
            w = E[b] - E[a]
            k = int(np.argmin(np.abs(grid - w)))
            comps[k] = comps[k] + Pa @ T @ Pb
    freqs, mats = [], []
    for k, w in enumerate(grid):
        C = comps[k]
        if np.max(np.abs(C)) > zero_tol:
            freqs.append(float(w))
            mats.append(C)
    return EigenopSet(np.array(freqs, dtype=float), mats)


def free_conjugation(H, t: float) -> np.ndarray:
    """Superoperator of ``X -> exp(-iHt) X exp(iHt)``."""
    H = _as_square(H, "H")
    evals, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    U = (V * np.exp(-1j * evals * t)) @ V.conj().T
    return sandwich_superop(U, U.conj().T)


def partial_trace(joint, dims: tuple[int, int], keep: str = "S") -> np.ndarray:
    """Partial trace of an operator on ``H_S (x) H_R``.

    Parameters
    ----------
    joint : array_like
        ``(dS*dR, dS*dR)`` matrix; the system factor is the first (slow) index.
    dims : (int, int)
        ``(dS, dR)``.
    keep : {"S", "R"}
        Subsystem to keep.
    """
    joint = _as_square(joint, "joint")
    dS, dR = dims
    if dS * dR != joint.shape[0]:
        raise ValidationError(f"dimension factorization mismatch: {dS}*{dR} != {joint.shape[0]}")
    J = joint.reshape(dS, dR, dS, dR)
    if keep in ("S", "s", "system"):
        return np.einsum("ajbj->ab", J)
    if keep in ("R", "r", "reservoir", "bath"):
        return np.einsum("iaib->ab", J)
    raise ValidationError(f"unknown subsystem tag {keep!r}")
