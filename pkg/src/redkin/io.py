"""JSON encodings of matrices, superoperators and states."""
from __future__ import annotations

import hashlib
import json

import numpy as np

from .operators import ValidationError

__all__ = ["matrix_to_json", "matrix_from_json", "generator_to_json", "dumps", "sha256_bytes"]


def matrix_to_json(M) -> dict:
    """``{"dim": n, "data": [[re, im], ...]}`` in row-major order (square matrices)."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {M.shape}")
    return {"dim": int(M.shape[0]), "data": [[float(z.real), float(z.imag)] for z in M.ravel(order="C")]}


def matrix_from_json(obj, path: str = "matrix") -> np.ndarray:
    """Inverse of :func:`matrix_to_json`.

    Also accepts a nested list of rows whose entries are numbers or
    ``[re, im]`` pairs.
    """
    try:
        if isinstance(obj, dict):
            n = int(obj["dim"])
            data = np.asarray(obj["data"], dtype=float)
            if data.shape != (n * n, 2):
                raise ValidationError(f"{path}: data must hold dim^2 = {n * n} [re, im] pairs")
            return (data[:, 0] + 1j * data[:, 1]).reshape(n, n)
        arr = np.asarray(obj, dtype=float)
        if arr.ndim == 3 and arr.shape[-1] == 2:
            arr = arr[..., 0] + 1j * arr[..., 1]
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError(f"{path}: expected a square matrix")
        return arr.astype(complex)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"{path}: malformed matrix ({exc})") from None


def generator_to_json(G, order: int, meta: dict | None = None) -> dict:
    """Superoperator payload with its order and the vectorization convention."""
    G = np.asarray(G, dtype=complex)
    out = {
        "order": int(order),
        "vectorization": "column-stacking",
        "superoperator": matrix_to_json(G),
    }
    if meta:
        out["meta"] = meta
    return out


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed separators, trailing newline)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
