"""Dense complex linear algebra sized for the 4x4 state space and 16x16 Liouville space.

All functions are pure and operate on plain ``numpy`` complex arrays.  The
vectorization convention is column stacking, so ``vec(A X B) = (B^T kron A) vec(X)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

__all__ = [
    "Spectrum",
    "MatrixNorms",
    "EigensolverError",
    "kron",
    "vectorize",
    "devectorize",
    "partial_trace",
    "eig_general",
    "expm",
    "logm_psd",
    "norms",
    "condition_number",
]

# Relative residual allowed for a returned eigendecomposition.
EIG_RESIDUAL_RTOL = 1e-9
# Eigenvalues below this fraction of the largest one count as exact zeros (support cutoff).
PSD_SUPPORT_CUTOFF = 1e-14
# Below this smallest singular value the condition number is reported as infinite.
SINGULAR_VALUE_FLOOR = 1e-30


class EigensolverError(RuntimeError):
    """Raised when the dense eigensolver fails or returns an unusable decomposition."""


class MatrixNorms(NamedTuple):
    trace_norm: float
    frobenius_norm: float


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a general complex matrix.

    ``eigenvalues[i]`` belongs to the unit-norm column ``right_eigenvectors[:, i]``;
    eigenvalues are sorted by real part, ties broken by imaginary part.
    ``condition_number`` is kappa(V) = sigma_max(V)/sigma_min(V) of the eigenvector
    matrix; it diverges when eigenvectors coalesce.
    """

    eigenvalues: np.ndarray
    right_eigenvectors: np.ndarray
    condition_number: float


def _as_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two square matrices."""
    return np.kron(_as_square(a, "a"), _as_square(b, "b"))


def vectorize(a: np.ndarray) -> np.ndarray:
    """Column-stack a square matrix: vec(A)[j*dim + i] = A[i, j]."""
    return _as_square(a).reshape(-1, order="F")


def devectorize(v: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of :func:`vectorize` for a vector of length ``dim**2``."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.size != dim * dim:
        raise ValueError(f"vector of length {v.size} cannot devectorize to {dim}x{dim}")
    return v.reshape((dim, dim), order="F")


def partial_trace(rho: np.ndarray, keep: str) -> np.ndarray:
    """Reduced single-qubit state of a 4x4 two-qubit operator.

    The first tensor factor is qubit ``"h"``, the second ``"c"``.
    """
    rho = _as_square(rho, "rho")
    if rho.shape != (4, 4):
        raise ValueError(f"partial_trace expects a 4x4 matrix, got {rho.shape}")
    r = rho.reshape(2, 2, 2, 2)
    if keep == "h":
        return np.einsum("icjc->ij", r)
    if keep == "c":
        return np.einsum("cicj->ij", r)
    raise ValueError(f"keep must be 'h' or 'c', got {keep!r}")


def eig_general(m: np.ndarray) -> Spectrum:
    """Full eigendecomposition of a general (possibly non-Hermitian) complex matrix.

    Never fails on defective input; a defective matrix simply comes back with
    nearly parallel eigenvectors and a huge condition number, which is exactly
    the signature downstream exceptional-point analysis looks for.
    """
    m = _as_square(m)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    try:
        vals, vecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigensolver did not converge: {exc}") from exc

    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    vecs = vecs[:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)

    scale = np.linalg.norm(m)
    if scale > 0.0:
        residual = np.linalg.norm(m @ vecs - vecs * vals, axis=0).max()
        if residual > EIG_RESIDUAL_RTOL * scale:
            raise EigensolverError(
                f"eigendecomposition residual {residual:.3e} exceeds "
                f"{EIG_RESIDUAL_RTOL:.0e} * ||M||_F = {EIG_RESIDUAL_RTOL * scale:.3e} "
                f"(kappa(V) = {condition_number(vecs):.3e})"
            )
    return Spectrum(vals, vecs, condition_number(vecs))


def expm(m: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling and squaring)."""
    m = _as_square(m)
    out = scipy.linalg.expm(m)
    if not np.all(np.isfinite(out)):
        raise OverflowError(f"expm overflowed for matrix with ||M||_F = {np.linalg.norm(m):.3e}")
    return out


def _hermitian_part_check(m: np.ndarray, rtol: float) -> None:
    scale = np.linalg.norm(m)
    dev = np.abs(m - m.conj().T).max()
    if dev > rtol * max(scale, 1e-300):
        raise ValueError(f"matrix is not Hermitian: max |M - M^dag| = {dev:.3e} at scale {scale:.3e}")


def logm_psd(m: np.ndarray) -> np.ndarray:
    """Principal logarithm of a Hermitian PSD matrix, restricted to its support.

    Eigenvalues below ``1e-14 * lambda_max`` are treated as exact zeros and
    excluded, implementing the 0*ln(0) = 0 convention used by the entropies.
    """
    m = _as_square(m)
    _hermitian_part_check(m, 1e-10)
    vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    vmax = vals.max(initial=0.0)
    if vmax <= 0.0:
        raise ValueError("matrix has no positive part; logarithm undefined")
    if vals.min() < -1e-10 * vmax:
        raise ValueError(f"matrix is not PSD: min eigenvalue {vals.min():.3e} (max {vmax:.3e})")
    support = vals > PSD_SUPPORT_CUTOFF * vmax
    vs = vecs[:, support]
    return (vs * np.log(vals[support])) @ vs.conj().T


def norms(m: np.ndarray) -> MatrixNorms:
    """Trace norm (sum of singular values) and Frobenius norm."""
    m = _as_square(m)
    sv = np.linalg.svd(m, compute_uv=False)
    return MatrixNorms(trace_norm=float(sv.sum()), frobenius_norm=float(np.linalg.norm(m)))


def condition_number(v: np.ndarray) -> float:
    """sigma_max / sigma_min of a square matrix; +inf when effectively singular."""
    v = _as_square(v)
    sv = np.linalg.svd(v, compute_uv=False)
    if sv[-1] < SINGULAR_VALUE_FLOOR:
        return math.inf
    return float(sv[0] / sv[-1])
