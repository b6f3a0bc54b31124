"""Dense complex linear-algebra primitives.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Everything here is a
pure function; nothing mutates its inputs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from mpsh.errors import DimensionError, NotHermitianError, NumericalError

CMatrix = NDArray[np.complex128]

_DEFAULT_TOL = 1e-10
_tol = float(os.environ.get("MPSH_TOL", _DEFAULT_TOL))


def get_tol() -> float:
    """Return the global absolute tolerance used for equality and PSD tests."""
    return _tol


def set_tol(tol: float) -> None:
    """Set the global absolute tolerance."""
    global _tol
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    _tol = float(tol)


def _resolve(tol: float | None) -> float:
    return _tol if tol is None else tol


def as_matrix(a: ArrayLike) -> CMatrix:
    """Coerce to a finite 2-D complex array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def as_square(a: ArrayLike) -> CMatrix:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def dagger(a: ArrayLike) -> CMatrix:
    return np.conj(np.asarray(a, dtype=np.complex128)).T


def kron(a: ArrayLike, b: ArrayLike, *rest: ArrayLike) -> CMatrix:
    """Kronecker product of two or more matrices, left factor slowest."""
    return reduce(np.kron, (as_matrix(m) for m in rest), np.kron(as_matrix(a), as_matrix(b)))


def trace(a: ArrayLike) -> complex:
    """Plain diagonal sum (not divided by the dimension)."""
    return complex(np.trace(as_square(a)))


def partial_trace_tail(x: ArrayLike, keep: int, dims: Sequence[int]) -> CMatrix:
    """Trace out every site after the first ``keep`` sites.

    Args:
        x: Operator on ``len(dims)`` sites, first site slowest.
        keep: Number of leading sites kept.
        dims: Local dimension of each site.

    Returns:
        Operator on the first ``keep`` sites.
    """
    m = as_square(x)
    dims = [int(d) for d in dims]
    if not 0 <= keep <= len(dims):
        raise DimensionError(f"keep={keep} outside 0..{len(dims)}")
    total = int(np.prod(dims, dtype=np.int64))
    if m.shape[0] != total:
        raise DimensionError(f"matrix dimension {m.shape[0]} does not match product of dims {total}")
    head = int(np.prod(dims[:keep], dtype=np.int64))
    tail = total // head
    return np.einsum("atbt->ab", m.reshape(head, tail, head, tail))


def is_hermitian(h: ArrayLike, tol: float | None = None) -> bool:
    m = as_square(h)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= _resolve(tol))


def hermitian_part(m: ArrayLike) -> CMatrix:
    """(m + m†)/2."""
    m = as_square(m)
    return 0.5 * (m + m.conj().T)


def antihermitian_part(m: ArrayLike) -> CMatrix:
    """(m - m†)/(2i), itself Hermitian."""
    m = as_square(m)
    return (m - m.conj().T) / 2j


def eig_hermitian(h: ArrayLike, tol: float | None = None) -> tuple[NDArray[np.float64], CMatrix]:
    """Eigenpairs of a Hermitian matrix, eigenvalues in descending order.

    Columns of the returned matrix are the eigenvectors.
    """
    m = as_square(h)
    if not is_hermitian(m, tol if tol is not None else max(_tol, 1e-12 * max(1.0, np.abs(m).max(initial=0.0)))):
        raise NotHermitianError("eig_hermitian requires a Hermitian matrix")
    try:
        w, v = scipy.linalg.eigh(hermitian_part(m))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(str(exc)) from exc
    return w[::-1].copy(), v[:, ::-1].copy()


def eig_general(m: ArrayLike) -> tuple[NDArray[np.complex128], CMatrix]:
    """Eigenpairs of a general square matrix, sorted by descending modulus.

    Ties in modulus are broken by descending real part so the ordering is stable.
    """
    a = as_square(m)
    try:
        w, v = scipy.linalg.eig(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(str(exc)) from exc
    order = np.lexsort((-w.real, -np.round(np.abs(w), 12)))
    return w[order].astype(np.complex128), v[:, order].astype(np.complex128)


@dataclass(frozen=True)
class HermitianDecomposition:
    """Split ``h = positive_part - negative_part`` with orthogonal supports."""

    positive_part: CMatrix
    negative_part: CMatrix

    def reconstruct(self) -> CMatrix:
        return self.positive_part - self.negative_part


def positive_negative_parts(h: ArrayLike, tol: float | None = None) -> HermitianDecomposition:
    """Spectral split of a Hermitian matrix into positive and negative parts."""
    m = as_square(h)
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if not is_hermitian(m, _resolve(tol) * scale):
        raise NotHermitianError("positive_negative_parts requires a Hermitian matrix")
    w, v = scipy.linalg.eigh(hermitian_part(m))
    pos = np.clip(w, 0.0, None)
    neg = np.clip(-w, 0.0, None)
    return HermitianDecomposition(
        positive_part=(v * pos) @ v.conj().T,
        negative_part=(v * neg) @ v.conj().T,
    )


def trace_norm_hermitian(h: ArrayLike) -> float:
    """Tr(h₊) + Tr(h₋) for Hermitian ``h``, i.e. the sum of |eigenvalues|."""
    return float(np.sum(np.abs(scipy.linalg.eigvalsh(hermitian_part(h)))))


def tv_norm(m: ArrayLike) -> float:
    """Total variation norm: trace norms of the real and imaginary Hermitian parts, summed."""
    a = as_square(m)
    return trace_norm_hermitian(hermitian_part(a)) + trace_norm_hermitian(antihermitian_part(a))


def is_psd(h: ArrayLike, tol: float | None = None) -> bool:
    m = as_square(h)
    if not is_hermitian(m, max(_resolve(tol), 1e-12 * max(1.0, np.abs(m).max(initial=0.0)))):
        return False
    return bool(scipy.linalg.eigvalsh(hermitian_part(m))[0] >= -_resolve(tol))


def max_abs(m: ArrayLike) -> float:
    """Entrywise max-norm."""
    return float(np.max(np.abs(np.asarray(m)), initial=0.0))


def embed(x: ArrayLike, left: int, right: int) -> CMatrix:
    """I_left ⊗ x ⊗ I_right."""
    out = as_square(x)
    if left > 1:
        out = np.kron(np.eye(left), out)
    if right > 1:
        out = np.kron(out, np.eye(right))
    return out


# Pauli matrices
I2 = np.eye(2, dtype=np.complex128)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def matrix_unit(dim: int, i: int, j: int) -> CMatrix:
    """|i⟩⟨j| with 0-based indices."""
    e = np.zeros((dim, dim), dtype=np.complex128)
    e[i, j] = 1.0
    return e
