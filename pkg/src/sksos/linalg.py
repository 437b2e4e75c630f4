"""Dense symmetric linear algebra shared by every other module.

Symmetric matrices are plain ``numpy`` arrays; :func:`as_symmetric` validates
and canonicalizes them (upper triangle authoritative).  Pairs ``{i, j}`` with
``i < j`` are ordered lexicographically, matching the ordering of
``offdiag`` and of the rows of the degree-4 block ``Z22``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .errors import LengthNotTriangular, NoConvergence

SQRT2 = math.sqrt(2.0)

# Largest side for which dense eigensolves are used by default.
DENSE_LIMIT = 8000

MatrixLike = Union[np.ndarray, spla.LinearOperator, "scipy.sparse.spmatrix"]


def as_symmetric(A, tol: float = 0.0) -> np.ndarray:
    """Return ``A`` as a float array with the lower triangle copied from the upper.

    Raises ``ValueError`` if ``A`` is not square or its asymmetry exceeds
    ``tol * max(1, max|A|)``.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A))))
    asym = float(np.max(np.abs(A - A.T)))
    if asym > tol * scale:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    iu = np.triu_indices(A.shape[0], 1)
    A.T[iu] = A[iu]
    return A


# --------------------------------------------------------------------------
# pair indexing and vectorization


class PairIndex:
    """Bijection between pairs ``{i, j}`` (``i < j``) of ``range(N)`` and
    positions ``0 .. N(N-1)/2 - 1`` in lexicographic order."""

    def __init__(self, N: int):
        if N < 1:
            raise ValueError("N must be positive")
        self.N = int(N)
        self.first, self.second = np.triu_indices(self.N, 1)

    def __len__(self) -> int:
        return self.N * (self.N - 1) // 2

    def position(self, i, j):
        """Flat position of ``{i, j}``; accepts scalars or integer arrays."""
        i = np.asarray(i)
        j = np.asarray(j)
        if np.any(i == j):
            raise ValueError("a pair needs two distinct indices")
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        pos = lo * self.N - lo * (lo + 1) // 2 + (hi - lo - 1)
        return int(pos) if pos.ndim == 0 else pos

    def pair(self, p: int) -> tuple[int, int]:
        if not 0 <= p < len(self):
            raise IndexError(p)
        return int(self.first[p]), int(self.second[p])

    def containing(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Positions of all pairs containing ``i`` and the partner index of each,
        ordered by partner."""
        others = np.delete(np.arange(self.N), i)
        return self.position(np.full_like(others, i), others), others


def num_pairs(N: int) -> int:
    return N * (N - 1) // 2


def triangular_root(length: int) -> int:
    """The ``n`` with ``n(n+1)/2 == length``."""
    n = (math.isqrt(8 * length + 1) - 1) // 2
    if length < 1 or n * (n + 1) // 2 != length:
        raise LengthNotTriangular(f"length {length} is not n(n+1)/2 for an integer n >= 1")
    return n


def offdiag(A: np.ndarray) -> np.ndarray:
    """Strict upper triangle in lexicographic pair order, unscaled."""
    A = np.asarray(A, dtype=float)
    return A[np.triu_indices(A.shape[0], 1)]


def isovec(A: np.ndarray) -> np.ndarray:
    """Isometric vectorization ``[diag(A); sqrt(2) offdiag(A)]``.

    ``isovec(A) @ isovec(B) == <A, B>_F`` for symmetric ``A``, ``B``.
    """
    A = np.asarray(A, dtype=float)
    return np.concatenate([np.diag(A), SQRT2 * offdiag(A)])


def isovec_inverse(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = triangular_root(x.shape[0])
    A = np.diag(x[:n])
    iu = np.triu_indices(n, 1)
    off = x[n:] / SQRT2
    A[iu] = off
    A.T[iu] = off
    return A


def isovec_matrix(mats: np.ndarray) -> np.ndarray:
    """Stack ``isovec`` of a batch ``(m, n, n)`` into an ``(n(n+1)/2, m)`` matrix
    whose columns are the vectorizations."""
    mats = np.asarray(mats, dtype=float)
    n = mats.shape[-1]
    iu = np.triu_indices(n, 1)
    diag = np.diagonal(mats, axis1=1, axis2=2)
    return np.concatenate([diag, SQRT2 * mats[:, iu[0], iu[1]]], axis=1).T


def hadamard_square(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return A * A


# --------------------------------------------------------------------------
# eigensolvers


@dataclass(frozen=True)
class EigResult:
    """Eigenvalues sorted descending with eigenvectors as aligned columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def fix_signs(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip columns so that the first coordinate above ``tol`` in magnitude is positive."""
    vectors = np.array(vectors, dtype=float)
    lead = np.argmax(np.abs(vectors) > tol, axis=0)
    signs = np.sign(vectors[lead, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig(A: np.ndarray) -> EigResult:
    """Full spectral decomposition, eigenvalues descending, signs fixed."""
    A = as_symmetric(A, tol=1e-12)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    try:
        w, V = scipy.linalg.eigh(A, driver="evd")
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NoConvergence(str(exc)) from exc
    return EigResult(w[::-1].copy(), fix_signs(V[:, ::-1]))


def _as_operator(A) -> spla.LinearOperator:
    if callable(A) and not isinstance(A, (np.ndarray, spla.LinearOperator)):
        raise TypeError("pass a LinearOperator for matrix-free input")
    return spla.aslinearoperator(A)


def _extremal(op: spla.LinearOperator, which: str, tol: float, maxiter: int | None) -> float:
    n = op.shape[0]
    if n <= 2:
        dense = op @ np.eye(n)
        w = np.linalg.eigvalsh(0.5 * (dense + dense.T))
        return float(w[-1] if which == "LA" else w[0])
    # fixed starting vector keeps the solver deterministic
    v0 = np.ones(n) / math.sqrt(n) + np.sin(np.arange(n)) * 1e-3
    try:
        vals = spla.eigsh(op, k=1, which=which, tol=tol, v0=v0, maxiter=maxiter,
                          ncv=min(n - 1, 40), return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise NoConvergence(f"Lanczos did not converge: {exc}") from exc
    return float(vals[0])


def max_eig(A, method: str = "auto", tol: float = 0.0, maxiter: int | None = None) -> float:
    method = _resolve_method(A, method)
    if method == "dense":
        A = _dense(A)
        n = A.shape[0]
        return float(scipy.linalg.eigh(A, eigvals_only=True, subset_by_index=[n - 1, n - 1],
                                       driver="evr")[0])
    return _extremal(_as_operator(A), "LA", tol, maxiter)


def min_eig(A, method: str = "auto", tol: float = 0.0, maxiter: int | None = None) -> float:
    """Smallest eigenvalue of a symmetric matrix.

    ``method="dense"`` uses LAPACK; ``"iterative"`` runs Lanczos on the
    shifted operator ``s I - A`` with ``s = lambda_max(A)`` so that the wanted
    eigenvalue becomes the largest one (no factorization or inverse needed).
    ``A`` may be an array, a sparse matrix, or a ``LinearOperator``; ``"auto"``
    picks dense for arrays up to :data:`DENSE_LIMIT`.
    """
    method = _resolve_method(A, method)
    if method == "dense":
        A = _dense(A)
        return float(scipy.linalg.eigh(A, eigvals_only=True, subset_by_index=[0, 0],
                                       driver="evr")[0])
    op = _as_operator(A)
    if op.shape[0] <= 2:
        return _extremal(op, "SA", tol, maxiter)
    shift = _extremal(op, "LA", tol, maxiter)
    shifted = spla.LinearOperator(op.shape, matvec=lambda x: shift * x - op @ x,
                                  dtype=float)
    return shift - _extremal(shifted, "LA", tol, maxiter)


def op_norm(A, method: str = "auto") -> float:
    """Largest singular value; ``max |eigenvalue|`` for symmetric input."""
    if isinstance(A, np.ndarray) and A.ndim == 2 and A.shape[0] != A.shape[1]:
        return float(scipy.linalg.svdvals(A)[0])
    method = _resolve_method(A, method)
    if method == "dense":
        w = np.linalg.eigvalsh(_dense(A))
        return float(max(abs(w[0]), abs(w[-1])))
    return max(abs(max_eig(A, "iterative")), abs(min_eig(A, "iterative")))


def _resolve_method(A, method: str) -> str:
    if method not in ("auto", "dense", "iterative"):
        raise ValueError(f"unknown method {method!r}")
    if method != "auto":
        if method == "dense" and isinstance(A, spla.LinearOperator):
            raise ValueError("dense method needs an explicit matrix")
        return method
    if isinstance(A, np.ndarray) and A.shape[0] <= DENSE_LIMIT:
        return "dense"
    return "iterative"


def _dense(A) -> np.ndarray:
    if hasattr(A, "toarray"):
        A = A.toarray()
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)


# --------------------------------------------------------------------------
# text dump format: "SYM n" followed by n rows of n values


def write_sym_matrix(path, A: np.ndarray) -> None:
    A = as_symmetric(A, tol=1e-12)
    n = A.shape[0]
    lines = [f"SYM {n}"]
    lines += [" ".join(repr(float(x)) for x in row) for row in A]
    Path(path).write_text("\n".join(lines) + "\n")


def read_sym_matrix(path) -> np.ndarray:
    text = Path(path).read_text().split("\n")
    header = text[0].split()
    if len(header) != 2 or header[0] != "SYM":
        raise ValueError(f"bad header {text[0]!r}, expected 'SYM n'")
    n = int(header[1])
    rows = [line.split() for line in text[1:] if line.strip()]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ValueError(f"expected {n} rows of {n} values")
    A = np.array(rows, dtype=float)
    if np.max(np.abs(A - A.T)) > 1e-12:
        raise ValueError("matrix in file is not symmetric within 1e-12")
    return as_symmetric(A, tol=1e-12)


def matvec_operator(n: int, matvec: Callable[[np.ndarray], np.ndarray]) -> spla.LinearOperator:
    """Wrap a symmetric matrix-apply callback as a ``LinearOperator``."""
    return spla.LinearOperator((n, n), matvec=matvec, rmatvec=matvec, dtype=float)
