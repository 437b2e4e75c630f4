"""Tight frames and the closed-form degree-4 extension of ETF Gram matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InfeasibleDimension, RankDeficient
from .linalg import isovec_inverse, isovec_matrix, offdiag
from .pseudomoments import Deg4Pseudomoments, _pair_form

SVD_CUTOFF = 1e-10


@dataclass(frozen=True)
class Frame:
    """``N`` vectors in ``R^r`` stored as the columns of ``vectors``."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError("frame needs an r x N array with N >= 1")
        if not np.all(np.isfinite(v)):
            raise ValueError("frame has non-finite entries")
        object.__setattr__(self, "vectors", v)

    @property
    def r(self) -> int:
        return self.vectors.shape[0]

    @property
    def N(self) -> int:
        return self.vectors.shape[1]

    def gram(self) -> np.ndarray:
        return self.vectors.T @ self.vectors


def helmert_basis(n: int) -> np.ndarray:
    """``(n-1) x n`` matrix whose orthonormal rows span the complement of the all-ones vector."""
    H = np.zeros((n - 1, n))
    for k in range(1, n):
        H[k - 1, :k] = 1.0
        H[k - 1, k] = -float(k)
        H[k - 1] /= math.sqrt(k * (k + 1))
    return H


def simplex_etf(r: int) -> Frame:
    """The ``r + 1`` vertices of a regular simplex in ``R^r``; pairwise inner product ``-1/r``."""
    if r < 2:
        raise ValueError("need r >= 2")
    n = r + 1
    # columns of the Helmert basis are the projected standard basis vectors,
    # each of squared norm r/(r+1)
    return Frame(helmert_basis(n) * math.sqrt(n / r))


def harmonic_frame(r: int, N: int, first: int = 1) -> Frame:
    """Unit-norm tight frame of ``N`` vectors in ``R^r`` (``r`` even), scaled so that
    the rows are orthonormal: rows are ``cos`` and ``sin`` of ``2 pi j t / N`` for
    the frequencies ``j = first, ..., first + r/2 - 1``.  Every column has squared
    norm ``r / N``."""
    if r % 2 or r < 2:
        raise ValueError("harmonic frames need an even r >= 2")
    if first < 1 or 2 * (first + r // 2 - 1) >= N:
        raise ValueError("frequencies must lie in 1 .. (N-1)/2")
    t = 2 * np.pi * np.arange(N) / N
    freqs = np.arange(first, first + r // 2)
    rows = np.empty((r, N))
    rows[0::2] = np.cos(np.outer(freqs, t))
    rows[1::2] = np.sin(np.outer(freqs, t))
    return Frame(rows * math.sqrt(2.0 / N))


@dataclass(frozen=True)
class FrameVerdict:
    is_untf: bool
    norm_residual: float      # max_i | ||v_i|| - 1 |
    tight_residual: float     # ||sum v v^T - (N/r) I||_F
    is_etf: bool
    mu: float
    mu_deviation: float       # max_{i != j} | |<v_i, v_j>| - mu |


def _frame_residuals(F: Frame):
    V = F.vectors
    norm_res = float(np.max(np.abs(np.linalg.norm(V, axis=0) - 1.0)))
    tight_res = float(np.linalg.norm(V @ V.T - (F.N / F.r) * np.eye(F.r)))
    if F.N > 1:
        c = np.abs(offdiag(F.gram()))
        mu = float(np.mean(c))
        mu_dev = float(np.max(np.abs(c - mu)))
    else:
        mu, mu_dev = 0.0, 0.0
    return norm_res, tight_res, mu, mu_dev


def check_untf(F: Frame, tol: float = 1e-10) -> FrameVerdict:
    return check_etf(F, tol)


def check_etf(F: Frame, tol: float = 1e-10) -> FrameVerdict:
    """Residual-based UNTF and ETF verdicts; ``is_etf`` implies ``is_untf``."""
    norm_res, tight_res, mu, mu_dev = _frame_residuals(F)
    untf = norm_res <= tol and tight_res <= tol
    return FrameVerdict(untf, norm_res, tight_res, untf and mu_dev <= tol, mu, mu_dev)


@dataclass(frozen=True)
class PerturbationProjector:
    matrix: np.ndarray   # projector on offdiag coordinates, side N(N-1)/2
    basis: np.ndarray    # orthonormal columns spanning its range
    rank: int


def perturbation_projector(F: Frame, cutoff: float = SVD_CUTOFF) -> PerturbationProjector:
    """Projector onto ``offdiag`` of the perturbation subspace of the Gram matrix.

    The subspace is ``{Vhat^T S Vhat : S symmetric, vhat_i^T S vhat_i = 0 for all i}``;
    ``S`` ranges over the null space of the ``N x r(r+1)/2`` matrix whose rows
    are ``isovec(vhat_i vhat_i^T)``.
    """
    Vh = F.vectors / np.linalg.norm(F.vectors, axis=0)
    s = np.linalg.svd(Vh, compute_uv=False)
    if s.size < F.r or s[F.r - 1] <= cutoff * max(1.0, s[0]):
        raise RankDeficient("frame vectors do not span R^r")
    C = isovec_matrix(np.einsum("ai,bi->iab", Vh, Vh)).T
    _, sv, Vt = np.linalg.svd(C, full_matrices=True)
    rank_c = int(np.sum(sv > cutoff * max(1.0, sv[0])))
    null = Vt[rank_c:]
    npairs = F.N * (F.N - 1) // 2
    if null.shape[0] == 0 or npairs == 0:
        return PerturbationProjector(np.zeros((npairs, npairs)), np.zeros((npairs, 0)), 0)
    Y = np.column_stack([offdiag(Vh.T @ isovec_inverse(x) @ Vh) for x in null])
    U, sy, _ = np.linalg.svd(Y, full_matrices=False)
    k = int(np.sum(sy > cutoff * max(1.0, sy[0])))
    B = U[:, :k]
    Pm = B @ B.T
    return PerturbationProjector(0.5 * (Pm + Pm.T), B, k)


def etf_coefficients(r: int, N: int) -> tuple[float, float]:
    """Coefficients ``(a, b)`` of the entrywise extension
    ``a (M_ij M_kl + M_ik M_jl + M_il M_jk) - b sum_m M_im M_jm M_km M_lm``."""
    denom = r * (r + 1) / 2 - N
    return (r * (r - 1) / 2) / denom, r * r * (1 - 1 / N) / denom


def etf_spectral_coefficient(r: int, N: int) -> float:
    return N * N * (1 - 1 / r) / (r * (r + 1) - 2 * N)


def _require_feasible(F: Frame, tol: float) -> None:
    if F.N >= F.r * (F.r + 1) / 2:
        raise InfeasibleDimension(
            f"N = {F.N} >= r(r+1)/2 = {F.r * (F.r + 1) // 2}: no degree-4 extension exists")
    verdict = check_etf(F, tol)
    if not verdict.is_etf:
        raise ValueError(f"frame is not an ETF within {tol} "
                         f"(norm {verdict.norm_residual:.2e}, tight {verdict.tight_residual:.2e}, "
                         f"angle {verdict.mu_deviation:.2e})")


def _wrap(M: np.ndarray, Z22: np.ndarray) -> Deg4Pseudomoments:
    return Deg4Pseudomoments.from_blocks(M, offdiag(M), Z22, alpha=0.0)


def etf_deg4_extension(F: Frame, tol: float = 1e-9) -> Deg4Pseudomoments:
    """Entrywise closed form of the ETF extension."""
    _require_feasible(F, tol)
    M = F.gram()
    a, b = etf_coefficients(F.r, F.N)
    return _wrap(M, a * _pair_form(M, 1.0, b / a))


def etf_extension_spectral(F: Frame, tol: float = 1e-9) -> Deg4Pseudomoments:
    """``offdiag(M) offdiag(M)^T + c P_pert`` with ``c = N^2 (1 - 1/r) / (r(r+1) - 2N)``."""
    _require_feasible(F, tol)
    M = F.gram()
    o = offdiag(M)
    proj = perturbation_projector(F).matrix
    return _wrap(M, np.outer(o, o) + etf_spectral_coefficient(F.r, F.N) * proj)


def read_frame(path) -> Frame:
    """Parse ``FRAME r N`` followed by ``r`` lines of ``N`` values."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 3 or head[0] != "FRAME":
        raise ValueError(f"bad header {lines[0]!r}, expected 'FRAME r N'")
    r, N = int(head[1]), int(head[2])
    rows = [ln.split() for ln in lines[1:]]
    if len(rows) != r or any(len(x) != N for x in rows):
        raise ValueError(f"expected {r} rows of {N} values")
    return Frame(np.array(rows, dtype=float))


def write_frame(path, F: Frame) -> None:
    lines = [f"FRAME {F.r} {F.N}"] + [" ".join(repr(float(x)) for x in row) for row in F.vectors]
    Path(path).write_text("\n".join(lines) + "\n")
