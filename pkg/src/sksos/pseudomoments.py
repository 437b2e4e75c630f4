"""Explicit degree-4 pseudomoment extension of the nudged witness.

Rows and columns of the full matrix ``Z`` are indexed by subsets of
``range(N)`` of size at most two, ordered by size and then lexicographically:
``{}``, ``{0}``, ..., ``{N-1}``, ``{0,1}``, ``{0,2}``, ....  A reduced
extension is determined by its pair-pair block ``Z22``; every other block is
fixed by the degree-2 matrix being extended.

The construction:

* ``X22[{i,j},{k,l}] = M_ij M_kl + M_ik M_jl + M_il M_jk - 2 sum_m M_im M_jm M_km M_lm``
* ``Delta[{i,k},{i,l}] = sum_{m != i} M_im^2 M_km M_lm`` on pairs sharing an
  index, zero on disjoint pairs
* ``Z22 = (1 - alpha) (X22 + 2 Delta) + alpha I``
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InconsistentInputs
from .linalg import (
    DENSE_LIMIT,
    PairIndex,
    matvec_operator,
    max_eig,
    min_eig,
    num_pairs,
    offdiag,
    triangular_root,
)

_CHUNK = 512


def _check_unit_diagonal(M: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("M must be square")
    dev = np.max(np.abs(np.diag(M) - 1.0))
    if dev > tol:
        raise ValueError(f"M must have unit diagonal (deviation {dev:.3e})")
    return M


def _mirror_upper(X: np.ndarray, chunk: int = _CHUNK) -> None:
    """Copy the upper triangle of ``X`` onto the lower one in place, blockwise."""
    n = X.shape[0]
    for s in range(0, n, chunk):
        e = min(s + chunk, n)
        X[s:e, :s] = X[:s, s:e].T
        blk = X[s:e, s:e]
        X[s:e, s:e] = np.triu(blk) + np.triu(blk, 1).T


def quartic_factor(M: np.ndarray) -> np.ndarray:
    """``H[{i,j}, m] = M_im M_jm``, so that ``H H^T`` is the quartic column sum."""
    I, J = np.triu_indices(M.shape[0], 1)
    return M[I, :] * M[J, :]


def _pair_form(M: np.ndarray, lead: float, quart: float, chunk: int = _CHUNK) -> np.ndarray:
    """``lead * M_ij M_kl + M_ik M_jl + M_il M_jk - quart * sum_m M_im M_jm M_km M_lm``
    over pairs, built in row blocks."""
    N = M.shape[0]
    I, J = np.triu_indices(N, 1)
    npairs = I.size
    o = M[I, J]
    H = quartic_factor(M)
    X = np.empty((npairs, npairs))
    for s in range(0, npairs, chunk):
        b = slice(s, min(s + chunk, npairs))
        Ib, Jb = I[b], J[b]
        blk = M[np.ix_(Ib, I)] * M[np.ix_(Jb, J)]
        blk += M[np.ix_(Ib, J)] * M[np.ix_(Jb, I)]
        if lead != 0.0:
            blk += lead * np.outer(o[b], o)
        if quart != 0.0:
            blk -= quart * (H[b] @ H.T)
        X[b] = blk
    _mirror_upper(X)
    return X


def heuristic_X22(M: np.ndarray) -> np.ndarray:
    """The heuristic pair-pair block before the linear-constraint correction."""
    M = _check_unit_diagonal(M)
    return _pair_form(M, 1.0, 2.0)


def _delta_blocks(M: np.ndarray):
    """Yield ``(positions, partners, block)`` for each repeated index ``i``.

    ``block[a, b] = sum_{m != i} M_im^2 M_{k_a m} M_{k_b m}`` where ``k_a`` are
    the partners of ``i``.
    """
    N = M.shape[0]
    pidx = PairIndex(N)
    for i in range(N):
        pos, oth = pidx.containing(i)
        w = M[i] ** 2
        w[i] = 0.0
        Mo = M[oth]
        G = (Mo * w) @ Mo.T
        yield pos, oth, 0.5 * (G + G.T)


def delta_sparse(M: np.ndarray) -> sp.csr_matrix:
    """The correction ``Delta`` in sparse form (nonzero only on overlapping pairs)."""
    M = _check_unit_diagonal(M)
    N = M.shape[0]
    rows, cols, vals = [], [], []
    i_index = 0
    for pos, oth, G in _delta_blocks(M):
        n = pos.size
        R = np.repeat(pos, n)
        C = np.tile(pos, n)
        same = np.eye(n, dtype=bool)
        # a diagonal entry {i,j}{i,j} is taken from its smaller index only
        keep = ~same | (same & (oth > i_index)[:, None])
        keep = keep.ravel()
        rows.append(R[keep])
        cols.append(C[keep])
        vals.append(G.ravel()[keep])
        i_index += 1
    npairs = num_pairs(N)
    if npairs == 0:
        return sp.csr_matrix((0, 0))
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(npairs, npairs)).tocsr()


def correction_delta(M: np.ndarray) -> np.ndarray:
    """Dense ``Delta``; see :func:`delta_sparse`."""
    return delta_sparse(M).toarray()


@dataclass
class Deg4Pseudomoments:
    """Block-structured candidate degree-4 pseudomoment matrix."""

    N: int
    alpha: float
    Z00: float
    Z01: np.ndarray
    Z02: np.ndarray
    Z11: np.ndarray
    Z12: np.ndarray
    Z22: np.ndarray
    X22: Optional[np.ndarray] = field(default=None, repr=False)
    Delta: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def side(self) -> int:
        return 1 + self.N + num_pairs(self.N)

    def full(self) -> np.ndarray:
        N = self.N
        Z = np.zeros((self.side, self.side))
        Z[0, 0] = self.Z00
        Z[0, 1:N + 1] = self.Z01
        Z[1:N + 1, 0] = self.Z01
        Z[0, N + 1:] = self.Z02
        Z[N + 1:, 0] = self.Z02
        Z[1:N + 1, 1:N + 1] = self.Z11
        Z[1:N + 1, N + 1:] = self.Z12
        Z[N + 1:, 1:N + 1] = self.Z12.T
        Z[N + 1:, N + 1:] = self.Z22
        return Z

    def minor(self) -> np.ndarray:
        """Principal minor indexed by the empty set and the pairs."""
        p = num_pairs(self.N)
        out = np.empty((p + 1, p + 1))
        out[0, 0] = self.Z00
        out[0, 1:] = self.Z02
        out[1:, 0] = self.Z02
        out[1:, 1:] = self.Z22
        return out

    @classmethod
    def from_blocks(cls, Z11, Z02, Z22, alpha: float = 0.0, **extra) -> "Deg4Pseudomoments":
        N = Z11.shape[0]
        return cls(N=N, alpha=alpha, Z00=1.0, Z01=np.zeros(N), Z02=np.asarray(Z02, float),
                   Z11=np.asarray(Z11, float), Z12=np.zeros((N, num_pairs(N))),
                   Z22=np.asarray(Z22, float), **extra)


def assemble_Z(M: np.ndarray, alpha: float, include_delta: bool = True,
               keep_parts: bool = False) -> Deg4Pseudomoments:
    """Build ``Z`` extending ``(1 - alpha) M + alpha I``.

    ``include_delta=False`` drops the linear-constraint correction, which is
    only useful for measuring how much it matters.  ``keep_parts`` retains
    ``X22`` and dense ``Delta`` on the result for :func:`schur_split`.
    """
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    M = _check_unit_diagonal(M)
    N = M.shape[0]
    X22 = heuristic_X22(M)
    Delta = correction_delta(M) if (include_delta or keep_parts) else None
    Z22 = X22 * (1.0 - alpha) if keep_parts else X22
    if not keep_parts:
        Z22 *= (1.0 - alpha)
    if include_delta:
        Z22 += (2.0 * (1.0 - alpha)) * Delta
    Z22[np.diag_indices(Z22.shape[0])] = 1.0
    Z11 = (1.0 - alpha) * M
    Z11[np.diag_indices(N)] = 1.0
    return Deg4Pseudomoments.from_blocks(Z11, (1.0 - alpha) * offdiag(M), Z22, alpha=alpha,
                                         X22=X22 if keep_parts else None,
                                         Delta=Delta if keep_parts else None)


# --------------------------------------------------------------------------
# linear constraints


@dataclass
class ConstraintReport:
    """Worst absolute violation of each linear condition class.

    ``c2`` normalization, ``c3`` reduction (odd blocks vanish), ``c4``
    consistency of overlapping pairs with the degree-2 block, ``c5``
    permutation symmetry of ``Z22``.
    """

    c2: float
    c3: float
    c4: float
    c5: float
    worst: dict
    tol: float

    @property
    def max_violation(self) -> float:
        return max(self.c2, self.c3, self.c4, self.c5)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol

    def as_dict(self) -> dict:
        return {"c2": self.c2, "c3": self.c3, "c4": self.c4, "c5": self.c5,
                "worst": {k: list(map(int, v)) for k, v in self.worst.items()},
                "tol": self.tol, "passed": self.passed}


def _quadruple_triples(N: int):
    """Yield arrays ``(a, b, c, d)`` covering all 4-subsets ``a<b<c<d``, in chunks."""
    for a in range(N - 3):
        for b in range(a + 1, N - 2):
            rest = np.arange(b + 1, N)
            ci, di = np.triu_indices(rest.size, 1)
            if ci.size:
                yield a, b, rest[ci], rest[di]


def verify_constraints(Z: Deg4Pseudomoments, tol: float = 1e-10) -> ConstraintReport:
    N = Z.N
    pidx = PairIndex(N)
    worst = {}

    def track(name, current, value, where):
        if value > current[0]:
            current[0] = value
            worst[name] = where

    # c2: unit normalizations
    c2 = [abs(Z.Z00 - 1.0)]
    worst["c2"] = (-1, -1)
    d11 = np.abs(np.diag(Z.Z11) - 1.0)
    if d11.size:
        k = int(np.argmax(d11))
        track("c2", c2, float(d11[k]), (k, k))
    if N > 1:
        d22 = np.abs(np.diag(Z.Z22) - 1.0)
        k = int(np.argmax(d22))
        track("c2", c2, float(d22[k]), pidx.pair(k) + pidx.pair(k))

    # c3: odd-size blocks vanish
    c3 = [0.0]
    worst["c3"] = ()
    if Z.Z01.size:
        k = int(np.argmax(np.abs(Z.Z01)))
        track("c3", c3, float(abs(Z.Z01[k])), (k,))
    if Z.Z12.size:
        k, p = np.unravel_index(int(np.argmax(np.abs(Z.Z12))), Z.Z12.shape)
        track("c3", c3, float(abs(Z.Z12[k, p])), (int(k),) + pidx.pair(int(p)))

    # c4: Z22[{i,j},{i,k}] = Z02[{j,k}] = Z11[j,k]
    c4 = [0.0]
    worst["c4"] = ()
    if N >= 3:
        posmat = np.full((N, N), -1)
        posmat[pidx.first, pidx.second] = np.arange(len(pidx))
        posmat[pidx.second, pidx.first] = np.arange(len(pidx))
        for i in range(N):
            pos, oth = pidx.containing(i)
            off = ~np.eye(oth.size, dtype=bool)
            sub = Z.Z22[np.ix_(pos, pos)]
            t11 = Z.Z11[np.ix_(oth, oth)]
            t02 = np.where(off, Z.Z02[np.where(off, posmat[np.ix_(oth, oth)], 0)], 0.0)
            for diff in (np.abs(sub - t11), np.abs(t02 - t11)):
                diff = np.where(off, diff, 0.0)
                a, b = np.unravel_index(int(np.argmax(diff)), diff.shape)
                track("c4", c4, float(diff[a, b]), (i, int(oth[a]), int(oth[b])))

    # c5: symmetry of Z22 and equality of the three pairings of any 4 indices
    c5 = [0.0]
    worst["c5"] = ()
    if N >= 2:
        asym = np.abs(Z.Z22 - Z.Z22.T)
        p, q = np.unravel_index(int(np.argmax(asym)), asym.shape)
        track("c5", c5, float(asym[p, q]), pidx.pair(int(p)) + pidx.pair(int(q)))
    for a, b, c, d in _quadruple_triples(N):
        e1 = Z.Z22[pidx.position(a, b), pidx.position(c, d)]
        e2 = Z.Z22[pidx.position(np.full_like(c, a), c), pidx.position(np.full_like(c, b), d)]
        e3 = Z.Z22[pidx.position(np.full_like(d, a), d), pidx.position(np.full_like(c, b), c)]
        spread = np.maximum(np.maximum(e1, e2), e3) - np.minimum(np.minimum(e1, e2), e3)
        k = int(np.argmax(spread))
        track("c5", c5, float(spread[k]), (a, b, int(c[k]), int(d[k])))

    return ConstraintReport(c2[0], c3[0], c4[0], c5[0], worst, tol)


# --------------------------------------------------------------------------
# sign symmetrization


def set_sizes(N: int) -> np.ndarray:
    """Sizes of the index sets in the standard ordering."""
    return np.concatenate([[0], np.ones(N, int), np.full(num_pairs(N), 2)])


def reduce_pseudomoments(Zfull: np.ndarray) -> np.ndarray:
    """Average ``Z`` with its sign-flipped copy, zeroing entries with ``|S ^ T|`` odd."""
    Zfull = np.asarray(Zfull, dtype=float)
    side = Zfull.shape[0]
    N = triangular_root(side - 1)
    s = set_sizes(N)
    even = (s[:, None] + s[None, :]) % 2 == 0
    return np.where(even, Zfull, 0.0)


# --------------------------------------------------------------------------
# Schur split and PSD certification


@dataclass
class SchurPieces:
    Z1a: np.ndarray
    Z2: np.ndarray
    minor11: np.ndarray
    lambda_mins: tuple

    @property
    def lambda_min_Z1a(self) -> float:
        return self.lambda_mins[0]

    @property
    def lambda_min_Z2(self) -> float:
        return self.lambda_mins[1]

    @property
    def lambda_min_minor11(self) -> float:
        return self.lambda_mins[2]


def z1a_matrix(M: np.ndarray, alpha: float) -> np.ndarray:
    """``X22 - (1 - alpha) offdiag(M) offdiag(M)^T``."""
    M = _check_unit_diagonal(M)
    return _pair_form(M, alpha, 2.0)


def _sym_from_offdiag(a: np.ndarray, N: int, I, J) -> np.ndarray:
    A = np.zeros((N, N))
    A[I, J] = a
    A[J, I] = a
    return A


def z1a_operator(M: np.ndarray, alpha: float) -> spla.LinearOperator:
    """Matrix-free ``Z1a``: ``a -> alpha o (o.a) + offdiag(M A M) - 2 H (H^T a)``
    where ``A`` is the zero-diagonal symmetric matrix with ``offdiag(A) = a``."""
    M = _check_unit_diagonal(M)
    N = M.shape[0]
    I, J = np.triu_indices(N, 1)
    o = M[I, J]
    H = quartic_factor(M)

    def apply(a):
        a = np.ravel(a)
        A = _sym_from_offdiag(a, N, I, J)
        return alpha * o * (o @ a) + (M @ A @ M)[I, J] - 2.0 * (H @ (H.T @ a))

    return matvec_operator(I.size, apply)


def minor_operator(M: np.ndarray, alpha: float) -> spla.LinearOperator:
    """Matrix-free minor of ``Z`` over the empty set and the pairs."""
    M = _check_unit_diagonal(M)
    N = M.shape[0]
    I, J = np.triu_indices(N, 1)
    o = M[I, J]
    H = quartic_factor(M)
    D = delta_sparse(M)
    z02 = (1.0 - alpha) * o

    def apply(x):
        x = np.ravel(x)
        x0, y = x[0], x[1:]
        A = _sym_from_offdiag(y, N, I, J)
        xy = o * (o @ y) + (M @ A @ M)[I, J] - 2.0 * (H @ (H.T @ y)) + 2.0 * (D @ y)
        z22y = (1.0 - alpha) * xy + alpha * y
        return np.concatenate([[x0 + z02 @ y], z02 * x0 + z22y])

    return matvec_operator(I.size + 1, apply)


def schur_split(Z: Deg4Pseudomoments, M: np.ndarray, alpha: float,
                method: str = "auto", check_tol: float = 1e-10) -> SchurPieces:
    """Split ``Z22 - Z02 Z02^T / Z00`` into the main and correction terms.

    ``Z1 = alpha/2 I + (1 - alpha) Z1a`` and ``Z2 = alpha/2 I + 2 (1 - alpha) Delta``.
    """
    M = _check_unit_diagonal(M)
    X22 = Z.X22 if Z.X22 is not None else heuristic_X22(M)
    Delta = Z.Delta if Z.Delta is not None else correction_delta(M)
    o = offdiag(M)
    Z1a = X22 - (1.0 - alpha) * np.outer(o, o)
    Z2 = 2.0 * (1.0 - alpha) * Delta
    Z2[np.diag_indices(Z2.shape[0])] += 0.5 * alpha
    recon = (1.0 - alpha) * Z1a + Z2
    recon[np.diag_indices(recon.shape[0])] += 0.5 * alpha
    schur = Z.Z22 - np.outer(Z.Z02, Z.Z02) / Z.Z00
    err = float(np.max(np.abs(schur - recon))) if schur.size else 0.0
    if err > check_tol:
        raise InconsistentInputs(f"Schur identity fails by {err:.3e}; Z was not built from this M and alpha")
    lams = (min_eig(Z1a, method), min_eig(Z2, method), min_eig(Z.Z11, "dense"))
    return SchurPieces(Z1a, Z2, Z.Z11, lams)


@dataclass
class PsdVerdict:
    status: str           # "PASS", "FAIL" or "INCONCLUSIVE"
    lambda_min: float
    op_norm: float
    method: str
    threshold: float

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    def as_dict(self) -> dict:
        return {"status": self.status, "lambda_min": self.lambda_min, "op_norm": self.op_norm,
                "method": self.method, "threshold": self.threshold}


def certify_psd(Z: Deg4Pseudomoments, tol: float = 1e-8, method: str = "full",
                eig_method: str = "auto", M: np.ndarray | None = None) -> PsdVerdict:
    """Decide ``Z >= -tol * max(1, ||Z||_op)``.

    ``method="full"`` computes the smallest eigenvalue of ``Z`` as the minimum
    over its two direct summands (``Z11`` and the empty-set/pairs minor).
    ``method="split"`` only certifies through the Schur pieces, which is
    sufficient but not necessary, so it may return ``INCONCLUSIVE``; it needs
    the base witness ``M``.
    """
    if method == "full":
        minor = Z.minor()
        if eig_method == "auto":
            eig_method = "dense" if minor.shape[0] <= DENSE_LIMIT else "iterative"
        lam = min(min_eig(minor, eig_method), min_eig(Z.Z11, "dense"))
        top = max(max_eig(minor, "iterative"), max_eig(Z.Z11, "dense"))
        norm = max(abs(lam), abs(top))
        threshold = -tol * max(1.0, norm)
        return PsdVerdict("PASS" if lam >= threshold else "FAIL", lam, norm, method, threshold)
    if method == "split":
        if M is None:
            raise ValueError("split certification needs the base witness M")
        pieces = schur_split(Z, M, Z.alpha, eig_method)
        a = Z.alpha
        schur_bound = 0.5 * a + (1.0 - a) * pieces.lambda_min_Z1a + pieces.lambda_min_Z2
        lam = min(schur_bound, pieces.lambda_min_minor11)
        norm = max(abs(max_eig(Z.minor(), "iterative")), max_eig(Z.Z11, "dense"))
        threshold = -tol * max(1.0, norm)
        return PsdVerdict("PASS" if lam >= threshold else "INCONCLUSIVE", lam, norm, method,
                          threshold)
    raise ValueError(f"unknown method {method!r}")
