"""Gaussian symmetric-tensor models for conjectural higher-degree pseudomoments.

A symmetric tensor ``B`` in ``Sym^k(R^n)`` is stored by its isometric
coordinates ``y_t = sqrt(mult(t)) B_t`` over non-decreasing index tuples
``t``, where ``mult(t)`` is the number of distinct arrangements of ``t``.
Then ``y . y'`` equals the Frobenius inner product of the full tensors, and
the symmetrized gaussian law with scale ``sigma^2`` is ``N(0, sigma^2 I)``.

A degree-``2k`` model for a frame ``V`` (``r x N``, orthonormal rows) reads
``A_i = <B, v_{i1} (x) ... (x) v_{ik}>`` for tuples ``i`` in ``[N]^k``.  Writing
``A`` this way already confines every slice to the row space of ``V``, by
rotation invariance of the base law; ``ambient=True`` instead works in
``Sym^k(R^N)`` and imposes that confinement as explicit linear constraints,
which is only practical for small ``N`` and serves as a cross-check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import DimBudgetExceeded, InconsistentConstraints, NoConvergence, RankDeficient

PINV_CUTOFF = 1e-10
DIM_BUDGET = 4000


class SymTensorSpace:
    """Canonical coordinates for ``Sym^k(R^n)``."""

    def __init__(self, n: int, k: int):
        if n < 1 or k < 0:
            raise ValueError("need n >= 1 and k >= 0")
        self.n, self.k = int(n), int(k)
        self.tuples = np.array(list(itertools.combinations_with_replacement(range(n), k)),
                               dtype=int).reshape(-1, k)
        self.mult = np.array([_arrangements(t) for t in self.tuples], dtype=float)
        self._index = {tuple(t): p for p, t in enumerate(self.tuples)}

    @property
    def dim(self) -> int:
        return self.tuples.shape[0]

    def index(self, t) -> int:
        return self._index[tuple(sorted(t))]

    def from_full(self, T: np.ndarray) -> np.ndarray:
        """Isometric coordinates of a symmetric full tensor of shape ``(n,)*k``."""
        if self.k == 0:
            return np.array([float(T)])
        return np.sqrt(self.mult) * T[tuple(self.tuples.T)]

    def to_full(self, y: np.ndarray) -> np.ndarray:
        T = np.zeros((self.n,) * self.k)
        vals = np.asarray(y) / np.sqrt(self.mult)
        for t, v in zip(self.tuples, vals):
            for perm in set(itertools.permutations(t)):
                T[perm] = v
        return T

    def symmetric_product_coords(self, U: np.ndarray, tuples: np.ndarray) -> np.ndarray:
        """Rows: coordinates of ``sym(u_{i1} (x) ... (x) u_{ik})`` for each row ``i`` of
        ``tuples``, where ``u_j`` are the columns of ``U`` (``n x N``)."""
        tuples = np.asarray(tuples, dtype=int).reshape(-1, self.k)
        if self.k == 0:
            return np.ones((tuples.shape[0], 1))
        acc = np.zeros((self.dim, tuples.shape[0]))
        perms = list(itertools.permutations(range(self.k)))
        for perm in perms:
            term = np.ones_like(acc)
            for slot, src in enumerate(perm):
                term *= U[self.tuples[:, slot]][:, tuples[:, src]]
            acc += term
        acc /= len(perms)
        return (np.sqrt(self.mult)[:, None] * acc).T


def _arrangements(t) -> int:
    counts = np.unique(np.asarray(t), return_counts=True)[1] if len(t) else []
    out = math.factorial(len(t))
    for c in counts:
        out //= math.factorial(int(c))
    return out


def all_tuples(N: int, k: int) -> np.ndarray:
    """``[N]^k`` in lexicographic order, shape ``(N^k, k)``."""
    if k == 0:
        return np.zeros((1, 0), dtype=int)
    return np.array(list(itertools.product(range(N), repeat=k)), dtype=int).reshape(-1, k)


# --------------------------------------------------------------------------
# gaussian models


@dataclass
class GaussianTensorModel:
    """Jointly gaussian coordinates ``y ~ N(mean, covariance)``.

    ``blocks`` maps each tensor order to its slice of ``y``; ``readouts`` maps
    an order ``q`` to the ``(N^q, len(y))`` matrix sending ``y`` to the
    entries ``A^(q)_i`` (present once a frame is attached).
    """

    space: SymTensorSpace
    mean: np.ndarray
    covariance: np.ndarray
    sigma_sq: dict
    blocks: dict = field(default_factory=dict)
    readouts: dict = field(default_factory=dict, repr=False)
    constraint_rows: np.ndarray | None = field(default=None, repr=False)
    constraint_values: np.ndarray | None = field(default=None, repr=False)
    info: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.space.k

    def entry_moments(self, q: int) -> np.ndarray:
        """``E[A^(q)_i A^(q)_j]`` over ``[N]^q x [N]^q``."""
        R = self.readouts[q]
        m = R @ self.mean
        return np.outer(m, m) + R @ self.covariance @ R.T


def permutation_count_covariance(n: int, k: int, sigma_sq: float) -> np.ndarray:
    """Covariance of the raw canonical entries of the symmetrized gaussian tensor.

    ``A_t = (sigma/k!) sum_pi G_{t o pi}`` with iid standard ``G``, so
    ``Cov(A_t, A_s) = sigma^2 #{(pi, pi') : t o pi = s o pi'} / (k!)^2``.
    """
    space = SymTensorSpace(n, k)
    perms = list(itertools.permutations(range(k)))
    C = np.zeros((space.dim, space.dim))
    arranged = [[tuple(t[list(p)]) for p in perms] for t in space.tuples]
    for a in range(space.dim):
        for b in range(a, space.dim):
            count = sum(x == y for x in arranged[a] for y in arranged[b])
            C[a, b] = C[b, a] = count
    return sigma_sq * C / math.factorial(k) ** 2


def base_tensor_law(r: int, k: int, sigma_sq: float) -> GaussianTensorModel:
    """The symmetrized gaussian law on ``Sym^k(R^r)`` in isometric coordinates."""
    if k < 1:
        raise ValueError("k must be at least 1")
    space = SymTensorSpace(r, k)
    raw = permutation_count_covariance(r, k, sigma_sq)
    w = np.sqrt(space.mult)
    cov = raw * np.outer(w, w)
    return GaussianTensorModel(space, np.zeros(space.dim), cov, {k: float(sigma_sq)},
                               blocks={k: slice(0, space.dim)})


def sample_symmetrized_gaussian(n: int, k: int, sigma_sq: float, size: int,
                                rng: np.random.Generator) -> np.ndarray:
    """Monte Carlo draws of the raw canonical entries, shape ``(size, dim)``."""
    space = SymTensorSpace(n, k)
    G = rng.standard_normal((size,) + (n,) * k)
    perms = list(itertools.permutations(range(1, k + 1)))
    S = sum(np.transpose(G, (0,) + p) for p in perms) * (math.sqrt(sigma_sq) / math.factorial(k))
    return S[(slice(None),) + tuple(space.tuples.T)]


def condition_gaussian(model: GaussianTensorModel, C: np.ndarray, b: np.ndarray,
                       cutoff: float = PINV_CUTOFF) -> GaussianTensorModel:
    """Condition ``y`` on ``C y = b``."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    S = model.covariance
    SC = S @ C.T
    gram = C @ SC
    K = SC @ np.linalg.pinv(gram, rcond=cutoff, hermitian=True)
    mean = model.mean + K @ (b - C @ model.mean)
    cov = S - K @ SC.T
    cov = 0.5 * (cov + cov.T)
    resid = float(np.max(np.abs(C @ mean - b))) if b.size else 0.0
    if resid > 1e-6:
        raise InconsistentConstraints(f"constraints unsatisfiable on the support (residual {resid:.3e})")
    rows = C if model.constraint_rows is None else np.vstack([model.constraint_rows, C])
    vals = b if model.constraint_values is None else np.concatenate([model.constraint_values, b])
    return replace(model, mean=mean, covariance=cov, constraint_rows=rows, constraint_values=vals,
                   info={**model.info, "residual": resid})


# --------------------------------------------------------------------------
# degree-2k construction over a frame


def _orders(k: int, coupling: str) -> list[int]:
    if coupling == "joint":
        return sorted(q for q in range(k, 0, -2))
    return [k]


def _readout(space: SymTensorSpace, U: np.ndarray, N: int) -> np.ndarray:
    # one row per sorted tuple, shared by all its rearrangements so that the
    # readout is exactly invariant under within-tuple permutations
    tuples = np.sort(all_tuples(N, space.k), axis=1)
    canon, inverse = np.unique(tuples, axis=0, return_inverse=True)
    return space.symmetric_product_coords(U, canon)[inverse.ravel()]


def _pad(R: np.ndarray, sl: slice, total: int) -> np.ndarray:
    out = np.zeros((R.shape[0], total))
    out[:, sl] = R
    return out


def _rows_with_pair(N: int, q: int):
    """For each ``(i, j)`` with ``i`` in ``[N]^(q-2)``, the flat index of the
    tuple ``i o (j, j)`` in ``[N]^q`` and the flat index of ``i`` in ``[N]^(q-2)``."""
    lower = all_tuples(N, q - 2)
    flat_hi, flat_lo = [], []
    base = N ** np.arange(q - 1, -1, -1)
    for li, i in enumerate(lower):
        for j in range(N):
            t = np.concatenate([i, [j, j]])
            flat_hi.append(int(t @ base))
            flat_lo.append(li)
    return np.array(flat_hi, dtype=int), np.array(flat_lo, dtype=int)


def _subspace_rows(R: np.ndarray, P: np.ndarray, N: int, q: int) -> np.ndarray:
    """Rows imposing ``(I - P) A[i] = 0`` for every slice ``i`` in ``[N]^(q-1)``."""
    Q = np.eye(N) - P
    Rs = R.reshape(N ** (q - 1), N, -1)
    return np.einsum("lj,ajd->ald", Q, Rs).reshape(-1, R.shape[1])


@dataclass
class _Layout:
    """Everything about a degree-2k model that does not depend on the scales."""

    orders: list
    spaces: dict
    blocks: dict
    readouts: dict
    rows: np.ndarray | None
    values: np.ndarray | None
    coupling: str
    ambient: bool

    def prior(self, sigma_sq: dict) -> GaussianTensorModel:
        total = sum(s.dim for s in self.spaces.values())
        cov = np.zeros((total, total))
        for q, sl in self.blocks.items():
            cov[sl, sl] = sigma_sq[q] * np.eye(self.spaces[q].dim)
        top = max(self.orders)
        return GaussianTensorModel(self.spaces[top], np.zeros(total), cov,
                                   {q: float(sigma_sq[q]) for q in self.orders},
                                   blocks=self.blocks, readouts=self.readouts,
                                   info={"coupling": self.coupling, "ambient": self.ambient})

    def model(self, sigma_sq: dict) -> GaussianTensorModel:
        m = self.prior(sigma_sq)
        return m if self.rows is None else condition_gaussian(m, self.rows, self.values)


def _layout(V: np.ndarray, k: int, coupling: str, ambient: bool,
            lower_means: dict | None = None) -> _Layout:
    r, N = V.shape
    P = V.T @ V
    U = np.eye(N) if ambient else V
    n = U.shape[0]
    orders = _orders(k, coupling)
    spaces = {q: SymTensorSpace(n, q) for q in orders}
    blocks, start = {}, 0
    for q in orders:
        blocks[q] = slice(start, start + spaces[q].dim)
        start += spaces[q].dim
    readouts = {q: _pad(_readout(spaces[q], U, N), blocks[q], start) for q in orders}
    rows, vals = [], []
    if ambient:
        for q in orders:
            rows.append(_subspace_rows(readouts[q], P, N, q))
            vals.append(np.zeros(rows[-1].shape[0]))
    for q in orders:
        if q < 2:
            continue
        hi, lo = _rows_with_pair(N, q)
        Rq = readouts[q][hi]
        if q == 2:
            rows.append(Rq)
            vals.append(np.ones(hi.size))
        elif coupling == "joint":
            rows.append(Rq - readouts[q - 2][lo])
            vals.append(np.zeros(hi.size))
        else:
            rows.append(Rq)
            vals.append(np.asarray(lower_means[q - 2])[lo])
    C = np.vstack(rows) if rows else None
    b = np.concatenate(vals) if rows else None
    return _Layout(orders, spaces, blocks, readouts, C, b, coupling, ambient)


def _diag_target_indices(N: int, k: int) -> np.ndarray:
    """Flat indices of tuples with pairwise distinct entries (all tuples if none exist)."""
    T = all_tuples(N, k)
    distinct = np.array([len(set(t)) == k for t in T])
    return np.flatnonzero(distinct) if distinct.any() else np.arange(T.shape[0])


def _diag_moments(model: GaussianTensorModel, k: int, idx: np.ndarray) -> np.ndarray:
    R = model.readouts[k][idx]
    return (R @ model.mean) ** 2 + np.sum((R @ model.covariance) * R, axis=1)


def build_deg2k_model(V: np.ndarray, k: int, sigma_list: Sequence[float | None] | None = None,
                      coupling: str = "joint", ambient: bool = False) -> GaussianTensorModel:
    """Conditioned gaussian model for ``A^(k)`` over the frame ``V``.

    ``sigma_list[q-1]`` is the scale of order ``q``; ``None`` entries (or a
    missing list) are tuned so that the diagonal pseudomoments over tuples of
    distinct indices average to one (order 1 uses ``N / tr(P)``).
    ``coupling="joint"`` conditions orders ``k`` and ``k-2`` together on
    ``A^(k)_{i o (jj)} = A^(k-2)_i``; ``coupling="mean"`` builds order ``k-2``
    first and pins the repeated-index entries of order ``k`` to its
    conditional mean.  For ``k = 3`` the model is only non-degenerate when
    the repeated-index constraints leave freedom in ``Sym^3(R^r)``.
    """
    V = np.asarray(V, dtype=float)
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    if coupling not in ("joint", "mean"):
        raise ValueError("coupling must be 'joint' or 'mean'")
    r, N = V.shape
    n = N if ambient else r
    for q in _orders(k, coupling):
        if math.comb(n + q - 1, q) > DIM_BUDGET:
            raise DimBudgetExceeded(f"Sym^{q}(R^{n}) has more than {DIM_BUDGET} coordinates")
    given = {q + 1: s for q, s in enumerate(sigma_list or []) if s is not None}
    sig: dict = {}
    if k in (1, 3):
        sig[1] = given.get(1, N / float(np.trace(V.T @ V)))
    if k == 1:
        return _layout(V, 1, "joint", ambient).model(sig)
    lower_means = {}
    if coupling == "mean" and k == 3:
        lower = _layout(V, 1, "joint", ambient).model(sig)
        lower_means[1] = lower.readouts[1] @ lower.mean
    lay = _layout(V, k, coupling, ambient, lower_means)
    idx = _diag_target_indices(N, k)

    def build(s):
        return lay.model({**sig, k: s})

    if k in given:
        model = build(given[k])
    elif k == 2:
        # the conditional mean does not depend on the scale and the covariance is
        # proportional to it, so the normalization is a single division
        unit = build(1.0)
        mu2 = (unit.readouts[2][idx] @ unit.mean) ** 2
        spread = float(np.mean(_diag_moments(unit, 2, idx) - mu2))
        if spread <= 1e-12:
            raise RankDeficient("consistency constraints leave A^(2) no freedom")
        model = build(float(np.mean(1.0 - mu2)) / spread)
    else:
        unit = build(1.0)
        mu2 = (unit.readouts[k][idx] @ unit.mean) ** 2
        if float(np.mean(_diag_moments(unit, k, idx) - mu2)) <= 1e-10:
            raise RankDeficient(
                f"the repeated-index constraints pin A^({k}) completely "
                f"(need N r < dim Sym^{k}(R^r) = {math.comb(r + k - 1, k)})")

        def resid(log_s):
            return float(np.mean(_diag_moments(build(math.exp(log_s)), k, idx))) - 1.0
        lo, hi = -5.0, 5.0
        while resid(lo) > 0 and lo > -40:
            lo -= 5.0
        while resid(hi) < 0 and hi < 40:
            hi += 5.0
        if resid(lo) * resid(hi) > 0:
            raise NoConvergence(f"no scale in [e^{lo}, e^{hi}] normalizes order {k}")
        model = build(math.exp(optimize.brentq(resid, lo, hi, xtol=1e-12)))
    model.info["diag_mean"] = float(np.mean(_diag_moments(model, k, idx)))
    return model


def pseudomoment_from_model(model: GaussianTensorModel, k: int | None = None) -> np.ndarray:
    """``Z^mult[k,k]_{ij} = E[A_i A_j]`` over ``[N]^k x [N]^k``."""
    Z = model.entry_moments(model.k if k is None else k)
    return 0.5 * (Z + Z.T)


def frozen_pair_matrix(Zmult: np.ndarray, N: int, i: int, j: int) -> np.ndarray:
    """``F[k, l] = Z^mult[2,2]_{(i,j)(k,l)}``."""
    return Zmult[i * N + j].reshape(N, N)


def conditional_mean_matrix(model: GaussianTensorModel, N: int) -> np.ndarray:
    """``E[A_ij]`` as an ``N x N`` matrix for an order-2 model."""
    return (model.readouts[2] @ model.mean).reshape(N, N)


def conditional_covariance(model: GaussianTensorModel) -> np.ndarray:
    """``Cov(A_ij, A_kl)`` over ``[N]^2 x [N]^2`` for an order-2 model."""
    R = model.readouts[2]
    return R @ model.covariance @ R.T


# --------------------------------------------------------------------------
# repeated-index subspace


@dataclass(frozen=True)
class SubspaceProjector:
    matrix: np.ndarray
    rank: int
    spanning: int


def repeated_index_projector(V: np.ndarray, k: int, cutoff: float = PINV_CUTOFF) -> SubspaceProjector:
    """Orthogonal projector onto ``span{ sym(v_i (x) v_i (x) v_j1 ... v_j(k-2)) }``."""
    V = np.asarray(V, dtype=float)
    if k not in (2, 3):
        raise ValueError("k must be 2 or 3")
    r, N = V.shape
    if math.comb(r + k - 1, k) > DIM_BUDGET:
        raise DimBudgetExceeded(f"Sym^{k}(R^{r}) has more than {DIM_BUDGET} coordinates")
    space = SymTensorSpace(r, k)
    if k == 2:
        tuples = np.column_stack([np.arange(N), np.arange(N)])
    else:
        ii, jj = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
        tuples = np.column_stack([ii.ravel(), ii.ravel(), jj.ravel()])
    S = space.symmetric_product_coords(V, tuples).T
    U, s, _ = np.linalg.svd(S, full_matrices=False)
    rank = int(np.sum(s > cutoff * max(1.0, s[0]))) if s.size else 0
    B = U[:, :rank]
    return SubspaceProjector(B @ B.T, rank, S.shape[1])
