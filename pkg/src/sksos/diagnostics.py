"""Measurable versions of the quantities that control positivity of ``Z``.

Everything here is computed from a :class:`~sksos.witness.WitnessBundle`.
Frames of ``isovec`` columns live in dimension ``r(r+1)/2`` and are cheap;
the pair-indexed objects (``Z1a``, ``Delta``) have side ``N(N-1)/2``.

Throughout, ``delta`` means ``r / N`` (the bundle's ``delta_eff``), which is
what makes the centering identities exact when ``delta N`` is not an integer.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .ensembles import RngLike, RngStream, as_generator, sample_goe, sample_haar_stiefel, sample_iid_unit_vectors
from .linalg import DENSE_LIMIT, isovec, isovec_matrix, min_eig, num_pairs, op_norm
from .pseudomoments import delta_sparse, z1a_matrix, z1a_operator
from .witness import WitnessBundle, montanari_sen_witness, objective_value, witness_from_frame

FRAME_MODES = ("orth", "orth0", "norm")


@dataclass
class IsovecFrame:
    mode: str
    A: np.ndarray        # r(r+1)/2 x N, one column per index i
    delta: float
    r: int
    N: int

    @property
    def ones_diag(self) -> np.ndarray:
        return isovec(np.eye(self.r))


def _outer_batch(vectors: np.ndarray) -> np.ndarray:
    """``(N, r, r)`` stack of ``u_i u_i^T`` for the columns ``u_i`` of an ``r x N`` matrix."""
    return np.einsum("ai,bi->iab", vectors, vectors)


def build_isovec_frame(bundle: WitnessBundle, mode: str) -> IsovecFrame:
    """Columns ``isovec(c v_i v_i^T - b I_r)`` for the three centerings.

    * ``orth``:  ``c = 1/delta``, ``b = 1/r``
    * ``orth0``: ``c = N/r``,     ``b = (1 - sqrt(delta))/r``
    * ``norm``:  unit columns ``vhat_i``, ``b = 1/r``
    """
    if mode not in FRAME_MODES:
        raise ValueError(f"mode must be one of {FRAME_MODES}")
    r, N = bundle.r, bundle.N
    d = bundle.delta_eff
    I = np.eye(r)
    if mode == "orth":
        mats = _outer_batch(bundle.V) / d - I / r
    elif mode == "orth0":
        mats = _outer_batch(bundle.V) * (N / r) - I * ((1.0 - math.sqrt(d)) / r)
    else:
        mats = _outer_batch(bundle.Vhat) - I / r
    return IsovecFrame(mode, isovec_matrix(mats), d, r, N)


def _require(frame: IsovecFrame, mode: str) -> None:
    if frame.mode != mode:
        raise ValueError(f"expected a {mode!r} frame, got {frame.mode!r}")


def gram_distance_to_projector(frame: IsovecFrame) -> float:
    """``||A^T A - (I - 11^T/N)||_op`` for the ``orth`` frame."""
    _require(frame, "orth")
    N = frame.N
    G = frame.A.T @ frame.A
    G -= np.eye(N) - np.full((N, N), 1.0 / N)
    return op_norm(G, "dense")


def orth0_gram_shift(bundle: WitnessBundle) -> np.ndarray:
    """``A0^T A0 - A^T A`` predicted in closed form.

    With ``a_i = D_ii/delta - 1`` this is
    ``11^T/N + (sqrt(delta)/r)(a 1^T + 1 a^T)``; the cross term vanishes
    exactly when every ``D_ii`` equals ``delta``.
    """
    d = bundle.delta_eff
    a = bundle.D / d - 1.0
    one = np.ones(bundle.N)
    return np.full((bundle.N, bundle.N), 1.0 / bundle.N) + (math.sqrt(d) / bundle.r) * (
        np.outer(a, one) + np.outer(one, a))


def normalization_distance(bundle: WitnessBundle) -> tuple[float, float]:
    """``||A_orth - A_norm||_op`` and the bound
    ``max_i |delta/D_ii - 1| (||A_orth||_op + delta^{-1/2})``."""
    A_orth = build_isovec_frame(bundle, "orth").A
    A_norm = build_isovec_frame(bundle, "norm").A
    d = bundle.delta_eff
    dist = op_norm(A_orth - A_norm)
    bound = float(np.max(np.abs(d / bundle.D - 1.0))) * (op_norm(A_orth) + d ** -0.5)
    return dist, bound


@dataclass(frozen=True)
class T1Stats:
    frob_sq: float        # ||sum vhat vhat^T - (N/r) I||_F^2
    frob_sq_bound: float  # ||D^{-1} - delta^{-1} I||_F^2, an upper bound on frob_sq
    t1_opnorm: float


def t1_statistics(bundle: WitnessBundle) -> T1Stats:
    r, N = bundle.r, bundle.N
    S = bundle.Vhat @ bundle.Vhat.T - (N / r) * np.eye(r)
    s = isovec(S)
    frob_sq = float(s @ s)
    bound = float(np.sum((1.0 / bundle.D - 1.0 / bundle.delta_eff) ** 2))
    # T1 = (2/r)(s u^T + u s^T) with u = isovec(I); its nonzero eigenvalues are
    # (2/r)(<s,u> +- ||s|| ||u||)
    u_norm = math.sqrt(r)
    t1 = (2.0 / r) * (abs(float(s @ isovec(np.eye(r)))) + math.sqrt(frob_sq) * u_norm)
    return T1Stats(frob_sq, bound, t1)


def t1_matrix(bundle: WitnessBundle) -> np.ndarray:
    r, N = bundle.r, bundle.N
    s = isovec(bundle.Vhat @ bundle.Vhat.T - (N / r) * np.eye(r))
    u = isovec(np.eye(r))
    return (2.0 / r) * (np.outer(s, u) + np.outer(u, s))


def t2_norm(frame: IsovecFrame) -> float:
    """``||A A^T||_op`` for the ``norm`` frame, via the ``N x N`` Gram matrix."""
    _require(frame, "norm")
    R = frame.A.T @ frame.A
    return float(np.linalg.eigvalsh(R)[-1])


def ztilde1a(bundle: WitnessBundle, alpha: float) -> np.ndarray:
    """``alpha 1d 1d^T + 2 I - 2 sum_i isovec(vhat_i vhat_i^T) isovec(vhat_i vhat_i^T)^T``."""
    r = bundle.r
    B = isovec_matrix(_outer_batch(bundle.Vhat))
    u = isovec(np.eye(r))
    out = alpha * np.outer(u, u) - 2.0 * (B @ B.T)
    out[np.diag_indices(out.shape[0])] += 2.0
    return out


def ztilde1a_centered(bundle: WitnessBundle, alpha: float) -> np.ndarray:
    """The same matrix rebuilt from the centered pieces:
    ``(alpha - 2N/r^2) 1d 1d^T + 2 I - T1 - 2 T2``."""
    r, N = bundle.r, bundle.N
    u = isovec(np.eye(r))
    A = build_isovec_frame(bundle, "norm").A
    out = (alpha - 2.0 * N / r**2) * np.outer(u, u) - t1_matrix(bundle) - 2.0 * (A @ A.T)
    out[np.diag_indices(out.shape[0])] += 2.0
    return out


@dataclass(frozen=True)
class Ztilde1aResult:
    lambda_min: float
    implied_bound: float                 # lower bound on lambda_min(Z1a)
    direct_lambda_min_Z1a: float | None  # computed when affordable


def ztilde1a_min_eig(bundle: WitnessBundle, alpha: float, direct: bool | None = None,
                     method: str = "auto") -> Ztilde1aResult:
    """Smallest eigenvalue of the ``r(r+1)/2``-dimensional reduction of ``Z1a``.

    ``direct=None`` computes ``lambda_min(Z1a)`` itself only when its side is
    at most :data:`~sksos.linalg.DENSE_LIMIT`.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    lam = min_eig(ztilde1a(bundle, alpha), "dense")
    bound = min(0.0, lam / (2.0 * float(np.min(bundle.D)) ** 2))
    if direct is None:
        direct = num_pairs(bundle.N) <= DENSE_LIMIT
    lam_z1a = z1a_min_eig(bundle.M, alpha, method) if direct else None
    return Ztilde1aResult(lam, bound, lam_z1a)


def z1a_min_eig(M: np.ndarray, alpha: float, method: str = "auto") -> float:
    side = num_pairs(M.shape[0])
    if method == "auto":
        method = "dense" if side <= DENSE_LIMIT else "iterative"
    if method == "dense":
        return min_eig(z1a_matrix(M, alpha), "dense")
    return min_eig(z1a_operator(M, alpha), "iterative")


@dataclass(frozen=True)
class GershgorinStats:
    diag_max: float
    radius_max: float
    opnorm: float


def delta_gershgorin(delta_mx) -> GershgorinStats:
    """Largest diagonal entry, largest off-diagonal absolute row sum and
    operator norm of the sparse correction ``Delta``."""
    D = delta_mx.tocsr()
    if D.shape[0] == 0:
        return GershgorinStats(0.0, 0.0, 0.0)
    diag = D.diagonal()
    absrow = np.asarray(abs(D).sum(axis=1)).ravel() - np.abs(diag)
    if D.nnz == 0:
        norm = 0.0
    elif D.shape[0] <= 200:
        norm = op_norm(D.toarray(), "dense")
    else:
        norm = op_norm(D, "iterative")
    return GershgorinStats(float(np.max(diag)), float(np.max(absrow)), norm)


# --------------------------------------------------------------------------
# Haar versus iid frames


def frame_frob_sq(U: np.ndarray) -> float:
    """``||sum_i u_i u_i^T - (N/r) I_r||_F^2`` for the columns of an ``r x N`` matrix."""
    r, N = U.shape
    S = U @ U.T - (N / r) * np.eye(r)
    return float(np.sum(S * S))


def iid_expected_frob_sq(r: int, N: int) -> float:
    """Exact mean of :func:`frame_frob_sq` for iid uniform unit vectors: ``N - N/r``."""
    return N - N / r


@dataclass(frozen=True)
class IidComparison:
    r: int
    N: int
    trials: int
    haar_mean: float
    iid_mean: float
    iid_expected: float

    @property
    def ratio(self) -> float:
        return self.iid_mean / self.haar_mean if self.haar_mean > 0 else math.inf


def iid_comparison(r: int, N: int, trials: int, rng: RngLike) -> IidComparison:
    """Monte Carlo means of :func:`frame_frob_sq` for the normalized columns of a
    Haar frame and for iid uniform unit vectors."""
    if not 1 <= r < N:
        raise ValueError("need 1 <= r < N")
    gen = as_generator(rng)
    haar, iid = [], []
    for _ in range(trials):
        haar.append(frame_frob_sq(witness_from_frame(sample_haar_stiefel(N, r, gen)).Vhat))
        iid.append(frame_frob_sq(sample_iid_unit_vectors(r, N, gen)))
    return IidComparison(r, N, trials, float(np.mean(haar)), float(np.mean(iid)),
                         iid_expected_frob_sq(r, N))


# --------------------------------------------------------------------------
# per-trial report and sweeps


@dataclass
class DiagnosticsReport:
    N: int
    delta: float
    alpha: float
    trial: int
    master_seed: int
    lambda_min_Z1a: float = math.nan
    lambda_min_Z1a_bound: float = math.nan
    lambda_min_Ztilde1a: float = math.nan
    norm_T1: float = math.nan
    norm_T2: float = math.nan
    gram_dist: float = math.nan
    norm_dist: float = math.nan
    norm_dist_bound: float = math.nan
    delta_op_norm: float = math.nan
    delta_diag_max: float = math.nan
    delta_gershgorin_radius: float = math.nan
    max_offdiag_M: float = math.nan
    objective: float = math.nan
    error: str = ""

    @property
    def neg_part_Z1a(self) -> float:
        return abs(min(0.0, self.lambda_min_Z1a))


REPORT_FIELDS = [f.name for f in fields(DiagnosticsReport)]


def trial_stream(master_seed: int, N: int, trial: int) -> RngStream:
    """Stream for one trial; independent of delta and alpha so that a sweep
    over those reuses the same matrices."""
    return RngStream(master_seed, N * 1_000_000 + trial)


def trial_diagnostics(N: int, delta: float, alpha: float, trial: int, master_seed: int,
                      parts: Sequence[str] = ("z1a", "delta", "frames")) -> DiagnosticsReport:
    """All diagnostics for one GOE draw.  Errors are caught and stored in the row."""
    rep = DiagnosticsReport(N, delta, alpha, trial, master_seed)
    try:
        W = sample_goe(N, trial_stream(master_seed, N, trial))
        b = montanari_sen_witness(W, delta)
        rep.max_offdiag_M = b.max_offdiag_M
        rep.objective = objective_value(b.M, W)
        if "frames" in parts:
            rep.gram_dist = gram_distance_to_projector(build_isovec_frame(b, "orth"))
            rep.norm_T2 = t2_norm(build_isovec_frame(b, "norm"))
            rep.norm_T1 = t1_statistics(b).t1_opnorm
            rep.norm_dist, rep.norm_dist_bound = normalization_distance(b)
        if "z1a" in parts:
            zt = ztilde1a_min_eig(b, alpha, direct=True)
            rep.lambda_min_Ztilde1a = zt.lambda_min
            rep.lambda_min_Z1a_bound = zt.implied_bound
            rep.lambda_min_Z1a = zt.direct_lambda_min_Z1a
        if "delta" in parts:
            g = delta_gershgorin(delta_sparse(b.M))
            rep.delta_op_norm = g.opnorm
            rep.delta_diag_max = g.diag_max
            rep.delta_gershgorin_radius = g.radius_max
    except Exception as exc:  # recorded per row; the sweep keeps going
        rep.error = f"{type(exc).__name__}: {exc}"
    return rep


def _run_task(args):
    return trial_diagnostics(*args)


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    return max(1, int(os.environ.get("SKSOS_THREADS", "1")))


@dataclass
class SweepResult:
    rows: list[DiagnosticsReport]
    medians: dict            # (N, delta, alpha) -> {field: median}
    monotone: dict           # (delta, alpha) -> {column: bool}

    def as_dict(self) -> dict:
        return {
            "rows": [asdict(r) for r in self.rows],
            "medians": [dict(N=k[0], delta=k[1], alpha=k[2], **v) for k, v in self.medians.items()],
            "monotone": [dict(delta=k[0], alpha=k[1], **v) for k, v in self.monotone.items()],
        }


MONOTONE_COLUMNS = ("delta_op_norm", "neg_part_Z1a")
_NUMERIC = [f for f in REPORT_FIELDS if f not in ("N", "delta", "alpha", "trial", "master_seed", "error")]


def cell_medians(rows: Iterable[DiagnosticsReport]) -> dict:
    cells: dict = {}
    for r in rows:
        cells.setdefault((r.N, r.delta, r.alpha), []).append(r)
    out = {}
    for key in sorted(cells):
        good = [r for r in cells[key] if not r.error]
        med = {}
        for name in _NUMERIC + ["neg_part_Z1a"]:
            vals = np.array([getattr(r, name) for r in good], dtype=float)
            vals = vals[~np.isnan(vals)]
            med[name] = float(np.median(vals)) if vals.size else math.nan
        med["trials_ok"] = len(good)
        out[key] = med
    return out


def non_increasing(values: Sequence[float]) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


def monotone_flags(medians: dict, columns: Sequence[str] = MONOTONE_COLUMNS) -> dict:
    groups: dict = {}
    for (N, d, a), med in medians.items():
        groups.setdefault((d, a), []).append((N, med))
    flags = {}
    for key, items in sorted(groups.items()):
        items.sort(key=lambda t: t[0])
        flags[key] = {c: non_increasing([m[c] for _, m in items]) for c in columns}
    return flags


def scaling_sweep(Ns: Sequence[int], deltas: Sequence[float], alphas: Sequence[float],
                  trials: int, master_seed: int, workers: int | None = None,
                  parts: Sequence[str] = ("z1a", "delta", "frames")) -> SweepResult:
    """Run :func:`trial_diagnostics` over the grid ``Ns x deltas x alphas``.

    Rows come back in grid order whatever the number of workers.
    """
    if not (Ns and deltas and alphas) or trials < 1:
        raise ValueError("the grid must be nonempty")
    tasks = [(N, d, a, t, master_seed, tuple(parts))
             for N in Ns for d in deltas for a in alphas for t in range(trials)]
    n = worker_count(workers)
    if n == 1:
        rows = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(_run_task, tasks))
    med = cell_medians(rows)
    return SweepResult(rows, med, monotone_flags(med))


def write_sweep_csv(path, rows: Iterable[DiagnosticsReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in asdict(r).items()})
