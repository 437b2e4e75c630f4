"""Seeded random matrix ensembles and the Haar moment check.

Every sampler takes ``rng``, which may be an :class:`RngStream` (a
``(master_seed, stream_id)`` pair turned into an independent PCG64 stream via
``SeedSequence`` spawn keys) or an existing ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(seq))


RngLike = Union[RngStream, np.random.Generator, int]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()


def sample_goe(N: int, rng: RngLike) -> np.ndarray:
    """GOE(N): ``W_ii ~ N(0, 2/N)``, ``W_ij = W_ji ~ N(0, 1/N)``."""
    if N < 1:
        raise ValueError("N must be positive")
    gen = as_generator(rng)
    G = gen.standard_normal((N, N))
    W = np.triu(G, 1) / np.sqrt(N)
    W = W + W.T
    W[np.diag_indices(N)] = np.diag(G) * np.sqrt(2.0 / N)
    return W


def haar_orthogonal(N: int, rng: RngLike, size: int | None = None) -> np.ndarray:
    """Haar-distributed orthogonal matrices via QR with the R-diagonal sign fix.

    Returns shape ``(N, N)``, or ``(size, N, N)`` when ``size`` is given.
    """
    gen = as_generator(rng)
    shape = (N, N) if size is None else (size, N, N)
    Q, R = np.linalg.qr(gen.standard_normal(shape))
    signs = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    return Q * signs[..., None, :]


def sample_haar_stiefel(N: int, r: int, rng: RngLike) -> np.ndarray:
    """An ``r x N`` matrix with orthonormal rows, Haar on Stief(N, r)."""
    if not 1 <= r <= N:
        raise ValueError(f"need 1 <= r <= N, got r={r}, N={N}")
    gen = as_generator(rng)
    Q, R = np.linalg.qr(gen.standard_normal((N, r)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return (Q * signs).T


def sample_iid_unit_vectors(r: int, N: int, rng: RngLike) -> np.ndarray:
    """``r x N`` matrix whose columns are independent uniform points on S^{r-1}."""
    if r < 1:
        raise ValueError("r must be positive")
    gen = as_generator(rng)
    G = gen.standard_normal((r, N))
    return G / np.linalg.norm(G, axis=0)


def haar_moment_targets(N: int) -> dict[str, float]:
    """Closed-form low-degree moments of a Haar orthogonal ``N x N`` matrix."""
    return {
        "Q11": 0.0,
        "Q11^2": 1.0 / N,
        "Q11^4": 3.0 / (N * (N + 2)),
        "Q11^2 Q12^2": 1.0 / (N * (N + 2)),
        "Q11^2 Q22^2": (N + 1) / ((N - 1) * N * (N + 2)),
        "Q11 Q12 Q21 Q22": -1.0 / ((N - 1) * N * (N + 2)),
    }


@dataclass
class MomentEstimate:
    name: str
    target: float
    estimate: float
    stderr: float

    @property
    def z(self) -> float:
        return (self.estimate - self.target) / self.stderr if self.stderr > 0 else 0.0


@dataclass
class HaarMomentReport:
    N: int
    samples: int
    moments: list[MomentEstimate]

    @property
    def max_abs_z(self) -> float:
        return max(abs(m.z) for m in self.moments)

    def passed(self, z_max: float = 4.0) -> bool:
        return self.max_abs_z <= z_max

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "samples": self.samples,
            "moments": [dict(name=m.name, target=m.target, estimate=m.estimate,
                             stderr=m.stderr, z=m.z) for m in self.moments],
        }


def haar_moment_suite(N: int, samples: int, rng: RngLike, batch: int = 20000) -> HaarMomentReport:
    """Monte Carlo estimates of the tabulated Haar moments with standard errors."""
    if N < 2:
        raise ValueError("need N >= 2 for the two-index moments")
    if samples < 10_000:
        raise ValueError("samples must be at least 10^4")
    gen = as_generator(rng)
    stats = {name: [] for name in haar_moment_targets(N)}
    remaining = samples
    while remaining > 0:
        m = min(batch, remaining)
        Q = haar_orthogonal(N, gen, size=m)
        q11, q12, q21, q22 = Q[:, 0, 0], Q[:, 0, 1], Q[:, 1, 0], Q[:, 1, 1]
        stats["Q11"].append(q11)
        stats["Q11^2"].append(q11**2)
        stats["Q11^4"].append(q11**4)
        stats["Q11^2 Q12^2"].append(q11**2 * q12**2)
        stats["Q11^2 Q22^2"].append(q11**2 * q22**2)
        stats["Q11 Q12 Q21 Q22"].append(q11 * q12 * q21 * q22)
        remaining -= m
    targets = haar_moment_targets(N)
    moments = []
    for name, chunks in stats.items():
        x = np.concatenate(chunks)
        moments.append(MomentEstimate(name, targets[name], float(x.mean()),
                                      float(x.std(ddof=1) / np.sqrt(x.size))))
    return HaarMomentReport(N, samples, moments)
