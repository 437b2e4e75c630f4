"""The Montanari-Sen degree-2 witness and its objective value.

Given ``W`` and ``delta``, project onto the span of the top ``r = round(delta N)``
eigenvectors (``P = V^T V``) and renormalize to unit diagonal:
``M = D^{-1/2} P D^{-1/2}`` with ``D = diag(P)``.  The columns of ``V``
rescaled to unit length form ``Vhat``, so ``M = Vhat^T Vhat``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import DegenerateDiagonal, DegenerateGap
from .linalg import EigResult, min_eig, sym_eig

GAP_TOL = 1e-10
DIAG_TOL = 1e-12


@dataclass(frozen=True)
class WitnessBundle:
    N: int
    r: int
    delta: float
    V: np.ndarray      # r x N, rows are unit eigenvectors of W
    P: np.ndarray      # V^T V
    D: np.ndarray      # diag(P) as a vector
    M: np.ndarray      # D^{-1/2} P D^{-1/2}
    Vhat: np.ndarray   # V D^{-1/2}
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def delta_eff(self) -> float:
        """``r / N``; equals ``delta`` whenever ``delta N`` is an integer."""
        return self.r / self.N

    @property
    def max_offdiag_M(self) -> float:
        off = self.M - np.diag(np.diag(self.M))
        return float(np.max(np.abs(off))) if self.N > 1 else 0.0

    def entry_stats(self) -> dict:
        return {
            "max_diag_dev_M": float(np.max(np.abs(np.diag(self.M) - 1.0))),
            "max_offdiag_M": self.max_offdiag_M,
            "max_diag_dev_P": float(np.max(np.abs(self.D - self.delta_eff))),
            "max_offdiag_P": float(np.max(np.abs(self.P - np.diag(self.D)))) if self.N > 1 else 0.0,
        }


def rank_for(N: int, delta: float) -> int:
    """``round(delta N)`` with halves rounded up."""
    return int(math.floor(delta * N + 0.5))


def top_eigenprojector(W: np.ndarray, r: int, eig: EigResult | None = None):
    """Top-``r`` eigenvectors of ``W`` as rows of ``V`` and the projector ``V^T V``."""
    N = W.shape[0]
    if not 1 <= r <= N:
        raise ValueError(f"need 1 <= r <= N, got r={r}, N={N}")
    eig = sym_eig(W) if eig is None else eig
    lam = eig.eigenvalues
    if r < N and abs(lam[r - 1] - lam[r]) <= GAP_TOL:
        raise DegenerateGap(f"lambda_{r} and lambda_{r + 1} coincide ({lam[r - 1]!r})")
    V = eig.eigenvectors[:, :r].T.copy()
    return V, V.T @ V


def witness_from_frame(V: np.ndarray, delta: float | None = None,
                       eigenvalues: np.ndarray | None = None) -> WitnessBundle:
    """Build the bundle from any ``r x N`` matrix with orthonormal rows."""
    V = np.asarray(V, dtype=float)
    r, N = V.shape
    P = V.T @ V
    P = 0.5 * (P + P.T)
    D = np.diag(P).copy()
    if np.min(D) <= DIAG_TOL:
        raise DegenerateDiagonal(f"min_i P_ii = {np.min(D):.3e}: some e_i is orthogonal to the eigenspace")
    s = 1.0 / np.sqrt(D)
    M = P * np.outer(s, s)
    M[np.diag_indices(N)] = 1.0
    Vhat = V * s
    return WitnessBundle(N=N, r=r, delta=r / N if delta is None else float(delta), V=V, P=P,
                         D=D, M=M, Vhat=Vhat,
                         eigenvalues=np.empty(0) if eigenvalues is None else eigenvalues)


def montanari_sen_witness(W: np.ndarray, delta: float, eig: EigResult | None = None) -> WitnessBundle:
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    N = W.shape[0]
    r = rank_for(N, delta)
    if r < 1:
        raise ValueError(f"round(delta N) = 0 for N={N}, delta={delta}")
    eig = sym_eig(W) if eig is None else eig
    V, _ = top_eigenprojector(W, r, eig)
    return witness_from_frame(V, delta, eig.eigenvalues)


def nudged_witness(M: np.ndarray, alpha: float) -> np.ndarray:
    """``(1 - alpha) M + alpha I``."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    out = (1.0 - alpha) * np.asarray(M, dtype=float)
    out[np.diag_indices(out.shape[0])] += alpha
    return out


def objective_value(M: np.ndarray, W: np.ndarray) -> float:
    """``<W, M> / N``."""
    M = np.asarray(M)
    W = np.asarray(W)
    if M.shape != W.shape:
        raise ValueError("M and W must have the same shape")
    return float(np.sum(W * M) / W.shape[0])


def spectral_certificate(W: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(W)[-1])


@dataclass(frozen=True)
class Degree2Verdict:
    passed: bool
    max_diag_dev: float
    lambda_min: float


def check_degree2_membership(M: np.ndarray, tol: float = 1e-8) -> Degree2Verdict:
    """Unit diagonal and PSD, both up to ``tol``."""
    M = np.asarray(M, dtype=float)
    dev = float(np.max(np.abs(np.diag(M) - 1.0)))
    lam = min_eig(0.5 * (M + M.T), method="dense")
    return Degree2Verdict(dev <= tol and lam >= -tol, dev, lam)


# --------------------------------------------------------------------------
# semicircle prediction of the witness objective


def semicircle_density(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < 2, np.sqrt(np.clip(4 - x * x, 0, None)) / (2 * np.pi), 0.0)


def semicircle_quantile(delta: float) -> float:
    """The ``q`` with semicircle mass ``delta`` in ``[q, 2]``."""
    def upper_mass(q):
        return integrate.quad(semicircle_density, q, 2.0)[0] - delta
    return float(optimize.brentq(upper_mass, -2.0, 2.0, xtol=1e-14))


def semicircle_objective(delta: float) -> float:
    """Large-N prediction ``(1/delta) * int_q^2 x rho_sc(x) dx`` for the witness objective."""
    q = semicircle_quantile(delta)
    mass = integrate.quad(lambda x: x * semicircle_density(x), q, 2.0, epsabs=1e-13)[0]
    return mass / delta
