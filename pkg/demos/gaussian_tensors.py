"""Pseudomoments as second moments of conditioned gaussian tensors.

At order two the engine conditions a symmetric gaussian matrix to live on
the row space of the frame with unit diagonal.  On a regular simplex this
reproduces the ETF closed form exactly; on a Haar frame it departs from the
simplified pair formula, mostly on the diagonal.  At order three the model
still gives a PSD matrix, provided the frame is small enough to leave any
freedom after the repeated-index constraints.
"""

import math

import numpy as np

from sksos.ensembles import RngStream, sample_haar_stiefel
from sksos.errors import RankDeficient
from sksos.etf import etf_deg4_extension, harmonic_frame, simplex_etf
from sksos.pseudomoments import heuristic_X22
from sksos.tensors import build_deg2k_model, pseudomoment_from_model
from sksos.witness import witness_from_frame


def pair_block(Z, N):
    iu = np.triu_indices(N, 1)
    flat = iu[0] * N + iu[1]
    return Z[np.ix_(flat, flat)]


F = simplex_etf(5)
V = F.vectors * math.sqrt(F.r / F.N)
Z = pseudomoment_from_model(build_deg2k_model(V, 2), 2)
print("simplex r=5: gap to ETF closed form",
      np.max(np.abs(pair_block(Z, F.N) - etf_deg4_extension(F).Z22)))

N, r = 40, 20
for name, V in (("haar", sample_haar_stiefel(N, r, RngStream(0))),
                ("harmonic", harmonic_frame(r, N, first=3).vectors)):
    m = build_deg2k_model(V, 2)
    gap = pair_block(pseudomoment_from_model(m, 2), N) - heuristic_X22(witness_from_frame(V).M)
    off = gap - np.diag(np.diag(gap))
    print(f"{name:9s} N={N} r={r}: sigma^2 {m.sigma_sq[2]:.3f}, gap to pair formula "
          f"{np.max(np.abs(gap)):.3f} (off-diagonal {np.max(np.abs(off)):.3f})")

for N, r in ((8, 6), (12, 8), (10, 5)):
    V = sample_haar_stiefel(N, r, RngStream(1))
    try:
        m = build_deg2k_model(V, 3)
    except RankDeficient as exc:
        print(f"order 3, N={N} r={r}: {exc}")
        continue
    lam = np.linalg.eigvalsh(pseudomoment_from_model(m, 3))[0]
    print(f"order 3, N={N} r={r}: scales {m.sigma_sq}, min eig {lam:.1e}")
