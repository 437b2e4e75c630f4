"""Closed-form degree-4 extension of a regular simplex Gram matrix.

The four vertices of a tetrahedron have Gram matrix with off-diagonal -1/3,
which is the correlation matrix of a uniformly random sign vector with two
+1 and two -1 entries.  The closed form should reproduce all degree-4
moments of that distribution.
"""

import itertools

import numpy as np

from sksos.errors import InfeasibleDimension
from sksos.etf import etf_deg4_extension, etf_extension_spectral, perturbation_projector, simplex_etf
from sksos.pseudomoments import verify_constraints

Z = etf_deg4_extension(simplex_etf(3))
signs = [np.array(x) for x in itertools.product((1, -1), repeat=4) if sum(x) == 0]
pairs = list(itertools.combinations(range(4), 2))
target = np.array([[np.mean([x[i] * x[j] * x[k] * x[l] for x in signs]) for k, l in pairs]
                   for i, j in pairs])
print("tetrahedron, pair block of Z:")
print(np.round(Z.Z22, 6))
print("max difference from balanced-sign moments:", np.max(np.abs(Z.Z22 - target)))

print("\n r  N  projector rank  route gap  min eig   constraints")
for r in range(3, 8):
    F = simplex_etf(r)
    Ze, Zs = etf_deg4_extension(F), etf_extension_spectral(F)
    print(f"{r:2d} {F.N:2d} {perturbation_projector(F).rank:15d} {np.max(np.abs(Ze.Z22 - Zs.Z22)):10.1e}"
          f" {np.linalg.eigvalsh(Ze.full())[0]:8.1e}   {verify_constraints(Ze).max_violation:.1e}")

try:
    etf_deg4_extension(simplex_etf(2))
except InfeasibleDimension as exc:
    print("\nr = 2:", exc)
