"""Normalized Haar frames are far tighter than independent random directions.

The quantity is the squared Frobenius distance of sum_i u_i u_i^T from its
tight-frame value (N/r) I.  For iid uniform unit vectors its mean is exactly
N - N/r; the normalized columns of a Haar frame miss tightness only through
fluctuations of the column norms.
"""

from sksos.diagnostics import iid_comparison
from sksos.ensembles import RngStream

print(f"{'N':>5} {'r':>4} {'haar':>9} {'iid':>9} {'N - N/r':>9} {'ratio':>7}")
for N in (40, 80, 160):
    res = iid_comparison(N // 2, N, 20, RngStream(3, N))
    print(f"{N:5d} {N // 2:4d} {res.haar_mean:9.3f} {res.iid_mean:9.3f} {res.iid_expected:9.3f} {res.ratio:7.1f}")
