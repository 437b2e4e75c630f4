"""How good is the rounded spectral witness for the SK objective?

Draws GOE matrices, builds the normalized top-eigenspace projector and
compares its objective with the spectral bound and with the large-N
semicircle prediction.  Smaller delta pushes the value toward 2.
"""

import numpy as np

from sksos.ensembles import RngStream, sample_goe
from sksos.witness import montanari_sen_witness, objective_value, semicircle_objective, spectral_certificate

N, TRIALS = 400, 4

print(f"N = {N}, {TRIALS} draws per row")
print(f"{'delta':>7} {'witness':>9} {'semicircle':>11} {'lambda_max':>11}")
for delta in (0.5, 0.25, 0.125, 0.0625):
    obj, top = [], []
    for t in range(TRIALS):
        W = sample_goe(N, RngStream(1, t))
        obj.append(objective_value(montanari_sen_witness(W, delta).M, W))
        top.append(spectral_certificate(W))
    print(f"{delta:7.4f} {np.mean(obj):9.4f} {semicircle_objective(delta):11.4f} {np.mean(top):11.4f}")
