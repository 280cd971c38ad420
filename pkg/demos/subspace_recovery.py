"""
Recovering a planted projection subspace
========================================

Responses generated as a sum of squared projections leave a trace in the
second-order cross moment. Its leading eigenvectors span the planted
directions, and the estimate sharpens as the sample grows.
"""

import numpy as np

from steinit.initializers import score2_cross_moment, stein_layer_init
from steinit.synthetic import multi_index, principal_angles

# Three orthonormal directions in ten dimensions, weights 3, 2 and 1.
X, y, B = multi_index(n=20_000, d=10, k=3, seed=0, coefs=(3.0, 2.0, 1.0))

# The spectrum shows three large eigenvalues, about 2 * (3, 2, 1),
# and seven near zero.
S = score2_cross_moment(X, y)
print("eigenvalues:", np.round(np.sort(np.linalg.eigvalsh(S))[::-1], 2))

W, b = stein_layer_init(X, y, width=3)
print("largest principal angle (deg):", np.degrees(principal_angles(W, B).max()).round(2))

# Angles shrink roughly like 1/sqrt(n).
for n in (1_000, 10_000, 100_000):
    angles = []
    for seed in range(10):
        X, y, B = multi_index(n, 10, 3, seed=seed, coefs=(3.0, 2.0, 1.0))
        W, _ = stein_layer_init(X, y, 3)
        angles.append(np.degrees(principal_angles(W, B).max()))
    print(f"n={n:>7}: median angle {np.median(angles):6.2f} deg")
