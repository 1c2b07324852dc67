#!/usr/bin/env python3
# The proximal operators behind the covariance experiment: quadratic
# tracking, PSD projection, and the rational shrinkage penalty
# phi(t) = |t| / (1 + omega |t| / 2) applied entrywise or to the spectrum.
# Every closed form is cross-checked against the brute-force grid oracle.

import numpy as np

from drsplit import (
    Point,
    penalty_phi,
    prox_grid_oracle,
    prox_phi_scalar,
    prox_phi_spectral,
    prox_psd,
    prox_quadratic_tracking,
)

# --- scalar shrinkage ------------------------------------------------------
# omega = 0 recovers plain soft thresholding; omega > 0 shrinks large inputs
# less (the penalty saturates), which is what makes it only weakly convex.
print("prox of kappa*phi at t = 2.0, kappa = 0.5:")
for omega in (0.0, 0.5, 1.0, 1.5):
    p = prox_phi_scalar(2.0, omega, 0.5)
    g = prox_grid_oracle(lambda w: 0.5 * penalty_phi(w, omega), 2.0, 1.0,
                         radius=2.0, step=1e-6)
    print(f"    omega = {omega}: {p:.8f}  (grid oracle {g:.8f})")

# small inputs are clamped to exactly zero whenever |t| <= kappa
print("dead zone:", [prox_phi_scalar(t, 1.0, 0.5) for t in (0.2, 0.4, 0.6)])

# --- quadratic tracking ----------------------------------------------------
x, target = Point.vector([2.0]), Point.vector([0.0])
print("quadratic tracking pull toward the data:",
      [prox_quadratic_tracking(x, target, g).data[0] for g in (0.5, 1.0, 4.0)])

# --- PSD projection --------------------------------------------------------
m = Point.symmetric(np.array([[1.0, 0.8], [0.8, -0.5]]))
proj = prox_psd(m)
print("eigenvalues before:", np.round(np.linalg.eigvalsh(m.data), 4),
      "after:", np.round(np.linalg.eigvalsh(proj.data), 4))

# --- spectral shrinkage ----------------------------------------------------
# acts on eigenvalue magnitudes and leaves the eigenvectors alone; a rank-one
# matrix stays rank one with a shrunk leading value
v = np.array([1.0, 2.0, -1.0])
rank1 = Point.symmetric(np.outer(v, v))
out = prox_phi_spectral(rank1, omega=1.0, tau=0.5, gamma=1.0)
s = float(v @ v)
print(f"rank-1 leading value {s} shrinks to "
      f"{np.linalg.eigvalsh(out.data).max():.6f} "
      f"(scalar prox gives {prox_phi_scalar(s, 1.0, 0.5):.6f})")
