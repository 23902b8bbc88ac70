#!/usr/bin/env python3
"""Pyramid layers as orthogonal matrices, and the way back.

Every pyramid of plane rotations multiplies out to an orthogonal matrix,
and every special-orthogonal matrix peels apart into pyramid angles
again.  This script extracts the matrix of a random layer, checks its
orthogonality, round-trips a QR-sampled rotation through decompose, and
tabulates how the angle count grows with width.

Run:  python3 demos/pyramid_matrices.py
"""

import numpy as np

from orthonn.pyramid import (
    decompose,
    extract_matrix,
    forward,
    num_angles,
    orthogonality_defect,
    pyramid_circuit,
    random_layer,
)

rng = np.random.default_rng(11)


def banner(title):
    print()
    print(title)
    print("-" * len(title))


# ---------------------------------------------------------------------
banner("A random square layer and its matrix")

layer = random_layer(5, rng=rng)
w = extract_matrix(layer)
print(f"  angles: {layer.thetas.size} (n(n-1)/2 for n=5)")
print(f"  ||W^T W - I||_inf = {orthogonality_defect(w):.2e}")
print(f"  det(W) = {np.linalg.det(w):+.6f}")
print("  W =")
for row in w:
    print("   ", " ".join(f"{v:+.4f}" for v in row))

# forward() and the matrix must be the same map.
x = rng.standard_normal(5)
print(f"  max |forward(x) - W @ x| = {np.max(np.abs(forward(layer, x) - w @ x)):.2e}")

# ---------------------------------------------------------------------
banner("Round trip through decompose")

# Sample an orthogonal matrix the standard way, flip the sign of one row
# if needed to land in SO(n), then recover angles and rebuild.
q, r = np.linalg.qr(rng.standard_normal((8, 8)))
q = q * np.sign(np.diag(r))
if np.linalg.det(q) < 0:
    q[-1] = -q[-1]

recovered = decompose(q)
rebuilt = extract_matrix(recovered)
print(f"  ||rebuilt - Q||_inf = {np.max(np.abs(rebuilt - q)):.2e}")
print(f"  z_flip used: {recovered.z_flip}")

# A determinant -1 matrix needs the trailing sign flip.
q[-1] = -q[-1]
recovered = decompose(q)
print(
    f"  det -1 input: z_flip={recovered.z_flip}, "
    f"error={np.max(np.abs(extract_matrix(recovered) - q)):.2e}"
)

# ---------------------------------------------------------------------
banner("Rectangular layers")

# A tall-to-short layer keeps the rotations of a pyramid slice and
# returns only the last n_out coordinates.
wide = random_layer(8, 3, rng=rng)
w = extract_matrix(wide)
print(f"  shape {w.shape}, angles {wide.thetas.size} "
      f"(formula gives {num_angles(8, 3)})")
print(f"  rows orthonormal: ||W W^T - I||_inf = "
      f"{np.max(np.abs(w @ w.T - np.eye(3))):.2e}")

# ---------------------------------------------------------------------
banner("Parameter count and circuit depth by width")

print(f"  {'n':>4s} {'angles':>8s} {'depth':>6s}")
for n in (4, 8, 16, 32, 64):
    circ = pyramid_circuit(random_layer(n, rng=rng))
    print(f"  {n:4d} {num_angles(n):8d} {len(circ.timesteps):6d}")
print("  (angles grow as n^2/2, depth stays linear at 2n-3)")
