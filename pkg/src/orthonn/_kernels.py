"""JIT-compiled inner loops for pyramid layers.

The gate list arrives flattened in canonical order (timestep-major, top
wire ascending). Gates inside one timestep touch disjoint wire pairs, so
applying them sequentially in that order equals the timestep-parallel
action. Per gate with top wire w:

    top'    = c * top - s * bot
    bottom' = s * top + c * bot

Rotations are invertible, so the backward sweep needs no stored
per-gate traces: it unwinds the forward output gate by gate while the
angle gradients accumulate. Both kernels work on a batch (rows of Z /
delta are samples) and mutate their array arguments in place; the
z_flip sign lives outside.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def fwd(tops, cos_t, sin_t, Z):
    n_gates = tops.shape[0]
    batch = Z.shape[0]
    for g in range(n_gates):
        w = tops[g]
        c = cos_t[g]
        s = sin_t[g]
        for b in range(batch):
            t = Z[b, w]
            bo = Z[b, w + 1]
            Z[b, w] = c * t - s * bo
            Z[b, w + 1] = s * t + c * bo


@njit(cache=True)
def bwd(tops, cos_t, sin_t, Z, delta, grads):
    """Reverse sweep: per-angle gradients (batch-summed) and input delta.

    Z enters holding the layer's post-rotation output and is unwound in
    place through the inverse rotations, so each gate sees its exact
    input pair again; on return Z holds the layer input. The incoming
    delta refers to the gate's outputs, so the angle gradient uses the
    reconstructed inputs first, then the delta is rotated back through
    the transpose.
    """
    n_gates = tops.shape[0]
    batch = delta.shape[0]
    for g in range(n_gates - 1, -1, -1):
        w = tops[g]
        c = cos_t[g]
        s = sin_t[g]
        acc = 0.0
        for b in range(batch):
            tp = Z[b, w]
            bp = Z[b, w + 1]
            t = c * tp + s * bp
            bo = -s * tp + c * bp
            Z[b, w] = t
            Z[b, w + 1] = bo
            dt = delta[b, w]
            db = delta[b, w + 1]
            acc += dt * (-s * t - c * bo) + db * (c * t - s * bo)
            delta[b, w] = c * dt + s * db
            delta[b, w + 1] = -s * dt + c * db
        grads[g] = acc
