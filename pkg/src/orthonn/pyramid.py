"""Pyramidal orthogonal layers: layout, forward pass, matrix extraction,
and the inverse map from an orthogonal matrix back to angles.

Layout
------
The square n-wire pyramid has 2n-3 timesteps; timestep t carries gates
whose top wires share t's parity, growing from the top-left apex to the
full column and shrinking symmetrically:

    t:      0    1    2     3     4    ...
    tops:  {0}  {1}  {0,2} {1,3} {0,2,4} ...

Angles are stored in canonical order: timestep-major, top wire ascending
inside a timestep. A rectangular n_in -> n_out layer keeps exactly the
square gates that can still influence the last n_out wires (the output
window), which reproduces the (2*n_in - 1 - n_out)*n_out/2 parameter
count.

Decomposition
-------------
The time-ordered gate product regroups into a product of north-east
anti-diagonals D_1..D_{n-1} (gates of different anti-diagonals that swap
order under the regrouping never share wires). Only D_{n-1} touches the
last wire, so the last column of W is D_{n-1} e_{n-1}, whose entries form
the same cosine/sine cascade a diagonal data loader produces. Peeling is
therefore: read the last column, recover the anti-diagonal's angles with
the loader recursion, undo that anti-diagonal, and recurse on the
leading block. A determinant of -1 is split off first as a Z flip (the
last row changes sign).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels, errors
from .circuits import Circuit, RbsGate, UnaryState, apply_circuit, build_loader, compute_loader_angles


def num_angles(n_in: int, n_out: int | None = None) -> int:
    """(2*n_in - 1 - n_out) * n_out / 2 free angles; n(n-1)/2 when square."""
    if n_out is None:
        n_out = n_in
    return (2 * n_in - 1 - n_out) * n_out // 2


@lru_cache(maxsize=None)
def pyramid_plan(n_in: int, n_out: int | None = None) -> tuple[tuple[int, ...], ...]:
    """Top wires per timestep for the (possibly truncated) pyramid."""
    if n_out is None:
        n_out = n_in
    if n_in < 2 or not (1 <= n_out <= n_in):
        raise errors.OrthoNNError(
            f"invalid pyramid shape {n_in}x{n_out} (need n_in >= 2, 1 <= n_out <= n_in)"
        )
    square = []
    for t in range(2 * n_in - 3):
        m = min(t, 2 * n_in - 4 - t)
        square.append(tuple(range(m % 2, m + 1, 2)))

    if n_out == n_in:
        return tuple(square)

    # reachability filter: keep a gate iff one of its wires can still
    # reach the output window through later timesteps
    window_start = n_in - n_out
    reach = [w >= window_start for w in range(n_in)]
    kept_rev = []
    for tops in reversed(square):
        kept = tuple(w for w in tops if reach[w] or reach[w + 1])
        for w in kept:
            reach[w] = reach[w + 1] = True
        if kept:
            kept_rev.append(kept)
    return tuple(reversed(kept_rev))


def _flat_tops(n_in: int, n_out: int) -> np.ndarray:
    return np.array(
        [w for step in pyramid_plan(n_in, n_out) for w in step], dtype=np.int64
    )


@dataclass(frozen=True, eq=False)
class PyramidLayer:
    """n_in inputs, n_out <= n_in outputs, angles in canonical order."""

    n_in: int
    n_out: int
    thetas: np.ndarray
    z_flip: bool = False

    def __post_init__(self):
        n_in, n_out = int(self.n_in), int(self.n_out)
        plan_check = pyramid_plan(n_in, n_out)  # validates the shape
        thetas = np.array(self.thetas, dtype=np.float64, copy=True).reshape(-1)
        want = num_angles(n_in, n_out)
        if thetas.size != want:
            raise errors.DimensionMismatch(
                f"{n_in}x{n_out} pyramid needs {want} angles, got {thetas.size}"
            )
        if not np.all(np.isfinite(thetas)):
            raise errors.OrthoNNError("pyramid angles must be finite")
        assert sum(len(s) for s in plan_check) == want
        thetas.flags.writeable = False
        object.__setattr__(self, "n_in", n_in)
        object.__setattr__(self, "n_out", n_out)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "z_flip", bool(self.z_flip))

    @property
    def n_angles(self) -> int:
        return self.thetas.size


def pyramid_circuit(layer: PyramidLayer) -> Circuit:
    it = iter(layer.thetas)
    timesteps = tuple(
        tuple(RbsGate((w + 1, w), float(next(it))) for w in step)
        for step in pyramid_plan(layer.n_in, layer.n_out)
    )
    return Circuit(width=layer.n_in, timesteps=timesteps, z_flip=layer.z_flip)


# ---------------------------------------------------------------------------
# Fast batched application (shared with the training module)
# ---------------------------------------------------------------------------


def gate_arrays(layer: PyramidLayer):
    """(tops, cos, sin) arrays for the kernels, in canonical order."""
    tops = _flat_tops(layer.n_in, layer.n_out)
    return tops, np.cos(layer.thetas), np.sin(layer.thetas)


def rotate_batch(layer: PyramidLayer, X: np.ndarray) -> np.ndarray:
    """Apply the full-width rotation to rows of X (no window, no rescale)."""
    Z = np.array(X, dtype=np.float64, copy=True)
    if Z.ndim == 1:
        Z = Z.reshape(1, -1)
    if Z.shape[1] != layer.n_in:
        raise errors.DimensionMismatch(
            f"batch has width {Z.shape[1]}, layer expects {layer.n_in}"
        )
    tops, cos_t, sin_t = gate_arrays(layer)
    _kernels.fwd(tops, cos_t, sin_t, Z)
    if layer.z_flip:
        Z[:, -1] = -Z[:, -1]
    return Z


def extract_matrix(layer: PyramidLayer) -> np.ndarray:
    """The induced n_out x n_in matrix W (rows = outputs), via basis vectors."""
    Z = rotate_batch(layer, np.eye(layer.n_in))
    return Z.T[layer.n_in - layer.n_out :].copy()


def forward(layer: PyramidLayer, x) -> np.ndarray:
    """W x, computed the circuit way: load, rotate, read the output window.

    x need not be normalized; the stored norm rescales the result, so the
    map is exactly linear.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != layer.n_in:
        raise errors.DimensionMismatch(
            f"input has {x.size} components, layer expects {layer.n_in}"
        )
    angles = compute_loader_angles(x, "diagonal")  # raises ZeroVector
    state = apply_circuit(build_loader(angles), UnaryState.basis(layer.n_in, 0))
    out = apply_circuit(pyramid_circuit(layer), state)
    return out.amps[layer.n_in - layer.n_out :] * angles.norm


def random_layer(n_in: int, n_out: int | None = None, rng=None) -> PyramidLayer:
    """Angles of a Haar-random rotation (QR of a Gaussian, decomposed).

    Rectangular layers take the kept subset of the square decomposition's
    angles, which still yields exactly orthonormal rows.
    """
    if n_out is None:
        n_out = n_in
    if rng is None:
        rng = np.random.default_rng()
    q, r = np.linalg.qr(rng.normal(size=(n_in, n_in)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[0] = -q[0]
    square = decompose(q)
    if n_out == n_in:
        return square
    square_order = [
        (t, w) for t, step in enumerate(pyramid_plan(n_in, n_in)) for w in step
    ]
    square_at = dict(zip(square_order, square.thetas))
    rect = [square_at[pos] for step in _rect_step_times(n_in, n_out) for pos in step]
    return PyramidLayer(n_in, n_out, np.array(rect))


def _rect_step_times(n_in: int, n_out: int):
    """Kept gates tagged with their original square timestep index."""
    window_start = n_in - n_out
    square = pyramid_plan(n_in, n_in)
    reach = [w >= window_start for w in range(n_in)]
    tagged_rev = []
    for t in range(len(square) - 1, -1, -1):
        kept = [(t, w) for w in square[t] if reach[w] or reach[w + 1]]
        for _, w in kept:
            reach[w] = reach[w + 1] = True
        if kept:
            tagged_rev.append(kept)
    return list(reversed(tagged_rev))


# ---------------------------------------------------------------------------
# decompose
# ---------------------------------------------------------------------------


def orthogonality_defect(M: np.ndarray) -> float:
    M = np.asarray(M, dtype=np.float64)
    return float(np.max(np.abs(M.T @ M - np.eye(M.shape[1]))))


def decompose(M, tol: float = 1e-8) -> PyramidLayer:
    """Angles (and z_flip) of the pyramid realizing the orthogonal matrix M.

    Peels one north-east anti-diagonal per pass, right to left; each
    pass reads the current last column bottom-to-top and recovers that
    anti-diagonal's angles with the diagonal-loader recursion (atan2
    handles every degenerate pivot, dependent angles come out 0).
    """
    M = np.array(M, dtype=np.float64, copy=True)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise errors.NotSquare(f"decompose needs a square matrix, got {M.shape}")
    n = M.shape[0]
    if n < 2:
        raise errors.DimensionTooSmall("decompose needs n >= 2")
    defect = orthogonality_defect(M)
    if not defect < tol:
        raise errors.NotOrthogonal(
            f"matrix is not orthogonal within {tol:g} (defect {defect:.3e})"
        )

    z_flip = bool(np.linalg.det(M) < 0)
    if z_flip:
        M[-1, :] = -M[-1, :]

    plan = pyramid_plan(n, n)
    index = {
        (t, w): i
        for i, (t, w) in enumerate((t, w) for t, step in enumerate(plan) for w in step)
    }
    thetas = np.zeros(num_angles(n, n))

    for k in range(n - 1, 0, -1):
        column = M[:, k]
        # + 0.0 turns -0.0 entries into +0.0 so degenerate atan2 pivots
        # take the zero branch instead of pi
        u = np.array([(-1) ** j * column[k - j] for j in range(k + 1)]) + 0.0
        phis = compute_loader_angles(u, "diagonal").alphas
        for j in range(k):
            thetas[index[(k - 1 + j, k - 1 - j)]] = phis[j]
        # undo the anti-diagonal: apply its inverse gates to M's columns
        for j in range(k - 1, -1, -1):
            w = k - 1 - j
            c, s = math.cos(phis[j]), math.sin(phis[j])
            top = M[w].copy()
            bot = M[w + 1]
            M[w] = c * top + s * bot
            M[w + 1] = -s * top + c * bot

    return PyramidLayer(n, n, thetas, z_flip=z_flip)
