"""Training orthogonal networks by backpropagation through rotations.

A pyramid layer is trained directly in angle space: the forward pass
records the state of the register after every timestep of disjoint
rotations, and the backward pass walks the timesteps in reverse,
producing one partial derivative per gate while back-rotating the error
signal.  Both passes cost O(n^2) per sample, the same order as a dense
matrix product, and every intermediate network is exactly orthogonal
because the parameters never leave angle space.

The module also carries the two classical baselines used for
comparison (singular value bounding and Stiefel-manifold retraction),
a dense execution mode whose inner products are estimated from
measurement shots, the mini-batch training loop, and a plain-text
network serialization format.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .data import evaluate
from .errors import (
    DimensionMismatch,
    NonFiniteLoss,
    OrthoNNError,
    ParseError,
    QrFailure,
    SvdFailure,
    TraceMismatch,
)
from .pyramid import (
    PyramidLayer,
    gate_arrays,
    num_angles,
    pyramid_plan,
    random_layer,
    rotate_batch,
)
from .shots import BitFlipNoise, ShotPlan, derive_seed, signed_ip_estimate

__all__ = [
    "ACTIVATIONS",
    "LOSSES",
    "REGIMES",
    "TrainConfig",
    "DenseLayer",
    "Network",
    "TimestepTrace",
    "LayerTrace",
    "EpochStats",
    "TrainingHistory",
    "pyramid_forward_trace",
    "pyramid_backprop",
    "forward_network",
    "network_gradients",
    "predict_score",
    "predict_scores",
    "svb_update",
    "stiefel_update",
    "train",
    "history_to_csv",
    "random_pyramid_network",
    "random_dense_network",
    "save_network",
    "load_network",
]

ACTIVATIONS = ("sigmoid", "relu", "none")
LOSSES = ("bce", "mse")
REGIMES = ("pyramid", "dense_exact", "dense_shots", "svb", "stiefel")

# Seed lanes: all randomness inside train() flows from config.seed
# through derive_seed with one of these lane tags.
_LANE_BATCH = 11
_LANE_SHOTS = 13
_LANE_EVAL = 17


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared by every training regime.

    ``svb_epsilon`` is only read by the singular value bounding
    baseline; it is carried here so one config object describes a run.
    """

    learning_rate: float = 0.05
    epochs: int = 10
    batch_size: int = 16
    seed: int = 0
    svb_epsilon: float = 0.01

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise OrthoNNError(
                f"learning_rate must be positive, got {self.learning_rate}"
            )
        if not isinstance(self.epochs, (int, np.integer)) or self.epochs < 1:
            raise OrthoNNError(f"epochs must be >= 1, got {self.epochs}")
        if (
            not isinstance(self.batch_size, (int, np.integer))
            or self.batch_size < 1
        ):
            raise OrthoNNError(
                f"batch_size must be >= 1, got {self.batch_size}"
            )
        if not 0.0 < self.svb_epsilon < 1.0:
            raise OrthoNNError(
                f"svb_epsilon must lie in (0, 1), got {self.svb_epsilon}"
            )


@dataclass(frozen=True, eq=False)
class DenseLayer:
    """A standard affine layer, optionally executed through shot
    estimation of its inner products.

    ``weights`` has shape (n_out, n_in); a missing ``bias`` means
    zeros.  When ``plan`` is set, every forward inner product is
    replaced by a signed two-vector overlap estimate at that plan's
    shot budget; ``plan=None`` is the exact layer, bit for bit.
    """

    weights: np.ndarray
    bias: np.ndarray = None
    plan: ShotPlan = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise DimensionMismatch("weights must be a 2-D matrix")
        if not np.all(np.isfinite(w)):
            raise OrthoNNError("weights contain NaN or Inf")
        w.setflags(write=False)
        if self.bias is None:
            b = np.zeros(w.shape[0])
        else:
            b = np.array(self.bias, dtype=np.float64)
        if b.shape != (w.shape[0],):
            raise DimensionMismatch(
                f"bias must have shape ({w.shape[0]},), got {b.shape}"
            )
        if not np.all(np.isfinite(b)):
            raise OrthoNNError("bias contains NaN or Inf")
        b.setflags(write=False)
        if self.plan is not None and not isinstance(self.plan, ShotPlan):
            raise OrthoNNError("plan must be a ShotPlan or None")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_in(self):
        return self.weights.shape[1]

    @property
    def n_out(self):
        return self.weights.shape[0]


@dataclass(eq=False)
class Network:
    """A feed-forward stack of pyramid and dense layers.

    ``activations`` names one of sigmoid/relu/none per layer and
    ``loss`` selects bce or mse.  The binary prediction read out of the
    final two-node layer is sigmoid(a[1] - a[0]).  The layer list is
    mutable on purpose: train() updates it in place.
    """

    layers: list
    activations: tuple
    loss: str = "bce"

    def __post_init__(self):
        layers = list(self.layers)
        if not layers:
            raise OrthoNNError("a network needs at least one layer")
        for lay in layers:
            if not isinstance(lay, (PyramidLayer, DenseLayer)):
                raise OrthoNNError(
                    f"unsupported layer type {type(lay).__name__}"
                )
        for first, second in zip(layers, layers[1:]):
            if first.n_out != second.n_in:
                raise DimensionMismatch(
                    f"layer width mismatch: {first.n_out} feeds {second.n_in}"
                )
        acts = tuple(str(a) for a in self.activations)
        if len(acts) != len(layers):
            raise DimensionMismatch(
                f"{len(layers)} layers but {len(acts)} activations"
            )
        for a in acts:
            if a not in ACTIVATIONS:
                raise OrthoNNError(f"unknown activation {a!r}")
        if self.loss not in LOSSES:
            raise OrthoNNError(f"unknown loss {self.loss!r}")
        self.layers = layers
        self.activations = acts

    @property
    def n_in(self):
        return self.layers[0].n_in

    @property
    def n_out(self):
        return self.layers[-1].n_out


@dataclass(frozen=True, eq=False)
class TimestepTrace:
    """The register state after every pyramid timestep.

    ``inner_layers[0]`` is the raw layer input and each later entry is
    one timestep of disjoint rotations applied to the previous one.
    ``thetas`` snapshots the angles that produced the chain so a stale
    trace can be detected when it is replayed.
    """

    inner_layers: tuple
    thetas: np.ndarray


@dataclass(frozen=True, eq=False)
class LayerTrace:
    x: np.ndarray
    z: np.ndarray
    inner: TimestepTrace = None


# ---------------------------------------------------------------------------
# activations and the score head
# ---------------------------------------------------------------------------


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(name, z):
    if name == "sigmoid":
        return _sigmoid(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def _activation_grad(name, z, post):
    """Derivative of the activation at ``z``; ``post`` is its value."""
    if name == "sigmoid":
        return post * (1.0 - post)
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    return np.ones_like(z)


def _score_scalar(diff):
    if diff >= 0:
        return 1.0 / (1.0 + math.exp(-diff))
    e = math.exp(diff)
    return e / (1.0 + e)


def _score_from_output(a):
    if a.shape != (2,):
        raise DimensionMismatch(
            f"the score head needs a 2-node final layer, got {a.shape}"
        )
    return _score_scalar(float(a[1] - a[0]))


_CLIP = 1e-12


def _loss_and_head_delta(loss, score, label):
    """Loss value and its gradient with respect to the final outputs.

    The score is s = sigmoid(a1 - a0), so dL/da = (dL/ds)(ds/ddiff)
    times (-1, +1).
    """
    y = float(label)
    if loss == "bce":
        s = min(max(score, _CLIP), 1.0 - _CLIP)
        value = -(y * math.log(s) + (1.0 - y) * math.log1p(-s))
        d_diff = score - y
    else:
        value = (score - y) ** 2
        d_diff = 2.0 * (score - y) * score * (1.0 - score)
    return value, np.array([-d_diff, d_diff])


# ---------------------------------------------------------------------------
# pyramid forward / backward
# ---------------------------------------------------------------------------


def pyramid_forward_trace(layer, x):
    """Apply a pyramid layer to a raw vector, recording every timestep.

    Returns ``(z, trace)`` where ``z`` is the final n_out coordinates
    of the rotated register (negated on the last wire when the layer
    carries a z flip).  The map is linear, so no input normalization is
    involved; the trace starts at ``x`` itself.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (layer.n_in,):
        raise DimensionMismatch(
            f"expected input of shape ({layer.n_in},), got {x.shape}"
        )
    _, cos_t, sin_t = gate_arrays(layer)
    states = [x.copy()]
    current = states[0]
    index = 0
    for step in pyramid_plan(layer.n_in, layer.n_out):
        nxt = current.copy()
        for w in step:
            c = cos_t[index]
            s = sin_t[index]
            top = current[w]
            bot = current[w + 1]
            nxt[w] = c * top - s * bot
            nxt[w + 1] = s * top + c * bot
            index += 1
        states.append(nxt)
        current = nxt
    out = current.copy()
    if layer.z_flip:
        out[-1] = -out[-1]
    z = out[layer.n_in - layer.n_out :]
    return z, TimestepTrace(tuple(states), layer.thetas.copy())


def pyramid_backprop(layer, trace, delta):
    """One backward sweep: per-angle gradients and the input delta.

    ``trace`` must come from the matching forward pass
    (:func:`pyramid_forward_trace` on the same layer); ``delta`` is the
    cost gradient with respect to the layer's n_out outputs.  Walking
    the timesteps backwards, each gate first contributes

        dC/dtheta = dt * (-s * top - c * bot) + db * (c * top - s * bot)

    from its recorded input pair (top, bot), then rotates the delta
    pair back through its transpose.  Returns ``(gradients, delta_in)``.
    """
    if not isinstance(trace, TimestepTrace):
        raise TraceMismatch("trace must be a TimestepTrace")
    if trace.thetas.shape != layer.thetas.shape or not np.array_equal(
        trace.thetas, layer.thetas
    ):
        raise TraceMismatch(
            "trace was recorded with different angles than the layer holds"
        )
    plan = pyramid_plan(layer.n_in, layer.n_out)
    if len(trace.inner_layers) != len(plan) + 1 or any(
        state.shape != (layer.n_in,) for state in trace.inner_layers
    ):
        raise TraceMismatch("trace shape does not match the layer's plan")
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (layer.n_out,):
        raise DimensionMismatch(
            f"expected delta of shape ({layer.n_out},), got {delta.shape}"
        )

    _, cos_t, sin_t = gate_arrays(layer)
    full = np.zeros(layer.n_in)
    full[layer.n_in - layer.n_out :] = delta
    if layer.z_flip:
        full[-1] = -full[-1]
    grads = np.zeros(layer.n_angles)
    index = layer.n_angles
    for t in range(len(plan) - 1, -1, -1):
        step = plan[t]
        pre = trace.inner_layers[t]
        index -= len(step)
        for k in range(len(step) - 1, -1, -1):
            w = step[k]
            i = index + k
            c = cos_t[i]
            s = sin_t[i]
            top = pre[w]
            bot = pre[w + 1]
            dt = full[w]
            db = full[w + 1]
            grads[i] = dt * (-s * top - c * bot) + db * (c * top - s * bot)
            full[w] = c * dt + s * db
            full[w + 1] = -s * dt + c * db
    return grads, full


# ---------------------------------------------------------------------------
# network forward / backward
# ---------------------------------------------------------------------------


def _dense_forward(layer, a, layer_index, seed_root):
    """Affine map, exact or with shot-estimated inner products."""
    if layer.plan is None:
        return layer.weights @ a + layer.bias
    root = layer.plan.rng_seed if seed_root is None else seed_root
    norm_x = float(np.linalg.norm(a))
    if norm_x == 0.0:
        return layer.bias.copy()
    x_hat = a / norm_x
    z = np.empty(layer.n_out)
    for i in range(layer.n_out):
        row = layer.weights[i]
        norm_w = float(np.linalg.norm(row))
        if norm_w == 0.0:
            z[i] = layer.bias[i]
            continue
        sub = replace(
            layer.plan, rng_seed=derive_seed(root, layer_index, i)
        )
        est = signed_ip_estimate(x_hat, row / norm_w, sub)
        z[i] = est.value * norm_x * norm_w + layer.bias[i]
    return z


def forward_network(net, x, seed_root=None):
    """Run one sample through the network.

    Returns the final post-activation output and a tuple of
    :class:`LayerTrace` records, one per layer, sufficient to replay
    the backward pass.  ``seed_root`` reroutes the shot randomness of
    any shot-executed dense layers (the training loop uses it to draw
    fresh shots per step); by default each layer's own plan seed is
    used, making repeated calls identical.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.n_in,):
        raise DimensionMismatch(
            f"expected input of shape ({net.n_in},), got {x.shape}"
        )
    a = x
    traces = []
    for li, (layer, act) in enumerate(zip(net.layers, net.activations)):
        if isinstance(layer, PyramidLayer):
            z, inner = pyramid_forward_trace(layer, a)
            traces.append(LayerTrace(a, z, inner))
        else:
            z = _dense_forward(layer, a, li, seed_root)
            traces.append(LayerTrace(a, z, None))
        a = _activate(act, z)
    return a, tuple(traces)


def predict_score(net, x):
    """The binary score sigmoid(a1 - a0) of one sample."""
    a, _ = forward_network(net, x)
    return _score_from_output(a)


def predict_scores(net, X):
    """Scores for a whole feature matrix.

    Exact networks run through the batched rotation kernels; networks
    with shot-executed layers fall back to per-sample forwards.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.n_in:
        raise DimensionMismatch(
            f"expected features of shape (m, {net.n_in}), got {X.shape}"
        )
    if net.n_out != 2:
        raise DimensionMismatch("the score head needs a 2-node final layer")
    if any(
        isinstance(lay, DenseLayer) and lay.plan is not None
        for lay in net.layers
    ):
        return np.array([predict_score(net, row) for row in X])
    A = X
    for layer, act in zip(net.layers, net.activations):
        if isinstance(layer, PyramidLayer):
            Z = rotate_batch(layer, A)[:, layer.n_in - layer.n_out :]
        else:
            Z = A @ layer.weights.T + layer.bias
        A = _activate(act, Z)
    return _sigmoid(A[:, 1] - A[:, 0])


def network_gradients(net, x, label, seed_root=None):
    """Loss, score, and per-layer parameter gradients for one sample.

    Pyramid layers yield an angle-gradient vector; dense layers yield a
    ``(weight_grad, bias_grad)`` pair.  Shot-executed layers follow the
    exact chain rule evaluated at their estimated activations.
    """
    a, traces = forward_network(net, x, seed_root)
    score = _score_from_output(a)
    loss, delta = _loss_and_head_delta(net.loss, score, label)
    grads = [None] * len(net.layers)
    for li in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[li]
        trace = traces[li]
        post = traces[li + 1].x if li + 1 < len(net.layers) else a
        dz = delta * _activation_grad(net.activations[li], trace.z, post)
        if isinstance(layer, PyramidLayer):
            grads[li], delta = pyramid_backprop(layer, trace.inner, dz)
        else:
            grads[li] = (np.outer(dz, trace.x), dz.copy())
            delta = layer.weights.T @ dz
    return loss, score, grads


# ---------------------------------------------------------------------------
# baseline updates
# ---------------------------------------------------------------------------


def svb_update(weights, gradient, config):
    """Gradient step followed by singular value bounding.

    The updated matrix is refactored by SVD and its singular values are
    clipped into [1 - eps, 1 + eps] with eps = ``config.svb_epsilon``,
    keeping the weight approximately orthogonal at O(n^3) cost.
    """
    w = np.asarray(weights, dtype=np.float64)
    g = np.asarray(gradient, dtype=np.float64)
    if w.ndim != 2 or g.shape != w.shape:
        raise DimensionMismatch("weights and gradient must share a 2-D shape")
    stepped = w - config.learning_rate * g
    try:
        u, s, vt = np.linalg.svd(stepped, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(f"SVD did not converge: {exc}") from exc
    eps = config.svb_epsilon
    np.clip(s, 1.0 - eps, 1.0 + eps, out=s)
    return (u * s) @ vt


def stiefel_update(weights, gradient, config):
    """Riemannian gradient step with QR retraction on the Stiefel
    manifold of row-orthonormal matrices.

    The gradient is projected onto the tangent space at W,

        Omega = (I - W W^T) G + W (W^T G - G^T W) / 2,

    the step W - lr * Omega is taken, and orthonormality is restored by
    the Q factor of a QR factorization with positive diagonal.
    """
    w = np.asarray(weights, dtype=np.float64)
    g = np.asarray(gradient, dtype=np.float64)
    if w.ndim != 2 or g.shape != w.shape:
        raise DimensionMismatch("weights and gradient must share a 2-D shape")
    n_out, n_in = w.shape
    if n_out > n_in:
        raise OrthoNNError(
            "stiefel_update needs n_out <= n_in (orthonormal rows)"
        )
    skew = 0.5 * (w.T @ g - g.T @ w)
    omega = (np.eye(n_out) - w @ w.T) @ g + w @ skew
    stepped = w - config.learning_rate * omega
    try:
        if n_out == n_in:
            q, r = np.linalg.qr(stepped)
            signs = np.sign(np.diag(r))
            signs[signs == 0.0] = 1.0
            return q * signs
        q, r = np.linalg.qr(stepped.T)
        signs = np.sign(np.diag(r))
        signs[signs == 0.0] = 1.0
        return (q * signs).T
    except np.linalg.LinAlgError as exc:
        raise QrFailure(f"QR factorization failed: {exc}") from exc


# ---------------------------------------------------------------------------
# network builders
# ---------------------------------------------------------------------------


def _check_widths(widths):
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2:
        raise OrthoNNError("an architecture needs at least two widths")
    if any(w < 1 for w in widths):
        raise OrthoNNError(f"widths must be positive, got {widths}")
    return widths


def _default_activations(n_layers):
    return ("sigmoid",) * (n_layers - 1) + ("none",)


def random_pyramid_network(widths, seed, loss="bce"):
    """Haar-random pyramid layers with sigmoid hidden activations."""
    widths = _check_widths(widths)
    layers = []
    for li in range(len(widths) - 1):
        rng = np.random.default_rng(derive_seed(seed, li))
        layers.append(random_layer(widths[li], widths[li + 1], rng=rng))
    return Network(layers, _default_activations(len(layers)), loss=loss)


def random_dense_network(widths, seed, orthogonal=False, plan=None, loss="bce"):
    """Dense layers with N(0, 1/n_in) init, or Haar row-orthonormal
    weights when ``orthogonal`` is set (the start point the SVB and
    Stiefel baselines assume).  ``plan`` attaches one shot plan to
    every layer."""
    widths = _check_widths(widths)
    layers = []
    for li in range(len(widths) - 1):
        rng = np.random.default_rng(derive_seed(seed, li))
        n_in, n_out = widths[li], widths[li + 1]
        if orthogonal:
            if n_out > n_in:
                raise OrthoNNError(
                    "orthogonal init needs non-increasing widths"
                )
            q, r = np.linalg.qr(rng.standard_normal((n_in, n_out)))
            signs = np.sign(np.diag(r))
            signs[signs == 0.0] = 1.0
            w = (q * signs).T
        else:
            w = rng.standard_normal((n_out, n_in)) / math.sqrt(n_in)
        layers.append(DenseLayer(w, plan=plan))
    return Network(layers, _default_activations(len(layers)), loss=loss)


# ---------------------------------------------------------------------------
# the training loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    acc: float
    auc: float
    seconds: float


@dataclass(frozen=True, eq=False)
class TrainingHistory:
    epochs: tuple


def history_to_csv(history):
    lines = ["epoch,loss,acc,auc,seconds"]
    for row in history.epochs:
        lines.append(
            f"{row.epoch},{row.loss!r},{row.acc!r},{row.auc!r},{row.seconds!r}"
        )
    return "\n".join(lines) + "\n"


class _PyramidState:
    """Mutable training-time mirror of one pyramid layer.

    The rotation buffer and backward delta are allocated once per
    distinct batch size and reused across steps; fresh allocations
    every step would land on cache-cold pages and skew per-step cost
    upward for wide layers.  No per-gate traces are kept: the backward
    kernel reconstructs each gate's inputs by inverting the rotations, so
    the working set stays a couple of (batch, n) panels regardless of
    gate count.
    """

    __slots__ = (
        "n_in", "n_out", "z_flip", "thetas", "tops", "cos_t", "sin_t",
        "grad", "cache", "_zbuf", "_back", "_gradbuf",
    )

    def __init__(self, layer):
        self.n_in = layer.n_in
        self.n_out = layer.n_out
        self.z_flip = layer.z_flip
        self.thetas = layer.thetas.copy()
        self.tops, self.cos_t, self.sin_t = gate_arrays(layer)
        self.grad = None
        self.cache = None
        self._zbuf = {}
        self._back = {}
        self._gradbuf = np.empty(self.tops.shape[0])

    def _keyed(self, table, batch):
        buf = table.get(batch)
        if buf is None:
            buf = np.empty((batch, self.n_in))
            table[batch] = buf
        return buf

    def forward(self, A, record=True):
        Z = self._keyed(self._zbuf, A.shape[0])
        np.copyto(Z, A)
        _kernels.fwd(self.tops, self.cos_t, self.sin_t, Z)
        if self.z_flip:
            Z[:, -1] = -Z[:, -1]
        if record:
            self.cache = Z
        return Z[:, self.n_in - self.n_out :]

    def backward(self, dz):
        batch = dz.shape[0]
        full = self._keyed(self._back, batch)
        full.fill(0.0)
        full[:, self.n_in - self.n_out :] = dz
        Z = self.cache
        if self.z_flip:
            full[:, -1] = -full[:, -1]
            Z[:, -1] = -Z[:, -1]
        grads = self._gradbuf
        _kernels.bwd(
            self.tops, self.cos_t, self.sin_t, Z, full, grads
        )
        self.grad = grads / batch
        return full

    def apply(self, config, regime):
        self.thetas -= config.learning_rate * self.grad
        np.cos(self.thetas, out=self.cos_t)
        np.sin(self.thetas, out=self.sin_t)

    def snapshot(self):
        return PyramidLayer(
            self.n_in, self.n_out, self.thetas.copy(), z_flip=self.z_flip
        )


class _DenseState:
    """Mutable training-time mirror of one dense layer."""

    __slots__ = ("weights", "bias", "plan", "index", "grad_w", "grad_b", "cache")

    def __init__(self, layer, index):
        self.weights = layer.weights.copy()
        self.bias = layer.bias.copy()
        self.plan = layer.plan
        self.index = index
        self.grad_w = None
        self.grad_b = None
        self.cache = None

    def forward(self, A, shot_root=None):
        self.cache = A
        if self.plan is None:
            return A @ self.weights.T + self.bias
        proxy = DenseLayer(self.weights, self.bias, plan=self.plan)
        rows = []
        for r in range(A.shape[0]):
            root = (
                self.plan.rng_seed
                if shot_root is None
                else derive_seed(shot_root, r)
            )
            rows.append(_dense_forward(proxy, A[r], self.index, root))
        return np.array(rows)

    def backward(self, dz):
        batch = dz.shape[0]
        self.grad_w = dz.T @ self.cache / batch
        self.grad_b = dz.mean(axis=0)
        return dz @ self.weights

    def apply(self, config, regime):
        n_out, n_in = self.weights.shape
        if regime == "svb" and n_out <= n_in:
            self.weights = svb_update(self.weights, self.grad_w, config)
        elif regime == "stiefel" and n_out <= n_in:
            self.weights = stiefel_update(self.weights, self.grad_w, config)
        else:
            self.weights -= config.learning_rate * self.grad_w
        self.bias -= config.learning_rate * self.grad_b

    def snapshot(self):
        return DenseLayer(
            self.weights.copy(), self.bias.copy(), plan=self.plan
        )


def _batch_losses(loss, scores, labels):
    if loss == "bce":
        s = np.clip(scores, _CLIP, 1.0 - _CLIP)
        values = -(labels * np.log(s) + (1.0 - labels) * np.log1p(-s))
        d_diff = scores - labels
    else:
        values = (scores - labels) ** 2
        d_diff = 2.0 * (scores - labels) * scores * (1.0 - scores)
    return values, d_diff


def _forward_states(states, activations, X, shot_root=None, record=True):
    """Batched forward through the mutable layer states.

    Returns the per-layer pre-activations and post-activations; each
    state keeps whatever cache its backward pass needs.  Evaluation
    passes ``record=False`` so pyramid layers skip the gate traces
    that only a backward pass would read.
    """
    A = X
    zs = []
    posts = []
    for st, act in zip(states, activations):
        if isinstance(st, _PyramidState):
            Z = st.forward(A, record)
        else:
            Z = st.forward(A, shot_root)
        A = _activate(act, Z)
        zs.append(Z)
        posts.append(A)
    return zs, posts


def train(net, dataset, config, regime, on_step=None):
    """Mini-batch gradient descent under one of five regimes.

    ``pyramid`` trains angle parameters through the rotation kernels;
    ``dense_exact`` and ``dense_shots`` run plain gradient descent on
    affine layers (the latter drawing fresh measurement shots for every
    forward inner product); ``svb`` and ``stiefel`` re-orthogonalize
    after every step.  The network is updated in place and a
    :class:`TrainingHistory` of per-epoch loss/acc/auc/seconds rows is
    returned.  ``on_step(net, step_index)`` is invoked after every
    optimizer step with the freshly materialized network.

    Raises :class:`NonFiniteLoss` the moment a batch loss stops being
    finite, with the epoch and step in the message.
    """
    if regime not in REGIMES:
        raise OrthoNNError(f"unknown regime {regime!r}; pick one of {REGIMES}")
    if regime == "pyramid":
        if not all(isinstance(l, PyramidLayer) for l in net.layers):
            raise OrthoNNError(
                "the pyramid regime needs a network of pyramid layers"
            )
    else:
        if not all(isinstance(l, DenseLayer) for l in net.layers):
            raise OrthoNNError(
                f"the {regime} regime needs a network of dense layers"
            )
    if net.n_out != 2:
        raise DimensionMismatch("training needs a 2-node final layer")
    features = np.asarray(dataset.features, dtype=np.float64)
    labels = np.asarray(dataset.labels, dtype=np.float64)
    m = features.shape[0]
    if features.ndim != 2 or features.shape[1] != net.n_in:
        raise DimensionMismatch(
            f"expected features of shape (m, {net.n_in}), "
            f"got {features.shape}"
        )

    states = [
        _PyramidState(lay)
        if isinstance(lay, PyramidLayer)
        else _DenseState(lay, i)
        for i, lay in enumerate(net.layers)
    ]
    shots_in_play = regime == "dense_shots" and any(
        isinstance(st, _DenseState) and st.plan is not None for st in states
    )

    def write_back():
        for i, st in enumerate(states):
            net.layers[i] = st.snapshot()

    rows = []
    step = 0
    for epoch in range(config.epochs):
        started = time.perf_counter()
        order = np.random.default_rng(
            derive_seed(config.seed, _LANE_BATCH, epoch)
        ).permutation(m)
        loss_sum = 0.0
        for start in range(0, m, config.batch_size):
            idx = order[start : start + config.batch_size]
            X = features[idx]
            y = labels[idx]
            shot_root = (
                derive_seed(config.seed, _LANE_SHOTS, step)
                if shots_in_play
                else None
            )
            zs, posts = _forward_states(states, net.activations, X, shot_root)
            final = posts[-1]
            scores = _sigmoid(final[:, 1] - final[:, 0])
            values, d_diff = _batch_losses(net.loss, scores, y)
            batch_loss = float(values.mean())
            if not math.isfinite(batch_loss):
                raise NonFiniteLoss(
                    f"loss became non-finite at epoch {epoch}, "
                    f"step {step}: {batch_loss}"
                )
            loss_sum += float(values.sum())
            delta = np.column_stack((-d_diff, d_diff))
            for li in range(len(states) - 1, -1, -1):
                dz = delta * _activation_grad(
                    net.activations[li], zs[li], posts[li]
                )
                delta = states[li].backward(dz)
            for st in states:
                st.apply(config, regime)
            step += 1
            if on_step is not None:
                write_back()
                on_step(net, step - 1)

        eval_root = (
            derive_seed(config.seed, _LANE_EVAL, epoch)
            if shots_in_play
            else None
        )
        _, eval_posts = _forward_states(
            states, net.activations, features, eval_root, record=False
        )
        scores = _sigmoid(eval_posts[-1][:, 1] - eval_posts[-1][:, 0])
        if not np.all(np.isfinite(scores)):
            raise NonFiniteLoss(
                f"predictions became non-finite after epoch {epoch}"
            )
        metrics = evaluate(scores, dataset.labels)
        rows.append(
            EpochStats(
                epoch,
                loss_sum / m,
                metrics["acc"],
                metrics["auc"],
                time.perf_counter() - started,
            )
        )
    write_back()
    return TrainingHistory(tuple(rows))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _format_floats(values):
    return " ".join(repr(float(v)) for v in np.asarray(values).ravel())


def save_network(net, path_or_file):
    """Write a network as plain text.

    Layout: a ``NET <count>`` line, a ``LOSS <name>`` line, then per
    layer either ``PYRAMID n_in n_out zflip`` followed by one line of
    angles, or ``DENSE n_in n_out exact|shots`` followed by n_out
    weight rows, one bias line, and (for shots) one
    ``PLAN n_shots seed p_flip|- mitigate`` line; each layer closes
    with ``ACT <name>``.  Floats are written with repr so loading is
    exact.
    """
    lines = [f"NET {len(net.layers)}", f"LOSS {net.loss}"]
    for layer, act in zip(net.layers, net.activations):
        if isinstance(layer, PyramidLayer):
            lines.append(
                f"PYRAMID {layer.n_in} {layer.n_out} {int(layer.z_flip)}"
            )
            lines.append(_format_floats(layer.thetas))
        else:
            mode = "shots" if layer.plan is not None else "exact"
            lines.append(f"DENSE {layer.n_in} {layer.n_out} {mode}")
            for row in layer.weights:
                lines.append(_format_floats(row))
            lines.append(_format_floats(layer.bias))
            if layer.plan is not None:
                p = layer.plan
                flip = "-" if p.noise is None else repr(p.noise.p_flip)
                lines.append(
                    f"PLAN {p.n_shots} {p.rng_seed} {flip} "
                    f"{int(p.mitigation)}"
                )
        lines.append(f"ACT {act}")
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)


class _LineReader:
    def __init__(self, lines):
        self.lines = lines
        self.at = 0

    def next(self, what):
        while self.at < len(self.lines):
            line = self.lines[self.at].strip()
            self.at += 1
            if line:
                return line
        raise ParseError(f"unexpected end of file while reading {what}")

    def done(self):
        return all(not line.strip() for line in self.lines[self.at :])


def _parse_floats(line, count, what):
    tokens = line.split()
    if len(tokens) != count:
        raise ParseError(f"expected {count} values for {what}, got {len(tokens)}")
    try:
        values = np.array([float(t) for t in tokens])
    except ValueError:
        raise ParseError(f"bad float in {what}: {line!r}") from None
    if not np.all(np.isfinite(values)):
        raise ParseError(f"non-finite value in {what}")
    return values


def load_network(path_or_file):
    """Parse a network written by :func:`save_network`."""
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file) as fh:
            text = fh.read()
    reader = _LineReader(text.split("\n"))

    header = reader.next("the NET header").split()
    if len(header) != 2 or header[0] != "NET":
        raise ParseError(f"expected 'NET <count>', got {header}")
    try:
        n_layers = int(header[1])
    except ValueError:
        raise ParseError(f"bad layer count {header[1]!r}") from None
    if n_layers < 1:
        raise ParseError("a network needs at least one layer")
    loss_line = reader.next("the LOSS line").split()
    if len(loss_line) != 2 or loss_line[0] != "LOSS":
        raise ParseError(f"expected 'LOSS <name>', got {loss_line}")
    loss = loss_line[1]
    if loss not in LOSSES:
        raise ParseError(f"unknown loss {loss!r}")

    layers = []
    acts = []
    for _ in range(n_layers):
        head = reader.next("a layer header").split()
        if head[0] == "PYRAMID":
            if len(head) != 4:
                raise ParseError(f"malformed PYRAMID header: {head}")
            try:
                n_in, n_out, flip = int(head[1]), int(head[2]), int(head[3])
            except ValueError:
                raise ParseError(f"malformed PYRAMID header: {head}") from None
            if flip not in (0, 1):
                raise ParseError(f"zflip must be 0 or 1, got {flip}")
            thetas = _parse_floats(
                reader.next("pyramid angles"),
                num_angles(n_in, n_out),
                "pyramid angles",
            )
            layers.append(
                PyramidLayer(n_in, n_out, thetas, z_flip=bool(flip))
            )
        elif head[0] == "DENSE":
            if len(head) != 4 or head[3] not in ("exact", "shots"):
                raise ParseError(f"malformed DENSE header: {head}")
            try:
                n_in, n_out = int(head[1]), int(head[2])
            except ValueError:
                raise ParseError(f"malformed DENSE header: {head}") from None
            rows = [
                _parse_floats(
                    reader.next("a weight row"), n_in, "a weight row"
                )
                for _ in range(n_out)
            ]
            bias = _parse_floats(reader.next("the bias"), n_out, "the bias")
            plan = None
            if head[3] == "shots":
                plan_line = reader.next("the PLAN line").split()
                if len(plan_line) != 5 or plan_line[0] != "PLAN":
                    raise ParseError(
                        f"expected a PLAN line after a shots layer, "
                        f"got {plan_line}"
                    )
                try:
                    n_shots = int(plan_line[1])
                    rng_seed = int(plan_line[2])
                    noise = (
                        None
                        if plan_line[3] == "-"
                        else BitFlipNoise(float(plan_line[3]))
                    )
                    mitigation = bool(int(plan_line[4]))
                except ValueError:
                    raise ParseError(
                        f"malformed PLAN line: {plan_line}"
                    ) from None
                plan = ShotPlan(
                    n_shots=n_shots,
                    rng_seed=rng_seed,
                    noise=noise,
                    mitigation=mitigation,
                )
            layers.append(DenseLayer(np.array(rows), bias, plan=plan))
        else:
            raise ParseError(f"unknown layer kind {head[0]!r}")
        act_line = reader.next("the ACT line").split()
        if len(act_line) != 2 or act_line[0] != "ACT":
            raise ParseError(f"expected 'ACT <name>', got {act_line}")
        if act_line[1] not in ACTIVATIONS:
            raise ParseError(f"unknown activation {act_line[1]!r}")
        acts.append(act_line[1])
    if not reader.done():
        raise ParseError("trailing content after the declared layers")
    try:
        return Network(layers, tuple(acts), loss=loss)
    except OrthoNNError as exc:
        raise ParseError(f"inconsistent network file: {exc}") from exc
