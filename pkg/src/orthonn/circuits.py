"""RBS gate algebra, unary states, data loaders, and two simulators.

Conventions used throughout the package:

* Wires are 0-indexed, top to bottom.
* An ``RbsGate`` on the ordered pair ``(p, q)`` acts on the unary
  amplitude coordinates ``(a_p, a_q)`` as the planar rotation
  ``[[cos t, sin t], [-sin t, cos t]]``; every other coordinate is
  untouched. Equivalently ``e_p -> cos t * e_p - sin t * e_q`` and
  ``e_q -> sin t * e_p + cos t * e_q``.
* Builder functions (loaders here, pyramids in :mod:`orthonn.pyramid`)
  list nearest-neighbour pairs as ``(lower wire, upper wire)``, so the
  upper wire keeps the cosine share of its amplitude and the sine share
  flows downward. This is what makes the loader recursion read
  ``alpha_0 = atan2(|x_{1:}|, x_0)`` with no sign gymnastics.
* The unary basis vector ``e_j`` is the computational basis state with
  a single 1 on wire ``j``; in the full 2^n space it sits at index
  ``2^(n-1-j)`` (wire 0 is the most significant bit).

The full-statevector simulator exists purely as a cross-check oracle
for the O(n) unary backend and is capped at 14 wires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import errors

LAYOUTS = ("diagonal", "semi_diagonal", "parallel")

_STATEVECTOR_MAX_WIRES = 14


# ---------------------------------------------------------------------------
# Core types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RbsGate:
    """One reconfigurable beam-splitter gate: an ordered wire pair and an angle."""

    qubits: tuple[int, int]
    theta: float

    def __post_init__(self):
        p, q = self.qubits
        p, q = int(p), int(q)
        if p == q:
            raise errors.OrthoNNError(f"RBS gate needs two distinct wires, got {self.qubits}")
        if p < 0 or q < 0:
            raise errors.OrthoNNError(f"negative wire index in {self.qubits}")
        theta = float(self.theta)
        if not math.isfinite(theta):
            raise errors.OrthoNNError("RBS angle must be finite")
        object.__setattr__(self, "qubits", (p, q))
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class Circuit:
    """Timestep-ordered RBS gates on ``width`` wires, optional trailing Z flip.

    Gates inside one timestep must touch pairwise-disjoint wires. The
    optional ``z_flip`` negates the amplitude carried by the last wire
    after all timesteps, which is how a determinant of -1 is realized
    without leaving the RBS gate set.
    """

    width: int
    timesteps: tuple[tuple[RbsGate, ...], ...] = ()
    z_flip: bool = False

    def __post_init__(self):
        width = int(self.width)
        if width < 2:
            raise errors.DimensionTooSmall("a circuit needs at least 2 wires")
        steps = tuple(tuple(ts) for ts in self.timesteps)
        for ts in steps:
            if not ts:
                raise errors.OrthoNNError("empty timestep")
            used = set()
            for gate in ts:
                if not isinstance(gate, RbsGate):
                    raise errors.OrthoNNError("timesteps must contain RbsGate objects")
                p, q = gate.qubits
                if p >= width or q >= width:
                    raise errors.OrthoNNError(
                        f"gate {gate.qubits} exceeds circuit width {width}"
                    )
                if p in used or q in used:
                    raise errors.OrthoNNError(
                        f"wire reuse within one timestep at gate {gate.qubits}"
                    )
                used.update((p, q))
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "timesteps", steps)
        object.__setattr__(self, "z_flip", bool(self.z_flip))

    @property
    def n_gates(self) -> int:
        return sum(len(ts) for ts in self.timesteps)


@dataclass(frozen=True, eq=False)
class UnaryState:
    """Real amplitudes over the unary basis e_0..e_{n-1}; unit norm."""

    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=np.float64, copy=True).reshape(-1)
        if amps.size < 2:
            raise errors.DimensionTooSmall("unary states need n >= 2")
        if abs(float(amps @ amps) - 1.0) > 1e-10:
            raise errors.NormError("unary state is not unit norm")
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)

    @classmethod
    def basis(cls, n: int, j: int) -> "UnaryState":
        amps = np.zeros(n)
        amps[j] = 1.0
        return cls(amps)

    @property
    def n(self) -> int:
        return self.amps.size


@dataclass(frozen=True, eq=False)
class LoaderAngles:
    """n-1 loader angles plus the original norm of the encoded vector.

    ``alphas`` are stored in circuit order (timestep-major, upper wire
    ascending inside a timestep) for the layout they were computed for.
    """

    alphas: np.ndarray
    norm: float
    layout: str = "diagonal"

    def __post_init__(self):
        alphas = np.array(self.alphas, dtype=np.float64, copy=True).reshape(-1)
        alphas.flags.writeable = False
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "norm", float(self.norm))
        if self.layout not in LAYOUTS:
            raise errors.LayoutMismatch(f"unknown loader layout {self.layout!r}")


# ---------------------------------------------------------------------------
# Loader plans: one split tree per layout
# ---------------------------------------------------------------------------
#
# Every layout is a binary mass-splitting tree over index ranges. A node
# splits [a, b) at mid; its gate moves the sine share of the mass held on
# wire a down to wire mid. Angles are read off the tree with
# atan2(value of [mid,b), value of [a,mid)) where a singleton range
# contributes its signed component and a wider range its (nonnegative)
# l2 mass. The three layouts differ only in tree shape:
#
#   diagonal       chain tree, one split per timestep, depth n-1
#   semi_diagonal  one top split at ceil(n/2), then two parallel chains
#   parallel       balanced recursion, depth ceil(log2 n)


def _loader_plan(n: int, layout: str):
    """Return timesteps of split nodes ``(a, mid, b)`` for an n-wire loader."""
    if layout == "diagonal":
        return [[(k, k + 1, n)] for k in range(n - 1)]

    if layout == "semi_diagonal":
        m = (n + 1) // 2
        steps = [[(0, m, n)]]
        chains = [(0, m), (m, n)]
        depth = max(m - 1, n - m - 1)
        for j in range(depth):
            step = [
                (a + j, a + j + 1, b)
                for a, b in chains
                if a + j + 1 < b
            ]
            if step:
                steps.append(step)
        return steps

    if layout == "parallel":
        levels: dict[int, list] = {}

        def split(a, b, depth):
            if b - a < 2:
                return
            mid = a + (b - a + 1) // 2
            levels.setdefault(depth, []).append((a, mid, b))
            split(a, mid, depth + 1)
            split(mid, b, depth + 1)

        split(0, n, 0)
        return [sorted(levels[d]) for d in sorted(levels)]

    raise errors.LayoutMismatch(f"unknown loader layout {layout!r}")


def compute_loader_angles(x, layout: str = "diagonal") -> LoaderAngles:
    """Angles that load x/|x| onto the unary basis with the given layout.

    Subtree masses are accumulated bottom-up (child squared masses sum
    into the parent), so each angle sees the locally accurate mass of its
    own segment and arbitrary real vectors round-trip to ~1e-15 even with
    tiny tails. Degenerate zero-mass splits get angle 0 via atan2(0, 0).
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size < 2:
        raise errors.DimensionTooSmall("need at least 2 components to load")
    if not np.all(np.isfinite(x)):
        raise errors.OrthoNNError("input vector has non-finite entries")
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise errors.ZeroVector("cannot load the zero vector")
    xhat = x / norm

    plan = _loader_plan(x.size, layout)

    mass2: dict[tuple[int, int], float] = {}

    def side_mass2(a, b):
        if b - a == 1:
            return float(xhat[a]) ** 2
        return mass2[(a, b)]

    for step in reversed(plan):
        for a, mid, b in step:
            mass2[(a, b)] = side_mass2(a, mid) + side_mass2(mid, b)

    def side_value(a, b):
        if b - a == 1:
            return float(xhat[a])
        return math.sqrt(mass2[(a, b)])

    alphas = np.array(
        [
            math.atan2(side_value(mid, b), side_value(a, mid))
            for step in plan
            for a, mid, b in step
        ]
    )
    return LoaderAngles(alphas=alphas, norm=norm, layout=layout)


def build_loader(angles: LoaderAngles, layout: str | None = None) -> Circuit:
    """Loader circuit for precomputed angles; n-1 gates on n wires."""
    if layout is None:
        layout = angles.layout
    elif layout != angles.layout:
        raise errors.LayoutMismatch(
            f"angles were computed for {angles.layout!r}, requested {layout!r}"
        )
    n = angles.alphas.size + 1
    if n < 2:
        raise errors.LayoutMismatch("a loader needs at least one angle")
    plan = _loader_plan(n, layout)
    it = iter(angles.alphas)
    timesteps = tuple(
        tuple(RbsGate((mid, a), float(next(it))) for a, mid, b in step) for step in plan
    )
    return Circuit(width=n, timesteps=timesteps)


def load_vector(x, layout: str = "diagonal") -> UnaryState:
    """Convenience: compute angles for x, build the loader, run it on e_0."""
    angles = compute_loader_angles(x, layout)
    circuit = build_loader(angles)
    return apply_circuit(circuit, UnaryState.basis(angles.alphas.size + 1, 0))


# ---------------------------------------------------------------------------
# Simulators
# ---------------------------------------------------------------------------


def apply_to_vector(circuit: Circuit, vec) -> np.ndarray:
    """Raw linear action of the circuit on a length-n coordinate vector.

    No norm checks; this is the workhorse shared by apply_circuit and the
    layer code, and it is exactly linear in ``vec``.
    """
    out = np.array(vec, dtype=np.float64, copy=True).reshape(-1)
    if out.size != circuit.width:
        raise errors.WidthMismatch(
            f"vector of length {out.size} vs circuit width {circuit.width}"
        )
    for ts in circuit.timesteps:
        for gate in ts:
            p, q = gate.qubits
            c, s = math.cos(gate.theta), math.sin(gate.theta)
            ap, aq = out[p], out[q]
            out[p] = c * ap + s * aq
            out[q] = -s * ap + c * aq
    if circuit.z_flip:
        out[-1] = -out[-1]
    return out


def apply_circuit(circuit: Circuit, state: UnaryState) -> UnaryState:
    return UnaryState(apply_to_vector(circuit, state.amps))


def _parse_bits(basis_state, width: int) -> int:
    if isinstance(basis_state, str):
        bits = [int(ch) for ch in basis_state.strip()]
    else:
        bits = [int(b) for b in basis_state]
    if len(bits) != width:
        raise errors.WidthMismatch(
            f"basis state has {len(bits)} bits, circuit width is {width}"
        )
    if any(b not in (0, 1) for b in bits):
        raise errors.OrthoNNError("basis state must be a bitstring")
    index = 0
    for b in bits:
        index = (index << 1) | b
    return index


def apply_full_statevector(circuit: Circuit, basis_state) -> np.ndarray:
    """Reference simulator on the full 2^n space (test oracle, n <= 14).

    Each gate applies the 4x4 RBS unitary: identity on |00> and |11>,
    the planar rotation on the middle block. Wire 0 is the most
    significant bit of the basis index.
    """
    n = circuit.width
    if n > _STATEVECTOR_MAX_WIRES:
        raise errors.TooWide(f"full statevector capped at {_STATEVECTOR_MAX_WIRES} wires")
    index = _parse_bits(basis_state, n)
    psi = np.zeros(1 << n)
    psi[index] = 1.0
    all_idx = np.arange(1 << n)
    for ts in circuit.timesteps:
        for gate in ts:
            p, q = gate.qubits
            sp, sq = n - 1 - p, n - 1 - q
            sel = (((all_idx >> sp) & 1) == 1) & (((all_idx >> sq) & 1) == 0)
            i10 = all_idx[sel]
            i01 = i10 ^ ((1 << sp) | (1 << sq))
            c, s = math.cos(gate.theta), math.sin(gate.theta)
            a10, a01 = psi[i10], psi[i01]
            psi[i10] = c * a10 + s * a01
            psi[i01] = -s * a10 + c * a01
    if circuit.z_flip:
        psi[(all_idx & 1) == 1] *= -1.0
    return psi


# ---------------------------------------------------------------------------
# Circuit algebra helpers
# ---------------------------------------------------------------------------


def adjoint_circuit(circuit: Circuit) -> Circuit:
    """Inverse circuit: reversed timesteps, negated angles."""
    if circuit.z_flip:
        raise errors.OrthoNNError(
            "adjoint of a z_flip circuit would need a leading Z; not representable"
        )
    steps = tuple(
        tuple(RbsGate(g.qubits, -g.theta) for g in ts)
        for ts in reversed(circuit.timesteps)
    )
    return Circuit(width=circuit.width, timesteps=steps)


def shift_circuit(circuit: Circuit, offset: int, new_width: int) -> Circuit:
    """Re-index every wire by +offset inside a wider register."""
    if circuit.z_flip:
        raise errors.OrthoNNError("cannot shift a z_flip circuit (its Z is wire-anchored)")
    if offset < 0 or circuit.width + offset > new_width:
        raise errors.WidthMismatch(
            f"shift by {offset} does not fit width {circuit.width} into {new_width}"
        )
    steps = tuple(
        tuple(RbsGate((g.qubits[0] + offset, g.qubits[1] + offset), g.theta) for g in ts)
        for ts in circuit.timesteps
    )
    return Circuit(width=new_width, timesteps=steps)


def concat_circuits(first: Circuit, second: Circuit) -> Circuit:
    """Run ``first`` then ``second`` on the same register."""
    if first.width != second.width:
        raise errors.WidthMismatch(
            f"widths differ: {first.width} vs {second.width}"
        )
    if first.z_flip:
        raise errors.OrthoNNError("cannot append gates after a z_flip")
    return Circuit(
        width=first.width,
        timesteps=first.timesteps + second.timesteps,
        z_flip=second.z_flip,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def circuit_to_text(circuit: Circuit) -> str:
    """Line format: WIDTH header, one RBS line per gate, --- between timesteps,
    optional trailing ZFLIP. Angles carry 17 significant digits."""
    lines = [f"WIDTH {circuit.width}"]
    for k, ts in enumerate(circuit.timesteps):
        if k:
            lines.append("---")
        for gate in ts:
            p, q = gate.qubits
            lines.append(f"RBS {p} {q} {gate.theta:.17g}")
    if circuit.z_flip:
        lines.append("ZFLIP")
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str) -> Circuit:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("WIDTH"):
        raise errors.ParseError("circuit text must start with a WIDTH header")
    header = lines[0].split()
    if len(header) != 2:
        raise errors.ParseError("malformed WIDTH header")
    try:
        width = int(header[1])
    except ValueError as exc:
        raise errors.ParseError(f"bad width {header[1]!r}") from exc

    timesteps: list[tuple[RbsGate, ...]] = []
    current: list[RbsGate] = []
    z_flip = False
    for lineno, ln in enumerate(lines[1:], start=2):
        if z_flip:
            raise errors.ParseError(f"line {lineno}: content after ZFLIP")
        if ln == "---":
            if current:
                timesteps.append(tuple(current))
                current = []
            continue
        if ln == "ZFLIP":
            z_flip = True
            continue
        parts = ln.split()
        if len(parts) != 4 or parts[0] != "RBS":
            raise errors.ParseError(f"line {lineno}: expected 'RBS i j theta', got {ln!r}")
        try:
            p, q, theta = int(parts[1]), int(parts[2]), float(parts[3])
        except ValueError as exc:
            raise errors.ParseError(f"line {lineno}: bad RBS line {ln!r}") from exc
        try:
            gate = RbsGate((p, q), theta)
            if p >= width or q >= width:
                raise errors.OrthoNNError("index out of range")
        except errors.OrthoNNError as exc:
            raise errors.ParseError(f"line {lineno}: {exc}") from exc
        current.append(gate)
    if current:
        timesteps.append(tuple(current))
    try:
        return Circuit(width=width, timesteps=tuple(timesteps), z_flip=z_flip)
    except errors.OrthoNNError as exc:
        raise errors.ParseError(str(exc)) from exc
