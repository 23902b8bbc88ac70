"""Shot-based execution: sampling, inner-product estimators, tomography,
bit-flip readout noise, and unary post-selection mitigation.

Measurement model
-----------------
A circuit run ends with every wire measured once. The ideal outcome of a
unary state is the basis pattern e_j with probability amp_j^2; optional
BitFlipNoise then flips each measured bit independently. Histograms map
bitstrings (wire 0 = leftmost character) to counts.

Estimators sample a freshly constructed circuit and are bit-for-bit
deterministic in the ShotPlan. At zero noise the count of a single
pattern in a multinomial draw is binomially distributed, so estimators
that consume one pattern draw that binomial directly; the circuit is
still built and simulated exactly, only the per-shot expansion is
skipped. Internal multi-pass procedures derive per-pass sub-seeds from
the plan seed with derive_seed, the same splitting contract offered to
parallel callers.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from . import errors
from .circuits import (
    Circuit,
    RbsGate,
    UnaryState,
    adjoint_circuit,
    apply_circuit,
    build_loader,
    compute_loader_angles,
    concat_circuits,
    load_vector,
    shift_circuit,
)


def derive_seed(root_seed: int, *lane: int) -> int:
    """Deterministic 64-bit sub-seed for a named lane under root_seed."""
    seq = np.random.SeedSequence(root_seed, spawn_key=tuple(lane))
    return int(seq.generate_state(1, np.uint64)[0])


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class BitFlipNoise:
    """Independent per-bit readout flip with probability p_flip."""

    p_flip: float

    def __post_init__(self):
        p = float(self.p_flip)
        if not (0.0 <= p < 1.0) or not math.isfinite(p):
            raise errors.OrthoNNError(f"p_flip must lie in [0, 1), got {self.p_flip}")
        object.__setattr__(self, "p_flip", p)


@dataclass(frozen=True)
class ShotPlan:
    n_shots: int
    rng_seed: int
    noise: BitFlipNoise | None = None
    mitigation: bool = False

    def __post_init__(self):
        if not isinstance(self.n_shots, (int, np.integer)) or self.n_shots < 1:
            raise errors.OrthoNNError(f"n_shots must be a positive integer, got {self.n_shots}")
        seed = int(self.rng_seed)
        if not (0 <= seed < 2**64):
            raise errors.OrthoNNError("rng_seed must fit in 64 bits")
        if self.noise is not None and not isinstance(self.noise, BitFlipNoise):
            raise errors.OrthoNNError("noise must be a BitFlipNoise or None")
        object.__setattr__(self, "n_shots", int(self.n_shots))
        object.__setattr__(self, "rng_seed", seed)
        object.__setattr__(self, "mitigation", bool(self.mitigation))


@dataclass(frozen=True)
class Estimate:
    """One sampled scalar plus its shot bookkeeping."""

    value: float
    n_used: int
    n_total: int
    name: str = ""
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.n_used <= self.n_total):
            raise errors.OrthoNNError(
                f"need 0 <= n_used <= n_total, got {self.n_used}/{self.n_total}"
            )
        object.__setattr__(self, "value", float(self.value))


def unary_bitstring(width: int, j: int) -> str:
    """The measurement pattern of basis state e_j."""
    if not 0 <= j < width:
        raise errors.OrthoNNError(f"wire {j} outside width {width}")
    return "0" * j + "1" + "0" * (width - 1 - j)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _flip_and_tally(hist: Counter, rng, count: int, width: int, hot: tuple[int, ...], p: float):
    """Add `count` noisy readouts of the pattern with 1s at `hot` wires."""
    bits = (rng.random((count, width)) < p).astype(np.uint8)
    for w in hot:
        bits[:, w] ^= 1
    rows, reps = np.unique(bits, axis=0, return_counts=True)
    digits = (rows + ord("0")).astype(np.uint8).tobytes().decode("ascii")
    for i, rep in enumerate(reps):
        hist[digits[i * width : (i + 1) * width]] += int(rep)


def sample_circuit(circuit: Circuit, state: UnaryState, plan: ShotPlan) -> dict:
    """Histogram of n_shots measured bitstrings, deterministic in the plan."""
    out = apply_circuit(circuit, state)
    probs = np.asarray(out.amps, dtype=np.float64) ** 2
    probs = probs / probs.sum()
    rng = _rng(plan.rng_seed)
    counts = rng.multinomial(plan.n_shots, probs)
    n = circuit.width
    if plan.noise is None:
        return {unary_bitstring(n, j): int(c) for j, c in enumerate(counts) if c}
    hist = Counter()
    for j, c in enumerate(counts):
        if c:
            _flip_and_tally(hist, rng, int(c), n, (j,), plan.noise.p_flip)
    return dict(hist)


def mitigate(histogram: dict, n_ancilla: int = 0) -> tuple[dict, float]:
    """Drop outcomes whose data register is not exactly unary.

    Returns (surviving histogram, discard fraction). The first n_ancilla
    characters of each bitstring are exempt from the unary check.
    """
    kept = {b: c for b, c in histogram.items() if b[n_ancilla:].count("1") == 1}
    n_kept = sum(kept.values())
    if n_kept == 0:
        raise errors.AllDiscarded("post-selection removed every shot")
    return kept, 1.0 - n_kept / sum(histogram.values())


# ---------------------------------------------------------------------------
# inner-product estimators
# ---------------------------------------------------------------------------


def _unit_vector(v, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-8:
        raise errors.NormError(f"{what} must be a unit vector (norm {norm:.6g})")
    return v


def square_ip_circuit(x, w) -> Circuit:
    """loader(x) followed by the adjoint loader(w); Pr[e_0] = (w.x)^2."""
    x = _unit_vector(x, "x")
    w = _unit_vector(w, "w")
    if x.size != w.size:
        raise errors.DimensionMismatch(f"lengths differ: {x.size} vs {w.size}")
    lx = build_loader(compute_loader_angles(x, "semi_diagonal"))
    lw = build_loader(compute_loader_angles(w, "semi_diagonal"))
    return concat_circuits(lx, adjoint_circuit(lw))


def signed_ip_circuit(x, w) -> Circuit:
    """The ancilla sandwich: RBS(pi/4), loaders on wires 1..n, RBS(pi/4).

    Started from e_0, the e_0 amplitude of the result is (1 - w.x)/2, so
    the sign of the inner product survives measurement.
    """
    x = _unit_vector(x, "x")
    w = _unit_vector(w, "w")
    if x.size != w.size:
        raise errors.DimensionMismatch(f"lengths differ: {x.size} vs {w.size}")
    n = x.size
    mix = Circuit(n + 1, ((RbsGate((1, 0), math.pi / 4),),))
    lx = shift_circuit(build_loader(compute_loader_angles(x, "semi_diagonal")), 1, n + 1)
    lw = shift_circuit(build_loader(compute_loader_angles(w, "semi_diagonal")), 1, n + 1)
    body = concat_circuits(lx, adjoint_circuit(lw))
    return concat_circuits(concat_circuits(mix, body), mix)


def _first_wire_hot_fraction(circ: Circuit, plan: ShotPlan) -> tuple[float, int]:
    """Estimate Pr[wire 0 reads 1], honoring noise and mitigation."""
    n = circ.width
    if plan.noise is None:
        out = apply_circuit(circ, UnaryState.basis(n, 0))
        p0 = min(1.0, float(out.amps[0]) ** 2)
        hits = int(_rng(plan.rng_seed).binomial(plan.n_shots, p0))
        return hits / plan.n_shots, plan.n_shots
    hist = sample_circuit(circ, UnaryState.basis(n, 0), plan)
    if plan.mitigation:
        hist, _ = mitigate(hist)
        used = sum(hist.values())
        hits = hist.get(unary_bitstring(n, 0), 0)
    else:
        used = plan.n_shots
        hits = sum(c for b, c in hist.items() if b[0] == "1")
    return hits / used, used


def square_ip_estimate(x, w, plan: ShotPlan) -> Estimate:
    phat, used = _first_wire_hot_fraction(square_ip_circuit(x, w), plan)
    return Estimate(
        value=phat, n_used=used, n_total=plan.n_shots, name="square_ip", seed=plan.rng_seed
    )


def signed_ip_estimate(x, w, plan: ShotPlan) -> Estimate:
    phat, used = _first_wire_hot_fraction(signed_ip_circuit(x, w), plan)
    value = min(1.0, max(-1.0, 1.0 - 2.0 * math.sqrt(phat)))
    return Estimate(
        value=value, n_used=used, n_total=plan.n_shots, name="signed_ip", seed=plan.rng_seed
    )


# ---------------------------------------------------------------------------
# tomography
# ---------------------------------------------------------------------------


def _mixing_circuit(circuit: Circuit, start: int) -> Circuit | None:
    """Append one timestep of pi/4 gates on pairs (j, j+1), j = start, start+2, ...

    A trailing Z flip commutes through by negating the one mixing angle
    whose pair touches the last wire, so the appended layer acts after
    the flip exactly as the procedure requires.
    """
    n = circuit.width
    gates = []
    for j in range(start, n - 1, 2):
        theta = math.pi / 4
        if circuit.z_flip and j + 1 == n - 1:
            theta = -theta
        gates.append(RbsGate((j, j + 1), theta))
    if not gates:
        return None
    return Circuit(n, tuple(circuit.timesteps) + (tuple(gates),), z_flip=circuit.z_flip)


def _pattern_counts(circ: Circuit, state: UnaryState, plan: ShotPlan, lane: int):
    sub = replace(plan, rng_seed=derive_seed(plan.rng_seed, lane))
    hist = sample_circuit(circ, state, sub)
    if plan.mitigation:
        hist, _ = mitigate(hist)
    denom = sum(hist.values()) if plan.mitigation else plan.n_shots
    n = circ.width
    counts = np.array([hist.get(unary_bitstring(n, j), 0) for j in range(n)], dtype=np.int64)
    return counts, denom


def tomography_rbs_pairs(circuit: Circuit, x, plan: ShotPlan, delta: float | None = None) -> np.ndarray:
    """Three-pass sign-retrieving tomography of the circuit's output on x.

    Pass one reads magnitudes as root frequencies. Passes two and three
    append pi/4 mixing layers on even and odd adjacent pairs; within a
    pair, p(e_j) = (y_j + y_{j+1})^2/2 and p(e_{j+1}) = (y_j - y_{j+1})^2/2,
    so the smaller first count marks opposite signs. Signs chain from
    component 0, taken positive. Magnitudes below delta (default
    1/sqrt(n_shots)) are zeroed; ties resolve to equal signs.
    """
    n = circuit.width
    state = load_vector(x)
    if delta is None:
        delta = 1.0 / math.sqrt(plan.n_shots)

    counts_a, denom_a = _pattern_counts(circuit, state, plan, 0)
    mags = np.sqrt(counts_a / denom_a)

    opposite = np.zeros(n, dtype=bool)  # opposite[j]: signs of j and j+1 differ
    for lane, start in ((1, 0), (2, 1)):
        mixed = _mixing_circuit(circuit, start)
        if mixed is None:
            continue
        counts, _ = _pattern_counts(mixed, state, plan, lane)
        for j in range(start, n - 1, 2):
            opposite[j] = counts[j] < counts[j + 1]

    signs = np.ones(n)
    for j in range(n - 1):
        signs[j + 1] = -signs[j] if opposite[j] else signs[j]
    mags[mags < delta] = 0.0
    return signs * mags


def ancilla_distribution(y) -> np.ndarray:
    """Outcome probabilities of the ancilla tomography run on output y.

    The prepared branch superposition (|0>|y> + |1>|u>)/sqrt(2), u the
    uniform unit vector, turns under the final ancilla Hadamard into
    probs[b, j] = (y_j +/- 1/sqrt(n))^2 / 4 with + on the b = 0 branch.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    a = 1.0 / math.sqrt(y.size)
    return np.stack(((y + a) ** 2, (y - a) ** 2)) / 4.0


def tomography_ancilla(circuit: Circuit, x, plan: ShotPlan) -> np.ndarray:
    """One-circuit tomography: sign from the ancilla probability gap.

    The controlled applications are simulated as an analytic branch
    superposition; measurement (optionally noisy over all n+1 bits) and
    the magnitude read-off follow the two-branch formula, component
    values clamped to [-1, 1].
    """
    n = circuit.width
    y = apply_circuit(circuit, load_vector(x)).amps
    probs = ancilla_distribution(y).reshape(-1)
    probs = probs / probs.sum()
    rng = _rng(plan.rng_seed)
    flat = rng.multinomial(plan.n_shots, probs)

    if plan.noise is None:
        grid = flat.reshape(2, n)
        used = plan.n_shots
    else:
        hist = Counter()
        for idx, c in enumerate(flat):
            if not c:
                continue
            b, j = divmod(idx, n)
            hot = (0, 1 + j) if b else (1 + j,)
            _flip_and_tally(hist, rng, int(c), n + 1, hot, plan.noise.p_flip)
        if plan.mitigation:
            hist, _ = mitigate(dict(hist), n_ancilla=1)
            used = sum(hist.values())
        else:
            used = plan.n_shots
        grid = np.zeros((2, n), dtype=np.int64)
        for b in (0, 1):
            for j in range(n):
                grid[b, j] = hist.get(str(b) + unary_bitstring(n, j), 0)

    a = 1.0 / math.sqrt(n)
    out = np.empty(n)
    for j in range(n):
        if grid[0, j] > grid[1, j]:
            v = 2.0 * math.sqrt(grid[0, j] / used) - a
        elif grid[0, j] < grid[1, j]:
            v = a - 2.0 * math.sqrt(grid[1, j] / used)
        else:
            v = 0.0
        out[j] = min(1.0, max(-1.0, v))
    return out


# ---------------------------------------------------------------------------
# CSV plumbing
# ---------------------------------------------------------------------------


def histogram_to_csv(histogram: dict) -> str:
    lines = ["bitstring,count"]
    for b in sorted(histogram, key=lambda k: (-histogram[k], k)):
        lines.append(f"{b},{histogram[b]}")
    return "\n".join(lines) + "\n"


def histogram_from_csv(text: str) -> dict:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "bitstring,count":
        raise errors.ParseError("histogram CSV must start with header 'bitstring,count'")
    out = {}
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise errors.ParseError(f"line {i}: expected 'bitstring,count'")
        b, raw = parts[0].strip(), parts[1].strip()
        if not b or set(b) - {"0", "1"}:
            raise errors.ParseError(f"line {i}: bad bitstring {b!r}")
        try:
            count = int(raw)
        except ValueError:
            raise errors.ParseError(f"line {i}: count {raw!r} is not an integer") from None
        if count < 0:
            raise errors.ParseError(f"line {i}: negative count")
        if b in out:
            raise errors.ParseError(f"line {i}: duplicate bitstring {b!r}")
        out[b] = count
    return out


def estimates_to_csv(estimates) -> str:
    lines = ["name,value,n_used,n_total,seed"]
    for e in estimates:
        lines.append(f"{e.name},{e.value!r},{e.n_used},{e.n_total},{e.seed}")
    return "\n".join(lines) + "\n"
