#!/usr/bin/env python3
"""Per-epoch cost: angle descent vs the re-orthogonalizing baselines.

Angle-space backpropagation touches each rotation a constant number of
times, so an epoch costs O(n^2) for an n-wide square layer.  The SVB
and Stiefel baselines pay an O(n^3) factorization every step on top of
their matrix products.  This script times both claims: a five-point
width sweep fitted against a quadratic for the pyramid, then a direct
step-for-step comparison at n=128.

Timing note: this measures wall clock on whatever machine runs it, and
shared hosts drift.  The sweep times adjacent widths back to back and
uses the within-pair ratios, which cancels most of the drift; expect
single-digit-percent wiggle on the printed milliseconds regardless.

Run:  python3 demos/scaling_benchmark.py
"""

import gc
import time

import numpy as np

from orthonn.data import Dataset
from orthonn.shots import derive_seed
from orthonn.training import (
    TrainConfig,
    random_dense_network,
    random_pyramid_network,
    train,
)

ROOT = 20260819


def banner(title):
    print()
    print(title)
    print("-" * len(title))


def synthetic(m, n, seed):
    rng = np.random.default_rng(seed)
    feats = rng.standard_normal((m, n))
    direction = rng.standard_normal(n)
    direction /= np.linalg.norm(direction)
    return Dataset(feats, (feats @ direction > 0.0).astype(np.int64))


# ---------------------------------------------------------------------
banner("Width sweep, pyramid regime")

sizes = (8, 16, 32, 64, 128)
datasets = {n: synthetic(256, n, derive_seed(ROOT, 30, n)) for n in sizes}
nets = {n: random_pyramid_network((n, n, 2), derive_seed(ROOT, 31, n))
        for n in sizes}


def epoch_time(n, epochs, seed):
    config = TrainConfig(learning_rate=0.001, epochs=epochs, batch_size=16,
                         seed=seed)
    hist = train(nets[n], datasets[n], config, "pyramid")
    return float(np.median([e.seconds for e in hist.epochs[1:]]))


epoch_time(8, 3, 0)                      # JIT warmup, discarded
epoch_time(128, 3, 0)
budget = {n: max(3, min(40, int(np.ceil(0.05 / epoch_time(n, 3, 1))) + 1))
          for n in sizes}

pairs = list(zip(sizes[:-1], sizes[1:]))
ratios = {p: [] for p in pairs}
base = []
gc.collect()
gc.disable()
try:
    for rnd in range(8):
        for small, big in pairs:
            t_small = epoch_time(small, budget[small], rnd)
            t_big = epoch_time(big, budget[big], rnd)
            ratios[(small, big)].append(t_big / t_small)
        base.append(epoch_time(8, budget[8], 100 + rnd))
finally:
    gc.enable()

curve = [float(np.median(base))]
for p in pairs:
    curve.append(curve[-1] * float(np.median(ratios[p])))

ns = np.asarray(sizes, dtype=np.float64)
y = np.asarray(curve)
design = np.stack([ns**2, ns, np.ones_like(ns)], axis=1)
coef, *_ = np.linalg.lstsq(design, y, rcond=None)
resid = y - design @ coef
r2 = 1.0 - float(resid @ resid) / float(np.sum((y - y.mean()) ** 2))

print(f"  {'n':>5s} {'ms/epoch':>9s} {'quad fit':>9s}")
for n, t, f in zip(sizes, y, design @ coef):
    print(f"  {n:5d} {1e3 * t:9.2f} {1e3 * f:9.2f}")
print(f"  quadratic fit R^2 = {r2:.4f}")

# ---------------------------------------------------------------------
banner("Step cost at n=128: angle descent vs baselines")

# Per-step cost is read off the gaps between consecutive optimizer-step
# callbacks inside one epoch, which keeps the epoch-end evaluation pass
# out of the comparison.  Batch size 1 isolates the per-step overhead:
# the factorization the baselines pay does not shrink with the batch.
n = 128
ds = synthetic(16, n, derive_seed(ROOT, 32))
config = TrainConfig(learning_rate=0.01, epochs=4, batch_size=1,
                     seed=derive_seed(ROOT, 33))
steps_per_epoch = ds.features.shape[0] // config.batch_size


def step_cost(regime):
    if regime == "pyramid":
        net = random_pyramid_network((n, n, 2), derive_seed(ROOT, 34))
    else:
        net = random_dense_network((n, n, 2), derive_seed(ROOT, 34),
                                   orthogonal=True)
    stamps = []
    train(net, ds, config, regime,
          on_step=lambda _, i: stamps.append(time.perf_counter()))
    same_epoch = [
        stamps[i + 1] - stamps[i]
        for i in range(len(stamps) - 1)
        if (i + 1) % steps_per_epoch != 0
    ]
    return float(np.median(same_epoch))


step_cost("pyramid")                     # warm path, discarded
step_cost("svb")
rows = [(regime, step_cost(regime)) for regime in ("pyramid", "svb", "stiefel")]
for regime, per_step in rows:
    print(f"  {regime:>8s}: {1e3 * per_step:8.3f} ms/step")

pyramid_t = rows[0][1]
for regime, t in rows[1:]:
    print(f"  {regime} / pyramid = {t / pyramid_t:.1f}x "
          f"(factorization every step)")
