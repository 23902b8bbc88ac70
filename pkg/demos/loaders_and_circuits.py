#!/usr/bin/env python3
"""Unary data loading and the two simulators.

A walk through the circuit layer: what a single two-qubit rotation does
to a unary state, how a classical vector becomes the amplitudes of a
unary superposition under each of the three loader layouts, and why the
n-amplitude simulator and the full 2^n statevector simulator must agree
wherever they overlap.

Run:  python3 demos/loaders_and_circuits.py
"""

import numpy as np

from orthonn.circuits import (
    Circuit,
    RbsGate,
    UnaryState,
    apply_circuit,
    apply_full_statevector,
    build_loader,
    compute_loader_angles,
    load_vector,
)

rng = np.random.default_rng(7)


def banner(title):
    print()
    print(title)
    print("-" * len(title))


# ---------------------------------------------------------------------
banner("One rotation gate")

# A single gate on wires (0, 1) rotates the two amplitudes it touches by
# the plane rotation [[cos, sin], [-sin, cos]] and leaves the rest alone.
theta = 0.6
gate = RbsGate((0, 1), theta)
circuit = Circuit(3, ((gate,),))
state = UnaryState.basis(3, 0)
out = apply_circuit(circuit, state)
print(f"|e_1> through one gate at theta={theta}:")
print("  amplitudes:", np.round(out.amps, 6))
print(f"  expected  : [cos {np.cos(theta):.6f}, -sin {-np.sin(theta):.6f}, 0]")

# ---------------------------------------------------------------------
banner("Loading a vector, three layouts")

x = rng.standard_normal(8)
unit = x / np.linalg.norm(x)

for layout in ("diagonal", "semi_diagonal", "parallel"):
    angles = compute_loader_angles(x, layout)
    loader = build_loader(angles)
    loaded = apply_circuit(loader, UnaryState.basis(8, 0))
    err = np.max(np.abs(loaded.amps - unit))
    n_gates = sum(len(ts) for ts in loader.timesteps)
    print(
        f"  {layout:14s} gates={n_gates:2d} depth={len(loader.timesteps):2d} "
        f"rebuild error={err:.2e}"
    )

print("  (same n-1 gate budget; the layouts trade nothing but depth)")

# load_vector is the one-call version of angles -> loader -> apply.
short = load_vector(x)
print("  load_vector shortcut matches:", np.allclose(short.amps, unit))

# ---------------------------------------------------------------------
banner("Unary simulator vs full statevector")

# The n-amplitude simulator tracks only the unary subspace.  Starting
# from |10...0> the rotations never leave that subspace, so embedding
# its output into the 2^n register must reproduce the full simulation
# amplitude for amplitude.
n = 6
x = rng.standard_normal(n)
loader = build_loader(compute_loader_angles(x, "parallel"))
unary = apply_circuit(loader, UnaryState.basis(n, 0)).amps
psi = apply_full_statevector(loader, "1" + "0" * (n - 1))

embedded = np.zeros(1 << n)
for j in range(n):
    embedded[1 << (n - 1 - j)] = unary[j]
print(f"  max |unary - full statevector| = {np.max(np.abs(psi - embedded)):.2e}")
print(f"  weight outside the unary subspace = {np.linalg.norm(psi - embedded):.2e}")

# ---------------------------------------------------------------------
banner("Norm bookkeeping")

# The loader stores ||x|| so the circuit output can be rescaled back to
# the raw vector; the amplitudes themselves are always unit norm.
angles = compute_loader_angles(x)
print(f"  stored norm  = {angles.norm:.6f}")
print(f"  actual ||x|| = {np.linalg.norm(x):.6f}")
