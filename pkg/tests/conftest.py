"""Shared random-instance generators for the equivalence and property tests."""

import numpy as np

from icefront.core import DiscreteAtoms, GridSpec


def dyadic_tree_instance(rng):
    """Random tiny atom instance whose entire solve is exact in binary64.

    Atom masses are multiples of 1/64, alpha a multiple of 1/4, the pitch a
    power of two, and atoms sit at cell midpoints. Every loss value either
    scheme can produce is then a dyadic rational and no floating-point
    operation rounds, so bitwise agreement between independently written
    implementations is a meaningful assertion rather than luck.
    """
    n_steps = int(rng.integers(2, 9))
    pitch = float(0.25 * 2.0 ** rng.integers(0, 3))
    horizon = pitch * pitch * n_steps
    n_atoms = int(rng.integers(1, 4))
    if n_atoms > 1:
        cuts = np.sort(rng.choice(np.arange(1, 64), size=n_atoms - 1, replace=False))
    else:
        cuts = np.array([], dtype=int)
    bounds = np.concatenate(([0], cuts, [64]))
    weights = np.diff(bounds) / 64.0
    cells = rng.choice(np.arange(0, 10), size=n_atoms, replace=False)
    atoms = tuple(
        ((c + 0.5) * pitch, w) for c, w in zip(cells.tolist(), weights.tolist())
    )
    alpha = float(0.25 * int(rng.integers(1, 9)))
    grid = GridSpec(horizon=horizon, steps=n_steps, max_index=10 + n_steps + 2)
    return DiscreteAtoms(atoms=atoms), alpha, grid


def frozen_particle_instance(rng):
    """Random tiny frozen-path particle instance (n <= 8, N <= 5)."""
    n = int(rng.integers(1, 9))
    n_steps = int(rng.integers(1, 6))
    increments = rng.normal(0.0, 0.5, size=(n, n_steps))
    paths = np.zeros((n, n_steps + 1))
    np.cumsum(increments, axis=1, out=paths[:, 1:])
    x0 = rng.uniform(-0.2, 1.5, size=n)
    alpha = float(rng.uniform(0.2, 2.0))
    return paths, x0, alpha
