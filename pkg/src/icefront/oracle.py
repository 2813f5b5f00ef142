"""Brute-force reference solvers for tiny instances.

These certify minimality and exactness of the production solvers by sheer
enumeration: every Rademacher sign sequence for the tree scheme, every
candidate loss level for the particle scheme. Deliberately shares no
stepping code with the production modules; agreement down to the last bit
is what the equivalence tests check.

Test-only API; no attention is paid to performance beyond an enumeration
budget guard.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import DiscreteAtoms, GridSpec, LossCurve
from .errors import InstanceTooLarge

__all__ = ["ExactTreeState", "exact_donsker_minimal", "exhaustive_particle_minimal"]

_PATH_EVAL_BUDGET = 10**7
_MAX_SWEEPS = 100_000


@dataclass(frozen=True)
class ExactTreeState:
    """Snapshot of one loss-operator sweep over the full enumeration.

    ``masses[j]`` is the per-(atom, sign-sequence) weight vector, ``loss``
    the candidate loss path that sweep evaluated against, and ``depth`` how
    many sweeps preceded it.
    """

    masses: np.ndarray
    loss: np.ndarray
    depth: int

    def __post_init__(self):
        if np.any(self.masses < 0.0):
            raise ValueError("weights must be nonnegative")


def exact_donsker_minimal(law: DiscreteAtoms, alpha: float, grid: GridSpec) -> LossCurve:
    """Minimal tree-scheme loss path by full sign-sequence enumeration.

    Evaluates the loss operator exactly: every atom is walked along all
    ``2**N`` Rademacher sequences against a candidate loss path, a walker
    counting as absorbed at step ``k`` once, for some ``j <= k``, its
    lattice index at ``t_j`` or at ``t_{j-1}`` sits at or below
    ``floor(loss_j / pitch)``. The second clause matters only when the
    boundary index climbs more than it usually does in one step: a barrier
    that rises past a standing walker swallows it even if the walker's next
    move is upward, which is how the tree recursion treats the cells it
    newly covers. The operator is iterated from the zero path until the
    loss path repeats exactly, which is the minimal fixed point.

    Raises
    ------
    InstanceTooLarge
        When ``2**N * len(atoms)`` exceeds the evaluation budget.
    """
    n_steps = grid.steps
    n_atoms = len(law.atoms)
    if (2**n_steps) * n_atoms > _PATH_EVAL_BUDGET:
        raise InstanceTooLarge(
            f"2**{n_steps} sequences x {n_atoms} atoms exceeds the budget"
        )
    pitch = grid.pitch

    # partial sign sums S[s, k] for every sequence s, with S[s, 0] = 0
    signs = np.array(
        list(itertools.product((-1, 1), repeat=n_steps)), dtype=np.int64
    ).reshape(2**n_steps, n_steps)
    walks = np.zeros((2**n_steps, n_steps + 1), dtype=np.int64)
    np.cumsum(signs, axis=1, out=walks[:, 1:])

    start_index = np.array(
        [int(math.floor(loc / pitch)) for loc, _ in law.atoms], dtype=np.int64
    )
    weights = np.array([w for _, w in law.atoms]) / float(2**n_steps)

    per_walker = np.repeat(weights, 2**n_steps)
    state = ExactTreeState(
        masses=per_walker, loss=np.zeros(n_steps + 1), depth=0
    )
    while state.depth < _MAX_SWEEPS:
        new_loss = _sweep(state.loss, walks, start_index, weights, alpha, pitch)
        if np.array_equal(new_loss, state.loss):
            return LossCurve(alpha=alpha, values=new_loss)
        state = ExactTreeState(
            masses=per_walker, loss=new_loss, depth=state.depth + 1
        )
    raise RuntimeError("loss-operator iteration failed to settle")


def _sweep(
    loss: np.ndarray,
    walks: np.ndarray,
    start_index: np.ndarray,
    weights: np.ndarray,
    alpha: float,
    pitch: float,
) -> np.ndarray:
    """One exact evaluation of the loss operator against a candidate path."""
    boundary = np.array([int(math.floor(lam / pitch)) for lam in loss], dtype=np.int64)
    new_loss = np.zeros_like(loss)
    for j0, w in zip(start_index, weights):
        positions = j0 + walks
        hit = positions <= boundary[np.newaxis, :]
        # barrier sweep: standing at or below the level the boundary
        # reaches at t_j already absorbs, whichever way the walker moves
        hit[:, 1:] |= positions[:, :-1] <= boundary[np.newaxis, 1:]
        absorbed_by = np.maximum.accumulate(hit, axis=1)
        new_loss += alpha * (w * absorbed_by.sum(axis=0))
    return np.minimum(new_loss, alpha)


def exhaustive_particle_minimal(
    paths: np.ndarray, x0: np.ndarray, alpha: float
) -> LossCurve:
    """Minimal particle-scheme loss path by scanning every loss level.

    At each step the candidate losses ``alpha*j/n`` are tried in increasing
    order of ``j``; the first self-consistent one (the count of particles
    whose frozen running minimum, or current tentative position, is at or
    below zero equals ``j``) is accepted. Past positions stay frozen.
    """
    paths = np.asarray(paths, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    n, cols = paths.shape
    if x0.shape != (n,):
        raise ValueError("x0 must have one entry per path")
    running_min = np.full(n, np.inf)
    values = np.zeros(cols)
    for k in range(cols):
        current = x0 + paths[:, k]
        accepted = None
        for j in range(n + 1):
            lam = alpha * (j / n)
            count = int(np.count_nonzero(np.minimum(running_min, current - lam) <= 0.0))
            if count == j:
                accepted = lam
                break
        if accepted is None:  # impossible: the count map always has a fixed point
            raise RuntimeError("no self-consistent loss level found")
        values[k] = accepted
        running_min = np.minimum(running_min, current - accepted)
    return LossCurve(alpha=alpha, values=values)
