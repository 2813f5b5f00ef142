"""Monte Carlo particle schemes on frozen driver paths.

Each of ``n`` particles follows its driver path shifted down by the running
loss and is absorbed on first touching zero; the loss at any time is
``alpha/n`` times the number of particles absorbed so far, so the coupled
system is a pure counting fixed point on the lattice ``{0, alpha/n, ...,
alpha}``.

The explicit scheme counts only absorptions strictly before the current
step, so each step costs one count. The implicit scheme lets the current
tentative positions enter their own count and resolves the step by the
increasing integer iteration started from the explicit count, which lands
on the smallest self-consistent loss level. Past positions stay frozen
while iterating; only the current one moves with the candidate loss.

Paths and initial positions are sampled once and shared across scheme
variants and mesh refinements (coarse grids restrict the fine matrix), so
scheme differences are never masked by fresh sampling noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GridSpec, InitialLaw, LossCurve, quantile
from .csvio import write_rows
from .drivers import X0_STREAM, DriverSpec, PathMatrix, sample_paths, uniform_stream

__all__ = [
    "EXPLICIT_PARTICLE",
    "IMPLICIT_PARTICLE",
    "NEVER_ABSORBED",
    "ParticleConfig",
    "ParticleSolution",
    "sample_initial",
    "solve_explicit",
    "solve_implicit",
    "solve",
    "restrict_paths",
    "take_particles",
    "write_csv",
]

EXPLICIT_PARTICLE = "explicit_particle"
IMPLICIT_PARTICLE = "implicit_particle"

# absorbed_step entry for particles still alive at the horizon
NEVER_ABSORBED = -1


@dataclass(frozen=True)
class ParticleConfig:
    """Parameters of one particle-scheme run."""

    alpha: float
    grid: GridSpec
    law: InitialLaw
    driver: DriverSpec
    n: int
    mode: str = IMPLICIT_PARTICLE

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.mode not in (EXPLICIT_PARTICLE, IMPLICIT_PARTICLE):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class ParticleSolution:
    """Loss path plus per-step iteration counts and absorption times.

    ``absorbed_step[m]`` is the step index at which particle m was first
    counted absorbed (for the explicit scheme: first position at or below
    zero, entering the counts one step later) or ``NEVER_ABSORBED``. Loss
    values are exact multiples of ``alpha/n``: the counting is integer
    arithmetic and only the final scaling touches floats.
    """

    loss: LossCurve
    fixed_point_iters: np.ndarray
    absorbed_step: np.ndarray


def sample_initial(law: InitialLaw, n: int, seed: int) -> np.ndarray:
    """Initial positions: quantile transform of the shared x0 stream.

    Particle m always receives the m-th draw of the stream, so a prefix of
    a larger sample is the smaller sample.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    u = uniform_stream(seed, X0_STREAM, n)
    return np.asarray(quantile(law, u), dtype=np.float64)


def _check_shapes(config: ParticleConfig, paths: PathMatrix, x0: np.ndarray):
    if paths.n != config.n or paths.steps != config.grid.steps:
        raise ValueError(
            f"paths shape ({paths.n}, {paths.steps + 1}) does not match "
            f"config (n={config.n}, steps={config.grid.steps})"
        )
    if x0.shape != (config.n,):
        raise ValueError("x0 must hold one position per particle")


def solve_explicit(
    config: ParticleConfig, paths: PathMatrix, x0: np.ndarray
) -> ParticleSolution:
    """Explicit scheme: the loss at step k counts only steps before k.

    ``loss[k] = (alpha/n) * #{m: position of m was <= 0 at some i < k}``,
    in particular ``loss[0] = 0``. One count per step.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    _check_shapes(config, paths, x0)
    values_z = paths.values
    n = config.n
    alpha = config.alpha
    n_steps = config.grid.steps

    absorbed = np.full(n, NEVER_ABSORBED, dtype=np.int64)
    losses = np.zeros(n_steps + 1)
    count = 0
    for k in range(n_steps + 1):
        # alpha times the exact ratio, so a full count lands exactly on alpha
        lam = alpha * (count / n)
        losses[k] = lam
        current = x0 + values_z[:, k] - lam
        newly = (absorbed == NEVER_ABSORBED) & (current <= 0.0)
        absorbed[newly] = k
        count += int(np.count_nonzero(newly))
    return ParticleSolution(
        loss=LossCurve(alpha=alpha, values=losses),
        fixed_point_iters=np.ones(n_steps + 1, dtype=np.int64),
        absorbed_step=absorbed,
    )


def solve_implicit(
    config: ParticleConfig, paths: PathMatrix, x0: np.ndarray
) -> ParticleSolution:
    """Implicit scheme: smallest self-consistent loss level per step.

    At step k a candidate count j puts the loss at ``alpha*j/n`` and counts
    the particles whose frozen running minimum, or current position under
    the candidate, is at or below zero. Starting from the explicit count,
    ``j <- count(j)`` increases monotonically and stops at the smallest
    fixed point; ``fixed_point_iters[k]`` is the number of count
    evaluations, the confirming one included.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    _check_shapes(config, paths, x0)
    values_z = paths.values
    n = config.n
    alpha = config.alpha
    n_steps = config.grid.steps

    absorbed = np.full(n, NEVER_ABSORBED, dtype=np.int64)
    running_min = np.full(n, np.inf)
    losses = np.zeros(n_steps + 1)
    iters = np.zeros(n_steps + 1, dtype=np.int64)
    j = 0
    for k in range(n_steps + 1):
        current = x0 + values_z[:, k]
        evals = 0
        while True:
            evals += 1
            lam = alpha * (j / n)
            cnt = int(
                np.count_nonzero(np.minimum(running_min, current - lam) <= 0.0)
            )
            if cnt == j:
                break
            if cnt < j or evals > n + 1:  # the count iteration only climbs
                raise RuntimeError("count iteration left the monotone ladder")
            j = cnt
        losses[k] = lam
        iters[k] = evals
        running_min = np.minimum(running_min, current - lam)
        newly = (absorbed == NEVER_ABSORBED) & (running_min <= 0.0)
        absorbed[newly] = k
    return ParticleSolution(
        loss=LossCurve(alpha=alpha, values=losses),
        fixed_point_iters=iters,
        absorbed_step=absorbed,
    )


def solve(config: ParticleConfig) -> ParticleSolution:
    """Sample paths and initial positions, then run the configured scheme."""
    paths = sample_paths(config.driver, config.grid, config.n)
    x0 = sample_initial(config.law, config.n, config.driver.seed)
    if config.mode == EXPLICIT_PARTICLE:
        return solve_explicit(config, paths, x0)
    return solve_implicit(config, paths, x0)


def restrict_paths(paths: PathMatrix, factor: int) -> PathMatrix:
    """Keep every factor-th time point (a view, bitwise-shared values)."""
    if factor < 1 or paths.steps % factor != 0:
        raise ValueError("factor must be >= 1 and divide the step count")
    return PathMatrix(values=paths.values[:, ::factor])


def take_particles(paths: PathMatrix, n: int) -> PathMatrix:
    """Keep the first n particles (a view, bitwise-shared values)."""
    if not 1 <= n <= paths.n:
        raise ValueError("n must lie in [1, paths.n]")
    return PathMatrix(values=paths.values[:n])


def write_csv(solution: ParticleSolution, grid: GridSpec, path) -> None:
    """Per-run table: k, t_k, Lambda, L, fixed_point_iters."""
    alpha = solution.loss.alpha
    rows = [
        (
            k,
            k * grid.h,
            solution.loss.values[k],
            solution.loss.values[k] / alpha,
            int(solution.fixed_point_iters[k]),
        )
        for k in range(grid.steps + 1)
    ]
    write_rows(path, ("k", "t_k", "Lambda", "L", "fixed_point_iters"), rows)
