"""Particle schemes: frozen-path examples, dominance, nested meshes."""

import numpy as np
import pytest

from conftest import frozen_particle_instance
from icefront.core import GammaLaw, GridSpec, quantile
from icefront.drivers import BROWNIAN, X0_STREAM, DriverSpec, PathMatrix, sample_paths, uniform_stream
from icefront.oracle import exhaustive_particle_minimal
from icefront.particle import (
    EXPLICIT_PARTICLE,
    IMPLICIT_PARTICLE,
    NEVER_ABSORBED,
    ParticleConfig,
    restrict_paths,
    sample_initial,
    solve,
    solve_explicit,
    solve_implicit,
    take_particles,
    write_csv,
)

GAMMA = GammaLaw(shape=2.0, scale=1.0 / 3.0)


def _config(alpha, steps, n, mode, horizon=None, law=GAMMA, seed=0):
    grid = GridSpec(
        horizon=horizon if horizon is not None else 0.1 * steps,
        steps=steps,
        max_index=steps + 2,
    )
    return ParticleConfig(
        alpha=alpha,
        grid=grid,
        law=law,
        driver=DriverSpec(kind=BROWNIAN, seed=seed),
        n=n,
        mode=mode,
    )


def _paths(rows):
    return PathMatrix(values=np.asarray(rows, dtype=np.float64))


# ---------------------------------------------------------------------------
# initial positions


def test_sample_initial_is_quantile_transform_of_its_stream():
    x0 = sample_initial(GAMMA, 50, seed=6)
    expect = quantile(GAMMA, uniform_stream(6, X0_STREAM, 50))
    assert np.array_equal(x0, expect)
    assert np.all(x0 > 0.0)


def test_sample_initial_prefix_stable():
    assert np.array_equal(sample_initial(GAMMA, 80, 1)[:30], sample_initial(GAMMA, 30, 1))


# ---------------------------------------------------------------------------
# explicit scheme on frozen paths


def test_explicit_spec_trace_no_absorption():
    cfg = _config(1.0, 2, 2, EXPLICIT_PARTICLE)
    paths = _paths([[0.0, -0.2, -0.1], [0.0, -0.2, -0.4]])
    x0 = np.array([0.3, 0.9])
    sol = solve_explicit(cfg, paths, x0)
    assert sol.loss.values.tolist() == [0.0, 0.0, 0.0]
    assert sol.absorbed_step.tolist() == [NEVER_ABSORBED, NEVER_ABSORBED]
    assert np.all(sol.fixed_point_iters == 1)


def test_explicit_counts_lag_one_step():
    cfg = _config(0.75, 2, 1, EXPLICIT_PARTICLE)
    sol = solve_explicit(cfg, _paths([[0.0, 0.0, 0.0]]), np.array([0.0]))
    assert sol.loss.values.tolist() == [0.0, 0.75, 0.75]
    assert sol.absorbed_step.tolist() == [0]


# ---------------------------------------------------------------------------
# implicit scheme on frozen paths


def test_implicit_spec_trace_consistent_zero():
    cfg = _config(1.0, 1, 2, IMPLICIT_PARTICLE)
    sol = solve_implicit(cfg, _paths([[0.0, -0.35], [0.0, -0.25]]), np.array([0.4, 0.8]))
    assert sol.loss.values.tolist() == [0.0, 0.0]
    assert sol.fixed_point_iters.tolist() == [1, 1]


def test_implicit_spec_trace_cascade():
    cfg = _config(1.0, 1, 2, IMPLICIT_PARTICLE)
    sol = solve_implicit(cfg, _paths([[0.0, -0.45], [0.0, -0.25]]), np.array([0.4, 0.8]))
    assert sol.loss.values.tolist() == [0.0, 0.5]
    assert sol.fixed_point_iters.tolist() == [1, 2]
    assert sol.absorbed_step.tolist() == [1, NEVER_ABSORBED]


def test_implicit_matches_exhaustive_oracle():
    rng = np.random.default_rng(515)
    for _ in range(60):
        paths, x0, alpha = frozen_particle_instance(rng)
        n, cols = paths.shape
        cfg = _config(alpha, cols - 1, n, IMPLICIT_PARTICLE)
        sol = solve_implicit(cfg, PathMatrix(values=paths), x0)
        oracle = exhaustive_particle_minimal(paths, x0, alpha)
        assert np.array_equal(sol.loss.values, oracle.values)


def test_explicit_never_exceeds_implicit_on_shared_paths():
    cfg_i = _config(1.5, 16, 300, IMPLICIT_PARTICLE, horizon=1.0, seed=77)
    cfg_e = _config(1.5, 16, 300, EXPLICIT_PARTICLE, horizon=1.0, seed=77)
    paths = sample_paths(cfg_i.driver, cfg_i.grid, 300)
    x0 = sample_initial(GAMMA, 300, 77)
    imp = solve_implicit(cfg_i, paths, x0)
    exp = solve_explicit(cfg_e, paths, x0)
    assert np.all(exp.loss.values <= imp.loss.values)
    assert np.all(np.diff(imp.loss.values) >= 0.0)
    assert np.all(np.diff(exp.loss.values) >= 0.0)


def test_nested_mesh_monotonicity_on_restricted_paths():
    # halving the mesh can only delay absorption: the coarse implicit loss
    # stays at or below the fine one at shared times
    for seed in (11, 12, 13):
        driver = DriverSpec(kind=BROWNIAN, seed=seed)
        fine_grid = GridSpec(horizon=1.0, steps=32, max_index=34)
        coarse_grid = GridSpec(horizon=1.0, steps=16, max_index=18)
        paths = sample_paths(driver, fine_grid, 400)
        x0 = sample_initial(GAMMA, 400, seed)
        fine_cfg = ParticleConfig(
            alpha=1.5, grid=fine_grid, law=GAMMA, driver=driver, n=400,
            mode=IMPLICIT_PARTICLE,
        )
        coarse_cfg = ParticleConfig(
            alpha=1.5, grid=coarse_grid, law=GAMMA, driver=driver, n=400,
            mode=IMPLICIT_PARTICLE,
        )
        fine = solve_implicit(fine_cfg, paths, x0)
        coarse = solve_implicit(coarse_cfg, restrict_paths(paths, 2), x0)
        assert np.all(coarse.loss.values <= fine.loss.values[::2])


# ---------------------------------------------------------------------------
# path restriction helpers


def test_restrict_paths_takes_every_kth_column():
    grid = GridSpec(horizon=1.0, steps=8, max_index=10)
    paths = sample_paths(DriverSpec(kind=BROWNIAN, seed=1), grid, 10)
    halved = restrict_paths(paths, 2)
    assert np.array_equal(halved.values, paths.values[:, ::2])
    assert halved.steps == 4
    same = restrict_paths(paths, 1)
    assert np.array_equal(same.values, paths.values)
    with pytest.raises(ValueError):
        restrict_paths(paths, 3)  # does not divide 8


def test_take_particles_prefix():
    grid = GridSpec(horizon=1.0, steps=4, max_index=6)
    paths = sample_paths(DriverSpec(kind=BROWNIAN, seed=1), grid, 10)
    head = take_particles(paths, 4)
    assert np.array_equal(head.values, paths.values[:4])
    with pytest.raises(ValueError):
        take_particles(paths, 11)


# ---------------------------------------------------------------------------
# end to end


def test_solve_dispatches_and_reproduces():
    cfg = _config(1.0, 8, 50, IMPLICIT_PARTICLE, horizon=0.5, seed=4)
    first = solve(cfg)
    second = solve(cfg)
    assert np.array_equal(first.loss.values, second.loss.values)
    assert np.array_equal(first.absorbed_step, second.absorbed_step)
    explicit = solve(_config(1.0, 8, 50, EXPLICIT_PARTICLE, horizon=0.5, seed=4))
    assert np.all(explicit.loss.values <= first.loss.values)


def test_write_csv_layout(tmp_path):
    cfg = _config(1.0, 3, 8, IMPLICIT_PARTICLE, horizon=0.3, seed=2)
    sol = solve(cfg)
    target = tmp_path / "run.csv"
    write_csv(sol, cfg.grid, target)
    lines = target.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "k,t_k,Lambda,L,fixed_point_iters"
    assert len(lines) == 1 + cfg.grid.steps + 1
    row = lines[1].split(",")
    assert int(row[0]) == 0
    assert float(row[1]) == 0.0
