"""Tree scheme: initialization cascade, single steps, and full solves."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icefront.core import (
    CELL_MASS,
    DENSITY_SAMPLE,
    DensityVector,
    DiscreteAtoms,
    GammaLaw,
    GridSpec,
    make_grid,
)
from icefront.donsker import (
    EXPLICIT,
    IMPLICIT,
    DonskerConfig,
    init_loss,
    solve,
    step,
    write_csv,
)

GAMMA = GammaLaw(shape=2.0, scale=1.0 / 3.0)


def _masses(values):
    return DensityVector(u=np.asarray(values, dtype=np.float64), time_index=0)


# ---------------------------------------------------------------------------
# initialization


def test_init_loss_far_mass_is_free():
    lam, iota, iters = init_loss(_masses([0.0, 0.0, 0.0, 0.0, 1.0]), 1.0, 0.5)
    assert (lam, iota, iters) == (0.0, 0, 1)


def test_init_loss_everything_at_zero():
    lam, iota, iters = init_loss(_masses([1.0, 0.0, 0.0]), 1.0, 0.5)
    assert (lam, iota) == (1.0, 2)
    assert iters == 2


def test_init_loss_cascade():
    # lambda climbs 0.4 -> 1.0 and settles on the third evaluation
    lam, iota, iters = init_loss(_masses([0.4, 0.6, 0.0, 0.0, 0.0]), 1.0, 0.25)
    assert lam == 1.0
    assert iota == 4
    assert iters == 3


@settings(max_examples=80, deadline=None)
@given(
    data=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12),
    alpha=st.floats(0.1, 3.0),
    pitch=st.sampled_from([0.1, 0.25, 0.5, 1.0]),
)
def test_init_loss_invariants(data, alpha, pitch):
    total = sum(data)
    if total == 0.0:
        data = [0.0] * len(data) + [1.0]
    else:
        data = [x / total for x in data]
    lam, iota, iters = init_loss(_masses(data), alpha, pitch)
    assert 0.0 <= lam <= alpha
    assert iota == math.floor(lam / pitch)
    assert iters >= 1
    # extra evaluations beyond the first climb the integer boundary
    assert iters - 1 <= max(0, math.floor(alpha / pitch))


# ---------------------------------------------------------------------------
# one step


def test_step_of_nothing_keeps_the_loss():
    u, lam, iters = step(_masses([0.0, 0.0, 0.0, 0.0]), 0.75, 0.75, _grid(4, 0.5))
    assert np.array_equal(u.u, np.zeros(4))
    assert lam == 0.75
    assert iters == 1


def test_step_far_mass_is_pure_smoothing():
    grid = _grid(8, 0.5)
    u_prev = _masses([0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    u, lam, iters = step(u_prev, 0.0, 1.0, grid)
    expect = np.zeros(8)
    expect[4] = 0.5
    expect[6] = 0.5
    assert np.array_equal(u.u, expect)
    assert lam == 0.0
    assert iters == 1


def test_step_boundary_absorbs_half_of_first_cell():
    # spec of the basic absorption step: mass falling to the zero region is
    # gone, the cell just above the boundary receives only the down-move
    grid = _grid(4, 0.5)
    u, lam, iters = step(_masses([0.0, 0.5, 0.5, 0.0]), 0.0, 1.0, grid)
    assert u.u.tolist() == [0.0, 0.25, 0.25, 0.25]
    assert lam == 0.25
    assert iters == 1


def test_step_loss_never_decreases():
    grid = _grid(6, 0.5)
    u, lam, _ = step(_masses([0.0, 0.0, 0.6, 0.4, 0.0, 0.0]), 0.3, 1.0, grid)
    assert lam >= 0.3


def _grid(cells, pitch):
    return GridSpec(horizon=pitch * pitch, steps=1, max_index=cells - 1)


# ---------------------------------------------------------------------------
# full solves


def test_solve_three_step_atom_instance():
    grid = GridSpec(horizon=0.75, steps=3, max_index=8)
    law = DiscreteAtoms(atoms=((0.25, 0.5), (1.75, 0.5)))
    solution = solve(DonskerConfig(alpha=1.0, grid=grid, law=law, mode=IMPLICIT))
    assert solution.loss.values.tolist() == [0.5, 0.5, 0.625, 0.625]
    assert solution.boundary_index.tolist() == [1, 1, 1, 1]
    assert solution.iterations_per_step.tolist() == [2, 1, 1, 1]
    assert solution.mass_remaining.tolist() == [0.5, 0.5, 0.375, 0.375]
    final = {i: v for i, v in enumerate(solution.final_density.u) if v != 0.0}
    assert final == {2: 0.125, 4: 0.1875, 6: 0.0625}


def test_solve_alternative_atom_instance():
    grid = GridSpec(horizon=0.75, steps=3, max_index=8)
    law = DiscreteAtoms(atoms=((0.75, 0.375), (1.75, 0.625)))
    solution = solve(DonskerConfig(alpha=1.0, grid=grid, law=law, mode=IMPLICIT))
    assert solution.loss.values.tolist() == [0.0, 0.1875, 0.1875, 0.3125]
    final = {i: v for i, v in enumerate(solution.final_density.u) if v != 0.0}
    assert final == {2: 0.328125, 4: 0.28125, 6: 0.078125}


def test_solve_gamma_bookkeeping():
    grid = make_grid(GAMMA, 0.02, 100)
    solution = solve(
        DonskerConfig(alpha=1.5, grid=grid, law=GAMMA, mode=IMPLICIT, init_mode=CELL_MASS)
    )
    loss = solution.loss.values
    assert loss.shape == (101,)
    assert np.all(np.diff(loss) >= 0.0)
    assert np.array_equal(
        solution.boundary_index, np.floor(loss / grid.pitch).astype(np.int64)
    )
    # absorbed fraction plus surviving mass accounts for everything
    balance = loss / 1.5 + solution.mass_remaining
    assert np.max(np.abs(balance - 1.0)) < 1e-10
    assert np.all(solution.iterations_per_step >= 1)


def test_explicit_solve_is_dominated_by_implicit():
    grid = make_grid(GAMMA, 0.02, 200)
    runs = {}
    for mode in (IMPLICIT, EXPLICIT):
        runs[mode] = solve(
            DonskerConfig(alpha=1.5, grid=grid, law=GAMMA, mode=mode, init_mode=CELL_MASS)
        )
        assert np.all(np.diff(runs[mode].loss.values) >= 0.0)
    assert np.all(runs[EXPLICIT].loss.values <= runs[IMPLICIT].loss.values)
    # explicit performs exactly one evaluation per step after the shared init
    assert np.all(runs[EXPLICIT].iterations_per_step[1:] == 1)


def test_explicit_step_is_first_implicit_iterate():
    grid = GridSpec(horizon=0.25 * 0.25 * 7, steps=7, max_index=19)
    law = DiscreteAtoms(atoms=((2.125, 0.15625), (0.125, 0.84375)))
    masses = np.zeros(grid.max_index + 1)
    masses[8] = 0.15625
    masses[0] = 0.84375
    lam, iota, _ = init_loss(_masses(masses), 2.0, grid.pitch)
    u = masses.copy()
    u[: iota + 1] = 0.0
    prev = lam
    for _ in range(grid.steps):
        u_exp, lam_exp, iters_exp = step(_masses(u), prev, 2.0, grid, EXPLICIT)
        u_imp, lam_imp, iters_imp = step(_masses(u), prev, 2.0, grid, IMPLICIT)
        assert prev <= lam_exp <= lam_imp
        assert iters_exp == 1 <= iters_imp
        u, prev = u_imp.u, lam_imp


def test_perturbation_shifts_the_initial_condition_one_cell():
    # floor(ln(h)^2) = 1 at h = 0.25, so the perturbed run of an atom at
    # 0.75 is bitwise the plain run of the same atom one pitch higher
    grid = GridSpec(horizon=0.75, steps=3, max_index=9)
    shifted = solve(
        DonskerConfig(
            alpha=1.0,
            grid=grid,
            law=DiscreteAtoms(atoms=((0.75, 1.0),)),
            mode=IMPLICIT,
            perturb_initial=True,
        )
    )
    plain = solve(
        DonskerConfig(
            alpha=1.0,
            grid=grid,
            law=DiscreteAtoms(atoms=((1.25, 1.0),)),
            mode=IMPLICIT,
        )
    )
    assert math.floor(math.log(grid.h) ** 2) == 1
    assert np.array_equal(shifted.loss.values, plain.loss.values)


def test_density_sample_initialization_differs_from_cell_mass():
    grid = make_grid(GAMMA, 0.02, 100)
    by_mass = solve(
        DonskerConfig(alpha=0.5, grid=grid, law=GAMMA, init_mode=CELL_MASS)
    )
    by_density = solve(
        DonskerConfig(alpha=0.5, grid=grid, law=GAMMA, init_mode=DENSITY_SAMPLE)
    )
    assert not np.array_equal(by_mass.loss.values, by_density.loss.values)
    assert abs(by_mass.loss.values[-1] - by_density.loss.values[-1]) < 0.01


def test_write_csv_round_trips_exact_floats(tmp_path):
    grid = GridSpec(horizon=0.75, steps=3, max_index=8)
    law = DiscreteAtoms(atoms=((0.25, 0.5), (1.75, 0.5)))
    solution = solve(DonskerConfig(alpha=1.0, grid=grid, law=law))
    target = tmp_path / "run.csv"
    write_csv(solution, grid, target)
    lines = target.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "k,t_k,Lambda,L,i_k,iterations,mass_remaining"
    assert len(lines) == 1 + grid.steps + 1
    for k, row in enumerate(lines[1:]):
        fields = row.split(",")
        assert int(fields[0]) == k
        assert float(fields[2]) == solution.loss.values[k]
        assert float(fields[6]) == solution.mass_remaining[k]
