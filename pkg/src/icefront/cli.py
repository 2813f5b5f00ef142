"""Experiment runner around the solver library.

One JSON document describes a run; the command decides what to do with it:

- ``solve-donsker``: one tree-scheme run at a fixed step count.
- ``solve-particle``: one particle-scheme run at a fixed step count.
- ``convergence``: a refinement study (tree or particle scheme) across
  nested step counts, with error estimators and fitted order.
- ``jump-study``: explicit and implicit particle schemes on shared paths
  across nested step counts, with jump time/size refinement estimators.
- ``iteration-table``: per-step iteration statistics of the implicit tree
  scheme over a grid of alphas and step counts.

Flags only override the seed and the output directory; everything else
lives in the config so an experiment is one reviewable artifact. Outputs
are per-level CSVs plus ``summary.csv``, ``meta.json`` (config hash,
versions, wall clock), plot-ready log2-log2 files, and PNG figures.
Identical config and seed give byte-identical CSVs; ``meta.json`` records
the wall clock and is exempt.

Exit status: 0 on success, 2 on configuration errors, 3 on run errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
import time
from pathlib import Path

import matplotlib
import numpy as np
import scipy

from . import __version__, analysis, donsker, particle
from .core import (
    CELL_MASS,
    DENSITY_SAMPLE,
    DiscreteAtoms,
    GammaLaw,
    GridSpec,
    PolyCutoff,
    Uniform,
    make_grid,
)
from .csvio import write_rows
from .donsker import EXPLICIT, IMPLICIT, DonskerConfig
from .drivers import BROWNIAN, DriverSpec, sample_paths
from .errors import ConfigInvalid, IcefrontError, NoValidCutoff, OutputUnwritable
from .figures import render_iterations, render_loglog, render_loss
from .particle import (
    EXPLICIT_PARTICLE,
    IMPLICIT_PARTICLE,
    ParticleConfig,
    restrict_paths,
    sample_initial,
    solve_explicit,
    solve_implicit,
    take_particles,
)

__all__ = ["main"]

_SEED_LIMIT = 2**64
_DEFAULT_PARTICLES_PER_STEP = 2000


# ---------------------------------------------------------------------------
# config parsing


def _load_config(path: str, seed_override, out_override) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid("config", f"unreadable: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid("config", f"not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config", "top level must be a JSON object")
    if seed_override is not None:
        cfg["seed"] = seed_override
    if out_override is not None:
        cfg["out"] = out_override
    cfg.setdefault("seed", 0)
    seed = cfg["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < _SEED_LIMIT:
        raise ConfigInvalid("seed", "must be an unsigned 64-bit integer")
    return cfg


def _prepare_out(cfg: dict) -> Path:
    out = cfg.get("out")
    if not isinstance(out, str) or not out:
        raise ConfigInvalid("out", "set an output directory in the config or pass --out")
    target = Path(out)
    try:
        target.mkdir(parents=True, exist_ok=True)
        probe = target / ".write-probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise OutputUnwritable(f"{target}: {exc}") from exc
    return target


def _positive_float(cfg: dict, name: str) -> float:
    value = cfg.get(name)
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
        raise ConfigInvalid(name, "must be a positive number")
    return float(value)


def _positive_int(cfg: dict, name: str, default=None) -> int:
    value = cfg.get(name, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigInvalid(name, "must be a positive integer")
    return value


def _parse_law(cfg: dict):
    obj = cfg.get("law")
    if not isinstance(obj, dict):
        raise ConfigInvalid("law", "must be an object with a 'kind' entry")
    kind = obj.get("kind")
    try:
        if kind == "gamma":
            return GammaLaw(shape=float(obj["shape"]), scale=float(obj["scale"]))
        if kind == "poly_cutoff":
            return PolyCutoff(
                alpha=float(obj["alpha"]),
                exponent=float(obj["exponent"]),
                coefficient=float(obj["coefficient"]),
            )
        if kind == "uniform":
            return Uniform(lo=float(obj["lo"]), hi=float(obj["hi"]))
        if kind == "atoms":
            return DiscreteAtoms(
                atoms=tuple((float(x), float(w)) for x, w in obj["atoms"])
            )
    except KeyError as exc:
        raise ConfigInvalid(f"law.{exc.args[0]}", "missing") from exc
    except (TypeError, ValueError, NoValidCutoff) as exc:
        raise ConfigInvalid("law", str(exc)) from exc
    raise ConfigInvalid(
        "law.kind", f"unknown kind {kind!r}; use gamma, poly_cutoff, uniform, or atoms"
    )


def _parse_driver(cfg: dict) -> DriverSpec:
    obj = cfg.get("driver", {"kind": BROWNIAN})
    if not isinstance(obj, dict):
        raise ConfigInvalid("driver", "must be an object with a 'kind' entry")
    hurst = obj.get("hurst")
    try:
        return DriverSpec(
            kind=obj.get("kind", BROWNIAN),
            seed=cfg["seed"],
            hurst=float(hurst) if hurst is not None else None,
            increment_law=obj.get("increment_law"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid("driver", str(exc)) from exc


def _levels(cfg: dict, *, nested: bool) -> list[int]:
    levels = cfg.get("levels")
    ok = (
        isinstance(levels, list)
        and levels
        and all(isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in levels)
    )
    if not ok:
        raise ConfigInvalid("levels", "must be a nonempty list of positive integers")
    if nested:
        if len(levels) < 2:
            raise ConfigInvalid("levels", "a refinement study needs at least two levels")
        for coarse, fine in zip(levels, levels[1:]):
            if fine <= coarse or fine % coarse != 0:
                raise ConfigInvalid(
                    "levels", "must increase strictly with each level dividing the next"
                )
    return levels


def _donsker_opts(cfg: dict, default_init: str = CELL_MASS):
    mode = cfg.get("mode", IMPLICIT)
    init_mode = cfg.get("init_mode", default_init)
    perturb = cfg.get("perturb_initial", False)
    if mode not in (IMPLICIT, EXPLICIT):
        raise ConfigInvalid("mode", f"must be {IMPLICIT!r} or {EXPLICIT!r}")
    if init_mode not in (CELL_MASS, DENSITY_SAMPLE):
        raise ConfigInvalid("init_mode", f"must be {CELL_MASS!r} or {DENSITY_SAMPLE!r}")
    if not isinstance(perturb, bool):
        raise ConfigInvalid("perturb_initial", "must be true or false")
    return mode, init_mode, perturb


def _particle_mode(cfg: dict) -> str:
    mode = cfg.get("particle_mode", IMPLICIT_PARTICLE)
    if mode not in (EXPLICIT_PARTICLE, IMPLICIT_PARTICLE):
        raise ConfigInvalid(
            "particle_mode", f"must be {EXPLICIT_PARTICLE!r} or {IMPLICIT_PARTICLE!r}"
        )
    return mode


def _donsker_grid(law, horizon: float, steps: int, perturb: bool):
    extra = int(math.floor(math.log(horizon / steps) ** 2)) if perturb else 0
    return make_grid(law, horizon, steps, extra_cells=extra)


# ---------------------------------------------------------------------------
# commands


def _run_solve_donsker(cfg: dict, out: Path) -> None:
    alpha = _positive_float(cfg, "alpha")
    horizon = _positive_float(cfg, "horizon")
    steps = _positive_int(cfg, "steps")
    law = _parse_law(cfg)
    mode, init_mode, perturb = _donsker_opts(cfg)
    grid = _donsker_grid(law, horizon, steps, perturb)
    solution = donsker.solve(
        DonskerConfig(
            alpha=alpha,
            grid=grid,
            law=law,
            mode=mode,
            perturb_initial=perturb,
            init_mode=init_mode,
        )
    )
    donsker.write_csv(solution, grid, out / f"level_{steps}.csv")
    iters = solution.iterations_per_step
    write_rows(
        out / "summary.csv",
        ("N", "h", "L_T", "Lambda_T", "init_iters", "avg_iterations", "max_iterations"),
        [
            (
                steps,
                grid.h,
                solution.loss.values[-1] / alpha,
                solution.loss.values[-1],
                int(iters[0]),
                float(iters[1:].mean()),
                int(iters[1:].max()),
            )
        ],
    )
    render_loss(
        out / "fig_loss.png",
        [(f"{mode} tree, N={steps}", grid.times(), solution.loss.fractions())],
        f"tree scheme, alpha={alpha:g}",
    )


def _run_solve_particle(cfg: dict, out: Path) -> None:
    alpha = _positive_float(cfg, "alpha")
    horizon = _positive_float(cfg, "horizon")
    steps = _positive_int(cfg, "steps")
    n = _positive_int(cfg, "particles")
    law = _parse_law(cfg)
    driver = _parse_driver(cfg)
    mode = _particle_mode(cfg)
    grid = GridSpec(horizon=horizon, steps=steps, max_index=steps + 2)
    solution = particle.solve(
        ParticleConfig(alpha=alpha, grid=grid, law=law, driver=driver, n=n, mode=mode)
    )
    particle.write_csv(solution, grid, out / f"level_{steps}.csv")
    write_rows(
        out / "summary.csv",
        ("N", "h", "particles", "L_T", "Lambda_T", "avg_fixed_point_iters",
         "max_fixed_point_iters", "absorbed"),
        [
            (
                steps,
                grid.h,
                n,
                solution.loss.values[-1] / alpha,
                solution.loss.values[-1],
                float(solution.fixed_point_iters.mean()),
                int(solution.fixed_point_iters.max()),
                int(np.count_nonzero(solution.absorbed_step >= 0)),
            )
        ],
    )
    render_loss(
        out / "fig_loss.png",
        [(f"{mode}, N={steps}, n={n}", grid.times(), solution.loss.fractions())],
        f"particle scheme, alpha={alpha:g}",
    )


def _particle_study(cfg: dict, levels: list[int], mode: str, paths_finest, x0_finest):
    """Solve the particle scheme on nested restrictions of shared paths."""
    alpha = _positive_float(cfg, "alpha")
    horizon = _positive_float(cfg, "horizon")
    law = _parse_law(cfg)
    driver = _parse_driver(cfg)
    pps = _positive_int(cfg, "particles_per_step", _DEFAULT_PARTICLES_PER_STEP)
    finest = levels[-1]
    out_levels = []
    solutions = {}
    for steps in levels:
        n = pps * steps
        coarse = restrict_paths(take_particles(paths_finest, n), finest // steps)
        grid = GridSpec(horizon=horizon, steps=steps, max_index=steps + 2)
        config = ParticleConfig(
            alpha=alpha, grid=grid, law=law, driver=driver, n=n, mode=mode
        )
        solver = solve_explicit if mode == EXPLICIT_PARTICLE else solve_implicit
        solution = solver(config, coarse, x0_finest[:n])
        solutions[steps] = solution
        out_levels.append(analysis.Level(steps=steps, loss=solution.loss))
    study = analysis.RefinementStudy(
        scheme=mode, horizon=horizon, levels=tuple(out_levels), config=dict(cfg)
    )
    return study, solutions


def _run_convergence(cfg: dict, out: Path) -> None:
    scheme = cfg.get("scheme", "donsker")
    alpha = _positive_float(cfg, "alpha")
    horizon = _positive_float(cfg, "horizon")
    law = _parse_law(cfg)
    levels = _levels(cfg, nested=True)

    if scheme == "donsker":
        mode, init_mode, perturb = _donsker_opts(cfg)
        study_levels = []
        for steps in levels:
            grid = _donsker_grid(law, horizon, steps, perturb)
            solution = donsker.solve(
                DonskerConfig(
                    alpha=alpha,
                    grid=grid,
                    law=law,
                    mode=mode,
                    perturb_initial=perturb,
                    init_mode=init_mode,
                )
            )
            donsker.write_csv(solution, grid, out / f"level_{steps}.csv")
            study_levels.append(analysis.Level(steps=steps, loss=solution.loss))
        tag = f"donsker_{mode}"
        study = analysis.RefinementStudy(
            scheme=tag, horizon=horizon, levels=tuple(study_levels), config=dict(cfg)
        )
    elif scheme == "particle":
        mode = _particle_mode(cfg)
        driver = _parse_driver(cfg)
        pps = _positive_int(cfg, "particles_per_step", _DEFAULT_PARTICLES_PER_STEP)
        finest = levels[-1]
        grid_f = GridSpec(horizon=horizon, steps=finest, max_index=finest + 2)
        paths_f = sample_paths(driver, grid_f, pps * finest)
        x0_f = sample_initial(law, pps * finest, cfg["seed"])
        study, solutions = _particle_study(cfg, levels, mode, paths_f, x0_f)
        tag = mode
        for steps in levels:
            grid = GridSpec(horizon=horizon, steps=steps, max_index=steps + 2)
            particle.write_csv(solutions[steps], grid, out / f"level_{steps}.csv")
    else:
        raise ConfigInvalid("scheme", "must be 'donsker' or 'particle'")

    analysis.write_study_csv(study, out / "summary.csv")
    estimates = analysis.error_estimator(study)
    analysis.write_loglog_points(estimates, out / "loglog_error.csv")
    render_loglog(
        out / "fig_convergence.png",
        [(tag, estimates)],
        f"error estimator decay, alpha={alpha:g}",
        "log2 |2(L^h - L^2h)|",
    )
    render_loss(
        out / "fig_loss.png",
        [
            (
                f"N={lvl.steps}",
                np.arange(lvl.steps + 1) * (horizon / lvl.steps),
                lvl.loss.fractions(),
            )
            for lvl in study.levels
        ],
        f"{tag} loss across refinements",
    )


def _stacked_study_rows(studies) -> list[tuple]:
    rows = []
    for tag, study in studies:
        seen = []
        for idx, lvl in enumerate(study.levels):
            h = study.horizon / lvl.steps
            t_star, jump = analysis.detect_jump(lvl.loss, study.grid_of(lvl))
            est = None
            if idx > 0 and lvl.steps == 2 * study.levels[idx - 1].steps:
                est = 2.0 * (
                    lvl.loss_at_horizon - study.levels[idx - 1].loss_at_horizon
                )
                seen.append((h, est))
            usable = [(hh, ee) for hh, ee in seen if ee != 0.0]
            slope = analysis.fit_order(usable) if len(usable) >= 2 else None
            rows.append(
                (tag, idx, lvl.steps, h, lvl.loss_at_horizon, est, t_star, jump, slope)
            )
    return rows


def _run_jump_study(cfg: dict, out: Path) -> None:
    alpha = _positive_float(cfg, "alpha")
    horizon = _positive_float(cfg, "horizon")
    law = _parse_law(cfg)
    levels = _levels(cfg, nested=True)
    driver = _parse_driver(cfg)
    pps = _positive_int(cfg, "particles_per_step", _DEFAULT_PARTICLES_PER_STEP)

    finest = levels[-1]
    grid_f = GridSpec(horizon=horizon, steps=finest, max_index=finest + 2)
    paths_f = sample_paths(driver, grid_f, pps * finest)
    x0_f = sample_initial(law, pps * finest, cfg["seed"])

    studies = []
    for mode, short in ((IMPLICIT_PARTICLE, "implicit"), (EXPLICIT_PARTICLE, "explicit")):
        study, solutions = _particle_study(cfg, levels, mode, paths_f, x0_f)
        studies.append((short, study))
        for steps in levels:
            grid = GridSpec(horizon=horizon, steps=steps, max_index=steps + 2)
            particle.write_csv(
                solutions[steps], grid, out / f"level_{steps}_{short}.csv"
            )

    write_rows(
        out / "summary.csv",
        ("scheme", "level", "N", "h", "L_T", "estimator", "t_star", "J", "slope_so_far"),
        _stacked_study_rows(studies),
    )

    series = []
    for short, study in studies:
        triples = analysis.jump_refinement_estimators(study)
        time_pairs = [(d, te) for d, te, _ in triples]
        size_pairs = [(d, se) for d, _, se in triples]
        analysis.write_loglog_points(
            time_pairs, out / f"loglog_jump_time_{short}.csv", "log2_abs_time_est"
        )
        analysis.write_loglog_points(
            size_pairs, out / f"loglog_jump_size_{short}.csv", "log2_abs_size_est"
        )
        series.append((f"{short} time", time_pairs))
        series.append((f"{short} size", size_pairs))
    render_loglog(
        out / "fig_jump_estimators.png",
        series,
        f"jump time/size refinement estimators, alpha={alpha:g}",
        "log2 |estimator|",
    )
    render_loss(
        out / "fig_loss.png",
        [
            (
                f"{short} N={finest}",
                np.arange(finest + 1) * (horizon / finest),
                study.levels[-1].loss.fractions(),
            )
            for short, study in studies
        ],
        f"particle loss at the finest level, alpha={alpha:g}",
    )


def _run_iteration_table(cfg: dict, out: Path) -> None:
    horizon = _positive_float(cfg, "horizon")
    law = _parse_law(cfg)
    levels = _levels(cfg, nested=False)
    alphas = cfg.get("alphas")
    if alphas is None and "alpha" in cfg:
        alphas = [cfg["alpha"]]
    ok = (
        isinstance(alphas, list)
        and alphas
        and all(
            isinstance(a, (int, float)) and not isinstance(a, bool) and a > 0
            for a in alphas
        )
    )
    if not ok:
        raise ConfigInvalid("alphas", "must be a nonempty list of positive numbers")
    # per-step iteration statistics belong to the density-sampled table setup
    mode, init_mode, perturb = _donsker_opts(cfg, default_init=DENSITY_SAMPLE)

    rows = []
    fig_rows = []
    for a in alphas:
        avgs, maxes = [], []
        for steps in levels:
            grid = _donsker_grid(law, horizon, steps, perturb)
            solution = donsker.solve(
                DonskerConfig(
                    alpha=float(a),
                    grid=grid,
                    law=law,
                    mode=mode,
                    perturb_initial=perturb,
                    init_mode=init_mode,
                )
            )
            donsker.write_csv(
                solution, grid, out / f"level_{steps}_alpha{float(a):g}.csv"
            )
            iters = solution.iterations_per_step
            avg = float(iters[1:].mean())
            top = int(iters[1:].max())
            avgs.append(avg)
            maxes.append(top)
            rows.append(
                (
                    float(a),
                    steps,
                    grid.h,
                    int(iters[0]),
                    avg,
                    top,
                    solution.loss.values[-1] / float(a),
                )
            )
        fig_rows.append((f"alpha={float(a):g}", list(levels), avgs, maxes))
    write_rows(
        out / "summary.csv",
        ("alpha", "N", "h", "init_iters", "avg_iterations", "max_iterations", "L_T"),
        rows,
    )
    render_iterations(
        out / "fig_iterations.png", fig_rows, "implicit per-step iteration counts"
    )


_RUNNERS = {
    "solve-donsker": _run_solve_donsker,
    "solve-particle": _run_solve_particle,
    "convergence": _run_convergence,
    "jump-study": _run_jump_study,
    "iteration-table": _run_iteration_table,
}


# ---------------------------------------------------------------------------
# entry point


def _write_meta(command: str, cfg: dict, out: Path, wall_seconds: float) -> None:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    meta = {
        "command": command,
        "config_sha256": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "seed": cfg["seed"],
        "versions": {
            "icefront": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
        },
        "wall_clock_seconds": wall_seconds,
    }
    (out / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icefront",
        description=(
            "Tree and particle solvers for a free-boundary absorption problem "
            "with mean-field feedback."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("solve-donsker", "one tree-scheme run at a fixed step count"),
        ("solve-particle", "one particle-scheme run at a fixed step count"),
        ("convergence", "refinement study with error estimators and fitted order"),
        ("jump-study", "explicit vs implicit particle jump estimators"),
        ("iteration-table", "per-step iteration statistics across alphas and levels"),
    ):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=True, help="path to the JSON run config")
        cmd.add_argument(
            "--seed", type=int, default=None, help="override the seed in the config"
        )
        cmd.add_argument(
            "--out", default=None, help="override the output directory in the config"
        )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        cfg = _load_config(args.config, args.seed, args.out)
        out = _prepare_out(cfg)
        _RUNNERS[args.command](cfg, out)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except IcefrontError as exc:
        print(f"run error: {exc}", file=sys.stderr)
        return 3
    _write_meta(args.command, cfg, out, time.perf_counter() - started)
    print(f"wrote artifacts to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
