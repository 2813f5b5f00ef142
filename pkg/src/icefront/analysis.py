"""Convergence diagnostics over nested mesh refinements.

Given loss curves solved at step counts that double from level to level,
this module computes Richardson-style error estimators ``2*(L^h - L^{2h})``,
fits empirical convergence orders by least squares in log-log coordinates,
locates the largest one-step loss increment (the jump) and its refinement
estimators, and checks the contraction-regime condition
``alpha * sup(density) < 1`` together with the near-square-root rate it
predicts.

All operations are pure functions over immutable inputs. Estimates keep
their sign; absolute values enter only the log-log fits. A zero estimate
has no logarithm and is treated as an absent point by the plot writer,
while :func:`fit_order` refuses it outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import GridSpec, InitialLaw, LossCurve, density_sup
from .csvio import write_rows
from .errors import DegenerateFit, NeedTwoLevels

__all__ = [
    "Level",
    "RefinementStudy",
    "WeakFeedbackReport",
    "error_estimator",
    "fit_order",
    "detect_jump",
    "jump_refinement_estimators",
    "weak_feedback_check",
    "write_study_csv",
    "write_loglog_points",
]

# empirical-rate threshold: square-root order up to the log-squared factor
_RATE_FLOOR = 0.4


@dataclass(frozen=True)
class Level:
    """One refinement level: its step count and full loss curve."""

    steps: int
    loss: LossCurve

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.loss.values.size != self.steps + 1:
            raise ValueError("loss curve must hold steps + 1 values")

    @property
    def loss_at_horizon(self) -> float:
        """Absorbed fraction at the final grid time."""
        return float(self.loss.values[-1] / self.loss.alpha)


@dataclass(frozen=True)
class RefinementStudy:
    """Loss curves of one scheme across nested refinements.

    Step counts must increase strictly and each must divide the next, so
    grid times of a coarse level all appear in the finer ones. All levels
    share one alpha and one horizon.
    """

    scheme: str
    horizon: float
    levels: tuple[Level, ...]
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if not self.levels:
            raise ValueError("a study needs at least one level")
        if len({lvl.loss.alpha for lvl in self.levels}) != 1:
            raise ValueError("levels must share one alpha")
        counts = [lvl.steps for lvl in self.levels]
        for coarse, fine in zip(counts, counts[1:]):
            if fine <= coarse or fine % coarse != 0:
                raise ValueError(
                    "step counts must increase strictly and divide the next"
                )

    @property
    def alpha(self) -> float:
        return self.levels[0].loss.alpha

    def grid_of(self, level: Level) -> GridSpec:
        """Minimal grid carrying the level's time axis."""
        return GridSpec(
            horizon=self.horizon, steps=level.steps, max_index=level.steps + 2
        )


def error_estimator(study: RefinementStudy) -> list[tuple[float, float]]:
    """Error estimates ``2*(L^h - L^{2h})`` over consecutive halvings.

    Returns one ``(h, estimate)`` pair per consecutive level pair whose
    step count doubles, ``h`` being the finer step. Estimates are signed
    and in absorbed-fraction units. The factor 2 approximates the exact
    Richardson constant ``1/(sqrt(2)-1) ~ 2.414`` for a square-root-order
    scheme; the rougher constant matches the convention used throughout.

    Raises
    ------
    NeedTwoLevels
        When no consecutive halving pair exists.
    """
    pairs = []
    for coarse, fine in zip(study.levels, study.levels[1:]):
        if fine.steps != 2 * coarse.steps:
            continue
        h = study.horizon / fine.steps
        pairs.append((h, 2.0 * (fine.loss_at_horizon - coarse.loss_at_horizon)))
    if not pairs:
        raise NeedTwoLevels("the study holds no consecutive mesh halving")
    return pairs


def fit_order(pairs) -> float:
    """Least-squares slope of ``log|err|`` against ``log h``.

    With four or more points the coarsest one is dropped first; it is
    routinely pre-asymptotic and bends the fit.

    Raises
    ------
    NeedTwoLevels
        For fewer than two points.
    DegenerateFit
        When some error is exactly zero, leaving the log fit undefined.
    """
    pts = [(float(h), float(err)) for h, err in pairs]
    if len(pts) < 2:
        raise NeedTwoLevels("an order fit needs at least two (h, err) points")
    if any(err == 0.0 for _, err in pts):
        raise DegenerateFit("zero error value has no logarithm")
    if len(pts) >= 4:
        pts = sorted(pts, key=lambda p: p[0])[:-1]
    log_h = np.log([h for h, _ in pts])
    log_err = np.log([abs(err) for _, err in pts])
    return float(np.polyfit(log_h, log_err, 1)[0])


def detect_jump(curve: LossCurve, grid: GridSpec) -> tuple[float, float]:
    """Time and size of the largest one-step loss increment.

    Returns ``(t_star, J)`` where ``t_star = h * k_star`` for the smallest
    maximizing index and ``J`` is the increment in absorbed-fraction units.
    """
    if curve.values.size != grid.steps + 1:
        raise ValueError("curve length must match the grid")
    increments = np.diff(curve.values)
    k_star = int(np.argmax(increments)) + 1
    return k_star * grid.h, float(increments[k_star - 1] / curve.alpha)


def jump_refinement_estimators(
    study: RefinementStudy,
) -> list[tuple[float, float, float]]:
    """Refinement estimators for the jump time and jump size.

    One tuple ``(delta, 4*|t*_coarse - t*_fine|, 4*|J_coarse - J_fine|)``
    per consecutive halving pair, ``delta`` being the finer step. A zero
    time estimator is legitimate (the detected jump time can coincide
    across levels) and is skipped later by the log-log writer.

    Raises
    ------
    NeedTwoLevels
        When no consecutive halving pair exists.
    """
    jumps = {
        lvl.steps: detect_jump(lvl.loss, study.grid_of(lvl)) for lvl in study.levels
    }
    out = []
    for coarse, fine in zip(study.levels, study.levels[1:]):
        if fine.steps != 2 * coarse.steps:
            continue
        t_coarse, j_coarse = jumps[coarse.steps]
        t_fine, j_fine = jumps[fine.steps]
        delta = study.horizon / fine.steps
        out.append(
            (delta, 4.0 * abs(t_coarse - t_fine), 4.0 * abs(j_coarse - j_fine))
        )
    if not out:
        raise NeedTwoLevels("the study holds no consecutive mesh halving")
    return out


@dataclass(frozen=True)
class WeakFeedbackReport:
    """Outcome of the contraction-regime check.

    ``alpha_times_density_sup`` below one makes the loss map a contraction:
    the loss curve stays continuous and the scheme error is bounded by a
    square-root rate with a log-squared correction. ``rate_slope`` is the
    fitted empirical order when a refinement study was supplied (absent
    when too few nonzero estimates exist) and ``rate_consistent`` flags a
    slope of at least 0.4, square-root order up to that correction.
    """

    alpha_times_density_sup: float
    is_weak_feedback: bool
    rate_slope: float | None
    rate_consistent: bool | None


def weak_feedback_check(
    alpha: float, law: InitialLaw, study: RefinementStudy | None = None
) -> WeakFeedbackReport:
    """Check the contraction condition and, optionally, the observed rate.

    Laws without a bounded density (atoms) report an infinite product and
    are never in the weak-feedback regime. Zero error estimates are
    dropped as absent points before fitting.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    product = alpha * density_sup(law)
    slope = None
    consistent = None
    if study is not None:
        usable = [(h, est) for h, est in error_estimator(study) if est != 0.0]
        if len(usable) >= 2:
            slope = fit_order(usable)
            consistent = slope >= _RATE_FLOOR
    return WeakFeedbackReport(
        alpha_times_density_sup=float(product),
        is_weak_feedback=product < 1.0,
        rate_slope=slope,
        rate_consistent=consistent,
    )


def write_study_csv(study: RefinementStudy, path) -> None:
    """Study table: level, N, h, L_T, estimator, t_star, J, slope_so_far.

    The estimator on a row pairs that level with its predecessor (blank on
    the first row and on rows that do not halve the step); slope_so_far
    refits all nonzero estimators up to the row once two are available.
    """
    rows = []
    seen: list[tuple[float, float]] = []
    for idx, lvl in enumerate(study.levels):
        h = study.horizon / lvl.steps
        t_star, jump = detect_jump(lvl.loss, study.grid_of(lvl))
        est = None
        if idx > 0 and lvl.steps == 2 * study.levels[idx - 1].steps:
            est = 2.0 * (
                lvl.loss_at_horizon - study.levels[idx - 1].loss_at_horizon
            )
            seen.append((h, est))
        usable = [(hh, ee) for hh, ee in seen if ee != 0.0]
        slope = fit_order(usable) if len(usable) >= 2 else None
        rows.append(
            (idx, lvl.steps, h, lvl.loss_at_horizon, est, t_star, jump, slope)
        )
    write_rows(
        path,
        ("level", "N", "h", "L_T", "estimator", "t_star", "J", "slope_so_far"),
        rows,
    )


def write_loglog_points(pairs, path, value_label: str = "log2_abs_est") -> None:
    """Plot-ready two-column file: log2 h against log2 |value|.

    Zero values are left out rather than mapped to minus infinity; a gap
    in the plotted series marks them.
    """
    rows = [
        (math.log2(h), math.log2(abs(v))) for h, v in pairs if v != 0.0
    ]
    write_rows(path, ("log2_h", value_label), rows)
