"""Initial laws, lattice grids, loss curves, and space discretization.

Everything downstream (tree solver, particle schemes, diagnostics) consumes
the types defined here: an initial law for the starting position, a grid
fixing the time step ``h = T/N`` and the spatial pitch ``sqrt(h)``, a loss
curve holding the nondecreasing absorbed-mass path, and the density vector
of lattice cell masses.

All value types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincinv

from .errors import NoValidCutoff, UnboundedSupportTruncated

__all__ = [
    "GammaLaw",
    "PolyCutoff",
    "DiscreteAtoms",
    "Uniform",
    "InitialLaw",
    "GridSpec",
    "LossCurve",
    "DensityVector",
    "CELL_MASS",
    "DENSITY_SAMPLE",
    "cdf",
    "density",
    "density_sup",
    "quantile",
    "solve_cutoff",
    "discretize_initial",
    "make_grid",
    "regularized_gamma_p",
]

logger = logging.getLogger(__name__)

# Initialization modes for discretize_initial.
CELL_MASS = "cell_mass"
DENSITY_SAMPLE = "density_sample"

_ATOM_MASS_TOL = 1e-12
_TRUNCATION_TOL = 1e-8
_QUANTILE_TAIL = 1e-13  # auto lattice sizing keeps truncation far below 1e-10


# ---------------------------------------------------------------------------
# incomplete gamma (series + continued fraction, no special-function import)

_GAMMA_EPS = 1e-16
_GAMMA_MAX_ITER = 600
_FPMIN = 1e-300


def regularized_gamma_p(shape: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(shape, x).

    Series expansion for ``x < shape + 1`` and a modified Lentz continued
    fraction for the complementary function otherwise; absolute error below
    1e-12 over the positive axis.

    Parameters
    ----------
    shape:
        Positive shape parameter.
    x:
        Evaluation point; nonpositive x gives 0.
    """
    if shape <= 0.0:
        raise ValueError("shape must be positive")
    if x <= 0.0:
        return 0.0
    log_prefactor = shape * math.log(x) - x - math.lgamma(shape)
    if x < shape + 1.0:
        # ascending series for P
        ap = shape
        term = 1.0 / shape
        total = term
        for _ in range(_GAMMA_MAX_ITER):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _GAMMA_EPS:
                break
        return min(1.0, math.exp(log_prefactor) * total)
    # continued fraction for Q, then P = 1 - Q
    b = x + 1.0 - shape
    c = 1.0 / _FPMIN
    d = 1.0 / b
    frac = d
    for i in range(1, _GAMMA_MAX_ITER):
        an = -i * (i - shape)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        frac *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return max(0.0, 1.0 - math.exp(log_prefactor) * frac)


# ---------------------------------------------------------------------------
# initial laws


@dataclass(frozen=True)
class GammaLaw:
    """Gamma(shape, scale) law on [0, inf)."""

    shape: float
    scale: float

    def __post_init__(self):
        if self.shape <= 0.0 or self.scale <= 0.0:
            raise ValueError("GammaLaw requires shape > 0 and scale > 0")


@dataclass(frozen=True)
class PolyCutoff:
    """Density 1/alpha - coefficient*x**exponent on [0, cutoff], zero beyond.

    The cutoff is derived so the density integrates to one; construction
    fails with :class:`~icefront.errors.NoValidCutoff` when no root with
    nonnegative density exists.
    """

    alpha: float
    exponent: float
    coefficient: float
    cutoff: float = field(init=False)

    def __post_init__(self):
        if self.alpha <= 0.0 or self.exponent <= 0.0 or self.coefficient <= 0.0:
            raise ValueError("PolyCutoff requires alpha, exponent, coefficient > 0")
        a = solve_cutoff(self.alpha, self.exponent, self.coefficient)
        object.__setattr__(self, "cutoff", a)


@dataclass(frozen=True)
class DiscreteAtoms:
    """Finitely many atoms (location >= 0, mass > 0) summing to one."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(x), float(w)) for x, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ValueError("DiscreteAtoms requires at least one atom")
        total = 0.0
        for x, w in atoms:
            if x < 0.0:
                raise ValueError("atom locations must be >= 0")
            if w <= 0.0:
                raise ValueError("atom masses must be > 0")
            total += w
        if abs(total - 1.0) > _ATOM_MASS_TOL:
            raise ValueError(f"atom masses sum to {total!r}, expected 1")


@dataclass(frozen=True)
class Uniform:
    """Uniform law on [lo, hi] with 0 <= lo < hi."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo < 0.0 or self.hi <= self.lo:
            raise ValueError("Uniform requires 0 <= lo < hi")


InitialLaw = GammaLaw | PolyCutoff | DiscreteAtoms | Uniform


# ---------------------------------------------------------------------------
# grids, loss curves, density vectors


@dataclass(frozen=True)
class GridSpec:
    """Uniform time grid on [0, horizon] with a truncated spatial lattice.

    ``h = horizon/steps`` is the time step and ``sqrt(h)`` the spatial pitch;
    cell ``i`` covers ``[i*pitch, (i+1)*pitch)`` for ``0 <= i <= max_index``.
    ``max_index`` must leave enough headroom that mass starting below the
    truncation point cannot reach the top edge within ``steps`` moves
    (``max_index >= ceil(support/pitch) + steps + 2``); :func:`make_grid`
    chooses it automatically.
    """

    horizon: float
    steps: int
    max_index: int

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if self.steps < 1:
            raise ValueError("steps must be a positive integer")
        if self.max_index < self.steps + 2:
            raise ValueError("max_index leaves no headroom above the support")

    @property
    def h(self) -> float:
        return self.horizon / self.steps

    @property
    def pitch(self) -> float:
        return math.sqrt(self.h)

    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.h


@dataclass(frozen=True)
class LossCurve:
    """Nondecreasing loss path on the grid, values in [0, alpha].

    ``values[k]`` is the loss at time ``t_k``; the absorbed fraction is
    ``values[k]/alpha``.
    """

    alpha: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("values must be a nonempty 1-d array")
        if vals[0] < 0.0 or vals[-1] > self.alpha or np.any(np.diff(vals) < 0.0):
            raise ValueError("loss values must be nondecreasing within [0, alpha]")

    def fractions(self) -> np.ndarray:
        """Absorbed-fraction path values/alpha."""
        return self.values / self.alpha


@dataclass(frozen=True)
class DensityVector:
    """Sub-probability masses on the spatial lattice at one time index.

    ``time_index`` is -1 for the pre-absorption initial discretization and
    ``k`` for the state after the k-th completed step.

    Cell-mass discretizations and every state evolved from one satisfy
    ``sum(u) <= 1 + 1e-12``; density sampling at coarse pitch may overshoot
    by O(pitch), so the total is checked by the solvers in cell-mass mode
    rather than here.
    """

    u: np.ndarray
    time_index: int

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        object.__setattr__(self, "u", u)
        if u.ndim != 1 or u.size < 1:
            raise ValueError("u must be a nonempty 1-d array")
        if not np.all(np.isfinite(u)):
            raise ValueError("cell masses must be finite")
        if np.any(u < 0.0):
            raise ValueError("cell masses must be nonnegative")

    def total_mass(self) -> float:
        return float(self.u.sum())


# ---------------------------------------------------------------------------
# law operations


def cdf(law: InitialLaw, x) -> float | np.ndarray:
    """Cumulative distribution function of ``law`` at ``x``.

    Accepts a scalar or an array; returns the matching shape. Exact up to
    1e-12 for the continuous variants, exact for atoms and uniforms.
    """
    scalar = np.isscalar(x) or np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = _cdf_array(law, xs)
    return float(out[0]) if scalar else out


def _cdf_array(law: InitialLaw, xs: np.ndarray) -> np.ndarray:
    if isinstance(law, GammaLaw):
        out = np.zeros_like(xs)
        pos = xs > 0.0
        out[pos] = [regularized_gamma_p(law.shape, v / law.scale) for v in xs[pos]]
        return out
    if isinstance(law, PolyCutoff):
        clipped = np.clip(xs, 0.0, law.cutoff)
        out = (
            clipped / law.alpha
            - law.coefficient * clipped ** (law.exponent + 1.0) / (law.exponent + 1.0)
        )
        return np.clip(out, 0.0, 1.0)
    if isinstance(law, Uniform):
        return np.clip((xs - law.lo) / (law.hi - law.lo), 0.0, 1.0)
    if isinstance(law, DiscreteAtoms):
        out = np.zeros_like(xs)
        for loc, w in law.atoms:
            out += np.where(xs >= loc, w, 0.0)
        return out
    raise TypeError(f"unknown law {type(law).__name__}")


def density(law: InitialLaw, x) -> float | np.ndarray:
    """Density of ``law`` at ``x``; rejects atom laws, which have none."""
    if isinstance(law, DiscreteAtoms):
        raise ValueError("DiscreteAtoms has no density")
    scalar = np.isscalar(x) or np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if isinstance(law, GammaLaw):
        out = np.zeros_like(xs)
        pos = xs > 0.0
        v = xs[pos] / law.scale
        out[pos] = np.exp(
            (law.shape - 1.0) * np.log(v) - v - math.lgamma(law.shape)
        ) / law.scale
    elif isinstance(law, PolyCutoff):
        inside = (xs >= 0.0) & (xs <= law.cutoff)
        out = np.where(
            inside, 1.0 / law.alpha - law.coefficient * np.abs(xs) ** law.exponent, 0.0
        )
        out = np.maximum(out, 0.0)
    elif isinstance(law, Uniform):
        out = np.where((xs >= law.lo) & (xs <= law.hi), 1.0 / (law.hi - law.lo), 0.0)
    else:
        raise TypeError(f"unknown law {type(law).__name__}")
    return float(out[0]) if scalar else out


def density_sup(law: InitialLaw) -> float:
    """Supremum of the density; ``inf`` for laws without a bounded one."""
    if isinstance(law, GammaLaw):
        if law.shape < 1.0:
            return math.inf
        if law.shape == 1.0:
            return 1.0 / law.scale
        mode = (law.shape - 1.0) * law.scale
        return float(density(law, mode))
    if isinstance(law, PolyCutoff):
        return 1.0 / law.alpha
    if isinstance(law, Uniform):
        return 1.0 / (law.hi - law.lo)
    if isinstance(law, DiscreteAtoms):
        return math.inf
    raise TypeError(f"unknown law {type(law).__name__}")


def quantile(law: InitialLaw, p) -> float | np.ndarray:
    """Generalized inverse cdf, the smallest x with cdf(x) >= p."""
    scalar = np.isscalar(p) or np.ndim(p) == 0
    ps = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if np.any((ps < 0.0) | (ps > 1.0)):
        raise ValueError("probabilities must lie in [0, 1]")
    if isinstance(law, GammaLaw):
        out = gammaincinv(law.shape, ps) * law.scale
    elif isinstance(law, Uniform):
        out = law.lo + ps * (law.hi - law.lo)
    elif isinstance(law, PolyCutoff):
        out = _bisect_quantile(law, ps)
    elif isinstance(law, DiscreteAtoms):
        atoms = sorted(law.atoms)
        locs = np.array([a[0] for a in atoms])
        cum = np.cumsum([a[1] for a in atoms])
        idx = np.minimum(np.searchsorted(cum, ps, side="left"), len(locs) - 1)
        out = locs[idx]
    else:
        raise TypeError(f"unknown law {type(law).__name__}")
    return float(out[0]) if scalar else out


def _bisect_quantile(law: PolyCutoff, ps: np.ndarray) -> np.ndarray:
    lo = np.zeros_like(ps)
    hi = np.full_like(ps, law.cutoff)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        below = _cdf_array(law, mid) < ps
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return hi


def solve_cutoff(alpha: float, a: float, c: float) -> float:
    """Cutoff A with integral_0^A (1/alpha - c x**a) dx = 1, to 1e-12.

    Bisection on [0, (1/(alpha*c))**(1/a)], the interval where the density
    stays nonnegative.

    Raises
    ------
    NoValidCutoff
        When even the largest admissible cutoff integrates to less than one.
    """
    if alpha <= 0.0 or a <= 0.0 or c <= 0.0:
        raise ValueError("alpha, a, c must all be positive")

    def integral(x: float) -> float:
        return x / alpha - c * x ** (a + 1.0) / (a + 1.0)

    upper = (1.0 / (alpha * c)) ** (1.0 / a)
    if integral(upper) < 1.0 - 1e-12:
        raise NoValidCutoff(
            f"max attainable integral {integral(upper)!r} < 1 for "
            f"alpha={alpha}, a={a}, c={c}"
        )
    lo, hi = 0.0, upper
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if integral(mid) < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# discretization


def discretize_initial(
    law: InitialLaw, grid: GridSpec, mode: str = CELL_MASS
) -> DensityVector:
    """Project the initial law onto the spatial lattice.

    In ``CELL_MASS`` mode (the default) cell ``i`` receives the exact mass of
    ``[i*pitch, (i+1)*pitch)``. In ``DENSITY_SAMPLE`` mode it receives
    ``density(i*pitch) * pitch`` instead, which sums to 1 - O(h) rather
    than 1 and is rejected for atom laws.

    Returns a :class:`DensityVector` with ``time_index = -1`` (no absorption
    applied yet). Emits :class:`UnboundedSupportTruncated` when more than
    1e-8 of the law's mass lies above the lattice.
    """
    pitch = grid.pitch
    n_cells = grid.max_index + 1
    if mode == CELL_MASS:
        if isinstance(law, DiscreteAtoms):
            u = np.zeros(n_cells)
            for loc, w in law.atoms:
                i = int(math.floor(loc / pitch))
                if i < n_cells:
                    u[i] += w
        else:
            edges = np.arange(n_cells + 1) * pitch
            u = np.diff(_cdf_array(law, edges))
            u = np.maximum(u, 0.0)
    elif mode == DENSITY_SAMPLE:
        points = np.arange(n_cells) * pitch
        u = np.asarray(density(law, points)) * pitch
    else:
        raise ValueError(f"unknown initialization mode {mode!r}")

    truncated = 1.0 - cdf(law, (grid.max_index + 1) * pitch)
    if truncated > _TRUNCATION_TOL:
        warnings.warn(
            UnboundedSupportTruncated(
                f"lattice up to index {grid.max_index} drops {truncated:.3e} "
                "of the initial mass"
            ),
            stacklevel=2,
        )
    return DensityVector(u=u, time_index=-1)


def make_grid(law: InitialLaw, horizon: float, steps: int, extra_cells: int = 0) -> GridSpec:
    """Build a grid whose lattice comfortably covers the law's support.

    The top index is the 1 - 1e-13 quantile in cells, plus ``steps + 2``
    headroom so no surviving mass can reach the edge, plus ``extra_cells``
    (use this to absorb an initial-condition index shift).
    """
    if horizon <= 0.0 or steps < 1:
        raise ValueError("horizon must be positive and steps >= 1")
    pitch = math.sqrt(horizon / steps)
    support = float(quantile(law, 1.0 - _QUANTILE_TAIL))
    max_index = int(math.ceil(support / pitch)) + steps + 2 + max(0, extra_cells)
    return GridSpec(horizon=horizon, steps=steps, max_index=max_index)
