"""Solvers and diagnostics for a supercooled free-boundary problem.

A unit of supercooled liquid is represented by a particle at distance
``X_t`` from the freezing front; the front advances by ``alpha`` times the
fraction of particles it has absorbed, which feeds back into every
particle's position. The package computes the minimal (physical) loss
curve of this system two ways and cross-checks them:

- :mod:`icefront.donsker`: deterministic recombining-lattice scheme with a
  per-step fixed-point iteration, in implicit and explicit variants.
- :mod:`icefront.particle`: Monte Carlo particle schemes on frozen driver
  paths from :mod:`icefront.drivers` (Brownian, fractional Brownian, scaled
  walks).
- :mod:`icefront.oracle`: brute-force reference solvers for tiny instances.
- :mod:`icefront.analysis`: error estimators, empirical convergence orders,
  jump detection, and the contraction-regime check.

The command-line runner lives in :mod:`icefront.cli` (console script
``icefront``) and renders figures; importing the library itself pulls in
neither matplotlib nor the CLI.
"""

from .analysis import (
    Level,
    RefinementStudy,
    WeakFeedbackReport,
    detect_jump,
    error_estimator,
    fit_order,
    jump_refinement_estimators,
    weak_feedback_check,
)
from .core import (
    CELL_MASS,
    DENSITY_SAMPLE,
    DensityVector,
    DiscreteAtoms,
    GammaLaw,
    GridSpec,
    InitialLaw,
    LossCurve,
    PolyCutoff,
    Uniform,
    cdf,
    density,
    density_sup,
    discretize_initial,
    make_grid,
    quantile,
    solve_cutoff,
)
from .donsker import (
    EXPLICIT,
    IMPLICIT,
    DonskerConfig,
    DonskerSolution,
    init_loss,
    step,
)
from .donsker import solve as solve_donsker
from .drivers import (
    BROWNIAN,
    FRACTIONAL_BROWNIAN,
    RADEMACHER,
    SCALED_WALK,
    STANDARD_NORMAL,
    DriverSpec,
    PathMatrix,
    dump_paths,
    fbm_covariance,
    load_paths,
    sample_paths,
)
from .errors import (
    ConfigInvalid,
    CovarianceNotPD,
    DegenerateFit,
    IcefrontError,
    InstanceTooLarge,
    NeedTwoLevels,
    NoValidCutoff,
    OutputUnwritable,
    UnboundedSupportTruncated,
)
from .oracle import exact_donsker_minimal, exhaustive_particle_minimal
from .particle import (
    EXPLICIT_PARTICLE,
    IMPLICIT_PARTICLE,
    NEVER_ABSORBED,
    ParticleConfig,
    ParticleSolution,
    restrict_paths,
    sample_initial,
    solve_explicit,
    solve_implicit,
    take_particles,
)
from .particle import solve as solve_particle

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # core
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
    # drivers
    "BROWNIAN",
    "FRACTIONAL_BROWNIAN",
    "SCALED_WALK",
    "RADEMACHER",
    "STANDARD_NORMAL",
    "DriverSpec",
    "PathMatrix",
    "sample_paths",
    "fbm_covariance",
    "dump_paths",
    "load_paths",
    # donsker
    "IMPLICIT",
    "EXPLICIT",
    "DonskerConfig",
    "DonskerSolution",
    "init_loss",
    "step",
    "solve_donsker",
    # particle
    "EXPLICIT_PARTICLE",
    "IMPLICIT_PARTICLE",
    "NEVER_ABSORBED",
    "ParticleConfig",
    "ParticleSolution",
    "sample_initial",
    "solve_explicit",
    "solve_implicit",
    "solve_particle",
    "restrict_paths",
    "take_particles",
    # oracle
    "exact_donsker_minimal",
    "exhaustive_particle_minimal",
    # analysis
    "Level",
    "RefinementStudy",
    "WeakFeedbackReport",
    "error_estimator",
    "fit_order",
    "detect_jump",
    "jump_refinement_estimators",
    "weak_feedback_check",
    # errors
    "IcefrontError",
    "NoValidCutoff",
    "CovarianceNotPD",
    "InstanceTooLarge",
    "NeedTwoLevels",
    "DegenerateFit",
    "ConfigInvalid",
    "OutputUnwritable",
    "UnboundedSupportTruncated",
]
