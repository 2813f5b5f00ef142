"""Driver-path generation for the particle schemes.

Three driver kinds share one sampling pipeline: standard Brownian motion,
fractional Brownian motion (exact in law through a dense factorization of
its covariance matrix), and scaled random walks ``sqrt(h) * sum(Y_k)`` with
mean-0, variance-1 increments. Every particle owns a counter-based RNG
stream keyed by ``(seed, particle index)``, so path ``m`` does not depend
on how many other paths are drawn and regeneration is bitwise reproducible.

Gaussians come from the inverse normal cdf applied to 53-bit uniforms in
the open unit interval; the monotone transform keeps a fixed seed
comparable across refinement levels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

from .core import GridSpec
from .errors import CovarianceNotPD

__all__ = [
    "BROWNIAN",
    "FRACTIONAL_BROWNIAN",
    "SCALED_WALK",
    "RADEMACHER",
    "STANDARD_NORMAL",
    "DriverSpec",
    "PathMatrix",
    "sample_paths",
    "fbm_covariance",
    "uniform_stream",
    "dump_paths",
    "load_paths",
]

BROWNIAN = "brownian"
FRACTIONAL_BROWNIAN = "fractional_brownian"
SCALED_WALK = "scaled_walk"

RADEMACHER = "rademacher"
STANDARD_NORMAL = "standard_normal"

_SEED_LIMIT = 2**64
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53
_CHUNK = 8192

# Sub-stream layout under one seed: word 1 is reserved for initial
# positions, word 2m+2 is particle m's path. Even/odd never collide.
X0_STREAM = 1


@dataclass(frozen=True)
class DriverSpec:
    """Which driver process to sample and from which seed.

    ``hurst`` is required for (and only for) the fractional kind and must
    lie strictly inside (0, 1); ``increment_law`` likewise belongs to the
    scaled-walk kind alone. Both admissible increment laws have mean 0 and
    variance 1, which the Donsker embedding requires.
    """

    kind: str
    seed: int = 0
    hurst: float | None = None
    increment_law: str | None = None

    def __post_init__(self):
        if self.kind not in (BROWNIAN, FRACTIONAL_BROWNIAN, SCALED_WALK):
            raise ValueError(f"unknown driver kind {self.kind!r}")
        if not 0 <= int(self.seed) < _SEED_LIMIT:
            raise ValueError("seed must fit in an unsigned 64-bit word")
        if self.kind == FRACTIONAL_BROWNIAN:
            if self.hurst is None or not 0.0 < self.hurst < 1.0:
                raise ValueError("hurst must lie strictly inside (0, 1)")
        elif self.hurst is not None:
            raise ValueError("hurst applies only to the fractional kind")
        if self.kind == SCALED_WALK:
            if self.increment_law not in (RADEMACHER, STANDARD_NORMAL):
                raise ValueError(
                    f"increment_law must be {RADEMACHER!r} or {STANDARD_NORMAL!r}"
                )
        elif self.increment_law is not None:
            raise ValueError("increment_law applies only to the scaled walk")


@dataclass(frozen=True)
class PathMatrix:
    """Driver values on the grid: row m is particle m, column k is t_k."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError("values must be a nonempty 2-d array")
        if not np.all(np.isfinite(vals)):
            raise ValueError("path values must be finite")
        if np.any(vals[:, 0] != 0.0):
            raise ValueError("every path must start at 0")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def steps(self) -> int:
        return self.values.shape[1] - 1


def uniform_stream(seed: int, stream: int, draws: int) -> np.ndarray:
    """``draws`` uniforms in the open (0, 1) from sub-stream ``stream``.

    Raw 64-bit counter-based words are cut to 53 bits and centered, so the
    result never touches 0 or 1 and survives the inverse normal cdf.
    """
    key = np.array([seed, stream], dtype=np.uint64)
    raw = Philox(key=key).random_raw(draws)
    return ((raw >> np.uint64(11)) + 0.5) * _INV_2_53


def _uniform_block(seed: int, first: int, count: int, draws: int) -> np.ndarray:
    out = np.empty((count, draws))
    for j in range(count):
        out[j] = uniform_stream(seed, 2 * (first + j) + 2, draws)
    return out


def fbm_covariance(grid: GridSpec, hurst: float) -> np.ndarray:
    """Fractional Brownian covariance over the strictly positive grid times.

    Entry (a, b) is ``(t_a^{2H} + t_b^{2H} - |t_a - t_b|^{2H}) / 2`` for
    ``t_a, t_b`` in ``{t_1, ..., t_N}``. The time-zero row and column are
    excluded: they vanish identically and would make the matrix singular.
    """
    t = grid.times()[1:]
    two_h = 2.0 * hurst
    gap = np.abs(t[:, None] - t[None, :])
    return 0.5 * (t[:, None] ** two_h + t[None, :] ** two_h - gap**two_h)


def sample_paths(spec: DriverSpec, grid: GridSpec, n: int) -> PathMatrix:
    """Sample ``n`` independent driver paths at the grid times.

    Bitwise reproducible for fixed ``(spec, grid, n)``; Brownian and
    scaled-walk rows additionally do not depend on ``n`` at all. Particles
    are processed in fixed-size chunks purely to bound the working set.

    Raises
    ------
    CovarianceNotPD
        When the fractional covariance factorization fails, which signals a
        Hurst/grid combination too degenerate for double precision.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    n_steps = grid.steps
    values = np.zeros((n, n_steps + 1))

    if spec.kind == FRACTIONAL_BROWNIAN:
        cov = fbm_covariance(grid, spec.hurst)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise CovarianceNotPD(
                f"hurst={spec.hurst} over {n_steps} steps: {exc}"
            ) from exc
        for lo in range(0, n, _CHUNK):
            hi = min(lo + _CHUNK, n)
            gauss = ndtri(_uniform_block(spec.seed, lo, hi - lo, n_steps))
            values[lo:hi, 1:] = gauss @ chol.T
        return PathMatrix(values=values)

    pitch = grid.pitch
    rademacher = spec.kind == SCALED_WALK and spec.increment_law == RADEMACHER
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        u = _uniform_block(spec.seed, lo, hi - lo, n_steps)
        if rademacher:
            increments = np.where(u < 0.5, -1.0, 1.0)
        else:
            # Brownian and the normal-increment walk coincide on the grid
            increments = ndtri(u)
        np.cumsum(increments, axis=1, out=increments)
        values[lo:hi, 1:] = increments * pitch
    return PathMatrix(values=values)


def dump_paths(paths: PathMatrix, path) -> None:
    """Write a replayable binary dump of the matrix.

    Layout: 16-byte header holding (n, N) as little-endian unsigned 64-bit
    words, then the values row-major as little-endian float64, time-zero
    column included.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "wb") as fh:
        fh.write(struct.pack("<QQ", paths.n, paths.steps))
        fh.write(np.ascontiguousarray(paths.values, dtype="<f8").tobytes())


def load_paths(path) -> PathMatrix:
    """Read a dump written by :func:`dump_paths`."""
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise ValueError("path dump shorter than its header")
    n, n_steps = struct.unpack_from("<QQ", raw)
    expected = 16 + 8 * n * (n_steps + 1)
    if len(raw) != expected:
        raise ValueError(f"path dump holds {len(raw)} bytes, expected {expected}")
    flat = np.frombuffer(raw, dtype="<f8", offset=16)
    values = flat.reshape(n, n_steps + 1).astype(np.float64)
    return PathMatrix(values=values)
