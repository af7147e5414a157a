"""Densities on the unit interval.

Everything downstream (prior validation, fusion, utilities, evaluation) speaks
one representation: a nonnegative density sampled on a uniform grid over
[0, 1], normalized to unit trapezoidal integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_GRID_SIZE = 512
MIN_GRID_SIZE = 64
INTEGRAL_TOL = 1e-6
KL_FLOOR = 1e-12
BANDWIDTH_FLOOR = 0.01


def grid_points(grid_size):
    """Grid locations: `grid_size` evenly spaced points spanning [0, 1]."""
    return np.linspace(0.0, 1.0, grid_size)


def _trapz(values):
    # uniform spacing 1/(G-1); explicit form keeps the sum order canonical
    step = 1.0 / (values.size - 1)
    return step * (values.sum() - 0.5 * (values[0] + values[-1]))


def _as_unit_array(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name} must lie within [0, 1]")
    return arr


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """A probability density sampled at uniformly spaced points on [0, 1].

    Values are nonnegative and integrate to one (trapezoid rule) within
    1e-6. The array is frozen after validation.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("density values must be one-dimensional")
        if values.size < MIN_GRID_SIZE:
            raise ValueError(f"grid size must be >= {MIN_GRID_SIZE}, got {values.size}")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise ValueError("density values must be finite and nonnegative")
        total = _trapz(values)
        if abs(total - 1.0) > INTEGRAL_TOL:
            raise ValueError(f"density must integrate to 1, got {total!r}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_unnormalized(cls, values):
        """Normalize raw nonnegative values into a valid DensityGrid."""
        arr = np.asarray(values, dtype=float)
        total = _trapz(arr)
        if not np.isfinite(total) or total <= 0.0:
            raise ValueError("cannot normalize: nonpositive integral")
        return cls(arr / total)

    @property
    def grid_size(self):
        return self.values.size

    @property
    def points(self):
        return grid_points(self.values.size)

    def integral(self):
        return float(_trapz(self.values))


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Working observations plus the extra holdout batch for one node-source pair.

    The holdout holds ceil(delta * len(working)) further draws from the same
    ground truth, reserved for the utility's look-ahead estimate.
    """

    working: np.ndarray
    holdout: np.ndarray
    delta: float

    def __post_init__(self):
        working = _as_unit_array(self.working, "working observations")
        holdout = _as_unit_array(self.holdout, "holdout observations")
        if working.size < 2:
            raise ValueError("need at least two working observations")
        if not (0.0 < self.delta <= 1.0):
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        expected = math.ceil(self.delta * working.size)
        if holdout.size != expected:
            raise ValueError(
                f"holdout length must be ceil(delta * L) = {expected}, got {holdout.size}"
            )
        working.flags.writeable = False
        holdout.flags.writeable = False
        object.__setattr__(self, "working", working)
        object.__setattr__(self, "holdout", holdout)

    @property
    def count(self):
        return self.working.size

    def combined(self):
        """Working and holdout observations concatenated."""
        return np.concatenate([self.working, self.holdout])


@dataclass(frozen=True, eq=False)
class PointMassMeasure:
    """A discrete measure on [0, 1]: atom locations with weights summing to one."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        locations = _as_unit_array(self.locations, "atom locations")
        weights = np.array(self.weights, dtype=float)
        if weights.shape != locations.shape:
            raise ValueError("locations and weights must have matching shape")
        if locations.size == 0:
            raise ValueError("measure needs at least one atom")
        if np.any(weights < 0.0):
            raise ValueError("atom weights must be nonnegative")
        if abs(math.fsum(weights.tolist()) - 1.0) > 1e-12:
            raise ValueError("atom weights must sum to 1")
        locations.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "weights", weights)


def empirical_predictive(obs):
    """Equal-weight point masses at the working observations.

    Parameters
    ----------
    obs : ObservationSet

    Returns
    -------
    PointMassMeasure with one atom of weight 1/L per working observation.
    """
    working = np.asarray(obs.working, dtype=float)
    if working.size == 0:
        raise ValueError("no observations")
    weights = np.full(working.size, 1.0 / working.size)
    return PointMassMeasure(working.copy(), weights)


def kde_estimate(samples, grid_size=DEFAULT_GRID_SIZE):
    """Gaussian kernel density estimate on [0, 1] with boundary reflection.

    The bandwidth follows 0.9 * min(sd, IQR/1.34) * n**(-1/5), floored at
    0.01 so degenerate samples still produce a proper density. Mass leaking
    past either endpoint is folded back by reflecting every sample at 0 and
    at 1, and the grid values are renormalized to unit integral.

    Parameters
    ----------
    samples : array_like
        At least two observations inside [0, 1].
    grid_size : int
        Number of uniform grid points (>= 64).

    Returns
    -------
    DensityGrid
    """
    samples = _as_unit_array(samples, "samples")
    if samples.size < 2:
        raise ValueError("need at least two samples for a kernel estimate")
    # canonical order makes the estimate bit-identical under input permutation
    samples = np.sort(samples)
    n = samples.size
    sd = float(samples.std(ddof=1))
    q75, q25 = np.percentile(samples, [75.0, 25.0])
    iqr = float(q75 - q25)
    h = 0.9 * min(sd, iqr / 1.34) * n ** (-0.2)
    h = max(h, BANDWIDTH_FLOOR)

    xs = grid_points(grid_size)[:, None]
    direct = xs - samples[None, :]
    low_mirror = xs + samples[None, :]          # reflection of samples at 0
    high_mirror = xs - (2.0 - samples[None, :])  # reflection of samples at 1
    norm = 1.0 / (h * math.sqrt(2.0 * math.pi))
    kernel = sum(
        np.exp(-0.5 * (z / h) ** 2) for z in (direct, low_mirror, high_mirror)
    )
    values = norm * kernel.sum(axis=1) / n
    return DensityGrid.from_unnormalized(values)


def mix(components, weights):
    """Pointwise convex combination of densities on a shared grid.

    Weights must be nonnegative and sum to one within 1e-9. A single
    component with weight 1.0 is returned unchanged.
    """
    components = list(components)
    weights = [float(w) for w in weights]
    if not components:
        raise ValueError("mix needs at least one component")
    if len(components) != len(weights):
        raise ValueError("component and weight counts differ")
    size = components[0].grid_size
    if any(c.grid_size != size for c in components):
        raise ValueError("all components must share one grid size")
    if any(w < 0.0 for w in weights):
        raise ValueError("mixture weights must be nonnegative")
    if abs(math.fsum(weights) - 1.0) > 1e-9:
        raise ValueError("mixture weights must sum to 1")
    out = weights[0] * components[0].values
    for comp, w in zip(components[1:], weights[1:]):
        out = out + w * comp.values
    return DensityGrid(out)


def sample_density(density, n, rng):
    """Draw n values from a DensityGrid by inverting its trapezoidal CDF."""
    if n < 1:
        raise ValueError("sample count must be >= 1")
    values = density.values
    xs = grid_points(values.size)
    step = 1.0 / (values.size - 1)
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * step * (values[1:] + values[:-1]))))
    cdf /= cdf[-1]
    u = rng.random(n)
    return np.interp(u, cdf, xs)


def kl_divergence(p, q):
    """KL(p || q) in nats by trapezoidal quadrature.

    Both densities are floored at 1e-12 before the log and the result is
    clamped at zero, so identical inputs give exactly 0 and near-identical
    inputs never go negative through quadrature noise.
    """
    if p.grid_size != q.grid_size:
        raise ValueError("densities must share one grid size")
    pf = np.maximum(p.values, KL_FLOOR)
    qf = np.maximum(q.values, KL_FLOOR)
    integrand = pf * np.log(pf / qf)
    return max(0.0, float(_trapz(integrand)))
