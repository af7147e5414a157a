"""Two-sample Kolmogorov-Smirnov test with the asymptotic acceptance rule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_KS_SAMPLES = 5


@dataclass(frozen=True)
class KsResult:
    """Outcome of one two-sample test."""

    statistic: float
    scaled: float
    critical: float
    accepted: bool

    def __post_init__(self):
        if not (0.0 <= self.statistic <= 1.0):
            raise ValueError("KS statistic must lie in [0, 1]")
        if self.accepted != (self.scaled <= self.critical):
            raise ValueError("accepted flag inconsistent with scaled vs critical")


def ks_statistic(a, b):
    """sup |F_a - F_b| over the merged jump points of the two empirical CDFs.

    Both ECDFs are right-continuous, F(x) = #(samples <= x) / n, so the
    supremum of the step-function difference is attained at a jump point.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    points = np.concatenate([a, b])
    fa = np.searchsorted(a, points, side="right") / a.size
    fb = np.searchsorted(b, points, side="right") / b.size
    return float(np.abs(fa - fb).max())


def ks_critical(eta):
    """Critical value sqrt(-ln(eta/2) / 2) for significance level eta."""
    if not (0.0 < eta < 1.0):
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    return math.sqrt(-math.log(eta / 2.0) / 2.0)


def ks_two_sample_test(a, b, eta):
    """Run the scaled two-sample KS test at level eta.

    The statistic is scaled by sqrt(h1 h2 / (h1 + h2)) for sample sizes h1,
    h2 and compared against ks_critical(eta); the hypothesis that both
    samples share one distribution is accepted when scaled <= critical.
    Requires at least 5 samples per side.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < MIN_KS_SAMPLES or b.size < MIN_KS_SAMPLES:
        raise ValueError("insufficient samples for KS")
    d = ks_statistic(a, b)
    scale = math.sqrt(a.size * b.size / (a.size + b.size))
    scaled = scale * d
    critical = ks_critical(eta)
    return KsResult(statistic=d, scaled=scaled, critical=critical, accepted=scaled <= critical)
