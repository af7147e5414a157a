"""Hidden ground truth: radio geometry, activity draws, and source mobility.

Ground-truth objects live only in the orchestration and evaluation layers;
agent-side state sees nothing but observation sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats as sps

from .density import DensityGrid, ObservationSet, grid_points, kl_divergence

MIN_DISTANCE_M = 1.0


def dbm_to_watts(dbm):
    return 10.0 ** (dbm / 10.0) * 1e-3


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class RadioParams:
    """Propagation constants in linear units."""

    noise: float            # receiver noise power, watts
    pathloss_exp: float
    snr_threshold: float    # detection threshold, linear SNR
    slots: int              # observation slots per activity sample

    def __post_init__(self):
        if self.noise <= 0.0 or self.snr_threshold <= 0.0 or self.pathloss_exp <= 0.0:
            raise ValueError("radio parameters must be positive")
        if self.slots < 1:
            raise ValueError("slot count must be >= 1")


@dataclass(frozen=True)
class SourceSpec:
    """A transmitting source: position (m), power (W), duty cycle, speed (m/s)."""

    id: int
    position: tuple[float, float]
    power: float
    duty: float
    speed: float = 0.0

    def __post_init__(self):
        if self.power <= 0.0:
            raise ValueError("source power must be positive")
        if not (0.0 < self.duty <= 1.0):
            raise ValueError("duty cycle must be in (0, 1]")
        if self.speed < 0.0:
            raise ValueError("speed must be nonnegative")


@dataclass(frozen=True)
class NodeSpec:
    """A monitoring node at a fixed position (m)."""

    id: int
    position: tuple[float, float]

    def __post_init__(self):
        if not all(math.isfinite(c) for c in self.position):
            raise ValueError("node position must be finite")


@dataclass(frozen=True)
class GroundTruth:
    """Per (node, source) activity parameters, hidden from agent state."""

    betas: dict[tuple[int, int], tuple[float, float]]
    chi: dict[tuple[int, int], float]


def avg_snr(node, source, radio):
    """Mean received SNR: power * distance^-mu / noise, distance floored at 1 m."""
    dx = node.position[0] - source.position[0]
    dy = node.position[1] - source.position[1]
    d = max(math.hypot(dx, dy), MIN_DISTANCE_M)
    return source.power * d ** (-radio.pathloss_exp) / radio.noise


def activity_visibility(nu, nu0):
    """Fraction of active slots the node can actually see: exp(-nu0 / nu)."""
    if nu <= 0.0 or nu0 <= 0.0:
        raise ValueError("SNR values must be positive")
    return math.exp(-nu0 / nu)


def ground_truth_beta(node, source, radio):
    """Beta parameters of the perceived activity fraction for one node-source pair.

    beta = chi * tau * B + 1 and gamma = (B + 2) - beta; the second form is
    algebraically (1 - tau) B + (1 - chi) tau B + 1 but keeps the identity
    beta + gamma = B + 2 exact in floating point.
    """
    chi = activity_visibility(avg_snr(node, source, radio), radio.snr_threshold)
    beta = chi * source.duty * radio.slots + 1.0
    gamma = (radio.slots + 2.0) - beta
    return beta, gamma


def build_ground_truth(nodes, sources, radio):
    betas = {}
    chi = {}
    for node in nodes:
        for source in sources:
            nu = avg_snr(node, source, radio)
            chi[(node.id, source.id)] = activity_visibility(nu, radio.snr_threshold)
            betas[(node.id, source.id)] = ground_truth_beta(node, source, radio)
    return GroundTruth(betas=betas, chi=chi)


def observations_from_truth(beta, gamma, count, delta, rng):
    """Draw a working set of `count` beta samples plus the delta holdout batch."""
    if count < 2:
        raise ValueError("observation count must be >= 2")
    working = rng.beta(beta, gamma, count)
    holdout = rng.beta(beta, gamma, math.ceil(delta * count))
    return ObservationSet(working=working, holdout=holdout, delta=delta)


def draw_observations(node, source, radio, count, delta, rng):
    """Observe one node-source pair: ground-truth beta draws, working + holdout."""
    beta, gamma = ground_truth_beta(node, source, radio)
    return observations_from_truth(beta, gamma, count, delta, rng)


def _reflect(coord, arena):
    while coord < 0.0 or coord > arena:
        if coord < 0.0:
            coord = -coord
        else:
            coord = 2.0 * arena - coord
    return coord


def step_mobility(sources, dt, rng, arena):
    """Advance each mobile source by speed * dt on a fresh uniform heading.

    Positions reflect off the arena boundary, so they stay inside
    [0, arena] x [0, arena]. Sources with zero speed are returned unchanged.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if arena <= 0.0:
        raise ValueError("arena must be positive")
    moved = []
    for source in sources:
        if source.speed == 0.0:
            moved.append(source)
            continue
        heading = rng.uniform(0.0, 2.0 * math.pi)
        step = source.speed * dt
        x = _reflect(source.position[0] + step * math.cos(heading), arena)
        y = _reflect(source.position[1] + step * math.sin(heading), arena)
        moved.append(replace(source, position=(x, y)))
    return moved


def beta_density_grid(beta, gamma, grid_size):
    """Render Beta(beta, gamma) on the uniform grid, renormalized to unit integral."""
    if beta < 1.0 or gamma < 1.0:
        raise ValueError("beta parameters below 1 put mass spikes at the boundary")
    values = sps.beta.pdf(grid_points(grid_size), beta, gamma)
    return DensityGrid.from_unnormalized(values)


def true_kl(estimate, truth):
    """KL(truth || estimate) with the truth rendered on the estimate's grid."""
    beta, gamma = truth
    truth_grid = beta_density_grid(beta, gamma, estimate.grid_size)
    return kl_divergence(truth_grid, estimate)
