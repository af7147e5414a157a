"""Validation and fusion of density estimates shared between nodes.

A node fuses its own kernel estimate with the estimates offered by coalition
partners, but only after each offered prior passes a two-sample KS check
against fresh draws from the node's own estimate. Fusion weights are
proportional to observation counts, renormalized over the node plus the
validated subset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .density import DensityGrid, mix, sample_density
from .stats import ks_two_sample_test


@dataclass(frozen=True, eq=False)
class PriorBundle:
    """A density estimate offered by one node, tagged with its evidence count."""

    source_node: int
    source_count: int
    density: DensityGrid

    def __post_init__(self):
        if self.source_count < 2:
            raise ValueError("prior must carry at least two observations")


@dataclass(frozen=True)
class FusionWeights:
    """Convex weights for the node's own estimate and each partner's prior."""

    own: float
    partners: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        weights = [self.own, *self.partners.values()]
        if any(w < 0.0 for w in weights):
            raise ValueError("fusion weights must be nonnegative")
        if abs(math.fsum(weights) - 1.0) > 1e-9:
            raise ValueError("fusion weights must sum to 1")


def validate_priors(own_density, priors, eta, n_check, rng):
    """Keep the priors statistically indistinguishable from the node's own view.

    For each offered prior, n_check fresh draws from own_density are tested
    against n_check draws from the prior's density with the two-sample KS
    test at level eta; accepted priors are returned in their input order.
    Deterministic given the generator state and the prior ordering.
    """
    if n_check < 5:
        raise ValueError("n_check must be >= 5 for the KS test")
    accepted = []
    for prior in priors:
        own_draws = sample_density(own_density, n_check, rng)
        prior_draws = sample_density(prior.density, n_check, rng)
        if ks_two_sample_test(own_draws, prior_draws, eta).accepted:
            accepted.append(prior)
    return accepted


def fusion_weights(own_count, validated):
    """Observation-count weights over the node plus its validated partners.

    Parameters
    ----------
    own_count : int
        The node's own working-observation count (>= 2).
    validated : sequence of (node_id, count)
        Counts for each validated partner.

    Returns
    -------
    FusionWeights with own = own_count / total and one entry per partner.
    """
    if own_count < 2:
        raise ValueError("own observation count must be >= 2")
    counts = {int(nid): int(c) for nid, c in validated}
    if len(counts) != len(list(validated)):
        raise ValueError("duplicate partner ids in validated set")
    if any(c < 2 for c in counts.values()):
        raise ValueError("partner observation counts must be >= 2")
    total = own_count + sum(counts.values())
    return FusionWeights(
        own=own_count / total,
        partners={nid: c / total for nid, c in counts.items()},
    )


def dp_posterior(own_density, validated_priors, weights):
    """Fused posterior: the weighted mixture of own estimate and validated priors.

    With no priors this reproduces own_density exactly.
    """
    prior_ids = [p.source_node for p in validated_priors]
    if len(set(prior_ids)) != len(prior_ids):
        raise ValueError("duplicate prior node ids")
    if set(prior_ids) != set(weights.partners):
        raise ValueError("weight keys do not match validated prior ids")
    components = [own_density] + [p.density for p in validated_priors]
    ws = [weights.own] + [weights.partners[p.source_node] for p in validated_priors]
    return mix(components, ws)
