"""Cooperative estimation of channel-activity distributions.

Monitoring nodes estimate, per transmitting source, the distribution of the
fraction of time the source is perceived active. Nodes form coalitions under
a hedonic join rule, validate each other's kernel estimates with a two-sample
KS test, and fuse the survivors into count-weighted posterior mixtures.
"""

from .bayes import FusionWeights, PriorBundle, dp_posterior, fusion_weights, validate_priors
from .density import (
    DensityGrid,
    ObservationSet,
    PointMassMeasure,
    empirical_predictive,
    kde_estimate,
    kl_divergence,
    mix,
    sample_density,
)
from .game import (
    Coalition,
    FormationResult,
    GameParams,
    InvariantViolation,
    NetworkState,
    Partition,
    PayoffRecord,
    coalition_cost,
    is_nash_stable,
    node_payoff,
    preference_value,
    prefers_join,
    run_formation,
    singleton_partition,
    social_welfare,
    source_utility,
)
from .harness import (
    ConfigError,
    MetricsIOError,
    MobilityConfig,
    RadioConfig,
    RunMetrics,
    RunRecord,
    ScenarioConfig,
    SweepResult,
    aggregate_records,
    emit_metrics,
    form_partition,
    read_metrics,
    run_scenario,
    simulate_scenario,
    sweep,
)
from .stats import KsResult, ks_critical, ks_statistic, ks_two_sample_test
from .world import (
    GroundTruth,
    NodeSpec,
    RadioParams,
    SourceSpec,
    activity_visibility,
    avg_snr,
    beta_density_grid,
    build_ground_truth,
    draw_observations,
    ground_truth_beta,
    observations_from_truth,
    step_mobility,
    true_kl,
)

__version__ = "0.1.0"
