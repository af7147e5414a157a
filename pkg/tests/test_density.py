import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coact.density import (
    DensityGrid,
    ObservationSet,
    PointMassMeasure,
    empirical_predictive,
    grid_points,
    kde_estimate,
    kl_divergence,
    mix,
    sample_density,
)
from oracles import beta_grid, grid_cdf, kl_beta_beta, kl_beta_vs_uniform


def uniform_grid(size=512):
    return DensityGrid(np.ones(size))


class TestDensityGrid:
    def test_uniform_is_valid(self):
        d = uniform_grid()
        assert d.grid_size == 512
        assert d.integral() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_integral(self):
        with pytest.raises(ValueError, match="integrate"):
            DensityGrid(np.full(512, 2.0))

    def test_rejects_negative_values(self):
        values = np.ones(512)
        values[10] = -0.5
        with pytest.raises(ValueError, match="nonnegative"):
            DensityGrid(values)

    def test_rejects_small_grid(self):
        with pytest.raises(ValueError, match="grid size"):
            DensityGrid(np.ones(32))

    def test_values_frozen(self):
        d = uniform_grid()
        with pytest.raises(ValueError):
            d.values[0] = 5.0

    def test_from_unnormalized(self):
        d = DensityGrid.from_unnormalized(np.linspace(0.5, 2.0, 128))
        assert d.integral() == pytest.approx(1.0, abs=1e-12)
        with pytest.raises(ValueError, match="integral"):
            DensityGrid.from_unnormalized(np.zeros(128))


class TestKde:
    def test_matches_analytic_beta(self):
        # oracle: analytic Beta(2,2) rendered on the same grid
        truth = beta_grid(2.0, 2.0)
        rng = np.random.default_rng(42)
        est = kde_estimate(rng.beta(2.0, 2.0, 1000))
        assert kl_divergence(est, truth) < 0.05

    def test_unit_integral_and_nonnegative(self):
        rng = np.random.default_rng(0)
        est = kde_estimate(rng.beta(4.71, 7.29, 17))
        assert abs(est.integral() - 1.0) < 1e-9
        assert est.values.min() >= 0.0

    def test_permutation_bit_identical(self):
        rng = np.random.default_rng(5)
        samples = rng.beta(3.0, 5.0, 40)
        est_a = kde_estimate(samples)
        est_b = kde_estimate(samples[::-1].copy())
        est_c = kde_estimate(rng.permutation(samples))
        assert np.array_equal(est_a.values, est_b.values)
        assert np.array_equal(est_a.values, est_c.values)

    def test_degenerate_samples_use_bandwidth_floor(self):
        est = kde_estimate([0.5] * 5)
        assert abs(est.integral() - 1.0) < 1e-9
        # floor bandwidth 0.01 concentrates nearly all mass within a few
        # hundredths of the atom
        xs = est.points
        window = (xs > 0.45) & (xs < 0.55)
        mass_near = np.trapezoid(est.values[window], xs[window])
        assert mass_near > 0.99

    def test_boundary_reflection_keeps_mass_at_edges(self):
        est = kde_estimate([0.0, 0.0, 0.001, 0.002])
        cdf = grid_cdf(est)
        xs = grid_points(est.grid_size)
        assert cdf[np.searchsorted(xs, 0.05)] > 0.9

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError, match="two samples"):
            kde_estimate([0.3])
        with pytest.raises(ValueError, match="within"):
            kde_estimate([0.2, 1.4])
        with pytest.raises(ValueError, match="grid size"):
            kde_estimate([0.2, 0.4], grid_size=16)


class TestMix:
    def test_single_component_identity_is_exact(self):
        p = beta_grid(4.6, 7.4)
        m = mix([p], [1.0])
        assert np.array_equal(m.values, p.values)

    def test_two_component_formula(self):
        a, b = uniform_grid(), beta_grid(2.0, 2.0)
        m = mix([a, b], [0.25, 0.75])
        assert np.array_equal(m.values, 0.25 * a.values + 0.75 * b.values)

    def test_weight_validation(self):
        a, b = uniform_grid(), beta_grid(2.0, 2.0)
        with pytest.raises(ValueError, match="sum to 1"):
            mix([a, b], [0.5, 0.6])
        with pytest.raises(ValueError, match="nonnegative"):
            mix([a, b], [1.5, -0.5])
        with pytest.raises(ValueError, match="counts differ"):
            mix([a, b], [1.0])
        with pytest.raises(ValueError, match="at least one"):
            mix([], [])

    def test_grid_mismatch(self):
        with pytest.raises(ValueError, match="grid size"):
            mix([uniform_grid(512), uniform_grid(256)], [0.5, 0.5])

    @given(st.integers(0, 2**31 - 1), st.floats(0.01, 0.99))
    @settings(max_examples=30, deadline=None)
    def test_pairwise_mix_stays_a_density(self, seed, w):
        rng = np.random.default_rng(seed)
        a = DensityGrid.from_unnormalized(rng.random(64) + 1e-3)
        b = DensityGrid.from_unnormalized(rng.random(64) + 1e-3)
        m = mix([a, b], [w, 1.0 - w])
        assert abs(m.integral() - 1.0) < 1e-9
        assert m.values.min() >= 0.0


class TestSampleDensity:
    def test_deterministic_given_seed(self):
        d = beta_grid(4.71, 7.29)
        a = sample_density(d, 100, np.random.default_rng(9))
        b = sample_density(d, 100, np.random.default_rng(9))
        assert np.array_equal(a, b)

    def test_large_sample_matches_grid_cdf(self):
        # oracle: the trapezoidal CDF of the grid itself; Glivenko-Cantelli
        # at n = 1e5 leaves ~0.004 expected sup distance, budget 0.01
        d = beta_grid(4.71, 7.29)
        draws = sample_density(d, 100_000, np.random.default_rng(3))
        assert draws.min() >= 0.0 and draws.max() <= 1.0
        ecdf = np.searchsorted(np.sort(draws), grid_points(d.grid_size), side="right")
        ecdf = ecdf / draws.size
        assert np.abs(ecdf - grid_cdf(d)).max() < 0.01

    def test_rejects_nonpositive_count(self):
        with pytest.raises(ValueError, match=">= 1"):
            sample_density(uniform_grid(), 0, np.random.default_rng(0))


class TestKl:
    def test_identical_densities_exactly_zero(self):
        p = beta_grid(3.72, 8.28)
        assert kl_divergence(p, p) == 0.0

    def test_beta22_vs_uniform_matches_analytic(self):
        # digamma identity: KL(Beta(2,2) || U) = 2*(psi(2)-psi(4)) - ln B(2,2)
        analytic = kl_beta_vs_uniform(2.0, 2.0)
        assert analytic == pytest.approx(0.1251, abs=1e-4)
        grid_value = kl_divergence(beta_grid(2.0, 2.0), uniform_grid())
        assert grid_value == pytest.approx(analytic, abs=2e-3)

    def test_asymmetry_matches_closed_form(self):
        p, q = beta_grid(2.0, 2.0), beta_grid(5.0, 2.0)
        forward = kl_divergence(p, q)
        reverse = kl_divergence(q, p)
        assert forward == pytest.approx(kl_beta_beta(2.0, 2.0, 5.0, 2.0), rel=1e-3)
        assert reverse == pytest.approx(kl_beta_beta(5.0, 2.0, 2.0, 2.0), rel=1e-3)
        assert abs(forward - reverse) > 0.1

    def test_never_negative_near_identical(self):
        p = beta_grid(4.0, 4.0)
        nudged = DensityGrid.from_unnormalized(p.values + 1e-9)
        assert kl_divergence(p, nudged) >= 0.0

    def test_grid_mismatch(self):
        with pytest.raises(ValueError, match="grid size"):
            kl_divergence(uniform_grid(512), uniform_grid(128))


class TestObservations:
    def test_holdout_length_contract(self):
        rng = np.random.default_rng(1)
        obs = ObservationSet(working=rng.random(10), holdout=rng.random(5), delta=0.5)
        assert obs.count == 10
        assert obs.combined().size == 15
        with pytest.raises(ValueError, match="ceil"):
            ObservationSet(working=rng.random(10), holdout=rng.random(4), delta=0.5)

    def test_rejects_single_observation(self):
        with pytest.raises(ValueError, match="two working"):
            ObservationSet(working=np.array([0.5]), holdout=np.array([0.5]), delta=1.0)

    def test_rejects_bad_delta(self):
        rng = np.random.default_rng(2)
        for delta in (0.0, -0.2, 1.5):
            with pytest.raises(ValueError, match="delta"):
                ObservationSet(working=rng.random(4), holdout=rng.random(2), delta=delta)

    def test_rejects_out_of_range_values(self):
        with pytest.raises(ValueError, match="within"):
            ObservationSet(working=np.array([0.2, 1.2]), holdout=np.array([0.5]), delta=0.5)

    def test_empirical_predictive_atoms(self):
        rng = np.random.default_rng(3)
        obs = ObservationSet(working=rng.random(8), holdout=rng.random(4), delta=0.5)
        measure = empirical_predictive(obs)
        assert np.array_equal(measure.locations, obs.working)
        assert np.allclose(measure.weights, 1.0 / 8.0)
        assert math.fsum(measure.weights.tolist()) == pytest.approx(1.0, abs=1e-12)

    def test_empirical_predictive_empty_errors(self):
        stub = SimpleNamespace(working=np.array([]))
        with pytest.raises(ValueError, match="no observations"):
            empirical_predictive(stub)

    def test_point_mass_weight_validation(self):
        with pytest.raises(ValueError, match="sum to 1"):
            PointMassMeasure(np.array([0.2, 0.8]), np.array([0.6, 0.6]))
        with pytest.raises(ValueError, match="nonnegative"):
            PointMassMeasure(np.array([0.2, 0.8]), np.array([1.5, -0.5]))
