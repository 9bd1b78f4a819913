# test_dod.py

import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from analytic import (
    MonteCarloKernel,
    disc_euclid_density,
    gamma_square,
    j2_functional,
    square_supnorm_law,
    uniform_law,
)
from dod import (
    Calibration,
    DoDResult,
    alternative_variance,
    decide,
    dod_from_distances,
    dod_independent,
    dod_statistic,
    dod_test,
    finite_sample_bound,
    population_dod,
)
from errors import NumericError, ParameterError, SizeError
from spaces import Metric, PointSample, SpaceSpec, child_seed, rigid_motion, sample
from ustat import DistanceSample


def zero_kernel(t, t_prime):
    return np.zeros(np.broadcast(np.asarray(t), np.asarray(t_prime)).shape)


def midpoint_dod(x, y, beta, nodes=2_000_000):
    """Midpoint-rule integral of |U^{-1} - V^{-1}|^2 over [beta, 1 - beta]."""
    a, b = np.sort(pdist(x.points)), np.sort(pdist(y.points))
    width = (1.0 - 2.0 * beta) / nodes
    t = beta + (np.arange(nodes) + 0.5) * width
    qa = a[np.ceil(t * len(a)).astype(np.int64) - 1]
    qb = b[np.ceil(t * len(b)).astype(np.int64) - 1]
    return float(np.sum((qa - qb) ** 2) * width)


@pytest.fixture
def pair(square):
    return sample(square, 60, 1), sample(SpaceSpec.square_cap_disc(0.55), 60, 2)


class TestStatistic:
    def test_same_sample_is_zero(self, square):
        x = sample(square, 40, 3)
        result = dod_statistic(x, x)
        assert result.statistic == 0.0
        assert result.scaled == 0.0

    def test_distance_list_example(self):
        dx = DistanceSample.from_values([1.0, 2.0, 3.0], 3)
        dy = DistanceSample.from_values([1.0, 2.0, 4.0], 3)
        result = dod_from_distances(dx, dy, beta=0.0, p=2)
        assert result.statistic == pytest.approx(1 / 3)
        assert result.scaled == pytest.approx(0.5)

    def test_symmetric(self, pair):
        x, y = pair
        assert dod_statistic(x, y).statistic == pytest.approx(dod_statistic(y, x).statistic, rel=1e-14)

    @pytest.mark.parametrize("reflect", [False, True])
    def test_isometry_invariant(self, pair, reflect):
        x, y = pair
        moved = rigid_motion(x, angle=1.1, translation=[5.0, -2.0], reflect=reflect)
        assert dod_statistic(moved, y).statistic == pytest.approx(dod_statistic(x, y).statistic, rel=1e-10)

    def test_nonincreasing_in_beta(self, pair):
        x, y = pair
        values = [dod_statistic(x, y, beta).statistic for beta in (0.0, 0.01, 0.05, 0.1, 0.25, 0.4)]
        assert all(later <= earlier + 1e-15 for earlier, later in zip(values, values[1:]))

    def test_unequal_sizes(self, square):
        x = sample(square, 30, 1)
        y = sample(square, 45, 2)
        result = dod_statistic(x, y)
        assert (result.n, result.m) == (30, 45)
        assert result.scaled == pytest.approx(30 * 45 / 75 * result.statistic)

    def test_unequal_sizes_match_midpoint_rule(self):
        # midpoint error is at most the cell width times the variation of the integrand, here below 1e-6
        rng = np.random.default_rng(77)
        for _ in range(50):
            n, m = (int(k) for k in rng.choice(np.arange(5, 41), size=2, replace=False))
            beta = float(rng.uniform(0.0, 0.2))
            x = PointSample(rng.uniform(0.0, 0.5, size=(n, 2)))
            y = PointSample(rng.uniform(0.0, 0.5, size=(m, 2)))
            assert dod_statistic(x, y, beta).statistic == pytest.approx(midpoint_dod(x, y, beta), abs=2e-6)

    @pytest.mark.parametrize("kwargs", [{"beta": 0.5}, {"beta": -0.01}, {"p": 0.5}])
    def test_bad_parameters(self, pair, kwargs):
        with pytest.raises(ParameterError):
            dod_statistic(*pair, **kwargs)

    def test_result_record(self):
        record = DoDResult.build(0.1, 0.01, 2, 10, 10).to_dict()
        assert record["scaled"] == pytest.approx(0.5)
        assert set(record) == {"statistic", "scaled", "beta", "p", "n", "m"}


class TestDecision:
    def test_strict_inequality(self):
        assert decide(2.0, 1.5, 0.05, Calibration.BOOTSTRAP).reject
        assert not decide(1.5, 1.5, 0.05, Calibration.BOOTSTRAP).reject

    def test_same_sample_not_rejected(self, square):
        x = sample(square, 30, 4)
        outcome = dod_test(x, x, critical=0.1)
        assert not outcome.reject
        assert outcome.to_dict()["calibration"] == "bootstrap"

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2])
    def test_bad_alpha(self, alpha):
        with pytest.raises(ParameterError):
            decide(1.0, 0.5, alpha, Calibration.LIMIT_MC)

    def test_negative_critical_value(self):
        with pytest.raises(ParameterError):
            decide(1.0, -0.5, 0.05, Calibration.LIMIT_MC)


class TestIndependentDistances:
    def test_effective_sizes(self):
        x = PointSample([[0, 0], [1, 0], [0, 1], [1, 1]])
        y = PointSample([[0, 0], [2, 0], [0, 2], [2, 2], [5, 5]])
        result = dod_independent(x, y, beta=0.0)
        assert (result.n, result.m) == (2, 2)
        assert result.statistic == pytest.approx(1.0)

    def test_same_sample_is_zero(self, square):
        x = sample(square, 50, 6)
        assert dod_independent(x, x).statistic == 0.0

    def test_single_point(self, triangle):
        with pytest.raises(SizeError):
            dod_independent(PointSample([[0.0, 0.0]]), triangle)


class TestAlternativeVariance:
    def test_null_is_zero(self):
        law = square_supnorm_law()
        value = alternative_variance(law.quantile, law.cdf, law.quantile, law.cdf, gamma_square, gamma_square)
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_zero_kernels(self):
        square, disc = square_supnorm_law(), disc_euclid_density()
        value = alternative_variance(square.quantile, square.cdf, disc.quantile, disc.cdf, zero_kernel, zero_kernel)
        assert value == 0.0

    def test_positive_for_different_laws(self):
        square, uniform = square_supnorm_law(), uniform_law()
        value = alternative_variance(square.quantile, square.cdf, uniform.quantile, uniform.cdf,
                                     gamma_square, gamma_square, nodes=32)
        assert value > 0.0

    def test_non_finite_kernel(self):
        square, uniform = square_supnorm_law(), uniform_law()
        with pytest.raises(NumericError):
            alternative_variance(square.quantile, square.cdf, uniform.quantile, uniform.cdf,
                                 lambda t, s: np.full(np.broadcast(t, s).shape, np.nan), gamma_square, nodes=16)

    @pytest.mark.parametrize("kwargs", [{"beta": 0.0}, {"beta": 0.5}, {"lam": 0.0}, {"lam": 1.0}])
    def test_bad_parameters(self, kwargs):
        law = square_supnorm_law()
        with pytest.raises(ParameterError):
            alternative_variance(law.quantile, law.cdf, law.quantile, law.cdf, gamma_square, gamma_square, **kwargs)

    @pytest.mark.slow
    def test_matches_replicated_statistic(self):
        n, reps, beta = 1500, 300, 0.01
        square, disc = square_supnorm_law(), disc_euclid_density()
        disc_spec = SpaceSpec.disc(0.5)
        disc_kernel = MonteCarloKernel.from_space(disc_spec, 2000, 2000, seed=17)
        predicted = alternative_variance(square.quantile, square.cdf, disc.quantile, disc.cdf,
                                         gamma_square, disc_kernel, beta)
        square_spec = SpaceSpec.unit_square(Metric.SUP_NORM)
        values = np.empty(reps)
        for rep in range(reps):
            x = sample(square_spec, n, child_seed(5, rep, 0))
            y = sample(disc_spec, n, child_seed(5, rep, 1))
            values[rep] = dod_statistic(x, y, beta).statistic
        empirical = (n / 2) * np.var(values, ddof=1)
        assert empirical == pytest.approx(predicted, rel=0.3)


class TestPopulation:
    def test_same_law(self):
        law = square_supnorm_law()
        assert population_dod(law.quantile, law.quantile) == 0.0

    @pytest.mark.parametrize("beta, expected", [(0.0, 1 / 3), (0.1, (0.9**3 - 0.1**3) / 3)])
    def test_uniform_scaling(self, beta, expected):
        a, b = uniform_law(0.0, 1.0), uniform_law(0.0, 2.0)
        assert population_dod(a.quantile, b.quantile, beta=beta) == pytest.approx(expected, rel=1e-10)

    def test_sample_statistic_approaches_population(self):
        # uniform points on a segment of length L have distance quantile L (1 - sqrt(1 - t))
        target = population_dod(lambda t: 1 - np.sqrt(1 - t), lambda t: 2 * (1 - np.sqrt(1 - t)), beta=0.05)
        grid = (np.arange(1000) + 0.5) / 1000
        short = PointSample(np.column_stack([grid, np.zeros(1000)]))
        long = PointSample(np.column_stack([2 * grid, np.zeros(1000)]))
        assert dod_statistic(short, long, beta=0.05).statistic == pytest.approx(target, rel=0.02)


class TestFiniteSampleBound:
    def test_formula(self):
        assert finite_sample_bound(50, 50, 5 / 48) == pytest.approx(16 / 51 * 5 / 48)

    def test_square_law_value(self):
        bound = finite_sample_bound(50, 50, j2_functional(square_supnorm_law()))
        assert bound == pytest.approx(16 / 51 * 5 / 48, rel=1e-6)

    def test_too_small(self):
        with pytest.raises(SizeError):
            finite_sample_bound(2, 10, 0.1)

    def test_null_expectation_below_bound(self, square_sup):
        n, reps = 50, 2000
        bound = finite_sample_bound(n, n, j2_functional(square_supnorm_law()))
        values = np.empty(reps)
        for rep in range(reps):
            x = sample(square_sup, n, child_seed(11, rep, 0))
            y = sample(square_sup, n, child_seed(11, rep, 1))
            values[rep] = dod_statistic(x, y, beta=0.0).statistic
        stderr = values.std(ddof=1) / math.sqrt(reps)
        assert values.mean() <= bound + 3 * stderr
