# bootstrap.py

import logging
from dataclasses import asdict, dataclass, replace
from enum import Enum

import numpy as np

from dod import DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_P, Calibration, check_alpha, decide, dod_independent, dod_statistic
from errors import ParameterError, SizeError
from spaces import PointSample, child_rng
from ustat import StepQuantile, independent_distances, kantorovich_1d, pairwise

logger = logging.getLogger(__name__)

DEFAULT_BOOTSTRAP_REPS = 200
POWER_RULE_EXPONENT = 0.9


class ResampleRule(str, Enum):
    N_OUT_OF_N = "n"
    POWER = "power"


class CalibrationSample(str, Enum):
    FROM_X = "from-x"
    FROM_Y = "from-y"


def resample_size(n, rule=ResampleRule.N_OUT_OF_N):
    """Bootstrap sample size: n itself, or floor(n^0.9) so that sqrt(n_B) = o(n)."""
    rule = ResampleRule(rule)
    if rule is ResampleRule.N_OUT_OF_N:
        return int(n)
    return max(2, int(np.floor(n**POWER_RULE_EXPONENT)))


@dataclass(frozen=True)
class BootstrapConfig:
    n_b: int
    replications: int = DEFAULT_BOOTSTRAP_REPS
    beta: float = DEFAULT_BETA
    seed: int = 0
    allow_untrimmed: bool = False
    p: float = DEFAULT_P

    def __post_init__(self):
        if self.n_b < 2:
            raise ParameterError(f"n_b must be >= 2, got {self.n_b}")
        if self.replications < 1:
            raise ParameterError(f"replications must be >= 1, got {self.replications}")
        if self.p < 1:
            raise ParameterError(f"p must be >= 1, got {self.p}")
        # consistency of the bootstrap is only established for trimmed statistics
        if self.allow_untrimmed and self.beta == 0.0:
            logger.warning("Bootstrap at beta = 0 requested explicitly; calibration is heuristic")
        elif not 0.0 < self.beta < 0.5:
            raise ParameterError(f"Bootstrap needs beta in (0, 1/2), got {self.beta}")

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["n_b"]), int(data.get("replications", DEFAULT_BOOTSTRAP_REPS)),
                   float(data.get("beta", DEFAULT_BETA)), int(data.get("seed", 0)),
                   bool(data.get("allow_untrimmed", False)), float(data.get("p", DEFAULT_P)))


def xi_star(x, cfg, rep_index, original=None, indices=None):
    """One bootstrap draw n_B^{p/2} * integral of |(U*_{n_B})^{-1} - U_n^{-1}|^p over [beta, 1 - beta].

    The resample is drawn with replacement from the stream (cfg.seed,
    rep_index); ``indices`` overrides it with an explicit resample.
    """
    if x.n < 3:
        raise SizeError(f"Bootstrap needs at least 3 points, got {x.n}")
    if original is None:
        original = pairwise(x)
    if indices is None:
        indices = child_rng(cfg.seed, rep_index).integers(0, x.n, size=cfg.n_b)
    resample = PointSample(x.points[np.asarray(indices)], x.metric)
    star = pairwise(resample)
    return resample.n ** (cfg.p / 2.0) * kantorovich_1d(star, original, p=cfg.p, beta=cfg.beta)


def xi_star_independent(x, cfg, rep_index, original=None):
    """Bootstrap draw for the independent-distances statistic.

    Resamples the n//2 independent distances themselves (k_B = n_B // 2 of
    them) and returns k_B^{p/2} * integral of |(F*)^{-1} - F^{-1}|^p.
    """
    if original is None:
        original = independent_distances(x)
    size = max(1, cfg.n_b // 2)
    picks = child_rng(cfg.seed, rep_index).integers(0, len(original), size=size)
    star = StepQuantile.from_unsorted(original.values[picks])
    return size ** (cfg.p / 2.0) * kantorovich_1d(star, original, p=cfg.p, beta=cfg.beta)


def bootstrap_draws(x, cfg, independent=False):
    """The R bootstrap draws, sorted ascending."""
    if independent:
        original = independent_distances(x)
        draws = [xi_star_independent(x, cfg, rep, original) for rep in range(cfg.replications)]
    else:
        original = pairwise(x)
        draws = [xi_star(x, cfg, rep, original) for rep in range(cfg.replications)]
    return np.sort(np.asarray(draws), kind="stable")


def bootstrap_quantile(x, cfg, alpha, independent=False):
    """Empirical alpha-quantile (order statistic ceil(alpha R)) of the bootstrap draws."""
    check_alpha(alpha)
    draws = bootstrap_draws(x, cfg, independent)
    value = StepQuantile(draws)(alpha)
    logger.debug("Bootstrap quantile %.3f over %d draws: %.6g", alpha, cfg.replications, value)
    return value


def critical_scale(n, m, p=DEFAULT_P):
    """Factor from the Xi* scale to the n m/(n + m) scale of the statistic; 1 at p = 2.

    Xi* carries n_B^{p/2}, the statistic carries (n m/(n + m))^1.
    """
    return (n * m / (n + m)) ** (1.0 - p / 2.0)


def dod_test_bootstrap(x, y, cfg, alpha=DEFAULT_ALPHA, calibration_sample=CalibrationSample.FROM_X, independent=False):
    """DoD test with the critical value bootstrapped from one designated sample."""
    calibration_sample = CalibrationSample(calibration_sample)
    source = x if calibration_sample is CalibrationSample.FROM_X else y
    result = dod_independent(x, y, cfg.beta, cfg.p) if independent else dod_statistic(x, y, cfg.beta, cfg.p)
    critical = bootstrap_quantile(source, cfg, 1.0 - alpha, independent) * critical_scale(result.n, result.m, cfg.p)
    return decide(result.scaled, critical, alpha, Calibration.BOOTSTRAP)
