# dod.py

import logging
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from analytic import kernel_matrix, panel_rule
from errors import NumericError, ParameterError, SizeError
from ustat import independent_distances, kantorovich_1d, pairwise

logger = logging.getLogger(__name__)

DEFAULT_BETA = 0.01
DEFAULT_ALPHA = 0.05
DEFAULT_P = 2
VARIANCE_NODES = 128
POPULATION_NODES = 32


class Calibration(str, Enum):
    BOOTSTRAP = "bootstrap"
    LIMIT_MC = "limit-mc"
    DTM_RESAMPLE = "dtm-resample"


@dataclass(frozen=True)
class DoDResult:
    statistic: float
    scaled: float
    beta: float
    p: float
    n: int
    m: int

    @classmethod
    def build(cls, statistic, beta, p, n, m):
        return cls(float(statistic), n * m / (n + m) * float(statistic), float(beta), float(p), int(n), int(m))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    scaled_statistic: float
    critical_value: float
    alpha: float
    reject: bool
    calibration: Calibration

    def to_dict(self):
        record = asdict(self)
        record["calibration"] = self.calibration.value
        return record


def check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")


def _check_trim(beta, p):
    if not 0.0 <= beta < 0.5:
        raise ParameterError(f"beta must lie in [0, 1/2), got {beta}")
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")


def dod_from_distances(dx, dy, beta=DEFAULT_BETA, p=DEFAULT_P):
    """Trimmed DoD between two precomputed distance samples."""
    _check_trim(beta, p)
    statistic = kantorovich_1d(dx, dy, p=p, beta=beta)
    return DoDResult.build(statistic, beta, p, dx.n_points, dy.n_points)


def dod_statistic(x, y, beta=DEFAULT_BETA, p=DEFAULT_P):
    _check_trim(beta, p)
    return dod_from_distances(pairwise(x), pairwise(y), beta, p)


def decide(scaled_statistic, critical_value, alpha, calibration):
    check_alpha(alpha)
    if not critical_value >= 0:
        raise ParameterError(f"critical value must be >= 0, got {critical_value}")
    reject = bool(scaled_statistic > critical_value)
    return TestOutcome(float(scaled_statistic), float(critical_value), float(alpha), reject, Calibration(calibration))


def dod_test(x, y, beta=DEFAULT_BETA, alpha=DEFAULT_ALPHA, critical=0.0, calibration=Calibration.BOOTSTRAP, p=DEFAULT_P):
    """Reject isomorphy when n m/(n + m) times the DoD statistic exceeds ``critical``."""
    result = dod_statistic(x, y, beta, p)
    outcome = decide(result.scaled, critical, alpha, calibration)
    logger.debug("DoD test: scaled %.6g vs critical %.6g -> reject=%s", result.scaled, critical, outcome.reject)
    return outcome


def dod_independent(x, y, beta=DEFAULT_BETA, p=DEFAULT_P):
    """DoD built only from d(X1, X2), d(X3, X4), ...; scaled with the effective sizes n//2, m//2."""
    _check_trim(beta, p)
    qx = independent_distances(x)
    qy = independent_distances(y)
    statistic = kantorovich_1d(qx, qy, p=p, beta=beta)
    return DoDResult.build(statistic, beta, p, len(qx), len(qy))


def _variance_term(quant_own, cdf_own, quant_other, gamma, beta, nodes):
    lo, hi = float(quant_own(beta)), float(quant_own(1.0 - beta))
    x, w = np.polynomial.legendre.leggauss(nodes)
    points = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w
    shift = points - np.asarray(quant_other(cdf_own(points)), dtype=float)
    kernel = kernel_matrix(gamma, points, points)
    if not (np.all(np.isfinite(kernel)) and np.all(np.isfinite(shift))):
        raise NumericError("Non-finite kernel or quantile values in the variance integrand")
    weighted = weights * shift
    return float(weighted @ kernel @ weighted)


def alternative_variance(quant_u, cdf_u, quant_v, cdf_v, gamma_x, gamma_y, beta=DEFAULT_BETA, lam=0.5, nodes=VARIANCE_NODES):
    """Asymptotic variance of sqrt(nm/(n+m)) (DoD_hat - DoD) when the distance laws differ.

    Tensor Gauss-Legendre quadrature of both double integrals. The value is
    zero whenever the two quantile functions agree on [beta, 1 - beta], where
    the normal limit degenerates and this is not a usable scale.
    """
    if not 0.0 < beta < 0.5:
        raise ParameterError(f"beta must lie in (0, 1/2), got {beta}")
    if not 0.0 < lam < 1.0:
        raise ParameterError(f"lambda must lie in (0, 1), got {lam}")
    first = _variance_term(quant_u, cdf_u, quant_v, gamma_x, beta, nodes)
    second = _variance_term(quant_v, cdf_v, quant_u, gamma_y, beta, nodes)
    variance = 16.0 * lam * first + 16.0 * (1.0 - lam) * second
    logger.debug("Alternative variance: %.6g (X term %.6g, Y term %.6g)", variance, first, second)
    return max(variance, 0.0)


def population_dod(quant_u, quant_v, beta=DEFAULT_BETA, p=DEFAULT_P, nodes=POPULATION_NODES):
    """Population DoD: integral of |U^{-1} - V^{-1}|^p over [beta, 1 - beta]."""
    _check_trim(beta, p)
    t, weights = panel_rule(beta, 1.0 - beta, nodes)
    diff = np.abs(np.asarray(quant_u(t), dtype=float) - np.asarray(quant_v(t), dtype=float))
    return float(np.sum(weights * diff**p))


def finite_sample_bound(n, m, j2):
    """Upper bound (8/(n+1) + 8/(m+1)) J2 on the null expectation of the statistic (p = 2)."""
    if n < 3 or m < 3:
        raise SizeError(f"The bound needs n, m >= 3, got {n}, {m}")
    return (8.0 / (n + 1) + 8.0 / (m + 1)) * j2
