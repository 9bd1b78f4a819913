# dtm.py

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from dod import DEFAULT_ALPHA, Calibration, check_alpha, decide
from errors import ParameterError, SizeError
from spaces import child_rng
from ustat import StepQuantile, kantorovich_1d

logger = logging.getLogger(__name__)

DEFAULT_KAPPA = 0.1
DEFAULT_N_S_DIVISOR = 15
MIN_DTM_REPLICATIONS = 20


@dataclass(frozen=True, eq=False)
class DTMSignature:
    """Uniform law on the distance-to-measure values of the first n_S sample points."""

    values: np.ndarray
    kappa: float
    n_s: int

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if len(values) != self.n_s:
            raise SizeError(f"Signature has {len(values)} values, expected {self.n_s}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ParameterError("Signature values must be finite and nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def quantile(self):
        return StepQuantile.from_unsorted(self.values)


def neighbor_count(n, kappa):
    """k = round(kappa n); kappa n below one leaves no neighbor to average."""
    if not 0.0 < kappa <= 1.0:
        raise ParameterError(f"kappa must lie in (0, 1], got {kappa}")
    if kappa * n < 1:
        raise ParameterError(f"kappa * n = {kappa * n:g} < 1")
    return max(1, int(round(kappa * n)))


def dtm_values(x, kappa, queries=None, exclude_self=False):
    """Mean distance from each query to its k nearest sample points.

    A query that is itself a sample point counts as its own neighbor at
    distance 0 unless ``exclude_self`` drops that zero-distance hit; queries
    off the sample keep their k nearest points either way.
    """
    k = neighbor_count(x.n, kappa)
    queries = x.points if queries is None else np.atleast_2d(np.asarray(queries, dtype=float))
    wanted = k + 1 if exclude_self else k
    if wanted > x.n:
        raise ParameterError(f"Need {wanted} neighbors but the sample has {x.n} points")
    tree = cKDTree(x.points)
    distances, _ = tree.query(queries, k=wanted, p=x.metric.minkowski_p)
    distances = np.asarray(distances).reshape(len(queries), wanted)
    if exclude_self:
        own = distances[:, :1] == 0.0
        distances = np.where(own, distances[:, 1:], distances[:, :-1])
    return distances.mean(axis=1)


def dtm_function(x, kappa, point, exclude_self=False):
    return float(dtm_values(x, kappa, [point], exclude_self)[0])


def dtm_signature(x, kappa, n_s, exclude_self=False):
    if not 1 <= n_s <= x.n:
        raise SizeError(f"n_S must lie in [1, {x.n}], got {n_s}")
    values = dtm_values(x, kappa, x.points[:n_s], exclude_self)
    return DTMSignature(values, float(kappa), int(n_s))


def dtm_statistic(x, y, kappa=DEFAULT_KAPPA, n_s=None, exclude_self=False):
    """1-Kantorovich distance between the two DTM signatures."""
    if n_s is None:
        n_s = max(1, min(x.n, y.n) // DEFAULT_N_S_DIVISOR)
    sig_x = dtm_signature(x, kappa, n_s, exclude_self)
    sig_y = dtm_signature(y, kappa, n_s, exclude_self)
    return kantorovich_1d(sig_x.quantile(), sig_y.quantile(), p=1, beta=0.0)


def dtm_critical_value(x, kappa, n_s, alpha=DEFAULT_ALPHA, replications=200, seed=0, exclude_self=False):
    """(1 - alpha) quantile of the statistic between two independent n_S-subsamples of x.

    Both subsamples are drawn without replacement and their DTM values are
    taken with respect to the full sample x. This resampling scheme stands in
    for the original DTM bootstrap, whose exact form is not fixed here.
    """
    check_alpha(alpha)
    if replications < MIN_DTM_REPLICATIONS:
        raise ParameterError(f"Need at least {MIN_DTM_REPLICATIONS} replications, got {replications}")
    if not 1 <= n_s <= x.n:
        raise SizeError(f"n_S must lie in [1, {x.n}], got {n_s}")
    draws = np.empty(replications)
    for rep in range(replications):
        rng = child_rng(seed, rep)
        first = x.points[rng.choice(x.n, size=n_s, replace=False)]
        second = x.points[rng.choice(x.n, size=n_s, replace=False)]
        a = StepQuantile.from_unsorted(dtm_values(x, kappa, first, exclude_self))
        b = StepQuantile.from_unsorted(dtm_values(x, kappa, second, exclude_self))
        draws[rep] = kantorovich_1d(a, b, p=1, beta=0.0)
    return StepQuantile.from_unsorted(draws)(1.0 - alpha)


def dtm_test(x, y, kappa=DEFAULT_KAPPA, n_s=None, alpha=DEFAULT_ALPHA, replications=200, seed=0, exclude_self=False):
    if n_s is None:
        n_s = max(1, min(x.n, y.n) // DEFAULT_N_S_DIVISOR)
    critical = dtm_critical_value(x, kappa, n_s, alpha, replications, seed, exclude_self)
    statistic = dtm_statistic(x, y, kappa, n_s, exclude_self)
    outcome = decide(statistic, critical, alpha, Calibration.DTM_RESAMPLE)
    logger.debug("DTM test: T=%.6g vs critical %.6g -> reject=%s", statistic, critical, outcome.reject)
    return outcome
