# limit.py

import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import lapack

from analytic import kernel_matrix
from dod import DEFAULT_BETA, check_alpha
from errors import NumericError, ParameterError, SizeError
from ustat import StepQuantile

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 512
DEFAULT_LIMIT_DRAWS = 10000
JITTER_START = 1e-10
JITTER_MAX = 1e-7
XI_CHUNK = 1000


@dataclass(frozen=True, eq=False)
class LimitGrid:
    """Discretized limit process G on the midpoint grid of [beta, 1 - beta].

    ``factor`` is the lower-triangular pivoted Cholesky factor:
    covariance[p][:, p] + jitter * I ~= factor @ factor.T with p = ``pivots``.
    """

    grid: np.ndarray
    covariance: np.ndarray
    factor: np.ndarray
    pivots: np.ndarray
    beta: float
    jitter: float

    @property
    def size(self):
        return len(self.grid)

    @property
    def cell_width(self):
        return (1.0 - 2.0 * self.beta) / self.size

    def path(self, z):
        """Sample path(s) of G for standard normal input of shape (K,) or (K, draws)."""
        z = np.asarray(z, dtype=float)
        values = np.empty_like(z)
        values[self.pivots] = self.factor @ z
        return values

    def reconstruct(self):
        full = np.empty_like(self.covariance)
        full[np.ix_(self.pivots, self.pivots)] = self.factor @ self.factor.T
        return full

    def trace_integral(self):
        """Midpoint-rule value of the integral of Var G(t), i.e. E[Xi]."""
        return float(np.sum(np.diag(self.covariance)) * self.cell_width)


def _zero_based(pivots):
    pivots = np.asarray(pivots, dtype=np.int64)
    return pivots - 1 if pivots.min() == 1 else pivots


def _pivoted_cholesky(covariance, jitter_start):
    size = len(covariance)
    scale = float(np.max(np.diag(covariance)))
    if scale <= 0.0:
        if np.allclose(covariance, 0.0, atol=1e-14):
            return np.zeros_like(covariance), np.arange(size), 0.0
        raise NumericError("Covariance has a nonpositive diagonal but nonzero entries")
    if np.min(np.diag(covariance)) < -JITTER_MAX * scale:
        raise NumericError("Covariance has negative variances")

    jitter = jitter_start
    while jitter <= JITTER_MAX * (1 + 1e-9):
        shifted = covariance + jitter * scale * np.eye(size)
        c, piv, rank, info = lapack.dpstrf(shifted, lower=1)
        if info < 0:
            raise NumericError(f"dpstrf rejected argument {-info}")
        factor = np.tril(c)
        factor[rank:, rank:] = 0.0
        pivots = _zero_based(piv)
        rebuilt = np.empty_like(covariance)
        rebuilt[np.ix_(pivots, pivots)] = factor @ factor.T
        error = float(np.max(np.abs(rebuilt - covariance)))
        if error <= jitter * scale + 1e-8 * max(1.0, scale):
            logger.debug("Pivoted Cholesky: rank %d/%d, jitter %.1e, error %.2e", rank, size, jitter, error)
            return factor, pivots, jitter * scale
        logger.debug("Pivoted Cholesky error %.2e at jitter %.1e; escalating", error, jitter)
        jitter *= 10.0
    raise NumericError(f"Covariance factorization failed up to jitter {JITTER_MAX:g} x max variance")


def build_limit_grid(law, gamma, beta=DEFAULT_BETA, size=DEFAULT_GRID_SIZE, jitter=JITTER_START):
    """Covariance of G on the grid: 4 Gamma(q_i, q_j) / (u(q_i) u(q_j)), q = U^{-1}(t).

    The grid holds cell midpoints, so beta = 0 never evaluates the density at
    the ends of the support.
    """
    if size < 16:
        raise ParameterError(f"Grid size must be >= 16, got {size}")
    if not 0.0 <= beta < 0.5:
        raise ParameterError(f"beta must lie in [0, 1/2), got {beta}")
    grid = beta + (np.arange(size) + 0.5) * (1.0 - 2.0 * beta) / size
    quantiles = np.asarray(law.quantile(grid), dtype=float)
    density = np.asarray(law.density(quantiles), dtype=float)
    if np.any(~np.isfinite(density) | (density <= 0)):
        raise NumericError(f"{law.name}: density vanishes at a grid quantile")
    kernel = kernel_matrix(gamma, quantiles, quantiles)
    covariance = 4.0 * kernel / np.outer(density, density)
    covariance = 0.5 * (covariance + covariance.T)
    if not np.all(np.isfinite(covariance)):
        raise NumericError(f"{law.name}: covariance has non-finite entries")
    factor, pivots, used = _pivoted_cholesky(covariance, jitter)
    logger.info("Limit grid for %s: K=%d, beta=%g, E[Xi]=%.6g", law.name, size, beta,
                float(np.sum(np.diag(covariance))) * (1.0 - 2.0 * beta) / size)
    return LimitGrid(grid, covariance, factor, pivots, float(beta), used)


def sample_xi(grid, n_draws, seed):
    """Draws of Xi = integral of G^2 over [beta, 1 - beta] (midpoint rule)."""
    if n_draws < 1:
        raise SizeError(f"n_draws must be >= 1, got {n_draws}")
    rng = np.random.default_rng(seed)
    draws = np.empty(n_draws)
    for start in range(0, n_draws, XI_CHUNK):
        count = min(XI_CHUNK, n_draws - start)
        paths = grid.factor @ rng.standard_normal((grid.size, count))
        draws[start : start + count] = np.sum(paths**2, axis=0) * grid.cell_width
    return draws


def limit_critical_value(grid, alpha, n_draws=DEFAULT_LIMIT_DRAWS, seed=0):
    """Empirical (1 - alpha) quantile of Xi."""
    check_alpha(alpha)
    draws = sample_xi(grid, n_draws, seed)
    critical = StepQuantile.from_unsorted(draws)(1.0 - alpha)
    logger.info("Limit critical value (alpha=%g, %d draws): %.6g", alpha, n_draws, critical)
    return critical


def write_column(values, out=None, header=None):
    """One value per line, to a path or to stdout."""
    lines = ([header] if header else []) + [repr(float(v)) for v in values]
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
