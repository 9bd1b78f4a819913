# analytic.py

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special
from scipy.optimize import bisect
from scipy.spatial.distance import cdist

from errors import DivergenceError, DomainError, NumericError, ParameterError
from spaces import child_seed, sample

logger = logging.getLogger(__name__)

QUANTILE_XTOL = 1e-12
J2_PANEL_RATIO = 0.5
J2_PANEL_LEVELS = 36
J2_NODES = 32


def _as_output(values):
    return float(values) if np.ndim(values) == 0 else values


@dataclass(frozen=True)
class ClosedFormLaw:
    """Law of d(X, X') given by closed-form (or cheaply inverted) density, cdf and quantile.

    All three callables accept scalars or arrays. ``gaps`` lists open
    intervals inside ``support`` that carry no mass.
    """

    name: str
    density: Callable
    cdf: Callable
    quantile: Callable
    support: tuple
    gaps: tuple = field(default=())


@dataclass(frozen=True)
class ConditionParams:
    c_u: float
    gamma1: float
    gamma2: float

    def __post_init__(self):
        if not self.c_u > 0:
            raise ParameterError(f"c_u must be > 0, got {self.c_u}")
        if not (self.gamma1 > -1 and self.gamma2 > -1):
            raise ParameterError(f"gamma1, gamma2 must be > -1, got {self.gamma1}, {self.gamma2}")

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        return self.c_u * t**self.gamma1 * (1.0 - t) ** self.gamma2

    def envelope_integral(self, a, b):
        a1, b1 = self.gamma1 + 1.0, self.gamma2 + 1.0
        return self.c_u * special.beta(a1, b1) * (special.betainc(a1, b1, b) - special.betainc(a1, b1, a))


# Unit square, sup-norm distance

def _square_density(s):
    s = np.asarray(s, dtype=float)
    inside = (s >= 0) & (s <= 1)
    return _as_output(np.where(inside, 4 * s**3 - 12 * s**2 + 8 * s, 0.0))


def _square_cdf(t):
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return _as_output((2 * t - t**2) ** 2)


def _square_quantile(t):
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return _as_output(1.0 - np.sqrt(1.0 - np.sqrt(t)))


def square_supnorm_law():
    return ClosedFormLaw("square-supnorm", _square_density, _square_cdf, _square_quantile, (0.0, 1.0))


# Disc of diameter 1, Euclidean distance

def _disc_density(s):
    s = np.asarray(s, dtype=float)
    inside = (s >= 0) & (s <= 1)
    sc = np.clip(s, 0.0, 1.0)
    value = 8 * sc * (2 / math.pi * np.arccos(sc) - 2 * sc / math.pi * np.sqrt(1 - sc**2))
    return _as_output(np.where(inside, value, 0.0))


def _disc_cdf(t):
    # antiderivative of the density on [0, 1]
    s = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    root = np.sqrt(1 - s**2)
    value = 8 * s**2 / math.pi * np.arccos(s) + 2 / math.pi * np.arcsin(s) - 2 / math.pi * s * root * (1 + 2 * s**2)
    return _as_output(np.clip(value, 0.0, 1.0))


def _invert_cdf(cdf, t, lo, hi):
    """Generalized inverse inf{x : cdf(x) >= t} by bisection."""
    if t <= 0:
        return lo
    if t >= 1:
        return hi
    return bisect(lambda x: cdf(x) - t, lo, hi, xtol=QUANTILE_XTOL)


_disc_quantile_vec = np.vectorize(lambda t: _invert_cdf(_disc_cdf, t, 0.0, 1.0), otypes=[float])


def _disc_quantile(t):
    return _as_output(_disc_quantile_vec(np.asarray(t, dtype=float)))


def disc_euclid_density():
    return ClosedFormLaw("disc-euclid", _disc_density, _disc_cdf, _disc_quantile, (0.0, 1.0))


# Two unit squares at sup-norm gap g

def union_squares_density(gap=4.0):
    if not gap > 1:
        raise ParameterError(f"gap must exceed 1 so the distance pieces stay apart, got {gap}")

    def density(s):
        s = np.asarray(s, dtype=float)
        near = np.where((s >= 0) & (s <= 1), 2 * s**3 - 6 * s**2 + 4 * s, 0.0)
        rise = np.where((s >= gap) & (s <= gap + 1), 0.5 * (s - gap), 0.0)
        fall = np.where((s > gap + 1) & (s <= gap + 2), 0.5 * (gap + 2 - s), 0.0)
        return _as_output(near + rise + fall)

    def cdf(t):
        t = np.asarray(t, dtype=float)
        near = 0.5 * (2 * np.clip(t, 0, 1) - np.clip(t, 0, 1) ** 2) ** 2
        rise = 0.25 * np.clip(t - gap, 0, 1) ** 2
        fall = 0.25 - 0.25 * np.clip(gap + 2 - t, 0, 1) ** 2
        return _as_output(near + rise + np.where(t > gap + 1, fall, 0.0))

    def quantile(t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        near = 1.0 - np.sqrt(1.0 - np.sqrt(np.clip(2 * t, 0, 1)))
        rise = gap + 2 * np.sqrt(np.clip(t - 0.5, 0, None))
        fall = gap + 2 - 2 * np.sqrt(np.clip(1 - t, 0, None))
        value = np.where(t <= 0.5, near, np.where(t <= 0.75, rise, fall))
        return _as_output(value)

    return ClosedFormLaw(f"union-squares-{gap:g}", density, cdf, quantile, (0.0, gap + 2.0), ((1.0, gap),))


def uniform_law(lo=0.0, hi=1.0):
    if not hi > lo:
        raise ParameterError(f"Need hi > lo, got [{lo}, {hi}]")
    width = hi - lo

    def density(s):
        s = np.asarray(s, dtype=float)
        return _as_output(np.where((s >= lo) & (s <= hi), 1.0 / width, 0.0))

    def cdf(t):
        return _as_output(np.clip((np.asarray(t, dtype=float) - lo) / width, 0.0, 1.0))

    def quantile(t):
        return _as_output(lo + width * np.clip(np.asarray(t, dtype=float), 0.0, 1.0))

    return ClosedFormLaw(f"uniform-{lo:g}-{hi:g}", density, cdf, quantile, (lo, hi))


# Covariance kernels

def _gamma1_square_array(t, t_prime):
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    t_prime = np.clip(np.asarray(t_prime, dtype=float), 0.0, 1.0)
    hi = np.maximum(t, t_prime)
    lo = np.minimum(t, t_prime)
    short = -(lo**3) / 3 - lo**2 * hi - 2 * lo * hi**2 + 4 * lo * hi
    wrap = -((lo - hi) ** 2) - lo * hi**2 + lo + hi**3 / 3 + hi - 1.0 / 3
    return np.where(lo <= 1.0 - hi, short, wrap) ** 2


def gamma1_square(t, t_prime):
    """E[F(t|X) F(t'|X)] for the unit square under the sup norm.

    F(t|x) factorizes over the two coordinates, so the value is the square of
    a one-dimensional overlap integral; the arguments are ordered before the
    case split.
    """
    for value in (t, t_prime):
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"Arguments must lie in [0, 1], got ({t}, {t_prime})")
    return float(_gamma1_square_array(t, t_prime))


def gamma_square(t, t_prime):
    """Full covariance kernel Gamma(t, t') = Gamma_1(t, t') - U(t) U(t') of the square law."""
    value = _gamma1_square_array(t, t_prime) - np.asarray(_square_cdf(t)) * np.asarray(_square_cdf(t_prime))
    return _as_output(value)


class MonteCarloKernel:
    """Monte Carlo estimate of Gamma(t, t') for any sampleable space.

    Outer draws x_i and inner draws y_j are fixed at construction, so repeated
    evaluations are mutually consistent. F(t|x_i) is the fraction of inner
    distances d(x_i, y_j) <= t; Gamma is the empirical covariance of F(t|X)
    and F(t'|X) over the outer draws.
    """

    def __init__(self, outer, inner):
        distances = cdist(outer.points, inner.points, metric=outer.metric.scipy_name)
        self._rows = np.sort(distances, axis=1)
        self.n_outer, self.n_inner = self._rows.shape

    @classmethod
    def from_space(cls, spec, n_outer=1000, n_inner=1000, seed=0):
        if n_outer < 100 or n_inner < 100:
            raise ParameterError(f"Need at least 100 outer and inner draws, got {n_outer}, {n_inner}")
        outer = sample(spec, n_outer, child_seed(seed, 0))
        inner = sample(spec, n_inner, child_seed(seed, 1))
        return cls(outer, inner)

    def conditional_cdf(self, t):
        """Matrix F[i, k] = F(t_k | x_i) for a flat array of levels t."""
        t = np.ravel(np.asarray(t, dtype=float))
        counts = np.empty((self.n_outer, len(t)))
        for i, row in enumerate(self._rows):
            counts[i] = np.searchsorted(row, t, side="right")
        return counts / self.n_inner

    def matrix(self, t, t_prime):
        """Gamma evaluated on the outer product of two level arrays."""
        left = self.conditional_cdf(t)
        right = left if t_prime is t else self.conditional_cdf(t_prime)
        return left.T @ right / self.n_outer - np.outer(left.mean(axis=0), right.mean(axis=0))

    def __call__(self, t, t_prime):
        t_b, tp_b = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(t_prime, dtype=float))
        left = self.conditional_cdf(t_b)
        right = self.conditional_cdf(tp_b)
        value = (left * right).mean(axis=0) - left.mean(axis=0) * right.mean(axis=0)
        return _as_output(value.reshape(t_b.shape))


def gamma_kernel_mc(spec, t, t_prime, n_outer=1000, n_inner=1000, seed=0):
    return MonteCarloKernel.from_space(spec, n_outer, n_inner, seed)(t, t_prime)


def kernel_matrix(gamma, x, y):
    """Gamma on the grid x[i], y[j]; uses the kernel's own ``matrix`` when it has one."""
    if hasattr(gamma, "matrix"):
        return np.asarray(gamma.matrix(x, y), dtype=float)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    try:
        values = np.asarray(gamma(xx, yy), dtype=float)
    except (TypeError, ValueError):
        values = None
    if values is None or values.shape != xx.shape:
        # scalar-only kernel
        values = np.vectorize(gamma, otypes=[float])(xx, yy)
    return values


# Functionals and conditions

def quantile_derivative(law, t):
    """(U^{-1})'(t) = 1 / u(U^{-1}(t)); infinite where the density vanishes."""
    density = np.asarray(law.density(law.quantile(t)), dtype=float)
    with np.errstate(divide="ignore"):
        return _as_output(np.where(density > 0, 1.0 / np.where(density > 0, density, 1.0), np.inf))


def _geometric_panels(ratio, levels):
    inner = 0.5 * ratio ** np.arange(levels + 1)
    left = np.concatenate([[0.0], inner[::-1]])
    return np.concatenate([left, 1.0 - inner[1:], [1.0]])


def panel_rule(lo, hi, nodes, levels=J2_PANEL_LEVELS, ratio=J2_PANEL_RATIO):
    """Gauss-Legendre points and weights on [lo, hi], one row per panel.

    Panels halve in width toward both ends, which keeps the rule accurate
    for integrands with algebraic endpoint singularities.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = lo + (hi - lo) * _geometric_panels(ratio, levels)
    a, b = edges[:-1, None], edges[1:, None]
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _j2_on_panels(law, nodes):
    s, weights = panel_rule(0.0, 1.0, nodes)
    mass = s * (1 - s)
    with np.errstate(invalid="ignore"):
        integrand = np.where(mass > 0, mass * np.asarray(quantile_derivative(law, s)) ** 2, 0.0)
    return np.sum(weights * integrand, axis=1)


def j2_functional(law):
    """J2 = integral of U(1 - U)/u, evaluated as the integral of s(1 - s)((U^{-1})'(s))^2 over (0, 1).

    Substituting s = U(t) gives dt = (U^{-1})'(s) ds and 1/u(t) = (U^{-1})'(s).

    Gauss-Legendre on panels refined geometrically toward both ends; the
    result is checked against a run with half the nodes.
    """
    if law.gaps:
        raise DivergenceError(f"{law.name}: density vanishes inside the support, J2 is infinite")
    fine = _j2_on_panels(law, J2_NODES)
    coarse = _j2_on_panels(law, J2_NODES // 2)
    if not np.all(np.isfinite(fine)):
        raise DivergenceError(f"{law.name}: J2 integrand is not integrable")
    value = float(np.sum(fine))
    # end panels shrink geometrically; a convergent integral has vanishing end mass
    end_mass = float(np.sum(fine[:4]) + np.sum(fine[-4:]))
    if end_mass > 1e-6 * max(value, 1e-300):
        raise DivergenceError(f"{law.name}: J2 does not settle near the support ends")
    if abs(value - float(np.sum(coarse))) > 1e-8 * max(1.0, value):
        raise NumericError(f"{law.name}: J2 quadrature unstable ({value} vs {np.sum(coarse)})")
    logger.debug("J2(%s) = %.12g", law.name, value)
    return value


def check_condition24(law, params, grid=1000):
    """Check |(U^{-1})'(t)| <= c_u t^g1 (1 - t)^g2 on a grid and on every increment between grid points."""
    if grid < 100:
        raise ParameterError(f"grid must be >= 100, got {grid}")
    if law.gaps:
        return False
    t = np.arange(1, grid + 1) / (grid + 1)
    derivative = np.asarray(quantile_derivative(law, t))
    envelope = params.envelope(t)
    if np.any(derivative > envelope * (1 + 1e-9) + 1e-12):
        return False
    levels = np.concatenate([[0.0], t, [1.0]])
    quantiles = np.asarray(law.quantile(levels), dtype=float)
    increments = np.abs(np.diff(quantiles))
    allowed = params.envelope_integral(levels[:-1], levels[1:])
    return bool(np.all(increments <= allowed * (1 + 1e-9) + 1e-12))
