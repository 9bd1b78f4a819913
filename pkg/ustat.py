# ustat.py

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from errors import DomainError, ParameterError, SizeError

logger = logging.getLogger(__name__)

# ceil(t * N) guard against products like 0.7 * 10 = 7.000000000000001
_STEP_EPS = 1e-9


def _step_index(t, size):
    k = np.ceil(np.asarray(t, dtype=float) * size - _STEP_EPS).astype(np.int64)
    return np.clip(k, 1, size) - 1


@dataclass(frozen=True, eq=False)
class StepQuantile:
    """Left-continuous quantile function of equally weighted atoms.

    ``q(t) = values[ceil(t * N)]`` (1-based) for t in (0, 1].
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if len(values) == 0:
            raise SizeError("A step quantile needs at least one atom")
        if np.any(np.diff(values) < 0):
            raise ParameterError("Step quantile values must be nondecreasing")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_unsorted(cls, values):
        return cls(np.sort(np.asarray(values, dtype=float).ravel(), kind="stable"))

    def __len__(self):
        return len(self.values)

    def __call__(self, t):
        result = self.values[_step_index(t, len(self.values))]
        return float(result) if np.ndim(result) == 0 else result


@dataclass(frozen=True, eq=False)
class DistanceSample:
    """All n(n-1)/2 pairwise distances of a point sample, sorted ascending."""

    sorted_distances: np.ndarray
    n_points: int

    def __post_init__(self):
        values = np.array(self.sorted_distances, dtype=float).ravel()
        n = int(self.n_points)
        if n < 2:
            raise SizeError(f"Need at least 2 points, got {n}")
        if len(values) != n * (n - 1) // 2:
            raise SizeError(f"{n} points give {n * (n - 1) // 2} distances, got {len(values)}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ParameterError("Distances must be finite and nonnegative")
        if np.any(np.diff(values) < 0):
            raise ParameterError("Distances must be sorted ascending")
        values.setflags(write=False)
        object.__setattr__(self, "sorted_distances", values)
        object.__setattr__(self, "n_points", n)

    @classmethod
    def from_values(cls, values, n_points):
        return cls(np.sort(np.asarray(values, dtype=float).ravel(), kind="stable"), n_points)

    def __len__(self):
        return len(self.sorted_distances)

    def cdf(self, t):
        counts = np.searchsorted(self.sorted_distances, t, side="right")
        result = counts / len(self.sorted_distances)
        return float(result) if np.ndim(result) == 0 else result

    def quantile(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any((t_arr <= 0) | (t_arr > 1)) or np.any(np.isnan(t_arr)):
            raise DomainError(f"Quantile level must lie in (0, 1], got {t}")
        return self.step_quantile()(t_arr)

    def step_quantile(self):
        return StepQuantile(self.sorted_distances)

    def to_csv(self):
        return "distance\n" + "".join(f"{value!r}\n" for value in self.sorted_distances.tolist())


def pairwise(point_sample):
    if point_sample.n < 2:
        raise SizeError(f"Need at least 2 points for pairwise distances, got {point_sample.n}")
    distances = pdist(point_sample.points, metric=point_sample.metric.scipy_name)
    return DistanceSample(np.sort(distances, kind="stable"), point_sample.n)


def u_cdf(distances, t):
    return distances.cdf(t)


def u_quantile(distances, t):
    return distances.quantile(t)


def independent_distances(point_sample):
    """Sorted d(X1, X2), d(X3, X4), ...: floor(n/2) mutually independent distances."""
    if point_sample.n < 2:
        raise SizeError(f"Need at least 2 points, got {point_sample.n}")
    k = point_sample.n // 2
    first = point_sample.points[0 : 2 * k : 2]
    second = point_sample.points[1 : 2 * k : 2]
    values = point_sample.metric.distance(first, second)
    return StepQuantile.from_unsorted(values)


@dataclass(frozen=True)
class PairPartition:
    """Partition of all pairs (i, j), 1 <= i < j <= n, into vertex-disjoint groups."""

    n: int
    groups: tuple

    def __len__(self):
        return len(self.groups)

    def is_valid(self):
        n = self.n
        expected_groups, expected_size = (n - 1, n // 2) if n % 2 == 0 else (n, (n - 1) // 2)
        if len(self.groups) != expected_groups:
            return False
        seen = set()
        for group in self.groups:
            if len(group) != expected_size:
                return False
            vertices = [v for pair in group for v in pair]
            if len(set(vertices)) != len(vertices):
                return False
            for i, j in group:
                if not 1 <= i < j <= n or (i, j) in seen:
                    return False
                seen.add((i, j))
        return len(seen) == n * (n - 1) // 2


def partition_pairs(n):
    """Round-robin (circle method) partition of the pairs of {1..n}.

    Even n: n-1 rounds of n/2 pairs. Odd n: the schedule for n+1 players with
    the phantom player's pairs dropped, n rounds of (n-1)/2 pairs.
    """
    if n < 3:
        raise SizeError(f"Partition needs n >= 3, got {n}")
    players = n if n % 2 == 0 else n + 1
    fixed = players
    rotating = list(range(1, players))
    groups = []
    for _ in range(players - 1):
        pairs = [(rotating[0], fixed)]
        pairs.extend((rotating[i], rotating[-i]) for i in range(1, players // 2))
        kept = sorted(tuple(sorted(pair)) for pair in pairs if max(pair) <= n)
        groups.append(tuple(kept))
        rotating = rotating[1:] + rotating[:1]
    return PairPartition(n, tuple(groups))


def group_distances(point_sample, partition, k):
    """Sorted distances over the k-th group of a pair partition (independent draws)."""
    if partition.n != point_sample.n:
        raise SizeError(f"Partition is for {partition.n} points, sample has {point_sample.n}")
    pairs = np.array(partition.groups[k]) - 1
    values = point_sample.metric.distance(point_sample.points[pairs[:, 0]], point_sample.points[pairs[:, 1]])
    return StepQuantile.from_unsorted(values)


def _as_quantile_values(q):
    if isinstance(q, StepQuantile):
        return q.values
    if isinstance(q, DistanceSample):
        return q.sorted_distances
    return StepQuantile(q).values


def _trimmed_cell_weights(size, beta):
    edges = np.arange(size + 1) / size
    low = np.maximum(edges[:-1], beta)
    high = np.minimum(edges[1:], 1.0 - beta)
    return np.clip(high - low, 0.0, None)


def kantorovich_1d(a, b, p=2.0, beta=0.0):
    """Exact trimmed integral of |a^{-1}(t) - b^{-1}(t)|^p over [beta, 1 - beta].

    Both quantile functions are step functions, so the integral is a finite sum
    over the merged breakpoint grid {i/N_a} + {j/N_b} + {beta, 1 - beta}; cells
    cut by the trimming bounds contribute their partial width.
    """
    if p < 1:
        raise ParameterError(f"Order p must be >= 1, got {p}")
    if not 0.0 <= beta < 0.5:
        raise ParameterError(f"Trimming beta must lie in [0, 1/2), got {beta}")
    qa = _as_quantile_values(a)
    qb = _as_quantile_values(b)
    na, nb = len(qa), len(qb)

    if na == nb:
        cost = np.abs(qa - qb) ** p
        if beta == 0.0:
            return float(np.mean(cost))
        return float(_trimmed_cell_weights(na, beta) @ cost)

    grid = np.union1d(np.arange(na + 1) / na, np.arange(nb + 1) / nb)
    grid = np.union1d(grid, [beta, 1.0 - beta])
    grid = grid[(grid >= beta) & (grid <= 1.0 - beta)]
    widths = np.diff(grid)
    mids = 0.5 * (grid[1:] + grid[:-1])
    ia = np.clip(np.ceil(mids * na).astype(np.int64) - 1, 0, na - 1)
    ib = np.clip(np.ceil(mids * nb).astype(np.int64) - 1, 0, nb - 1)
    return float(np.sum(widths * np.abs(qa[ia] - qb[ib]) ** p))
