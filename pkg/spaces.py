# spaces.py

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import trimesh

from errors import EmptyModelError, ParameterError, SizeError

logger = logging.getLogger(__name__)

DEFAULT_SPIRAL_NOISE = 0.03
PDB_SUFFIXES = (".pdb", ".ent")


class Metric(str, Enum):
    EUCLIDEAN = "euclidean"
    SUP_NORM = "supnorm"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {
            "euclidean": cls.EUCLIDEAN,
            "euclid": cls.EUCLIDEAN,
            "l2": cls.EUCLIDEAN,
            "supnorm": cls.SUP_NORM,
            "sup": cls.SUP_NORM,
            "chebyshev": cls.SUP_NORM,
            "linf": cls.SUP_NORM,
        }
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        if key not in aliases:
            raise ParameterError(f"Unknown metric: {value!r}")
        return aliases[key]

    @property
    def scipy_name(self):
        return "euclidean" if self is Metric.EUCLIDEAN else "chebyshev"

    @property
    def minkowski_p(self):
        return 2.0 if self is Metric.EUCLIDEAN else np.inf

    def distance(self, a, b):
        """Distance between points, or row-wise between two equally shaped point arrays."""
        diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        result = np.linalg.norm(diff, ord=self.minkowski_p, axis=-1)
        return float(result) if np.ndim(result) == 0 else result


class Family(str, Enum):
    UNIT_SQUARE = "unit-square"
    DISC = "disc"
    SQUARE_CAP_DISC = "square-cap-disc"
    UNION_SQUARES = "union-squares"
    SPIRAL = "spiral"
    FILE_POINTS = "file-points"


_REQUIRED_PARAMS = {
    Family.UNIT_SQUARE: (),
    Family.DISC: ("radius",),
    Family.SQUARE_CAP_DISC: ("radius",),
    Family.UNION_SQUARES: ("gap",),
    Family.SPIRAL: ("v",),
    Family.FILE_POINTS: ("path",),
}


@dataclass(frozen=True)
class SpaceSpec:
    """Declarative description of a sampleable metric measure space.

    The measure is uniform on the stated set for every family except
    ``spiral`` (the curve (R sin vR, R cos vR) plus Gaussian noise) and ``file-points``
    (uniform over the coordinates read from a file).
    """

    family: Family
    metric: Metric = Metric.EUCLIDEAN
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            family = Family(self.family)
        except ValueError:
            raise ParameterError(f"Unknown space family: {self.family!r}") from None
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "metric", Metric.parse(self.metric))
        object.__setattr__(self, "params", dict(self.params))
        self.validate()

    @classmethod
    def unit_square(cls, metric=Metric.EUCLIDEAN):
        return cls(Family.UNIT_SQUARE, metric)

    @classmethod
    def disc(cls, radius, metric=Metric.EUCLIDEAN):
        return cls(Family.DISC, metric, {"radius": radius})

    @classmethod
    def square_cap_disc(cls, radius, metric=Metric.EUCLIDEAN):
        return cls(Family.SQUARE_CAP_DISC, metric, {"radius": radius})

    @classmethod
    def union_squares(cls, gap=4.0, metric=Metric.SUP_NORM):
        return cls(Family.UNION_SQUARES, metric, {"gap": gap})

    @classmethod
    def spiral(cls, v, noise=DEFAULT_SPIRAL_NOISE, metric=Metric.EUCLIDEAN):
        return cls(Family.SPIRAL, metric, {"v": v, "noise": noise})

    @classmethod
    def file_points(cls, path, metric=Metric.EUCLIDEAN):
        return cls(Family.FILE_POINTS, metric, {"path": str(path)})

    def validate(self):
        missing = [name for name in _REQUIRED_PARAMS[self.family] if name not in self.params]
        if missing:
            raise ParameterError(f"{self.family.value} needs parameters {missing}")
        params = self.params
        if "radius" in params and not params["radius"] > 0:
            raise ParameterError(f"radius must be > 0, got {params['radius']}")
        if "gap" in params and not params["gap"] >= 0:
            raise ParameterError(f"gap must be >= 0, got {params['gap']}")
        if "v" in params and not params["v"] > 0:
            raise ParameterError(f"v must be > 0, got {params['v']}")
        if "noise" in params and not params["noise"] >= 0:
            raise ParameterError(f"noise must be >= 0, got {params['noise']}")

    def contains(self, points, tol=1e-12):
        """Boolean mask of the points lying in the support set."""
        pts = np.asarray(points, dtype=float)
        x, y = pts[:, 0], pts[:, 1]
        family = self.family
        if family is Family.UNIT_SQUARE:
            return (x >= -tol) & (x <= 1 + tol) & (y >= -tol) & (y <= 1 + tol)
        if family is Family.DISC:
            return np.hypot(x, y) <= self.params["radius"] + tol
        if family is Family.SQUARE_CAP_DISC:
            in_square = (np.abs(x) <= 0.5 + tol) & (np.abs(y) <= 0.5 + tol)
            return in_square & (np.hypot(x, y) <= self.params["radius"] + tol)
        if family is Family.UNION_SQUARES:
            shift = 1.0 + self.params["gap"]
            in_y = (y >= -tol) & (y <= 1 + tol)
            left = (x >= -tol) & (x <= 1 + tol)
            right = (x >= shift - tol) & (x <= shift + 1 + tol)
            return in_y & (left | right)
        return np.ones(len(pts), dtype=bool)

    def to_dict(self):
        return {"family": self.family.value, "params": dict(self.params), "metric": self.metric.value}

    @classmethod
    def from_dict(cls, data):
        return cls(data["family"], data.get("metric", Metric.EUCLIDEAN), data.get("params", {}))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class PointSample:
    points: np.ndarray
    metric: Metric = Metric.EUCLIDEAN
    seed: int = None

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim != 2 or len(points) == 0:
            raise SizeError(f"A point sample needs a nonempty (n, d) array, got shape {points.shape}")
        if points.shape[1] not in (2, 3):
            raise ParameterError(f"Points must be 2-D or 3-D, got dimension {points.shape[1]}")
        if not np.all(np.isfinite(points)):
            raise ParameterError("Point coordinates must be finite")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "metric", Metric.parse(self.metric))

    def __len__(self):
        return len(self.points)

    @property
    def n(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]

    def to_csv(self):
        header = ",".join("xyz"[: self.dim])
        lines = [header] + [",".join(repr(float(c)) for c in row) for row in self.points]
        return "\n".join(lines) + "\n"


def child_seed(seed, *keys):
    """Seed of an independent stream for (seed, keys); order-independent across replications."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1)[0])


def child_rng(seed, *keys):
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(sequence)


def spiral_point(r, s, s_prime, v, noise=DEFAULT_SPIRAL_NOISE):
    r = np.asarray(r, dtype=float)
    x = r * np.sin(v * r) + noise * np.asarray(s, dtype=float)
    y = r * np.cos(v * r) + noise * np.asarray(s_prime, dtype=float)
    return np.stack([x, y], axis=-1)


def spiral_draw(v, noise, rng):
    if not v > 0:
        raise ParameterError(f"v must be > 0, got {v}")
    r = rng.uniform(0.0, 1.0)
    s, s_prime = rng.standard_normal(2)
    return spiral_point(r, s, s_prime, v, noise)


def _sample_unit_square(params, n, rng):
    return rng.uniform(0.0, 1.0, size=(n, 2))


def _sample_disc(params, n, rng):
    # sqrt-radius polar method
    theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
    radius = params["radius"] * np.sqrt(rng.uniform(0.0, 1.0, size=n))
    return np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])


def _sample_square_cap_disc(params, n, rng):
    # Unit square centered at the disc center, so radius sqrt(2)/2 covers it.
    radius = params["radius"]
    accepted = []
    count = 0
    while count < n:
        batch = max(2 * (n - count), 64)
        candidates = rng.uniform(-0.5, 0.5, size=(batch, 2))
        keep = candidates[np.hypot(candidates[:, 0], candidates[:, 1]) <= radius]
        accepted.append(keep)
        count += len(keep)
    return np.concatenate(accepted)[:n]


def _sample_union_squares(params, n, rng):
    which = rng.integers(0, 2, size=n)
    points = rng.uniform(0.0, 1.0, size=(n, 2))
    points[:, 0] += which * (1.0 + params["gap"])
    return points


def _sample_spiral(params, n, rng):
    r = rng.uniform(0.0, 1.0, size=n)
    s = rng.standard_normal(n)
    s_prime = rng.standard_normal(n)
    return spiral_point(r, s, s_prime, params["v"], params.get("noise", DEFAULT_SPIRAL_NOISE))


def _sample_file_points(params, n, rng):
    points = load_points(params["path"])
    if n > len(points):
        raise SizeError(f"Requested {n} points but {params['path']} holds only {len(points)}")
    index = rng.choice(len(points), size=n, replace=False)
    return points[index]


_SAMPLERS = {
    Family.UNIT_SQUARE: _sample_unit_square,
    Family.DISC: _sample_disc,
    Family.SQUARE_CAP_DISC: _sample_square_cap_disc,
    Family.UNION_SQUARES: _sample_union_squares,
    Family.SPIRAL: _sample_spiral,
    Family.FILE_POINTS: _sample_file_points,
}


def sample(spec, n, seed):
    """Draw ``n`` i.i.d. points from ``spec``; identical (spec, n, seed) give identical samples."""
    if n < 1:
        raise SizeError(f"Sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    points = _SAMPLERS[spec.family](spec.params, int(n), rng)
    logger.debug("Sampled %d points from %s (seed %s)", n, spec.family.value, seed)
    return PointSample(points, spec.metric, seed)


def subsample(point_sample, n, rng):
    if n > point_sample.n:
        raise SizeError(f"Cannot draw {n} points without replacement from {point_sample.n}")
    index = rng.choice(point_sample.n, size=n, replace=False)
    return PointSample(point_sample.points[index], point_sample.metric, point_sample.seed)


def load_calpha(path):
    """Read the C-alpha coordinates of the first model of a PDB file.

    Fixed-column PDB layout: record name cols 1-6, atom name 13-16, chain 22,
    residue number 23-26, insertion code 27, x/y/z cols 31-54. Only ATOM
    records count; for a residue with alternate locations the first one wins.
    """
    coords = []
    seen = set()
    with open(path, "r") as handle:
        for line_number, line in enumerate(handle, start=1):
            record = line[:6].strip()
            if record == "ENDMDL":
                break
            if record != "ATOM" or line[12:16].strip() != "CA":
                continue
            residue = (line[21:22], line[22:26], line[26:27])
            if residue in seen:
                continue
            seen.add(residue)
            try:
                coords.append((float(line[30:38]), float(line[38:46]), float(line[46:54])))
            except ValueError:
                raise ParameterError(f"{path}:{line_number}: malformed coordinates") from None
    if not coords:
        raise EmptyModelError(f"No C-alpha ATOM records in {path}")
    logger.info("Loaded %d C-alpha atoms from %s", len(coords), path)
    return PointSample(np.array(coords), Metric.EUCLIDEAN)


def _has_header(first_line):
    tokens = first_line.replace(",", " ").split()
    if not tokens:
        return False
    try:
        float(tokens[0])
    except ValueError:
        return True
    return False


def load_points(path):
    path = Path(path)
    if path.suffix.lower() in PDB_SUFFIXES:
        return load_calpha(path).points
    delimiter = "," if path.suffix.lower() == ".csv" else None
    with open(path, "r") as handle:
        first = handle.readline()
    skip = 1 if _has_header(first) else 0
    points = np.loadtxt(path, delimiter=delimiter, ndmin=2, skiprows=skip)
    if len(points) == 0:
        raise EmptyModelError(f"No coordinates in {path}")
    return points


def rigid_motion(point_sample, angle=0.0, translation=None, reflect=False):
    """Isometric copy of a sample: rotation about the z axis, optional mirror, then translation.

    For the sup-norm metric only quarter-turn rotations keep distances.
    """
    transforms = trimesh.transformations
    matrix = transforms.rotation_matrix(angle, [0.0, 0.0, 1.0])
    if reflect:
        mirror = transforms.reflection_matrix([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])
        matrix = transforms.concatenate_matrices(matrix, mirror)
    if translation is not None:
        shift = np.zeros(3)
        shift[: len(translation)] = translation
        matrix = transforms.concatenate_matrices(transforms.translation_matrix(shift), matrix)
    dim = point_sample.dim
    padded = np.zeros((point_sample.n, 3))
    padded[:, :dim] = point_sample.points
    moved = trimesh.transform_points(padded, matrix)
    return PointSample(moved[:, :dim], point_sample.metric, point_sample.seed)
