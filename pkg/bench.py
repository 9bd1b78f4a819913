# bench.py

import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from bootstrap import (
    DEFAULT_BOOTSTRAP_REPS,
    BootstrapConfig,
    CalibrationSample,
    ResampleRule,
    bootstrap_draws,
    bootstrap_quantile,
    critical_scale,
    dod_test_bootstrap,
    resample_size,
)
from dod import DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_P, check_alpha, dod_independent, dod_statistic
from dtm import DEFAULT_KAPPA, DEFAULT_N_S_DIVISOR, dtm_critical_value, dtm_statistic, dtm_test
from errors import ParameterError, SizeError
from spaces import Metric, PointSample, SpaceSpec, child_seed, load_points, sample, subsample

logger = logging.getLogger(__name__)

DEFAULT_REPLICATIONS = 200
FULL_REPLICATIONS = 1000
CAP_DISC_RADII = (math.sqrt(2) / 2, 0.65, 0.6, 0.55, 0.5)
TRIMMING_LEVELS = (0.0, 0.01, 0.05, 0.25)
SPIRAL_REFERENCE_SPEED = 10.0
SPIRAL_SPEEDS = (10.0, 15.0, 20.0, 30.0, 40.0, 100.0)
# mu_10 vs mu_100 has a population DoD below 1e-3, which n = 500 does not resolve
SPIRAL_SIZES = (500, 2000, 5000)
PDB_N_S_DIVISOR = 5

# stream keys under (plan seed, n)
_CALIBRATION_KEY = 0
_CALIBRATION_SEED_KEY = 1
_REPLICATION_KEY = 2


class Method(str, Enum):
    DOD = "dod"
    DOD_INDEPENDENT = "dod-ind"
    DTM = "dtm"


@dataclass(frozen=True)
class PowerRow:
    n: int
    rejection_rate: float
    replications: int
    mc_stderr: float

    @classmethod
    def from_count(cls, n, rejections, replications):
        rate = rejections / replications
        return cls(int(n), float(rate), int(replications), math.sqrt(rate * (1.0 - rate) / replications))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ExperimentPlan:
    """One power-study design: two spaces, sample sizes, test method and calibration settings.

    The critical value is computed once per n from a fresh sample of the
    space named by ``calibrate_from``; ``n_b`` fixes the bootstrap size
    instead of deriving it from ``resample_rule``.
    """

    name: str
    space_a: SpaceSpec
    space_b: SpaceSpec
    n_list: tuple
    beta: float = DEFAULT_BETA
    alpha: float = DEFAULT_ALPHA
    replications: int = DEFAULT_REPLICATIONS
    bootstrap_reps: int = DEFAULT_BOOTSTRAP_REPS
    resample_rule: ResampleRule = ResampleRule.N_OUT_OF_N
    method: Method = Method.DOD
    seed: int = 0
    kappa: float = DEFAULT_KAPPA
    n_s_divisor: int = DEFAULT_N_S_DIVISOR
    p: float = DEFAULT_P
    n_b: Optional[int] = None
    calibrate_from: CalibrationSample = CalibrationSample.FROM_X

    def __post_init__(self):
        for name in ("space_a", "space_b"):
            value = getattr(self, name)
            if isinstance(value, dict):
                object.__setattr__(self, name, SpaceSpec.from_dict(value))
        n_list = (self.n_list,) if isinstance(self.n_list, int) else tuple(int(n) for n in self.n_list)
        if not n_list:
            raise ParameterError("n_list must not be empty")
        object.__setattr__(self, "n_list", n_list)
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "resample_rule", ResampleRule(self.resample_rule))
        object.__setattr__(self, "calibrate_from", CalibrationSample(self.calibrate_from))
        if self.replications < 1:
            raise ParameterError(f"replications must be >= 1, got {self.replications}")
        if not 0.0 <= self.beta < 0.5:
            raise ParameterError(f"beta must lie in [0, 1/2), got {self.beta}")
        if self.p < 1:
            raise ParameterError(f"p must be >= 1, got {self.p}")
        if self.n_b is not None and self.n_b < 2:
            raise ParameterError(f"n_b must be >= 2, got {self.n_b}")
        check_alpha(self.alpha)

    def bootstrap_config(self, n):
        return BootstrapConfig(
            n_b=self.n_b if self.n_b is not None else resample_size(n, self.resample_rule),
            replications=self.bootstrap_reps,
            beta=self.beta,
            seed=child_seed(self.seed, n, _CALIBRATION_SEED_KEY),
            allow_untrimmed=self.beta == 0.0,
            p=self.p,
        )

    def n_s(self, n):
        return max(1, n // self.n_s_divisor)

    def calibration_space(self):
        return self.space_a if self.calibrate_from is CalibrationSample.FROM_X else self.space_b

    def to_dict(self):
        record = asdict(self)
        record["space_a"] = self.space_a.to_dict()
        record["space_b"] = self.space_b.to_dict()
        record["n_list"] = list(self.n_list)
        record["method"] = self.method.value
        record["resample_rule"] = self.resample_rule.value
        record["calibrate_from"] = self.calibrate_from.value
        return record

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _calibrate(plan, n):
    reference = sample(plan.calibration_space(), n, child_seed(plan.seed, n, _CALIBRATION_KEY))
    if plan.method is Method.DTM:
        return dtm_critical_value(reference, plan.kappa, plan.n_s(n), plan.alpha, plan.bootstrap_reps,
                                  child_seed(plan.seed, n, _CALIBRATION_SEED_KEY))
    independent = plan.method is Method.DOD_INDEPENDENT
    effective = n // 2 if independent else n
    xi = bootstrap_quantile(reference, plan.bootstrap_config(n), 1.0 - plan.alpha, independent)
    return xi * critical_scale(effective, effective, plan.p)


def _scaled_statistic(plan, n, x, y):
    if plan.method is Method.DTM:
        return dtm_statistic(x, y, plan.kappa, plan.n_s(n))
    if plan.method is Method.DOD_INDEPENDENT:
        return dod_independent(x, y, plan.beta, plan.p).scaled
    return dod_statistic(x, y, plan.beta, plan.p).scaled


def run_power(plan, workers=1):
    """Rejection rate per n: calibrate once from the designated space, then test fresh (X, Y) pairs."""
    logger.info("=== Power Study: %s ===", plan.name)
    logger.info("Method: %s, beta=%g, alpha=%g, %d replications", plan.method.value, plan.beta, plan.alpha, plan.replications)
    rows = []
    for n in plan.n_list:
        critical = _calibrate(plan, n)
        logger.info("n=%d: critical value %.6g", n, critical)

        def replicate(rep, n=n, critical=critical):
            x = sample(plan.space_a, n, child_seed(plan.seed, n, _REPLICATION_KEY, rep, 0))
            y = sample(plan.space_b, n, child_seed(plan.seed, n, _REPLICATION_KEY, rep, 1))
            statistic = _scaled_statistic(plan, n, x, y)
            logger.debug("n=%d rep=%d: statistic %.6g", n, rep, statistic)
            return statistic > critical

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                decisions = list(pool.map(replicate, range(plan.replications)))
        else:
            decisions = [replicate(rep) for rep in range(plan.replications)]
        row = PowerRow.from_count(n, sum(decisions), plan.replications)
        logger.info("n=%d: rejection rate %.3f (stderr %.3f)", n, row.rejection_rate, row.mc_stderr)
        rows.append(row)
    return rows


def run_statistic_distribution(space_a, space_b, n, beta=DEFAULT_BETA, replications=DEFAULT_REPLICATIONS, seed=0,
                               p=DEFAULT_P):
    """(n/2) DoD between independent samples of two spaces, one value per replication."""
    if replications < 1:
        raise ParameterError(f"replications must be >= 1, got {replications}")
    values = np.empty(replications)
    for rep in range(replications):
        x = sample(space_a, n, child_seed(seed, rep, 0))
        y = sample(space_b, n, child_seed(seed, rep, 1))
        values[rep] = dod_statistic(x, y, beta, p).scaled
    logger.info("Statistic mean %.6g over %d replications", values.mean(), replications)
    return values


def run_null_distribution(spec, n, beta=DEFAULT_BETA, replications=DEFAULT_REPLICATIONS, seed=0):
    logger.info("=== Null Distribution: %s, n=%d ===", spec.family.value, n)
    return run_statistic_distribution(spec, spec, n, beta, replications, seed)


def run_alternative_distribution(space_a, space_b, n, beta=DEFAULT_BETA, replications=DEFAULT_REPLICATIONS, seed=0):
    """The scaled statistic when the two spaces differ, for comparison with the null limit law."""
    logger.info("=== Alternative Distribution: %s vs %s, n=%d ===", space_a.family.value, space_b.family.value, n)
    return run_statistic_distribution(space_a, space_b, n, beta, replications, seed)


def run_bootstrap_draws(spec, n, beta=DEFAULT_BETA, replications=DEFAULT_BOOTSTRAP_REPS, seed=0,
                        resample_rule=ResampleRule.N_OUT_OF_N, p=DEFAULT_P, independent=False):
    """Sorted Xi* draws from one sample of ``spec``, for comparison with the null distribution."""
    logger.info("=== Bootstrap Draws: %s, n=%d ===", spec.family.value, n)
    x = sample(spec, n, child_seed(seed, _CALIBRATION_KEY))
    cfg = BootstrapConfig(resample_size(n, resample_rule), replications, beta, child_seed(seed, _CALIBRATION_SEED_KEY),
                          allow_untrimmed=beta == 0.0, p=p)
    draws = bootstrap_draws(x, cfg, independent)
    logger.info("n_B=%d: mean Xi* %.6g over %d draws", cfg.n_b, draws.mean(), replications)
    return draws


def compare_pdb(path_a, path_b, n, beta=DEFAULT_BETA, alpha=DEFAULT_ALPHA, replications=DEFAULT_REPLICATIONS,
                seed=0, bootstrap_reps=DEFAULT_BOOTSTRAP_REPS, resample_rule=ResampleRule.N_OUT_OF_N, p=DEFAULT_P,
                method=Method.DOD, kappa=DEFAULT_KAPPA, n_s_divisor=PDB_N_S_DIVISOR):
    """Rejection rate between random C-alpha subsamples of two structures.

    Every replication calibrates from its own subsample of ``path_a``: a
    bootstrap of size resample_size(n, resample_rule) for the DoD methods, the
    subsample scheme of ``dtm_test`` with n_S = n // n_s_divisor for DTM.
    """
    method = Method(method)
    structure_a = PointSample(load_points(path_a), Metric.EUCLIDEAN)
    structure_b = PointSample(load_points(path_b), Metric.EUCLIDEAN)
    n_values = (n,) if isinstance(n, int) else tuple(n)
    logger.info("=== Structure Comparison: %s vs %s (%s) ===", Path(path_a).name, Path(path_b).name, method.value)
    logger.info("Atoms: %d vs %d", structure_a.n, structure_b.n)
    for size in n_values:
        if size > min(structure_a.n, structure_b.n):
            raise SizeError(f"n={size} exceeds the atom count ({structure_a.n}, {structure_b.n})")
    rows = []
    for size in n_values:
        rejections = 0
        for rep in range(replications):
            rng = np.random.default_rng(child_seed(seed, size, rep))
            x = subsample(structure_a, size, rng)
            y = subsample(structure_b, size, rng)
            rep_seed = child_seed(seed, size, rep, 1)
            if method is Method.DTM:
                outcome = dtm_test(x, y, kappa, max(1, size // n_s_divisor), alpha, bootstrap_reps, rep_seed)
            else:
                cfg = BootstrapConfig(resample_size(size, resample_rule), bootstrap_reps, beta, rep_seed,
                                      allow_untrimmed=beta == 0.0, p=p)
                outcome = dod_test_bootstrap(x, y, cfg, alpha, independent=method is Method.DOD_INDEPENDENT)
            rejections += outcome.reject
        row = PowerRow.from_count(size, rejections, replications)
        logger.info("n=%d: rejection rate %.3f (stderr %.3f)", size, row.rejection_rate, row.mc_stderr)
        rows.append(row)
    return rows


def _spiral_plans(reps, seed):
    plans = {}
    common = dict(replications=reps, bootstrap_reps=reps, seed=seed)
    reference = SpaceSpec.spiral(SPIRAL_REFERENCE_SPEED)
    for speed in SPIRAL_SPEEDS:
        spiral = SpaceSpec.spiral(speed)
        tag = f"v{speed:g}"
        plans[f"spiral-null-{tag}"] = ExperimentPlan(f"spiral-null-{tag}", spiral, spiral, SPIRAL_SIZES, **common)
        plans[f"spiral-dtm-null-{tag}"] = ExperimentPlan(f"spiral-dtm-null-{tag}", spiral, spiral, SPIRAL_SIZES,
                                                         method=Method.DTM, **common)
        if speed == SPIRAL_REFERENCE_SPEED:
            continue
        # quantiles come from mu_v, the space compared against mu_10
        name = f"spiral-v{SPIRAL_REFERENCE_SPEED:g}-{tag}"
        plans[name] = ExperimentPlan(name, reference, spiral, SPIRAL_SIZES,
                                     calibrate_from=CalibrationSample.FROM_Y, **common)
        name = f"spiral-dtm-v{SPIRAL_REFERENCE_SPEED:g}-{tag}"
        plans[name] = ExperimentPlan(name, reference, spiral, SPIRAL_SIZES, method=Method.DTM,
                                     calibrate_from=CalibrationSample.FROM_Y, **common)
    return plans


def standard_plans(full=False, seed=0):
    """Named study designs: cap-disc family (full and independent statistics), trimming sweep, DTM, spirals."""
    reps = FULL_REPLICATIONS if full else DEFAULT_REPLICATIONS
    square = SpaceSpec.unit_square()
    plans = {}
    for radius in CAP_DISC_RADII:
        tag = f"r{radius:.3g}"
        cap = SpaceSpec.square_cap_disc(radius)
        common = dict(replications=reps, bootstrap_reps=reps, seed=seed)
        plans[f"dod-{tag}"] = ExperimentPlan(f"dod-{tag}", square, cap, (10, 50, 100, 250, 500, 1000), **common)
        plans[f"dod-ind-{tag}"] = ExperimentPlan(f"dod-ind-{tag}", square, cap, (100, 250, 500, 1000),
                                                 method=Method.DOD_INDEPENDENT, **common)
        for beta in TRIMMING_LEVELS:
            name = f"trim-b{beta:g}-{tag}"
            plans[name] = ExperimentPlan(name, square, cap, (250,), beta=beta, **common)
        plans[f"dtm-{tag}"] = ExperimentPlan(f"dtm-{tag}", square, cap, (500, 1000), method=Method.DTM,
                                             kappa=DEFAULT_KAPPA, **common)
    plans.update(_spiral_plans(reps, seed))
    return plans


def _as_record(item):
    if hasattr(item, "to_dict"):
        return item.to_dict()
    if isinstance(item, dict):
        return item
    return {"value": float(item)}


def write_records(records, out=None, fmt="json"):
    """Write records as a JSON array or as CSV with a header row, to a path or stdout."""
    rows = [_as_record(item) for item in records]
    if fmt == "json":
        text = json.dumps(rows, indent=2) + "\n"
    elif fmt == "csv":
        buffer = io.StringIO()
        fields = list(rows[0].keys()) if rows else ["value"]
        writer = csv.DictWriter(buffer, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        text = buffer.getvalue()
    else:
        raise ParameterError(f"Unknown output format: {fmt!r}")
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
    return text
