# dod_cli.py

import argparse
import logging
import sys
from pathlib import Path

from analytic import MonteCarloKernel, disc_euclid_density, gamma_square, square_supnorm_law
from bench import (
    DEFAULT_REPLICATIONS,
    FULL_REPLICATIONS,
    PDB_N_S_DIVISOR,
    ExperimentPlan,
    Method,
    compare_pdb,
    run_alternative_distribution,
    run_bootstrap_draws,
    run_null_distribution,
    run_power,
    standard_plans,
    write_records,
)
from bootstrap import DEFAULT_BOOTSTRAP_REPS, BootstrapConfig, CalibrationSample, ResampleRule, dod_test_bootstrap
from dod import DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_P, dod_independent, dod_statistic
from dtm import DEFAULT_KAPPA, dtm_test
from limit import DEFAULT_GRID_SIZE, DEFAULT_LIMIT_DRAWS, build_limit_grid, sample_xi, write_column
from spaces import SpaceSpec, child_seed, sample

logger = logging.getLogger("dod_cli")

LIMIT_LAWS = ("square-supnorm", "disc-euclid")


def parse_space(value):
    """A SpaceSpec from inline JSON or from a path to a .json file."""
    path = Path(value)
    if path.suffix.lower() == ".json" and path.exists():
        return SpaceSpec.from_json(path.read_text())
    return SpaceSpec.from_json(value)


def _emit(args, records):
    write_records(records, args.out, args.format)


def _emit_column(args, values):
    if args.format == "csv":
        write_column(values, args.out, header="value")
    else:
        write_records(values, args.out, "json")


def _two_samples(args):
    x = sample(args.space_a, args.n, child_seed(args.seed, 0))
    y = sample(args.space_b, args.m or args.n, child_seed(args.seed, 1))
    return x, y


def cmd_sample(args):
    points = sample(args.space_a, args.n, args.seed)
    if args.format == "csv":
        text = points.to_csv()
        if args.out is None:
            sys.stdout.write(text)
        else:
            Path(args.out).write_text(text)
        return
    records = [dict(zip("xyz", map(float, row))) for row in points.points]
    _emit(args, records)


def cmd_dod(args):
    x, y = _two_samples(args)
    log_stage("DoD Statistic", x.n, y.n)
    if args.method == Method.DOD_INDEPENDENT.value:
        result = dod_independent(x, y, args.beta, args.p)
    else:
        result = dod_statistic(x, y, args.beta, args.p)
    _emit(args, [result])


def cmd_test(args):
    x, y = _two_samples(args)
    log_stage("Bootstrap DoD Test", x.n, y.n)
    cfg = BootstrapConfig(n_b=args.n_b or x.n, replications=args.bootstrap_reps, beta=args.beta, seed=args.seed,
                          p=args.p)
    calibration = CalibrationSample.FROM_Y if args.calibrate_from_y else CalibrationSample.FROM_X
    independent = args.method == Method.DOD_INDEPENDENT.value
    outcome = dod_test_bootstrap(x, y, cfg, args.alpha, calibration, independent)
    _emit(args, [outcome])


def _plan_from_args(args):
    if args.plan:
        return ExperimentPlan.from_json(Path(args.plan).read_text())
    if args.preset:
        plans = standard_plans(full=args.full, seed=args.seed)
        if args.preset not in plans:
            raise SystemExit(f"Unknown preset {args.preset!r}; choose from {', '.join(sorted(plans))}")
        return plans[args.preset]
    if args.space_a is None or args.space_b is None or not args.n_list:
        raise SystemExit("power needs --plan, --preset, or --space-a/--space-b with --n")
    reps = FULL_REPLICATIONS if args.full else args.reps
    boot_reps = FULL_REPLICATIONS if args.full else args.bootstrap_reps
    calibrate_from = CalibrationSample.FROM_Y if args.calibrate_from_y else CalibrationSample.FROM_X
    return ExperimentPlan(args.name, args.space_a, args.space_b, tuple(args.n_list), beta=args.beta,
                          alpha=args.alpha, replications=reps, bootstrap_reps=boot_reps,
                          resample_rule=args.resample_rule, method=args.method, seed=args.seed, kappa=args.kappa,
                          p=args.p, n_b=args.n_b, calibrate_from=calibrate_from)


def cmd_power(args):
    plan = _plan_from_args(args)
    _emit(args, run_power(plan, workers=args.workers))


def cmd_null_dist(args):
    reps = FULL_REPLICATIONS if args.full else args.reps
    if args.space_b is None:
        values = run_null_distribution(args.space_a, args.n, args.beta, reps, args.seed)
    else:
        values = run_alternative_distribution(args.space_a, args.space_b, args.n, args.beta, reps, args.seed)
    _emit_column(args, values)


def cmd_bootstrap_draws(args):
    draws = run_bootstrap_draws(args.space_a, args.n, args.beta, args.bootstrap_reps, args.seed, args.resample_rule,
                                args.p, args.method == Method.DOD_INDEPENDENT.value)
    _emit_column(args, draws)


def cmd_limit_sample(args):
    logger.info("=== Limit Law Draws: %s ===", args.law)
    if args.law == "square-supnorm":
        law, kernel = square_supnorm_law(), gamma_square
    else:
        law = disc_euclid_density()
        kernel = MonteCarloKernel.from_space(SpaceSpec.disc(0.5), args.mc_draws, args.mc_draws, child_seed(args.seed, 1))
    grid = build_limit_grid(law, kernel, args.beta, args.grid_size)
    _emit_column(args, sample_xi(grid, args.draws, child_seed(args.seed, 0)))


def cmd_dtm_test(args):
    x, y = _two_samples(args)
    log_stage("DTM Test", x.n, y.n)
    outcome = dtm_test(x, y, args.kappa, args.n_s, args.alpha, args.bootstrap_reps, args.seed)
    _emit(args, [outcome])


def cmd_pdb_compare(args):
    reps = FULL_REPLICATIONS if args.full else args.reps
    rows = compare_pdb(args.pdb_a, args.pdb_b, list(args.n_list), args.beta, args.alpha, reps, args.seed,
                       args.bootstrap_reps, args.resample_rule, args.p, args.method, args.kappa, args.n_s_divisor)
    _emit(args, rows)


def log_stage(title, n, m):
    logger.info("=== %s ===", title)
    logger.info("Sample sizes: n=%d, m=%d", n, m)


def _add_output(parser):
    parser.add_argument("--out", default=None, help="output file (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--seed", type=int, required=True)


def _add_pair(parser, need_b=True):
    parser.add_argument("--space-a", type=parse_space, required=True, help="SpaceSpec as JSON or .json path")
    if need_b:
        parser.add_argument("--space-b", type=parse_space, required=True)
    parser.add_argument("--n", type=int, required=True)
    if need_b:
        parser.add_argument("--m", type=int, default=None, help="size of the second sample (default: n)")


def build_parser():
    parser = argparse.ArgumentParser(prog="dod_cli", description="Distribution-of-distances tests for metric measure spaces")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true")
    verbosity.add_argument("--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a point sample")
    _add_pair(p, need_b=False)
    _add_output(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("dod", help="DoD statistic of two samples")
    _add_pair(p)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--p", type=float, default=DEFAULT_P)
    p.add_argument("--method", choices=(Method.DOD.value, Method.DOD_INDEPENDENT.value), default=Method.DOD.value)
    _add_output(p)
    p.set_defaults(func=cmd_dod)

    p = sub.add_parser("test", help="bootstrap DoD test")
    _add_pair(p)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--p", type=float, default=DEFAULT_P)
    p.add_argument("--n-b", type=int, default=None)
    p.add_argument("--bootstrap-reps", type=int, default=DEFAULT_BOOTSTRAP_REPS)
    p.add_argument("--method", choices=(Method.DOD.value, Method.DOD_INDEPENDENT.value), default=Method.DOD.value)
    p.add_argument("--calibrate-from-y", action="store_true")
    _add_output(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("power", help="power study")
    p.add_argument("--plan", default=None, help="ExperimentPlan JSON file")
    p.add_argument("--preset", default=None, help="name from the standard plans")
    p.add_argument("--name", default="cli")
    p.add_argument("--space-a", type=parse_space, default=None)
    p.add_argument("--space-b", type=parse_space, default=None)
    p.add_argument("--n", dest="n_list", type=int, nargs="+", default=None)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--reps", type=int, default=DEFAULT_REPLICATIONS)
    p.add_argument("--bootstrap-reps", type=int, default=DEFAULT_BOOTSTRAP_REPS)
    p.add_argument("--method", choices=[m.value for m in Method], default=Method.DOD.value)
    p.add_argument("--p", type=float, default=DEFAULT_P)
    p.add_argument("--n-b", type=int, default=None, help="fixed bootstrap resample size")
    p.add_argument("--resample-rule", choices=[r.value for r in ResampleRule], default=ResampleRule.N_OUT_OF_N.value)
    p.add_argument("--calibrate-from-y", action="store_true", help="bootstrap from the second space")
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--full", action="store_true", help="use the full replication counts")
    _add_output(p)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("null-dist", help="scaled DoD under the null")
    _add_pair(p, need_b=False)
    p.add_argument("--space-b", type=parse_space, default=None, help="second space (default: same as --space-a)")
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--reps", type=int, default=DEFAULT_REPLICATIONS)
    p.add_argument("--full", action="store_true")
    _add_output(p)
    p.set_defaults(func=cmd_null_dist)

    p = sub.add_parser("bootstrap-draws", help="bootstrap draws of the scaled statistic")
    _add_pair(p, need_b=False)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--p", type=float, default=DEFAULT_P)
    p.add_argument("--bootstrap-reps", type=int, default=DEFAULT_BOOTSTRAP_REPS)
    p.add_argument("--resample-rule", choices=[r.value for r in ResampleRule], default=ResampleRule.N_OUT_OF_N.value)
    p.add_argument("--method", choices=(Method.DOD.value, Method.DOD_INDEPENDENT.value), default=Method.DOD.value)
    _add_output(p)
    p.set_defaults(func=cmd_bootstrap_draws)

    p = sub.add_parser("limit-sample", help="draws of the limit law")
    p.add_argument("--law", choices=LIMIT_LAWS, default="square-supnorm")
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--draws", type=int, default=DEFAULT_LIMIT_DRAWS)
    p.add_argument("--mc-draws", type=int, default=1000, help="outer/inner draws of the Monte Carlo kernel")
    _add_output(p)
    p.set_defaults(func=cmd_limit_sample)

    p = sub.add_parser("dtm-test", help="distance-to-measure test")
    _add_pair(p)
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--n-s", type=int, default=None)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--bootstrap-reps", type=int, default=DEFAULT_BOOTSTRAP_REPS)
    _add_output(p)
    p.set_defaults(func=cmd_dtm_test)

    p = sub.add_parser("pdb-compare", help="DoD test between two protein structures")
    p.add_argument("--pdb-a", required=True)
    p.add_argument("--pdb-b", required=True)
    p.add_argument("--n", dest="n_list", type=int, nargs="+", required=True)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--reps", type=int, default=DEFAULT_REPLICATIONS)
    p.add_argument("--bootstrap-reps", type=int, default=DEFAULT_BOOTSTRAP_REPS)
    p.add_argument("--method", choices=[m.value for m in Method], default=Method.DOD.value)
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--n-s-divisor", type=int, default=PDB_N_S_DIVISOR, help="DTM queries per sample are n // divisor")
    p.add_argument("--resample-rule", choices=[r.value for r in ResampleRule], default=ResampleRule.N_OUT_OF_N.value)
    p.add_argument("--p", type=float, default=DEFAULT_P)
    p.add_argument("--full", action="store_true")
    _add_output(p)
    p.set_defaults(func=cmd_pdb_compare)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as e:
        logger.exception("%s failed: %s", args.command, e)
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
