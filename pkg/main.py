import sys
import os
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from config import BASE_PATH, load_config
sys.path.insert(0, BASE_PATH)

import argparse
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from helpers import csv_exporter
from helpers.batch_processing_helper import load_bench_plan, run_experiment
from helpers.certificate_helper.certificate_operation import build_certificate
from helpers.exceptions import CertificateError, InputError, NumericError
from helpers.log_helper import setup_logging
from helpers.oracle_helper.assumption_estimator import check_declared_constants
from helpers.oracle_helper.reference_solution import resolve_reference
from helpers.problem_helper.problem_file import load_problem_file
from helpers.problem_helper.problem_spec import finite_diff_check
from helpers.solver_helper.solver_operation import load_solver_config, run
from tools.tools_checker import check_folders, output_path

log = logging.getLogger("cli")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MAX_ITERS = 2
EXIT_DIVERGED = 3
EXIT_CERTIFICATE = 4
EXIT_CONTRADICTED = 5

DEFAULT_D0 = 1.0

SUBCOMMANDS = ("solve", "certify", "bench", "check")


def get_app_version():
    config = load_config("app_config", {"name": "augpdg", "version": ""})
    return config.get("name", "augpdg"), config.get("version", "")


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    input_path: Optional[str]
    out_dir: str
    alpha: Optional[float] = None
    rho: Optional[float] = None
    max_iters: Optional[int] = None
    stop_tol: Optional[float] = None
    seed: Optional[int] = None
    verbosity: int = 0
    reference: Optional[str] = None
    d0: Optional[float] = None
    compat_a1: bool = False

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise InputError(f"unknown subcommand {self.subcommand!r}")
        for name in ("alpha", "rho", "d0"):
            value = getattr(self, name)
            if value is not None and not (np.isfinite(value) and value > 0):
                raise InputError(f"--{name} must be positive, got {value}")
        if self.stop_tol is not None and not self.stop_tol >= 0:
            raise InputError(f"--stop-tol must be nonnegative, got {self.stop_tol}")
        if self.max_iters is not None and self.max_iters < 1:
            raise InputError(f"--max-iters must be positive, got {self.max_iters}")

    def solver_config(self):
        return load_solver_config(alpha=self.alpha, rho=self.rho, max_iters=self.max_iters, stop_tol=self.stop_tol)


def _load(cfg):
    if not cfg.input_path:
        raise InputError("a problem FILE is required")
    problem = load_problem_file(cfg.input_path)
    return problem, problem.to_spec()


def _initial_point(spec, seed):
    if seed is None:
        return np.zeros(spec.n), np.zeros(spec.m)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return rng.standard_normal(spec.n), np.abs(rng.standard_normal(spec.m))


def _solve_summary(trace, solver_config):
    final = trace.final
    items = [
        ("status", trace.status),
        ("iterations", trace.iterations),
        ("alpha", solver_config.alpha),
        ("rho", solver_config.rho),
        ("left_box", trace.left_box),
        ("x", final.x),
        ("lambda", final.lam),
    ]
    items.extend(final.kkt.as_dict().items())
    if final.dist_to_ref is not None:
        items.append(("dist_to_ref", final.dist_to_ref))
    if trace.message:
        items.append(("message", trace.message))
    return items


def cmd_solve(cfg):
    problem, spec = _load(cfg)
    solver_config = cfg.solver_config()
    reference = None
    if cfg.reference:
        ref = resolve_reference(problem, spec, solver_config.rho, reference_path=cfg.reference)
        reference = (ref.x_star, ref.lambda_star)
    x0, lam0 = _initial_point(spec, cfg.seed)
    out_dir = check_folders(cfg.out_dir)
    try:
        trace = run(spec, solver_config, x0, lam0, reference=reference)
        code = EXIT_OK if trace.converged else EXIT_MAX_ITERS
    except NumericError as e:
        if e.trace is None:
            raise
        trace = e.trace
        code = EXIT_DIVERGED
        log.error(f"solve: {e}")
    csv_exporter.export_trace(trace, output_path(out_dir, "trace.csv"))
    csv_exporter.write_report(_solve_summary(trace, solver_config), output_path(out_dir, "summary.txt"))
    log.info(f"solve: {trace.status} after {trace.iterations} iterations, "
             f"largest KKT residual {trace.final.kkt.max_field:.3e}")
    return code


def cmd_certify(cfg):
    problem, spec = _load(cfg)
    solver_config = cfg.solver_config()
    rho = solver_config.rho
    ref = resolve_reference(problem, spec, rho, reference_path=cfg.reference, solver_config=solver_config)
    d0 = cfg.d0 if cfg.d0 is not None else ref.norm
    if cfg.d0 is None and d0 == 0.0:
        log.info(f"certify: reference pair is the origin, using d0 = {DEFAULT_D0:g}")
        d0 = DEFAULT_D0
    cert = build_certificate(
        spec, ref.x_star, ref.lambda_star, rho, d0,
        a1_variant="statement" if cfg.compat_a1 else None,
    )
    out_dir = check_folders(cfg.out_dir)
    items = cert.report_items()
    items.append(("reference_method", ref.method))
    csv_exporter.write_report(items, output_path(out_dir, "certificate.txt"))
    log.info(f"certify: gamma={cert.gamma:.6g} at alpha={cert.alpha:.6g}, C={cert.C:.6g}")
    return EXIT_OK


def cmd_bench(cfg):
    plan = load_bench_plan(cfg.input_path, master_seed=cfg.seed, alpha=cfg.alpha, rho=cfg.rho,
                           max_iters=cfg.max_iters, stop_tol=cfg.stop_tol)
    out_dir = check_folders(cfg.out_dir)

    def on_progress(done, total):
        log.debug(f"bench: {done}/{total} runs finished")

    report = run_experiment(plan, out_dir=out_dir, progress_callback=on_progress)
    failed = report.failed_runs
    if failed:
        for record in failed:
            log.warning(f"bench: run d0={record.d0_multiplier:g}x seed={record.seed} {record.status}")
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_check(cfg):
    problem, spec = _load(cfg)
    solver_config = cfg.solver_config()
    ref = resolve_reference(problem, spec, solver_config.rho, reference_path=cfg.reference,
                            solver_config=solver_config)
    seed = cfg.seed if cfg.seed is not None else 0
    checks = check_declared_constants(spec, ref.x_star, seed=seed)
    gradients = finite_diff_check(spec, ref.x_star)
    items = []
    for check in checks:
        verdict = "CONTRADICTED" if check.contradicted else "ok"
        items.append((check.name, f"declared {check.declared!r} estimated {check.estimated!r} "
                                  f"({check.kind} estimate) {verdict}"))
    items.append(("gradient_check_max_error", gradients.max_error))
    items.append(("reference_method", ref.method))
    out_dir = check_folders(cfg.out_dir)
    csv_exporter.write_report(items, output_path(out_dir, "check_report.txt"))
    contradicted = [c.name for c in checks if c.contradicted]
    if contradicted:
        log.error(f"check: declared constants contradicted by estimates: {', '.join(contradicted)}")
        return EXIT_CONTRADICTED
    log.info("check: every declared constant is consistent with the estimates")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "certify": cmd_certify,
    "bench": cmd_bench,
    "check": cmd_check,
}


def build_parser():
    name, version = get_app_version()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, help="stepsize (default from configs/solver_config.json)")
    common.add_argument("--rho", type=float, help="penalty parameter")
    common.add_argument("--max-iters", type=int, dest="max_iters", help="iteration cap")
    common.add_argument("--stop-tol", type=float, dest="stop_tol", help="stationarity + fixed-point gap threshold")
    common.add_argument("--seed", type=int, help="seed for initial points, estimators and the bench master seed")
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--reference", help="JSON file with x_star and lambda_star")
    common.add_argument("-v", "--verbose", action="count", default=0, help="debug output")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")

    parser = argparse.ArgumentParser(prog=name, description="Augmented primal-dual gradient solver and rate certificates.")
    parser.add_argument("--version", action="version", version=f"{name} {version}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("solve", parents=[common], help="run the iteration on a problem file").add_argument("file")
    certify = sub.add_parser("certify", parents=[common], help="build the rate certificate at a reference solution")
    certify.add_argument("file")
    certify.add_argument("--d0", type=float, help="initial distance (default ||(x*, lambda*)||, or 1 when that is zero)")
    certify.add_argument("--compat-a1", action="store_true", dest="compat_a1",
                         help="use a1 = 2l + 4 theta1^2 instead of 2l^2 + 4 theta1^2")
    sub.add_parser("bench", parents=[common], help="run the power-flow experiment").add_argument("file", nargs="?")
    sub.add_parser("check", parents=[common], help="compare declared constants with estimates").add_argument("file")
    return parser


def parse_cli(argv):
    args = build_parser().parse_args(argv)
    return CliConfig(
        subcommand=args.subcommand,
        input_path=args.file,
        out_dir=args.out,
        alpha=args.alpha,
        rho=args.rho,
        max_iters=args.max_iters,
        stop_tol=args.stop_tol,
        seed=args.seed,
        verbosity=-1 if args.quiet else args.verbose,
        reference=args.reference,
        d0=getattr(args, "d0", None),
        compat_a1=getattr(args, "compat_a1", False),
    )


def main(argv=None):
    try:
        cfg = parse_cli(argv)
    except InputError as e:
        setup_logging(0)
        log.error(str(e))
        return EXIT_INPUT
    except SystemExit as e:
        return EXIT_INPUT if e.code not in (0, None) else EXIT_OK
    setup_logging(cfg.verbosity)
    command = COMMANDS[cfg.subcommand]
    try:
        return command(cfg)
    except InputError as e:
        log.error(f"{cfg.subcommand}: {e}")
        return EXIT_INPUT
    except CertificateError as e:
        log.error(f"{cfg.subcommand}: {e}")
        return EXIT_CERTIFICATE
    except NumericError as e:
        log.error(f"{cfg.subcommand}: {e}")
        return EXIT_DIVERGED


if __name__ == '__main__':
    sys.exit(main())
