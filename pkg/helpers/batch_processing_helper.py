import json
import logging
import math
import os
import threading
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from config import load_config
from helpers import csv_exporter
from helpers.exceptions import InputError, NumericError
from helpers.oracle_helper.reference_solution import solve_powerflow_analytic
from helpers.powerflow_helper import BENCH_S, build_powerflow_instance, sample_initial
from helpers.solver_helper.solver_operation import SolverConfig, run

log = logging.getLogger("bench")

BENCH_DEFAULTS = {
    "S": list(BENCH_S),
    "p_v_factor": 4.0,
    "box_radius": None,
    "rho": 0.1,
    "alpha": 0.1,
    "d0_multipliers": [0.1, 5.0, 10.0],
    "seeds_per_case": 10,
    "max_iters": 20000,
    "stop_tol": 1e-10,
    "master_seed": 20200101,
    "workers": 3,
}
RATE_WINDOW = 0.1


@dataclass(frozen=True)
class ExperimentPlan:
    rho: float
    alpha: float
    d0_multipliers: Tuple[float, ...]
    seeds_per_case: int
    max_iters: int
    master_seed: int
    S: Tuple[float, ...] = BENCH_S
    p_v_factor: float = 4.0
    box_radius: Optional[float] = None
    stop_tol: float = 1e-10
    workers: int = 3

    def __post_init__(self):
        mults = tuple(float(m) for m in self.d0_multipliers)
        if not mults or any(not (math.isfinite(m) and m > 0) for m in mults):
            raise InputError("d0_multipliers must be positive")
        if len(set(mults)) != len(mults):
            raise InputError("d0_multipliers must be distinct")
        if int(self.seeds_per_case) < 1 or int(self.max_iters) < 1 or int(self.workers) < 1:
            raise InputError("seeds_per_case, max_iters and workers must be positive")
        object.__setattr__(self, "d0_multipliers", mults)
        object.__setattr__(self, "S", tuple(float(s) for s in self.S))

    def solver_config(self):
        return SolverConfig(alpha=self.alpha, rho=self.rho, max_iters=self.max_iters,
                            stop_tol=self.stop_tol, record_every=1)


def load_bench_plan(path=None, **overrides):
    """Plan from configs/bench_config.json, then an optional plan file, then non-None overrides."""
    cfg = load_config("bench_config", BENCH_DEFAULTS)
    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read bench plan {path}: {e}") from e
        if not isinstance(data, dict):
            raise InputError(f"bench plan {path} must be a JSON object")
        unknown = sorted(set(data) - set(BENCH_DEFAULTS))
        if unknown:
            raise InputError(f"bench plan {path} has unknown keys: {', '.join(unknown)}")
        cfg.update(data)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentPlan(
            rho=float(cfg["rho"]), alpha=float(cfg["alpha"]),
            d0_multipliers=tuple(cfg["d0_multipliers"]),
            seeds_per_case=int(cfg["seeds_per_case"]), max_iters=int(cfg["max_iters"]),
            master_seed=int(cfg["master_seed"]), S=tuple(cfg["S"]),
            p_v_factor=float(cfg["p_v_factor"]), box_radius=cfg.get("box_radius"),
            stop_tol=float(cfg["stop_tol"]), workers=int(cfg["workers"]),
        )
    except (TypeError, ValueError) as e:
        raise InputError(f"invalid bench plan: {e}") from e


@dataclass(frozen=True, eq=False)
class RunRecord:
    d0_multiplier: float
    seed: int
    iters: int
    final_kkt: float
    early_rate: float
    late_rate: float
    status: str
    norm_dist: np.ndarray
    x_final: np.ndarray = field(repr=False, default=None)
    lam_final: np.ndarray = field(repr=False, default=None)
    message: str = ""

    @property
    def failed(self):
        return self.status != "converged"


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    plan: ExperimentPlan
    reference: object
    records: Tuple[RunRecord, ...]

    @property
    def failed_runs(self):
        return tuple(r for r in self.records if r.failed)

    @property
    def all_converged(self):
        return not self.failed_runs


def contraction_rates(norm_dist, window=RATE_WINDOW):
    """Geometric-mean per-step ratio over the first and last `window` share of the run."""
    d = np.asarray(norm_dist, dtype=float)
    K = d.size - 1
    if K < 1:
        return math.nan, math.nan
    w = max(1, int(K * window))

    def rate(start, end):
        if d[start] <= 0.0:
            return 0.0
        if not np.isfinite(d[end]):
            return math.inf
        return float((d[end] / d[start]) ** (1.0 / (end - start)))

    return rate(0, w), rate(K - w, K)


def run_case(spec, ref, plan, case_index, seed_index):
    """One solver run from a seeded start at d0 = multiplier * ||(x*, lambda*)||."""
    multiplier = plan.d0_multipliers[case_index]
    seq = np.random.SeedSequence([plan.master_seed, case_index, seed_index])
    x0, lam0 = sample_initial(ref, multiplier * ref.norm, seq)
    message = ""
    try:
        trace = run(spec, plan.solver_config(), x0, lam0, reference=(ref.x_star, ref.lambda_star))
    except NumericError as e:
        trace = e.trace
        message = str(e)
        log.warning(f"run d0={multiplier:g}x seed={seed_index} failed: {message}")
    norm_dist = np.array([e.dist_to_ref for e in trace.entries]) / ref.norm
    early, late = contraction_rates(norm_dist)
    final = trace.entries[-1]
    return RunRecord(
        d0_multiplier=multiplier, seed=seed_index, iters=trace.iterations,
        final_kkt=final.kkt.max_field, early_rate=early, late_rate=late,
        status=trace.status, norm_dist=norm_dist, x_final=final.x, lam_final=final.lam,
        message=message,
    )


class BatchWorker:
    """Runs independent tasks on a bounded set of threads; results keep task order."""

    def __init__(self, tasks, func, workers=3, progress_callback=None):
        self.tasks = list(tasks)
        self.func = func
        self.workers = max(1, int(workers))
        self.progress_callback = progress_callback
        self._lock = threading.Lock()
        self._completed = 0

    def run(self):
        results = [None] * len(self.tasks)
        errors = [None] * len(self.tasks)

        def task_wrapper(idx, task):
            try:
                result = self.func(*task)
                with self._lock:
                    results[idx] = result
            except Exception as e:
                with self._lock:
                    errors[idx] = e
            finally:
                with self._lock:
                    self._completed += 1
                    if self.progress_callback is not None:
                        self.progress_callback(self._completed, len(self.tasks))

        for start in range(0, len(self.tasks), self.workers):
            threads = []
            for idx in range(start, min(start + self.workers, len(self.tasks))):
                t = threading.Thread(target=task_wrapper, args=(idx, self.tasks[idx]))
                threads.append(t)
                t.start()
            for t in threads:
                t.join()
        return results, errors


def _run_file_name(record):
    return f"run_{record.d0_multiplier:g}x_seed{record.seed:02d}.csv"


def write_experiment(report, out_dir):
    runs_dir = os.path.join(out_dir, "runs")
    os.makedirs(runs_dir, exist_ok=True)
    for record in report.records:
        csv_exporter.export_run_distances(record, os.path.join(runs_dir, _run_file_name(record)))
    csv_exporter.export_summary(report.records, os.path.join(out_dir, "summary.csv"))
    csv_exporter.export_plot_data(report.records, os.path.join(out_dir, "plot_data.csv"))
    log.info(f"bench artifacts written to {out_dir}")


def run_experiment(plan, out_dir=None, progress_callback=None):
    instance = build_powerflow_instance(plan.S, p_v_factor=plan.p_v_factor, radius=plan.box_radius)
    spec = instance.spec
    ref = solve_powerflow_analytic(instance.S, instance.p_v, radius=instance.radius, rho=plan.rho)
    log.info(f"reference ({ref.method}): ||(x*, lambda*)|| = {ref.norm:.6g}, "
             f"KKT residual {ref.residual.max_field:.3e}")

    tasks = [
        (spec, ref, plan, i, j)
        for i in range(len(plan.d0_multipliers))
        for j in range(plan.seeds_per_case)
    ]
    worker = BatchWorker(tasks, run_case, workers=plan.workers, progress_callback=progress_callback)
    results, errors = worker.run()
    for error in errors:
        if error is not None:
            raise error
    report = ExperimentReport(plan=plan, reference=ref, records=tuple(results))

    failed = report.failed_runs
    log.info(f"{len(report.records) - len(failed)}/{len(report.records)} runs converged")
    if out_dir is not None:
        write_experiment(report, out_dir)
    return report
