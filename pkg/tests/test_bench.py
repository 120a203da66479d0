import json
import math
import os

import numpy as np
import pytest

from helpers.batch_processing_helper import (
    BatchWorker,
    ExperimentPlan,
    contraction_rates,
    load_bench_plan,
    run_experiment,
)
from helpers.exceptions import InputError, NumericError
from helpers.oracle_helper.reference_solution import solve_powerflow_analytic
from helpers.powerflow_helper import build_paper_instance, build_powerflow_instance, sample_initial


def _plan(**overrides):
    values = dict(rho=0.1, alpha=0.1, d0_multipliers=(0.1,), seeds_per_case=3, max_iters=20000,
                  master_seed=20200101)
    values.update(overrides)
    return ExperimentPlan(**values)


@pytest.fixture(scope="module")
def bench_ref():
    instance = build_paper_instance()
    return instance, solve_powerflow_analytic(instance.S, instance.p_v, rho=0.1)


def test_bench_instance_layout():
    instance = build_paper_instance()
    assert instance.n == 10
    assert (instance.spec.n, instance.spec.m) == (20, 30)
    assert instance.S[4] == pytest.approx(2.025)
    assert instance.p_v[4] == pytest.approx(8.1)
    assert instance.radius == pytest.approx(10.8)


def test_powerflow_input_validation():
    with pytest.raises(InputError):
        build_powerflow_instance([])
    with pytest.raises(InputError):
        build_powerflow_instance([1.0, -2.0])
    with pytest.raises(InputError):
        build_powerflow_instance([1.0], p_v=[0.0])


@pytest.mark.parametrize("multiplier", [0.1, 5.0, 10.0])
def test_sample_initial_distance(bench_ref, multiplier):
    _, ref = bench_ref
    d0 = multiplier * ref.norm
    for seed in range(5):
        x0, lam0 = sample_initial(ref, d0, seed)
        assert np.all(lam0 >= 0.0)
        dist = np.sqrt(np.sum((x0 - ref.x_star) ** 2) + np.sum((lam0 - ref.lambda_star) ** 2))
        assert dist == pytest.approx(d0, rel=1e-9)


def test_sample_initial_is_seeded(bench_ref):
    _, ref = bench_ref
    a = sample_initial(ref, 1.0, 42)
    b = sample_initial(ref, 1.0, np.random.SeedSequence(42))
    c = sample_initial(ref, 1.0, 43)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    assert not np.array_equal(a[0], c[0])
    with pytest.raises(InputError):
        sample_initial(ref, 0.0, 1)


def test_plan_validation():
    with pytest.raises(InputError, match="positive"):
        _plan(d0_multipliers=(0.1, -1.0))
    with pytest.raises(InputError, match="distinct"):
        _plan(d0_multipliers=(5.0, 5.0))
    with pytest.raises(InputError):
        _plan(seeds_per_case=0)


def test_load_bench_plan_layers(tmp_path):
    default = load_bench_plan()
    assert default.d0_multipliers == (0.1, 5.0, 10.0)
    assert default.seeds_per_case == 10
    assert default.alpha == default.rho == 0.1

    path = tmp_path / "plan.json"
    path.write_text(json.dumps({"d0_multipliers": [0.1], "seeds_per_case": 2}))
    plan = load_bench_plan(str(path), alpha=None, master_seed=7)
    assert plan.d0_multipliers == (0.1,)
    assert plan.seeds_per_case == 2
    assert plan.alpha == 0.1
    assert plan.master_seed == 7

    path.write_text(json.dumps({"seeds": 2}))
    with pytest.raises(InputError, match="unknown keys: seeds"):
        load_bench_plan(str(path))


def test_contraction_rates():
    d = 0.5 ** np.arange(21)
    early, late = contraction_rates(d)
    assert early == pytest.approx(0.5)
    assert late == pytest.approx(0.5)
    assert all(math.isnan(r) for r in contraction_rates([1.0]))
    assert contraction_rates([0.0, 0.0, 0.0])[0] == 0.0
    assert contraction_rates([1.0, 2.0, np.inf])[1] == math.inf


def test_batch_worker_keeps_order():
    progress = []
    worker = BatchWorker([(i,) for i in range(7)], lambda i: i * i, workers=3,
                         progress_callback=lambda done, total: progress.append((done, total)))
    results, errors = worker.run()
    assert results == [i * i for i in range(7)]
    assert errors == [None] * 7
    assert len(progress) == 7
    assert progress[-1] == (7, 7)


def test_batch_worker_collects_errors_and_runs_every_task():
    def func(i):
        if i == 3:
            raise ValueError("boom")
        return i

    results, errors = BatchWorker([(i,) for i in range(5)], func, workers=2).run()
    assert results[3] is None
    assert isinstance(errors[3], ValueError)
    assert results[:3] == [0, 1, 2]
    assert results[4] == 4
    assert [e is None for e in errors] == [True, True, True, False, True]


def test_experiment_keeps_one_record_per_task_or_raises(monkeypatch):
    from helpers import batch_processing_helper

    real_run_case = batch_processing_helper.run_case

    def flaky(spec, ref, plan, i, j):
        if j == 1:
            raise NumericError("non-finite iterate")
        return real_run_case(spec, ref, plan, i, j)

    monkeypatch.setattr(batch_processing_helper, "run_case", flaky)
    with pytest.raises(NumericError, match="non-finite"):
        run_experiment(_plan(seeds_per_case=2, max_iters=50))


def test_small_regime_converges_to_oracle(bench_ref):
    _, ref = bench_ref
    report = run_experiment(_plan(seeds_per_case=10))
    assert len(report.records) == 10
    assert report.all_converged
    for record in report.records:
        assert record.status == "converged"
        assert record.final_kkt <= 1e-8
        assert np.max(np.abs(record.x_final - ref.x_star)) <= 1e-6
        assert record.norm_dist[0] == pytest.approx(0.1, rel=1e-9)
        assert record.late_rate < 1.0
        assert record.norm_dist.size == record.iters + 1
        tail = record.norm_dist[100:]
        assert np.all(np.diff(tail) <= 1e-12 * tail[:-1])
        # at alpha = rho = 0.1 the late contraction is slower than the early one
        assert record.early_rate < record.late_rate < 0.97


def test_failed_runs_do_not_stop_the_experiment():
    report = run_experiment(_plan(alpha=5.0, d0_multipliers=(0.1, 5.0), seeds_per_case=2, max_iters=2000))
    assert len(report.records) == 4
    assert not report.all_converged
    assert all(r.status == "diverged" for r in report.failed_runs)
    assert all(r.message for r in report.failed_runs)


def test_experiment_artifacts(tmp_path):
    out = tmp_path / "bench"
    out.mkdir()
    report = run_experiment(_plan(seeds_per_case=2), out_dir=str(out))
    assert sorted(os.listdir(out / "runs")) == ["run_0.1x_seed00.csv", "run_0.1x_seed01.csv"]
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0] == "d0_multiplier,seed,iters,final_kkt,early_rate,late_rate,status"
    assert len(summary) == 3
    assert summary[1].startswith("0.1,0,")
    assert summary[1].endswith(",converged")
    plot = (out / "plot_data.csv").read_text().splitlines()
    assert plot[0] == "d0_multiplier,seed,k,norm_dist"
    assert len(plot) == 1 + sum(r.norm_dist.size for r in report.records)
    run0 = (out / "runs" / "run_0.1x_seed00.csv").read_text().splitlines()
    assert run0[0] == "k,norm_dist"
    assert len(run0) == report.records[0].iters + 2


def test_experiment_is_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    first.mkdir()
    second.mkdir()
    run_experiment(_plan(seeds_per_case=2, workers=2), out_dir=str(first))
    run_experiment(_plan(seeds_per_case=2, workers=1), out_dir=str(second))
    assert (first / "summary.csv").read_bytes() == (second / "summary.csv").read_bytes()
    assert (first / "plot_data.csv").read_bytes() == (second / "plot_data.csv").read_bytes()
