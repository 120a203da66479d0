"""Independent reference KKT pairs: closed form for power-flow buses, grid search otherwise."""
import itertools
import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from helpers.exceptions import InputError, NumericError
from helpers.lagrangian_helper import project_nonneg
from helpers.problem_helper.problem_spec import as_vector, eval_constraints, eval_objective
from helpers.solver_helper.kkt_residual import KktResidual, kkt_residual

log = logging.getLogger("oracle")

GRID_MAX_DIM = 3
NEAR_ACTIVE = 1e-5
POLISH_ACTIVE = 1e-6
FD_STEP = 1e-6


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    x_star: np.ndarray
    lambda_star: np.ndarray
    method: str
    residual: KktResidual

    @property
    def norm(self):
        return float(np.sqrt(self.x_star @ self.x_star + self.lambda_star @ self.lambda_star))


def _make_reference(p, x, lam, method, rho):
    x = np.asarray(x, dtype=float)
    lam = project_nonneg(lam)
    residual = kkt_residual(p, x, lam, rho)
    log.debug(f"{method} reference: largest KKT residual {residual.max_field:.3e}")
    return ReferenceSolution(x_star=x, lambda_star=lam, method=method, residual=residual)


def solve_powerflow_analytic(S, p_v, radius=None, rho=1.0):
    """Closed-form optimum of the decoupled power-flow problem.

    Needs p_v > sqrt(S) on every bus; buses where the disk does not bind are
    solved one at a time with the grid oracle.
    """
    from helpers.powerflow_helper import build_powerflow_instance

    S = np.asarray(S, dtype=float)
    p_v = np.asarray(p_v, dtype=float)
    instance = build_powerflow_instance(S, p_v=p_v, radius=radius)
    n = instance.n
    root = np.sqrt(S)
    binding = p_v > root
    x = np.zeros(2 * n)
    lam = np.zeros(3 * n)
    x[:n] = np.where(binding, root, p_v)
    lam[:n] = np.where(binding, (p_v - root) / root, 0.0)
    method = "analytic"
    if not np.all(binding):
        log.info(f"disk constraint slack on buses {np.flatnonzero(~binding).tolist()}, using grid oracle")
        method = "grid"
        for i in np.flatnonzero(~binding):
            bus = build_powerflow_instance(S[i:i + 1], p_v=p_v[i:i + 1], radius=instance.radius)
            ref = grid_solve(bus.spec, bus.spec.box, rho=rho)
            x[i], x[n + i] = ref.x_star
            lam[i], lam[n + i], lam[2 * n + i] = ref.lambda_star
    return _make_reference(instance.spec, x, lam, method, rho)


def _grid_points(lo, hi, resolution):
    axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
    return itertools.product(*axes)


def _fit_multipliers(p, x):
    """Least-squares stationarity fit on near-active constraints, zero elsewhere."""
    _, grad_f = eval_objective(p, x)
    g, jac = eval_constraints(p, x)
    lam = np.zeros(p.m)
    near = np.flatnonzero(np.abs(g) <= NEAR_ACTIVE)
    if near.size:
        sol, *_ = np.linalg.lstsq(jac[near].T, -grad_f, rcond=None)
        lam[near] = project_nonneg(sol)
    return lam


def _hessian_of_lagrangian(p, x, lam):
    """Central differences of the Lagrangian gradient."""
    def grad(z):
        _, gf = eval_objective(p, z)
        _, jac = eval_constraints(p, z)
        return gf + jac.T @ lam

    n = p.n
    H = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = FD_STEP
        H[:, j] = (grad(x + e) - grad(x - e)) / (2 * FD_STEP)
    return 0.5 * (H + H.T)


def _polish(p, x, lam, rounds=8):
    """Newton steps on the KKT system of the active set found at x."""
    g, _ = eval_constraints(p, x)
    active = np.flatnonzero(np.abs(g) <= POLISH_ACTIVE)
    lam_a = lam[active].copy()
    for _ in range(rounds):
        full = np.zeros(p.m)
        full[active] = lam_a
        _, grad_f = eval_objective(p, x)
        g, jac = eval_constraints(p, x)
        J_a = jac[active]
        F = np.concatenate([grad_f + J_a.T @ lam_a, g[active]])
        if np.linalg.norm(F) < 1e-15:
            break
        k = active.size
        K = np.zeros((p.n + k, p.n + k))
        K[:p.n, :p.n] = _hessian_of_lagrangian(p, x, full)
        K[:p.n, p.n:] = J_a.T
        K[p.n:, :p.n] = J_a
        delta, *_ = np.linalg.lstsq(K, -F, rcond=None)
        x = x + delta[:p.n]
        lam_a = lam_a + delta[p.n:]
    lam = np.zeros(p.m)
    lam[active] = lam_a
    return x, lam


def grid_solve(p, box=None, resolution=41, rho=1.0):
    """Brute-force reference for n <= 3: feasible grid minimum, SLSQP refinement, KKT polish."""
    box = box if box is not None else p.box
    if box is None:
        raise InputError("grid oracle needs a box")
    if p.n > GRID_MAX_DIM:
        raise InputError(f"grid oracle supports n <= {GRID_MAX_DIM}, got n = {p.n}")
    if resolution < 2:
        raise InputError(f"resolution must be at least 2, got {resolution}")
    lo = as_vector(box[0], p.n, "box lo")
    hi = as_vector(box[1], p.n, "box hi")

    best, best_value = None, np.inf
    for point in _grid_points(lo, hi, resolution):
        x = np.array(point)
        g, _ = eval_constraints(p, x)
        if np.any(g > 0):
            continue
        value, _ = eval_objective(p, x)
        if value < best_value:
            best, best_value = x, value
    if best is None:
        raise InputError(f"no feasible point on the {resolution}^{p.n} grid")

    constraints = [{
        "type": "ineq",
        "fun": lambda z: -eval_constraints(p, z)[0],
        "jac": lambda z: -eval_constraints(p, z)[1],
    }]
    res = minimize(
        lambda z: eval_objective(p, z)[0], best, method="SLSQP",
        jac=lambda z: eval_objective(p, z)[1],
        constraints=constraints, bounds=list(zip(lo, hi)),
        options={"ftol": 1e-15, "maxiter": 500},
    )
    x = res.x if np.all(np.isfinite(res.x)) else best
    if not res.success:
        log.debug(f"SLSQP refinement: {res.message}")

    lam = _fit_multipliers(p, x)
    x_pol, lam_pol = _polish(p, x, lam)
    candidate = _make_reference(p, x_pol, lam_pol, "grid", rho)
    fallback = _make_reference(p, x, lam, "grid", rho)
    g_pol, _ = eval_constraints(p, candidate.x_star)
    if np.all(g_pol <= POLISH_ACTIVE) and candidate.residual.max_field <= fallback.residual.max_field:
        return candidate
    return fallback


def load_reference_file(p, path, rho=1.0):
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        x = as_vector(data["x_star"], p.n, "x_star")
        lam = as_vector(data["lambda_star"], p.m, "lambda_star")
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise InputError(f"cannot read reference file {path}: {e}") from e
    return ReferenceSolution(x_star=x, lambda_star=lam, method="file", residual=kkt_residual(p, x, lam, rho))


def resolve_reference(problem, spec, rho, reference_path=None, solver_config=None):
    """Reference pair for `problem`: file, closed form, grid search or a converged solve, in that order."""
    if reference_path:
        return load_reference_file(spec, reference_path, rho)
    meta = getattr(problem, "metadata", None) or {}
    if meta.get("type") == "powerflow":
        return solve_powerflow_analytic(meta["S"], meta["p_v"], radius=meta.get("radius"), rho=rho)
    if spec.n <= GRID_MAX_DIM and spec.box is not None:
        return grid_solve(spec, spec.box, rho=rho)

    from helpers.solver_helper.solver_operation import load_solver_config, run

    config = solver_config or load_solver_config(rho=rho)
    log.info(f"no closed form or grid oracle for n = {spec.n}, solving with alpha={config.alpha:g}")
    trace = run(spec, config, np.zeros(spec.n), np.zeros(spec.m))
    if not trace.converged:
        raise NumericError(f"reference solve stopped with status {trace.status} after {trace.iterations} iterations")
    final = trace.final
    return ReferenceSolution(x_star=final.x, lambda_star=final.lam, method="solve", residual=final.kkt)
