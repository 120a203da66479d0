import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from config import load_config
from helpers.exceptions import DivergenceError, InputError, NumericError
from helpers.lagrangian_helper import shifted_multipliers
from helpers.problem_helper.problem_spec import as_vector, eval_constraints, eval_objective, in_box
from helpers.solver_helper.kkt_residual import KktResidual, residual_from_evaluations

log = logging.getLogger("solver")

SOLVER_DEFAULTS = {
    "alpha": 0.1,
    "rho": 0.1,
    "max_iters": 100000,
    "stop_tol": 1e-10,
    "record_every": 1,
    "divergence_limit": 1e12,
}


@dataclass(frozen=True)
class SolverConfig:
    alpha: float
    rho: float
    max_iters: int = 100000
    stop_tol: float = 1e-10
    record_every: int = 1
    divergence_limit: float = 1e12

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise InputError(f"alpha must be positive, got {self.alpha}")
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise InputError(f"rho must be positive, got {self.rho}")
        if int(self.max_iters) < 1 or int(self.record_every) < 1:
            raise InputError("max_iters and record_every must be positive integers")
        if not self.stop_tol >= 0:
            raise InputError(f"stop_tol must be nonnegative, got {self.stop_tol}")
        if self.alpha > self.rho:
            log.warning(f"alpha={self.alpha:g} exceeds rho={self.rho:g}: multipliers may turn negative")


def load_solver_config(**overrides):
    """Solver defaults from configs/solver_config.json; non-None overrides win."""
    cfg = load_config("solver_config", SOLVER_DEFAULTS)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return SolverConfig(
        alpha=float(cfg["alpha"]),
        rho=float(cfg["rho"]),
        max_iters=int(cfg["max_iters"]),
        stop_tol=float(cfg["stop_tol"]),
        record_every=int(cfg["record_every"]),
        divergence_limit=float(cfg["divergence_limit"]),
    )


@dataclass(frozen=True, eq=False)
class IterateState:
    k: int
    x: np.ndarray
    lam: np.ndarray


@dataclass(frozen=True, eq=False)
class TraceEntry:
    k: int
    x: np.ndarray
    lam: np.ndarray
    fixed_point_residual: float
    kkt: KktResidual
    dist_to_ref: Optional[float] = None
    lyapunov: Optional[float] = None
    in_box: bool = True


@dataclass(frozen=True, eq=False)
class Trace:
    entries: Tuple[TraceEntry, ...]
    status: str
    iterations: int
    left_box: bool = False
    message: str = ""

    @property
    def final(self):
        return self.entries[-1]

    @property
    def converged(self):
        return self.status == "converged"


@dataclass
class _Evaluation:
    grad_f: np.ndarray
    g: np.ndarray
    jac: np.ndarray


def _evaluate(p, x, k):
    _, grad_f = eval_objective(p, x)
    g, jac = eval_constraints(p, x)
    if not (np.all(np.isfinite(grad_f)) and np.all(np.isfinite(g)) and np.all(np.isfinite(jac))):
        raise NumericError(f"oracle returned non-finite values at iteration {k}", iteration=k)
    return _Evaluation(grad_f=grad_f, g=g, jac=jac)


def _advance(ev, x, lam, c):
    """One simultaneous update from oracle values taken at the old (x, lam)."""
    w = shifted_multipliers(ev.g, lam, c.rho)
    x_next = x - c.alpha * (ev.grad_f + ev.jac.T @ w)
    ratio = c.alpha / c.rho
    # (1 - alpha/rho) lam + (alpha/rho) w is lam + alpha * (w - lam) / rho; this form stays >= 0
    lam_next = (1.0 - ratio) * lam + ratio * w
    return x_next, lam_next


def step(p, s, c):
    x = as_vector(s.x, p.n, "x")
    lam = as_vector(s.lam, p.m, "lambda")
    x_next, lam_next = _advance(_evaluate(p, x, s.k), x, lam, c)
    if not (np.all(np.isfinite(x_next)) and np.all(np.isfinite(lam_next))):
        raise NumericError(f"non-finite iterate produced at iteration {s.k}", iteration=s.k)
    return IterateState(k=s.k + 1, x=x_next, lam=lam_next)


def run(p, c, x0, lambda0, reference=None, certificate=None):
    """Iterate from (x0, lambda0) until the stopping rule, max_iters or divergence.

    `reference` is an optional (x*, lam*) pair for distance tracking; a
    `certificate` adds the Lyapunov value of every recorded iterate and supplies
    the reference when none is given.
    """
    x = as_vector(x0, p.n, "x0").copy()
    lam = as_vector(lambda0, p.m, "lambda0").copy()
    if np.any(lam < 0):
        raise InputError(f"lambda0 must be nonnegative, smallest entry is {lam.min():.6g}")
    if reference is None and certificate is not None:
        reference = (certificate.x_star, certificate.lambda_star)
    if reference is not None:
        x_ref = as_vector(reference[0], p.n, "reference x")
        lam_ref = as_vector(reference[1], p.m, "reference lambda")

    entries = []
    left_box = False

    def record(k, x, lam, kkt, inside):
        dist = None
        if reference is not None:
            dist = float(np.sqrt(np.sum((x - x_ref) ** 2) + np.sum((lam - lam_ref) ** 2)))
        lyap = certificate.lyapunov(x, lam) if certificate is not None else None
        entries.append(TraceEntry(k=k, x=x, lam=lam, fixed_point_residual=kkt.fixed_point_gap,
                                  kkt=kkt, dist_to_ref=dist, lyapunov=lyap, in_box=inside))

    def partial(status, k, message=""):
        return Trace(entries=tuple(entries), status=status, iterations=k, left_box=left_box, message=message)

    k = 0
    while True:
        try:
            ev = _evaluate(p, x, k)
        except NumericError as e:
            raise NumericError(str(e), iteration=k, trace=partial("numeric_error", k)) from e
        kkt = residual_from_evaluations(ev.grad_f, ev.g, ev.jac, lam, c.rho)
        inside = in_box(p, x)
        if not inside and not left_box:
            left_box = True
            log.warning(f"iterate left the declared box at k={k}: declared constants may not hold")
        done = kkt.stationarity + kkt.fixed_point_gap <= c.stop_tol
        if done or k >= c.max_iters or k % c.record_every == 0:
            record(k, x, lam, kkt, inside)
        if done:
            log.debug(f"converged at k={k}")
            return partial("converged", k)
        if k >= c.max_iters:
            log.info(f"stopped at max_iters={c.max_iters}, residual {kkt.stationarity + kkt.fixed_point_gap:.3e}")
            return partial("max_iters", k)
        x, lam = _advance(ev, x, lam, c)
        k += 1
        x_norm, lam_norm = np.linalg.norm(x), np.linalg.norm(lam)
        if not (x_norm <= c.divergence_limit and lam_norm <= c.divergence_limit):
            message = (f"iterate norm exceeded {c.divergence_limit:g} at k={k} "
                       f"(|x|={x_norm:.3e}, |lambda|={lam_norm:.3e}); alpha={c.alpha:g} is likely above "
                       f"the admissible stepsize bound, see `augpdg certify`")
            log.warning(message)
            raise DivergenceError(message, iteration=k, trace=partial("diverged", k, message))
