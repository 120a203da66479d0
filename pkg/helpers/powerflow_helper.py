"""Decoupled power-flow dispatch instance and seeded initial points around its optimum.

Variables are x = (p_1..p_n, q_1..q_n). Constraints come in three blocks of n:
p_i^2 + q_i^2 - S_i <= 0, then -p_i <= 0, then p_i - p_v,i <= 0.
"""
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from config import load_config
from helpers.exceptions import InputError
from helpers.lagrangian_helper import project_nonneg
from helpers.problem_helper.structured_problem import AffineConstraint, QuadraticConstraint, StructuredProblem

log = logging.getLogger("bench")

BENCH_S = (2.7, 1.35, 2.7, 1.35, 2.025, 2.025, 2.7, 2.7, 1.35, 2.025)
MAX_SAMPLE_ATTEMPTS = 100


@dataclass(frozen=True, eq=False)
class PowerFlowInstance:
    n: int
    S: np.ndarray
    p_v: np.ndarray
    radius: float
    problem: StructuredProblem

    @cached_property
    def spec(self):
        return self.problem.to_spec()


def build_powerflow_instance(S, p_v=None, radius=None, p_v_factor=4.0):
    S = np.atleast_1d(np.asarray(S, dtype=float))
    if S.ndim != 1 or S.size == 0 or not np.all(np.isfinite(S)) or np.any(S <= 0):
        raise InputError("S must be a nonempty vector of positive reals")
    n = S.size
    p_v = p_v_factor * S if p_v is None else np.broadcast_to(np.asarray(p_v, dtype=float), (n,)).copy()
    if not np.all(np.isfinite(p_v)) or np.any(p_v <= 0):
        raise InputError("p_v must be positive")
    if radius is None:
        radius = float(max(np.max(p_v), np.sqrt(np.max(S))))
    if not radius > 0:
        raise InputError(f"box radius must be positive, got {radius}")

    # f = sum (p_i - p_v,i)^2 + q_i^2
    H = 2.0 * np.eye(2 * n)
    c = np.concatenate([-2.0 * p_v, np.zeros(n)])
    r = float(p_v @ p_v)

    constraints = []
    for i in range(n):
        A = np.zeros((2 * n, 2 * n))
        A[i, i] = A[n + i, n + i] = 2.0
        constraints.append(QuadraticConstraint(A=A, b=np.zeros(2 * n), d=-S[i]))
    for i in range(n):
        a = np.zeros(2 * n)
        a[i] = -1.0
        constraints.append(AffineConstraint(a=a, beta=0.0))
    for i in range(n):
        a = np.zeros(2 * n)
        a[i] = 1.0
        constraints.append(AffineConstraint(a=a, beta=p_v[i]))

    problem = StructuredProblem(
        H=H, c=c, constraints=tuple(constraints), r=r,
        box_lo=np.full(2 * n, -radius), box_hi=np.full(2 * n, radius),
        metadata={"type": "powerflow", "S": S.tolist(), "p_v": p_v.tolist(), "radius": radius},
        name=f"powerflow-{n}",
    )
    return PowerFlowInstance(n=n, S=S, p_v=p_v, radius=float(radius), problem=problem)


def build_paper_instance():
    cfg = load_config("bench_config", {"S": list(BENCH_S), "p_v_factor": 4.0, "box_radius": None})
    return build_powerflow_instance(cfg["S"], p_v_factor=float(cfg["p_v_factor"]), radius=cfg.get("box_radius"))


def sample_initial(ref, d0, seed):
    """Random (x0, lambda0) at stacked distance d0 from (x*, lambda*) with lambda0 >= 0.

    The direction is uniform on the sphere; after clamping lambda0 the x-block is
    rescaled to restore the distance. A direction lying entirely in clamped
    multiplier components is redrawn from the next substream.
    """
    if not (np.isfinite(d0) and d0 > 0):
        raise InputError(f"d0 must be positive, got {d0}")
    x_star = np.asarray(ref.x_star, dtype=float)
    lambda_star = np.asarray(ref.lambda_star, dtype=float)
    n = x_star.size
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    for attempt, child in enumerate(seq.spawn(MAX_SAMPLE_ATTEMPTS)):
        rng = np.random.default_rng(child)
        u = rng.standard_normal(n + lambda_star.size)
        u *= d0 / np.linalg.norm(u)
        lam0 = project_nonneg(lambda_star + u[n:])
        e_lam = lam0 - lambda_star
        remaining = d0 ** 2 - e_lam @ e_lam
        e_x = u[:n]
        norm_x = np.linalg.norm(e_x)
        if norm_x == 0.0:
            if remaining <= (1e-9 * d0) ** 2:
                return x_star.copy(), lam0
            log.debug(f"sample attempt {attempt} degenerate, redrawing")
            continue
        x0 = x_star + e_x * (np.sqrt(max(remaining, 0.0)) / norm_x)
        return x0, lam0
    raise InputError(f"could not sample an initial point at distance {d0} in {MAX_SAMPLE_ATTEMPTS} attempts")
