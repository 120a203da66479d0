import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, ROOT)

import numpy as np
import pytest

from helpers.log_helper import teardown_logging
from helpers.problem_helper.structured_problem import AffineConstraint, QuadraticConstraint, StructuredProblem

SAMPLES = os.path.join(ROOT, "samples")


def sample_path(name):
    return os.path.join(SAMPLES, name)


def one_dim(shift=0.0, box=3.0):
    """f(x) = (x - shift)^2, g(x) = x - 1."""
    return StructuredProblem(
        H=[[2.0]], c=[-2.0 * shift], r=shift ** 2,
        constraints=(AffineConstraint(a=[1.0], beta=1.0),),
        box_lo=[-box], box_hi=[box],
    )


def random_kkt_problem(rng, n, m, n_active):
    """Strongly convex quadratic with affine constraints and a planted KKT pair."""
    M = rng.standard_normal((n, n)) / np.sqrt(n)
    H = M @ M.T + 0.5 * np.eye(n)
    x_star = rng.standard_normal(n)
    lam_star = np.zeros(m)
    constraints = []
    grad_sum = np.zeros(n)
    for i in range(m):
        a = rng.standard_normal(n)
        if i < n_active:
            beta = float(a @ x_star)
            lam_star[i] = rng.uniform(0.5, 1.5)
            grad_sum += lam_star[i] * a
        else:
            beta = float(a @ x_star) + rng.uniform(0.5, 1.5)
        constraints.append(AffineConstraint(a=a, beta=beta))
    c = -H @ x_star - grad_sum
    radius = float(np.max(np.abs(x_star))) + 5.0
    problem = StructuredProblem(H=H, c=c, constraints=tuple(constraints),
                                box_lo=np.full(n, -radius), box_hi=np.full(n, radius))
    return problem, x_star, lam_star


def random_structured_problem(rng, n, m):
    """Convex quadratic objective with a mix of quadratic and affine constraints, feasible at 0."""
    M = rng.standard_normal((n, n)) / np.sqrt(n)
    H = M @ M.T + 0.1 * np.eye(n)
    constraints = []
    for i in range(m):
        if i % 2 == 0:
            P = rng.standard_normal((n, n)) / n
            constraints.append(QuadraticConstraint(A=P @ P.T, b=0.1 * rng.standard_normal(n),
                                                   d=-rng.uniform(0.5, 2.0)))
        else:
            constraints.append(AffineConstraint(a=rng.standard_normal(n), beta=rng.uniform(0.5, 2.0)))
    return StructuredProblem(H=H, c=rng.standard_normal(n), constraints=tuple(constraints),
                             box_lo=np.full(n, -3.0), box_hi=np.full(n, 3.0))


@pytest.fixture(autouse=True)
def _reset_console_logging():
    yield
    teardown_logging()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
