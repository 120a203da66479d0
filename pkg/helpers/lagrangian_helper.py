"""Augmented Lagrangian L(x, lam) = f(x) + sum_i ([rho*g_i(x) + lam_i]_+^2 - lam_i^2) / (2*rho)."""
from dataclasses import dataclass

import numpy as np

from helpers.exceptions import InputError
from helpers.problem_helper.problem_spec import as_vector, eval_constraints, eval_objective


@dataclass(frozen=True)
class Penalty:
    rho: float

    def __post_init__(self):
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise InputError(f"penalty rho must be positive, got {self.rho}")


def _rho(rho):
    return rho.rho if isinstance(rho, Penalty) else Penalty(float(rho)).rho


def project_nonneg(v):
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def shifted_multipliers(g, lam, rho):
    """[rho*g + lam]_+, the multiplier estimate shared by value and both gradients."""
    return project_nonneg(rho * g + lam)


def aug_value(p, x, lam, rho):
    rho = _rho(rho)
    lam = as_vector(lam, p.m, "lambda")
    f, _ = eval_objective(p, x)
    g, _ = eval_constraints(p, x)
    w = shifted_multipliers(g, lam, rho)
    return f + float(np.sum(w * w - lam * lam)) / (2.0 * rho)


def grad_x(p, x, lam, rho):
    rho = _rho(rho)
    lam = as_vector(lam, p.m, "lambda")
    _, grad_f = eval_objective(p, x)
    g, jac = eval_constraints(p, x)
    return grad_f + jac.T @ shifted_multipliers(g, lam, rho)


def grad_lambda(p, x, lam, rho):
    rho = _rho(rho)
    lam = as_vector(lam, p.m, "lambda")
    g, _ = eval_constraints(p, x)
    return (shifted_multipliers(g, lam, rho) - lam) / rho
