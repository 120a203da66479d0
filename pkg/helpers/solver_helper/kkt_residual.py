from dataclasses import dataclass

import numpy as np

from helpers.lagrangian_helper import project_nonneg, shifted_multipliers
from helpers.problem_helper.problem_spec import as_vector, eval_constraints, eval_objective


@dataclass(frozen=True)
class KktResidual:
    stationarity: float
    primal_infeas: float
    dual_infeas: float
    complementarity: float
    fixed_point_gap: float

    @property
    def max_field(self):
        return max(self.stationarity, self.primal_infeas, self.dual_infeas,
                   self.complementarity, self.fixed_point_gap)

    def is_kkt(self, tol=0.0):
        return self.max_field <= tol

    def as_dict(self):
        return {
            "stationarity": self.stationarity,
            "primal_infeas": self.primal_infeas,
            "dual_infeas": self.dual_infeas,
            "complementarity": self.complementarity,
            "fixed_point_gap": self.fixed_point_gap,
        }


def residual_from_evaluations(grad_f, g, jac, lam, rho):
    """KKT residual from oracle outputs already computed at (x, lam)."""
    return KktResidual(
        stationarity=float(np.linalg.norm(grad_f + jac.T @ lam)),
        primal_infeas=float(np.max(project_nonneg(g))),
        dual_infeas=float(np.max(project_nonneg(-lam))),
        complementarity=float(np.max(np.abs(lam * g))),
        fixed_point_gap=float(np.linalg.norm(lam - shifted_multipliers(g, lam, rho))),
    )


def kkt_residual(p, x, lam, rho):
    lam = as_vector(lam, p.m, "lambda")
    _, grad_f = eval_objective(p, x)
    g, jac = eval_constraints(p, x)
    return residual_from_evaluations(grad_f, g, jac, lam, float(rho))
