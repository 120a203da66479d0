import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from helpers.exceptions import InputError

log = logging.getLogger("problem")


def as_vector(v, length, what="x"):
    """Return v as a float64 1-D array of the given length or raise InputError."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.shape[0] != length:
        raise InputError(f"{what} must have length {length}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """min f(x) s.t. g_i(x) <= 0, given as oracles plus declared regularity constants.

    `objective` maps x to (f(x), grad f(x)); each entry of `constraints` maps x
    to (g_i(x), grad g_i(x)). `stacked_constraints`, when present, maps x to
    (g(x), Jacobian) in one call and must agree with the per-constraint oracles.
    `constraint_smoothness[i]` is the pair (L_gi, B_gi), declared relative to
    `box` when one is given.
    """

    n: int
    m: int
    objective: Callable
    constraints: Tuple[Callable, ...]
    mu: float
    l_smooth: float
    constraint_smoothness: Tuple[Tuple[float, float], ...]
    stacked_constraints: Optional[Callable] = None
    box: Optional[Tuple[np.ndarray, np.ndarray]] = None
    name: str = ""

    def __post_init__(self):
        if int(self.n) < 1 or int(self.m) < 1:
            raise InputError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if len(self.constraints) != self.m:
            raise InputError(f"expected {self.m} constraint oracles, got {len(self.constraints)}")
        if len(self.constraint_smoothness) != self.m:
            raise InputError(f"expected {self.m} (L_gi, B_gi) pairs, got {len(self.constraint_smoothness)}")
        for label, value in (("mu", self.mu), ("l_smooth", self.l_smooth)):
            if not np.isfinite(value) or value < 0:
                raise InputError(f"{label} must be a finite nonnegative number, got {value}")
        for i, (L, B) in enumerate(self.constraint_smoothness):
            if not (np.isfinite(L) and np.isfinite(B)) or L < 0 or B < 0:
                raise InputError(f"constraint {i}: (L_gi, B_gi) must be finite and nonnegative, got ({L}, {B})")
        if self.box is not None:
            lo, hi = self.box
            if np.shape(lo) != (self.n,) or np.shape(hi) != (self.n,) or np.any(np.asarray(lo) > np.asarray(hi)):
                raise InputError("box must be a pair of length-n vectors with lo <= hi")

    @property
    def L_g(self):
        return float(np.sqrt(sum(L * L for L, _ in self.constraint_smoothness)))

    @property
    def B_g(self):
        return float(np.sqrt(sum(B * B for _, B in self.constraint_smoothness)))


def eval_objective(p, x):
    x = as_vector(x, p.n)
    value, grad = p.objective(x)
    return float(value), as_vector(grad, p.n, "objective gradient")


def eval_constraints(p, x):
    """Return (g(x), J(x)) with row i of J equal to grad g_i(x)."""
    x = as_vector(x, p.n)
    if p.stacked_constraints is not None:
        values, jac = p.stacked_constraints(x)
        values = as_vector(values, p.m, "constraint values")
        jac = np.asarray(jac, dtype=float)
        if jac.shape != (p.m, p.n):
            raise InputError(f"constraint Jacobian must be {p.m}x{p.n}, got {jac.shape}")
        return values, jac
    values = np.empty(p.m)
    jac = np.empty((p.m, p.n))
    for i, oracle in enumerate(p.constraints):
        g_i, grad_i = oracle(x)
        values[i] = g_i
        jac[i] = as_vector(grad_i, p.n, f"gradient of constraint {i}")
    return values, jac


def in_box(p, x):
    if p.box is None:
        return True
    lo, hi = p.box
    return bool(np.all(x >= lo) and np.all(x <= hi))


@dataclass(frozen=True, eq=False)
class GradientCheckReport:
    objective_error: float
    constraint_errors: Tuple[float, ...]

    @property
    def max_error(self):
        return max((self.objective_error,) + tuple(self.constraint_errors))


def _relative_error(approx, exact):
    return float(np.linalg.norm(approx - exact) / max(1.0, np.linalg.norm(exact)))


def finite_diff_check(p, x, h=1e-5):
    """Compare oracle gradients of f and every g_i against central differences at x."""
    if not h > 0:
        raise InputError(f"finite-difference step must be positive, got {h}")
    x = as_vector(x, p.n)
    _, grad_f = eval_objective(p, x)
    _, jac = eval_constraints(p, x)
    fd_f = np.empty(p.n)
    fd_jac = np.empty((p.m, p.n))
    for j in range(p.n):
        e = np.zeros(p.n)
        e[j] = h
        f_plus, _ = eval_objective(p, x + e)
        f_minus, _ = eval_objective(p, x - e)
        g_plus, _ = eval_constraints(p, x + e)
        g_minus, _ = eval_constraints(p, x - e)
        fd_f[j] = (f_plus - f_minus) / (2 * h)
        fd_jac[:, j] = (g_plus - g_minus) / (2 * h)
    report = GradientCheckReport(
        objective_error=_relative_error(fd_f, grad_f),
        constraint_errors=tuple(_relative_error(fd_jac[i], jac[i]) for i in range(p.m)),
    )
    log.debug(f"finite-difference check at h={h}: max relative error {report.max_error:.3e}")
    return report
