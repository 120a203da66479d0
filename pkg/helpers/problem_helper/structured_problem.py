import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from helpers.exceptions import InputError
from helpers.problem_helper.problem_spec import ProblemSpec, as_vector

log = logging.getLogger("problem")

PSD_TOL = 1e-10
SYM_TOL = 1e-12


def _check_psd(M, what):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"{what} must be a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    if np.max(np.abs(M - M.T)) > SYM_TOL * scale:
        raise InputError(f"{what} is not symmetric")
    eigs = np.linalg.eigvalsh(M)
    if eigs[0] < -PSD_TOL * max(1.0, abs(eigs[-1])):
        raise InputError(f"{what} is not positive semidefinite: smallest eigenvalue {eigs[0]:.6g}")
    return M, eigs


@dataclass(frozen=True, eq=False)
class QuadraticConstraint:
    """g(x) = 0.5 x'Ax + b'x + d with A symmetric PSD."""

    A: np.ndarray
    b: np.ndarray
    d: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        object.__setattr__(self, "d", float(self.d))

    def value_and_grad(self, x):
        Ax = self.A @ x
        return 0.5 * float(x @ Ax) + float(self.b @ x) + self.d, Ax + self.b


@dataclass(frozen=True, eq=False)
class AffineConstraint:
    """g(x) = a'x - beta."""

    a: np.ndarray
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "beta", float(self.beta))

    def value_and_grad(self, x):
        return float(self.a @ x) - self.beta, self.a.copy()


@dataclass(frozen=True, eq=False)
class StructuredProblem:
    """Quadratic objective with quadratic/affine constraints over an operating box.

    f(x) = 0.5 x'Hx + c'x + r. The box (lo, hi) is where the derived gradient
    bounds B_gi hold; `declared` may override any derived constant with keys
    mu, l_smooth and constraint_smoothness.
    """

    H: np.ndarray
    c: np.ndarray
    constraints: Tuple
    r: float = 0.0
    box_lo: Optional[np.ndarray] = None
    box_hi: Optional[np.ndarray] = None
    declared: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        H, h_eigs = _check_psd(self.H, "objective H")
        n = H.shape[0]
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "c", as_vector(self.c, n, "objective c"))
        object.__setattr__(self, "_h_eigs", h_eigs)
        if len(self.constraints) == 0:
            raise InputError("at least one constraint is required")
        for i, con in enumerate(self.constraints):
            if isinstance(con, QuadraticConstraint):
                A, _ = _check_psd(con.A, f"constraint {i} matrix A")
                if A.shape != (n, n):
                    raise InputError(f"constraint {i} matrix A must be {n}x{n}, got {A.shape}")
                as_vector(con.b, n, f"constraint {i} b")
            elif isinstance(con, AffineConstraint):
                as_vector(con.a, n, f"constraint {i} a")
            else:
                raise InputError(f"constraint {i} has unsupported type {type(con).__name__}")
        if (self.box_lo is None) != (self.box_hi is None):
            raise InputError("box needs both lo and hi")
        if self.box_lo is not None:
            lo = np.broadcast_to(np.asarray(self.box_lo, dtype=float), (n,)).copy()
            hi = np.broadcast_to(np.asarray(self.box_hi, dtype=float), (n,)).copy()
            if np.any(lo > hi):
                raise InputError("box lo must not exceed hi")
            object.__setattr__(self, "box_lo", lo)
            object.__setattr__(self, "box_hi", hi)
        # stacked form: affine rows carry A = 0, b = a, d = -beta
        m = len(self.constraints)
        A_all = np.zeros((m, n, n))
        b_all = np.zeros((m, n))
        d_all = np.zeros(m)
        for i, con in enumerate(self.constraints):
            if isinstance(con, QuadraticConstraint):
                A_all[i] = con.A
                b_all[i] = con.b
                d_all[i] = con.d
            else:
                b_all[i] = con.a
                d_all[i] = -con.beta
        object.__setattr__(self, "_A_all", A_all)
        object.__setattr__(self, "_b_all", b_all)
        object.__setattr__(self, "_d_all", d_all)

    @property
    def n(self):
        return self.H.shape[0]

    @property
    def m(self):
        return len(self.constraints)

    def objective(self, x):
        Hx = self.H @ x
        return 0.5 * float(x @ Hx) + float(self.c @ x) + self.r, Hx + self.c

    def stacked_constraints(self, x):
        Ax = np.einsum("kij,j->ki", self._A_all, x)
        values = 0.5 * (Ax @ x) + self._b_all @ x + self._d_all
        return values, Ax + self._b_all

    def gradient_bound(self, i):
        """Upper bound of ||grad g_i|| over the box, exact when A_i is diagonal."""
        con = self.constraints[i]
        if isinstance(con, AffineConstraint):
            return float(np.linalg.norm(con.a))
        if self.box_lo is None:
            raise InputError(f"constraint {i} is quadratic: a box is required to bound its gradient")
        centre = 0.5 * (self.box_lo + self.box_hi)
        half = 0.5 * (self.box_hi - self.box_lo)
        per_component = np.abs(con.A @ centre + con.b) + np.abs(con.A) @ half
        return float(np.linalg.norm(per_component))

    def derived_smoothness(self):
        smoothness = []
        for i, con in enumerate(self.constraints):
            if isinstance(con, QuadraticConstraint):
                L = max(0.0, float(np.linalg.eigvalsh(con.A)[-1]))
            else:
                L = 0.0
            smoothness.append((L, self.gradient_bound(i)))
        return tuple(smoothness)

    def constants(self):
        """Derived constants with any user declarations taking precedence."""
        merged = {
            "mu": max(0.0, float(self._h_eigs[0])),
            "l_smooth": max(0.0, float(self._h_eigs[-1])),
        }
        declared = dict(self.declared or {})
        if "constraint_smoothness" in declared:
            pairs = tuple((float(L), float(B)) for L, B in declared["constraint_smoothness"])
            if len(pairs) != self.m:
                raise InputError(f"declared constraint_smoothness needs {self.m} pairs, got {len(pairs)}")
            declared["constraint_smoothness"] = pairs
        else:
            merged["constraint_smoothness"] = self.derived_smoothness()
        merged.update(declared)
        return merged

    def to_spec(self):
        constants = self.constants()
        box = (self.box_lo, self.box_hi) if self.box_lo is not None else None
        return ProblemSpec(
            n=self.n,
            m=self.m,
            objective=self.objective,
            constraints=tuple(con.value_and_grad for con in self.constraints),
            mu=float(constants["mu"]),
            l_smooth=float(constants["l_smooth"]),
            constraint_smoothness=tuple(constants["constraint_smoothness"]),
            stacked_constraints=self.stacked_constraints,
            box=box,
            name=self.name,
        )
