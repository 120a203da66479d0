"""Explicit linear-rate certificate for the augmented primal-dual gradient iteration.

Given a KKT pair (x*, lam*) the certificate evaluates the stepsize bound, the
coupling weight delta of the Lyapunov matrix Q_delta = [[I, delta J'], [delta J, I]],
the contraction factor gamma and the conditioning constant C so that

    ||x_k - x*||^2 + ||lam_k - lam*||^2 <= C (1 - gamma)^k d0^2

for every start at stacked distance d0 from (x*, lam*).
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from config import load_config
from helpers.certificate_helper.eigen_helper import sym_eig_extremes
from helpers.exceptions import CertificateError, InputError
from helpers.problem_helper.problem_spec import as_vector, eval_constraints
from helpers.solver_helper.kkt_residual import kkt_residual

log = logging.getLogger("certificate")

CERTIFICATE_DEFAULTS = {
    "act_tol": 1e-7,
    "safety": 0.9,
    "a1_variant": "proof",
    "max_rounds": 100,
    "pi_tol": 1e-12,
    "kkt_tol": 1e-8,
}
RANK_TOL = 1e-12
GAMMA_CAP = 1.0 - 1e-12


def load_certificate_config():
    return load_config("certificate_config", CERTIFICATE_DEFAULTS)


@dataclass(frozen=True, eq=False)
class ActiveSetInfo:
    active: Tuple[int, ...]
    inactive: Tuple[int, ...]
    jacobian_active: np.ndarray
    kappa: float
    jacobian: np.ndarray
    g_star: np.ndarray


def active_set(p, x_star, act_tol=1e-7):
    x_star = as_vector(x_star, p.n, "x_star")
    g, jac = eval_constraints(p, x_star)
    worst = int(np.argmax(g))
    if g[worst] > act_tol:
        raise InputError(f"x_star is infeasible: g_{worst}(x_star) = {g[worst]:.6g} > {act_tol:g}")
    active = tuple(int(i) for i in np.flatnonzero(np.abs(g) <= act_tol))
    inactive = tuple(i for i in range(p.m) if i not in active)
    if not active:
        raise CertificateError("active set is empty, kappa is undefined", constant="kappa")
    J_I = jac[list(active)]
    kappa, gram_max = sym_eig_extremes(J_I @ J_I.T)
    if kappa <= RANK_TOL * max(1.0, gram_max):
        raise CertificateError(
            f"LICQ violated: active constraint gradients {list(active)} are linearly dependent "
            f"(kappa = {kappa:.3e})",
            constant="kappa",
        )
    return ActiveSetInfo(active=active, inactive=inactive, jacobian_active=J_I,
                         kappa=kappa, jacobian=jac, g_star=g)


@dataclass(frozen=True)
class TheoremConstants:
    """Every delta-independent constant of the rate bound."""

    mu: float
    l_smooth: float
    kappa: float
    rho: float
    L_g: float
    B_g: float
    lambda_norm: float
    theta1: float
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    b1: float
    b2: float


def theorem_constants(p, info, lambda_star, rho, a1_variant="proof"):
    lambda_star = as_vector(lambda_star, p.m, "lambda_star")
    mu, l, kappa, B, L = p.mu, p.l_smooth, info.kappa, p.B_g, p.L_g
    for name, value in (("mu", mu), ("B_g", B), ("kappa", kappa), ("rho", rho)):
        if not value > 0:
            raise CertificateError(f"{name} = {value!r} must be strictly positive", constant=name)
    lam_norm = float(np.linalg.norm(lambda_star))
    theta1 = rho * B ** 2 + L * lam_norm
    if a1_variant == "proof":
        a1 = 2 * l ** 2 + 4 * theta1 ** 2
    elif a1_variant == "statement":
        a1 = 2 * l + 4 * theta1 ** 2
    else:
        raise InputError(f"a1_variant must be 'proof' or 'statement', got {a1_variant!r}")
    a2 = 4 * B ** 2
    a3 = (2 * B ** 2 * l ** 2 / kappa + 2 * B ** 2 * theta1 ** 2 / kappa
          + 2 * B ** 2 / (kappa * rho ** 2) + kappa * B ** 2 * rho ** 2 / 4)
    a4 = B ** 2 * l ** 2 / 2 + B ** 2 * theta1 ** 2 + 2 * B ** 2
    a5 = B ** 2 + 2 / rho ** 2
    return TheoremConstants(
        mu=mu, l_smooth=l, kappa=kappa, rho=rho, L_g=L, B_g=B, lambda_norm=lam_norm,
        theta1=theta1, a1=a1, a2=a2, a3=a3, a4=a4, a5=a5,
        b1=a1 + 2 * B ** 2, b2=a2 + 2 / rho ** 2,
    )


def compute_delta(consts, pi_star, safety=0.9):
    if not 0 < safety < 1:
        raise InputError(f"safety must lie in (0, 1), got {safety}")
    if not 0 <= pi_star <= 1:
        raise InputError(f"pi_star must lie in [0, 1], got {pi_star}")
    k, rho, B, L = consts.kappa, consts.rho, consts.B_g, consts.L_g
    bound = min(
        consts.mu / (2 * consts.a3),
        (1 - pi_star) / (2 * rho * (k + 8 * B ** 2 + L ** 2 * (1 - pi_star))),
        1 / B,
    )
    if not bound > 0:
        raise CertificateError(f"delta bound {bound!r} is not positive (pi_star = {pi_star!r})",
                               constant="delta")
    return safety * bound


def _alpha_terms(consts, delta, pi_star):
    rho = consts.rho
    return {
        "one": 1.0,
        "rho": rho,
        "growth": 2 * consts.mu / (consts.b1 + 2 * consts.a4 * delta),
        "coupling": consts.kappa * delta / (2 * consts.b2 + 4 * consts.a5 * delta),
        "inactive": (1 - pi_star) / (2 * rho * (consts.b2 + 2 * consts.a5 * delta)),
    }


def compute_alpha_max(consts, delta, pi_star):
    """Five-way minimum bounding the stepsize."""
    terms = _alpha_terms(consts, delta, pi_star)
    for name, value in terms.items():
        if not value > 0:
            raise CertificateError(f"stepsize bound term {name!r} = {value!r} is not positive",
                                   constant=f"alpha_max[{name}]")
    return min(terms.values())


def compute_alpha_admissible(consts, delta, pi_star):
    """alpha_max tightened so that c1 stays positive: alpha < 2(mu - a3 delta)/(b1 + 2 a4 delta)."""
    c1_term = 2 * (consts.mu - consts.a3 * delta) / (consts.b1 + 2 * consts.a4 * delta)
    if not c1_term > 0:
        raise CertificateError(f"c1 stepsize term {c1_term!r} is not positive", constant="c1")
    return min(compute_alpha_max(consts, delta, pi_star), c1_term)


def compute_gamma(consts, delta, pi_star, alpha):
    mu, k, rho, B = consts.mu, consts.kappa, consts.rho, consts.B_g
    a3, a4, a5, b1, b2 = consts.a3, consts.a4, consts.a5, consts.b1, consts.b2
    c1 = mu * alpha - a3 * delta * alpha - b1 * alpha ** 2 / 2 - a4 * delta * alpha ** 2
    c2 = k * delta * alpha / 4 - b2 * alpha ** 2 / 2 - a5 * delta * alpha ** 2
    c3 = (alpha / (2 * rho) * (1 - pi_star)
          - (delta * alpha * k + b2 * alpha ** 2 + 2 * a5 * delta * alpha ** 2) / 2
          - 4 * alpha * delta * B ** 2)
    for name, value in (("c1", c1), ("c2", c2), ("c3", c3)):
        if not value > 0:
            raise CertificateError(f"{name} = {value!r} is not positive: alpha = {alpha!r} is too large",
                                   constant=name)
    return min(c1, c2, c3, GAMMA_CAP), c1, c2, c3


def compute_pi_star(p, info, rho, C, d0):
    if not d0 > 0:
        raise InputError(f"d0 must be positive, got {d0}")
    if not C >= 1:
        raise InputError(f"C must be at least 1, got {C}")
    if not info.inactive:
        return 0.0
    g_max = float(np.max(info.g_star[list(info.inactive)]))
    return max(rho * g_max / (math.sqrt(C) * d0) + 1.0, 0.0) ** 2


def q_delta(J, delta):
    J = np.atleast_2d(np.asarray(J, dtype=float))
    m, n = J.shape
    Q = np.eye(n + m)
    Q[:n, n:] = delta * J.T
    Q[n:, :n] = delta * J
    return Q


def conditioning(J, delta):
    """C = lambda_max(Q_delta) / lambda_min(Q_delta)."""
    lo, hi = sym_eig_extremes(q_delta(J, delta))
    if not lo > 0:
        raise CertificateError(f"Q_delta is not positive definite (lambda_min = {lo!r})", constant="C")
    return hi / lo


def _stacked_error(x, lam, x_star, lambda_star):
    return np.asarray(x, dtype=float) - x_star, np.asarray(lam, dtype=float) - lambda_star


def lyapunov_value(x, lam, x_star, lambda_star, J, delta):
    """z' Q_delta z for the stacked error z = (x - x*, lam - lam*)."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    if delta * np.linalg.norm(J, 2) >= 1:
        raise InputError(f"delta = {delta!r} makes Q_delta indefinite (needs delta * ||J|| < 1)")
    ex, el = _stacked_error(x, lam, np.asarray(x_star, dtype=float), np.asarray(lambda_star, dtype=float))
    return float(ex @ ex + el @ el + 2 * delta * (el @ (J @ ex)))


@dataclass(frozen=True, eq=False)
class RateCertificate:
    kappa: float
    theta1: float
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    b1: float
    b2: float
    delta: float
    alpha_max: float
    alpha_admissible: float
    alpha: float
    gamma: float
    c1: float
    c2: float
    c3: float
    pi_star: float
    C: float
    d0: float
    L_g: float
    B_g: float
    mu: float
    l_smooth: float
    rho: float
    rounds: int
    active: Tuple[int, ...]
    x_star: np.ndarray
    lambda_star: np.ndarray
    J: np.ndarray

    def envelope(self, k):
        return self.C * (1.0 - self.gamma) ** k * self.d0 ** 2

    def lyapunov(self, x, lam):
        ex, el = _stacked_error(x, lam, self.x_star, self.lambda_star)
        return float(ex @ ex + el @ el + 2 * self.delta * (el @ (self.J @ ex)))

    def report_items(self):
        names = ("kappa", "theta1", "a1", "a2", "a3", "a4", "a5", "b1", "b2", "delta",
                 "alpha_max", "alpha_admissible", "alpha", "gamma", "c1", "c2", "c3",
                 "C", "pi_star", "d0", "L_g", "B_g", "mu", "l_smooth", "rho")
        items = [(name, getattr(self, name)) for name in names]
        items.append(("rounds", self.rounds))
        items.append(("active_set", " ".join(str(i) for i in self.active)))
        return items


def build_certificate(p, x_star, lambda_star, rho, d0, safety=None, act_tol=None,
                      a1_variant=None, max_rounds=None, pi_tol=None, kkt_tol=None):
    """Assemble the certificate at a known KKT pair.

    pi_star depends on C, C on delta and delta on pi_star; the triple is found
    by fixed-point iteration started from pi_star at delta = 0.5 / B_g.
    """
    cfg = load_certificate_config()
    safety = cfg["safety"] if safety is None else safety
    act_tol = cfg["act_tol"] if act_tol is None else act_tol
    a1_variant = cfg["a1_variant"] if a1_variant is None else a1_variant
    max_rounds = int(cfg["max_rounds"] if max_rounds is None else max_rounds)
    pi_tol = cfg["pi_tol"] if pi_tol is None else pi_tol
    kkt_tol = cfg["kkt_tol"] if kkt_tol is None else kkt_tol

    x_star = as_vector(x_star, p.n, "x_star")
    lambda_star = as_vector(lambda_star, p.m, "lambda_star")
    residual = kkt_residual(p, x_star, lambda_star, rho)
    if not residual.is_kkt(kkt_tol):
        raise InputError(f"reference is not a KKT pair: largest residual {residual.max_field:.3e} > {kkt_tol:g}")

    info = active_set(p, x_star, act_tol)
    consts = theorem_constants(p, info, lambda_star, rho, a1_variant)
    if not d0 > 0:
        raise InputError(f"d0 must be positive, got {d0}")
    J = info.jacobian

    pi_star = compute_pi_star(p, info, rho, conditioning(J, 0.5 / consts.B_g), d0)
    for rounds in range(1, max_rounds + 1):
        delta = compute_delta(consts, pi_star, safety)
        pi_next = compute_pi_star(p, info, rho, conditioning(J, delta), d0)
        converged = abs(pi_next - pi_star) < pi_tol
        # delta and alpha bounds decrease in pi_star
        pi_star = max(pi_star, pi_next) if converged else pi_next
        if converged:
            break
    else:
        raise CertificateError(f"pi_star fixed point did not converge in {max_rounds} rounds",
                               constant="pi_star")

    delta = compute_delta(consts, pi_star, safety)
    C = conditioning(J, delta)
    alpha_max = compute_alpha_max(consts, delta, pi_star)
    alpha_admissible = compute_alpha_admissible(consts, delta, pi_star)
    alpha = safety * alpha_admissible
    gamma, c1, c2, c3 = compute_gamma(consts, delta, pi_star, alpha)
    log.info(f"certificate: kappa={consts.kappa:.4g} delta={delta:.4g} alpha={alpha:.4g} "
             f"gamma={gamma:.4g} C={C:.6g} pi*={pi_star:.6g} after {rounds} round(s)")
    return RateCertificate(
        kappa=consts.kappa, theta1=consts.theta1,
        a1=consts.a1, a2=consts.a2, a3=consts.a3, a4=consts.a4, a5=consts.a5,
        b1=consts.b1, b2=consts.b2,
        delta=delta, alpha_max=alpha_max, alpha_admissible=alpha_admissible, alpha=alpha,
        gamma=gamma, c1=c1, c2=c2, c3=c3, pi_star=pi_star, C=C, d0=float(d0),
        L_g=consts.L_g, B_g=consts.B_g, mu=consts.mu, l_smooth=consts.l_smooth, rho=float(rho),
        rounds=rounds, active=info.active, x_star=x_star, lambda_star=lambda_star, J=J,
    )


def check_envelope(trace, cert, slack=1.0 + 1e-9):
    """First recorded k whose squared stacked error leaves C(1-gamma)^k d0^2, or None."""
    for entry in trace.entries:
        ex, el = _stacked_error(entry.x, entry.lam, cert.x_star, cert.lambda_star)
        if ex @ ex + el @ el > cert.envelope(entry.k) * slack:
            return entry.k
    return None


def check_lyapunov_decay(trace, cert, rel_tol=1e-12):
    """First k with V_{k+1} > (1 - gamma) V_k over consecutive recorded iterates, or None."""
    entries = trace.entries
    for prev, cur in zip(entries, entries[1:]):
        if cur.k != prev.k + 1:
            continue
        v_prev, v_cur = cert.lyapunov(prev.x, prev.lam), cert.lyapunov(cur.x, cur.lam)
        if v_cur > (1.0 - cert.gamma) * v_prev * (1.0 + rel_tol) + 1e-300:
            return prev.k
    return None
