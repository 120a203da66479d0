"""Sampling estimates of the declared problem constants.

estimate_mu returns an upper estimate of the growth modulus; estimate_smoothness
returns lower estimates of the Lipschitz and gradient bounds. A declaration on
the wrong side of an estimate is contradicted.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from helpers.exceptions import InputError
from helpers.problem_helper.problem_spec import as_vector, eval_constraints, eval_objective

log = logging.getLogger("oracle")

CONTRADICTION_TOL = 1e-9
ALL_PAIRS_MAX = 100
PAIRS_PER_SAMPLE = 5


@dataclass(frozen=True)
class SmoothnessEstimate:
    l_smooth: float
    constraint_smoothness: Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class ConstantCheck:
    name: str
    declared: float
    estimated: float
    kind: str
    contradicted: bool


def _ball_samples(rng, centre, radius, samples):
    n = centre.size
    directions = rng.standard_normal((samples, n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.random(samples) ** (1.0 / n)
    return centre + directions * radii[:, None]


def estimate_mu(p, x_star, samples=1000, radius=1.0, seed=0):
    if samples < 1:
        raise InputError(f"samples must be at least 1, got {samples}")
    if not radius > 0:
        raise InputError(f"radius must be positive, got {radius}")
    x_star = as_vector(x_star, p.n, "x_star")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    _, grad_star = eval_objective(p, x_star)
    ratios = []
    for x in _ball_samples(rng, x_star, radius, samples):
        e = x - x_star
        norm2 = e @ e
        if norm2 == 0.0:
            continue
        _, grad = eval_objective(p, x)
        ratios.append(float((grad - grad_star) @ e / norm2))
    if not ratios:
        return float("inf")
    return min(ratios)


def _box_samples(rng, lo, hi, samples):
    return lo + (hi - lo) * rng.random((samples, lo.size))


def _sample_pairs(rng, samples):
    """Every pair for small samples, else consecutive pairs plus seeded random ones."""
    if samples <= ALL_PAIRS_MAX:
        return np.triu_indices(samples, k=1)
    first = np.arange(samples - 1)
    extra_i = rng.integers(0, samples, PAIRS_PER_SAMPLE * samples)
    extra_j = rng.integers(0, samples, PAIRS_PER_SAMPLE * samples)
    return np.concatenate([first, extra_i]), np.concatenate([first + 1, extra_j])


def estimate_smoothness(p, box=None, samples=1000, seed=0):
    """Largest gradient difference quotient over sampled pairs, largest gradient norm over samples."""
    box = box if box is not None else p.box
    if box is None:
        raise InputError("smoothness estimation needs a box")
    if samples < 2:
        raise InputError(f"samples must be at least 2, got {samples}")
    lo = as_vector(box[0], p.n, "box lo")
    hi = as_vector(box[1], p.n, "box hi")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    points = _box_samples(rng, lo, hi, samples)

    grads_f, jacs = [], []
    for x in points:
        _, gf = eval_objective(p, x)
        _, jac = eval_constraints(p, x)
        grads_f.append(gf)
        jacs.append(jac)
    grads_f = np.array(grads_f)
    jacs = np.array(jacs)

    i, j = _sample_pairs(rng, samples)
    dx = np.linalg.norm(points[i] - points[j], axis=1)
    keep = dx > 0
    l_est = 0.0
    L_est = np.zeros(p.m)
    if np.any(keep):
        df = np.linalg.norm(grads_f[i] - grads_f[j], axis=1)
        l_est = float(np.max(df[keep] / dx[keep]))
        dj = np.linalg.norm(jacs[i] - jacs[j], axis=2)
        L_est = np.max(dj[keep] / dx[keep, None], axis=0)
    B_est = np.max(np.linalg.norm(jacs, axis=2), axis=0)
    return SmoothnessEstimate(
        l_smooth=l_est,
        constraint_smoothness=tuple((float(L), float(B)) for L, B in zip(L_est, B_est)),
    )


def check_declared_constants(p, x_star, samples=1000, radius=1.0, seed=0):
    """Compare every declared constant against its estimate; one ConstantCheck per constant."""
    mu_est = estimate_mu(p, x_star, samples=samples, radius=radius, seed=seed)
    checks = [ConstantCheck("mu", p.mu, mu_est, "upper",
                            p.mu > mu_est + CONTRADICTION_TOL * max(1.0, abs(mu_est)))]
    if p.box is None:
        log.warning("no box declared: smoothness constants are not checked")
        return checks
    est = estimate_smoothness(p, p.box, samples=samples, seed=seed)
    checks.append(ConstantCheck("l_smooth", p.l_smooth, est.l_smooth, "lower",
                                p.l_smooth < est.l_smooth - CONTRADICTION_TOL * max(1.0, est.l_smooth)))
    for i, ((L, B), (L_est, B_est)) in enumerate(zip(p.constraint_smoothness, est.constraint_smoothness)):
        checks.append(ConstantCheck(f"L_g{i}", L, L_est, "lower",
                                    L < L_est - CONTRADICTION_TOL * max(1.0, L_est)))
        checks.append(ConstantCheck(f"B_g{i}", B, B_est, "lower",
                                    B < B_est - CONTRADICTION_TOL * max(1.0, B_est)))
    for check in checks:
        if check.contradicted:
            log.warning(f"declared {check.name} = {check.declared:.6g} contradicted by "
                        f"{check.kind} estimate {check.estimated:.6g}")
    return checks
