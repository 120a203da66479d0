import numpy as np
import pytest

from conftest import one_dim, random_structured_problem
from helpers.exceptions import InputError
from helpers.lagrangian_helper import Penalty, aug_value, grad_lambda, grad_x, project_nonneg, shifted_multipliers
from helpers.problem_helper.problem_spec import eval_constraints
from helpers.problem_helper.structured_problem import AffineConstraint, StructuredProblem

FD_STEP = 1e-6
KINK_MARGIN = 1e-3


def _central_difference(fun, z):
    out = np.empty(z.size)
    for j in range(z.size):
        e = np.zeros(z.size)
        e[j] = FD_STEP
        out[j] = (fun(z + e) - fun(z - e)) / (2 * FD_STEP)
    return out


def _relative_error(approx, exact):
    return np.linalg.norm(approx - exact) / max(1.0, np.linalg.norm(exact))


def test_penalty_must_be_positive():
    with pytest.raises(InputError):
        Penalty(0.0)
    with pytest.raises(InputError):
        aug_value(one_dim().to_spec(), [0.0], [0.0], -1.0)
    assert Penalty(0.5).rho == 0.5


def test_project_nonneg():
    np.testing.assert_array_equal(project_nonneg([-1.0, 0.0, 2.5]), [0.0, 0.0, 2.5])


def test_shifted_multipliers_are_the_projection(rng):
    g = rng.standard_normal(50)
    lam = rng.uniform(0.0, 1.0, 50)
    w = shifted_multipliers(g, lam, 0.3)
    np.testing.assert_array_equal(w, project_nonneg(0.3 * g + lam))
    assert np.all(w >= 0.0)


def _zero_objective(constant):
    """f = 0 with the single constraint g(x) = constant."""
    return StructuredProblem(H=[[0.0]], c=[0.0], constraints=(AffineConstraint(a=[0.0], beta=-constant),)).to_spec()


def test_worked_examples_with_zero_objective():
    assert aug_value(_zero_objective(1.0), [0.0], [1.0], 1.0) == pytest.approx(1.5)
    spec = _zero_objective(-3.0)
    assert aug_value(spec, [0.0], [2.0], 2.0) == pytest.approx(-1.0)
    np.testing.assert_allclose(grad_lambda(spec, [0.0], [2.0], 2.0), [-1.0])


def test_value_by_hand():
    spec = one_dim().to_spec()
    # f = 4, g = 1, [rho g + lam]_+ = 1.5
    assert aug_value(spec, [2.0], [0.5], 1.0) == pytest.approx(4.0 + (1.5 ** 2 - 0.25) / 2)
    # constraint clamped: [-3 + 0.5]_+ = 0
    assert aug_value(spec, [-2.0], [0.5], 1.0) == pytest.approx(4.0 - 0.25 / 2)


def test_gradients_vanish_at_kkt_pair():
    spec = one_dim(shift=2.0).to_spec()
    np.testing.assert_allclose(grad_x(spec, [1.0], [2.0], 0.7), [0.0], atol=1e-14)
    np.testing.assert_allclose(grad_lambda(spec, [1.0], [2.0], 0.7), [0.0], atol=1e-14)


def test_gradients_match_finite_differences(rng):
    rho = 0.5
    checked = 0
    for _ in range(20):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 6))
        spec = random_structured_problem(rng, n, m).to_spec()
        for _ in range(50):
            x = rng.uniform(-2.0, 2.0, n)
            lam = rng.uniform(0.0, 2.0, m)
            g, _ = eval_constraints(spec, x)
            if np.min(np.abs(rho * g + lam)) < KINK_MARGIN:
                continue
            gx = grad_x(spec, x, lam, rho)
            gl = grad_lambda(spec, x, lam, rho)
            fd_x = _central_difference(lambda z: aug_value(spec, z, lam, rho), x)
            fd_l = _central_difference(lambda z: aug_value(spec, x, z, rho), lam)
            assert _relative_error(fd_x, gx) < 1e-5
            assert _relative_error(fd_l, gl) < 1e-5
            checked += 1
    assert checked > 900


def test_convex_in_x_and_concave_in_lambda(rng):
    for _ in range(20):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 6))
        spec = random_structured_problem(rng, n, m).to_spec()
        rho = float(rng.uniform(0.1, 2.0))
        for _ in range(50):
            x1, x2 = rng.uniform(-3.0, 3.0, (2, n))
            l1, l2 = rng.uniform(0.0, 3.0, (2, m))
            lam = rng.uniform(0.0, 3.0, m)
            x = rng.uniform(-3.0, 3.0, n)
            chord_x = 0.5 * (aug_value(spec, x1, lam, rho) + aug_value(spec, x2, lam, rho))
            mid_x = aug_value(spec, 0.5 * (x1 + x2), lam, rho)
            assert mid_x <= chord_x + 1e-9 * max(1.0, abs(chord_x))
            chord_l = 0.5 * (aug_value(spec, x, l1, rho) + aug_value(spec, x, l2, rho))
            mid_l = aug_value(spec, x, 0.5 * (l1 + l2), rho)
            assert mid_l >= chord_l - 1e-9 * max(1.0, abs(chord_l))


def test_multiplier_gradient_lower_bound(rng):
    for _ in range(20):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 6))
        spec = random_structured_problem(rng, n, m).to_spec()
        rho = float(rng.uniform(0.1, 2.0))
        for _ in range(50):
            x = rng.uniform(-3.0, 3.0, n)
            lam = rng.uniform(0.0, 3.0, m)
            assert np.all(grad_lambda(spec, x, lam, rho) >= -lam / rho - 1e-12)
