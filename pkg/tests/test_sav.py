import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from savopt import operators, problems, sav
from savopt.objective import FunctionObjective, evaluate, gradient


def square(C=1.0):
    """f = theta^2 in one dimension."""
    return problems.SeparablePolynomial([0.0, 0.0, 1.0], 1, shift_C=C)


def quartic_poly(C=1.0):
    return problems.SeparablePolynomial([0.0, 0.0, 1.0, 0.0, 0.1], 1, shift_C=C)


Z1 = operators.zero(1)


# ------------------------------------------------------------ modified SAV

def test_modified_sav_one_step_oracle():
    s = sav.init_state(square(), [1.0], 1.0)
    assert s.r == pytest.approx(math.sqrt(2))
    new, rec = sav.modified_sav_step(s, square(), Z1)
    assert new.r == pytest.approx(math.sqrt(2) / 2)
    assert new.theta[0] == pytest.approx(0.0, abs=1e-16)
    assert rec.alpha == pytest.approx(0.5)
    assert rec.k == 0 and new.k == 1


def test_modified_sav_with_operator_oracle():
    s = sav.init_state(square(), [1.0], 1.0)
    new, _ = sav.modified_sav_step(s, square(), operators.scaled_identity(2.0, 1))
    assert new.r == pytest.approx(3 * math.sqrt(2) / 4)
    assert new.theta[0] == pytest.approx(0.5)


def test_savgd_matches_modified_sav_with_zero_operator():
    q = problems.QuadraticProblem(20)
    a = b = sav.init_state(q, np.ones(20), 0.3)
    for _ in range(200):
        a, ra = sav.savgd_step(a, q)
        b, rb = sav.modified_sav_step(b, q, operators.zero(20))
        assert np.array_equal(a.theta, b.theta) and a.r == b.r and ra == rb


def test_stationary_point_is_fixed():
    ros = problems.RosenbrockProblem(4)
    op = operators.composite(0.1, 0.2, 4)
    s = sav.init_state(ros, np.ones(4), 2.0)
    s = sav.SavState(s.theta, 0.3 * s.r, 2.0)
    for step in (lambda: sav.modified_sav_step(s, ros, op), lambda: sav.savgd_step(s, ros),
                 lambda: sav.rsavq_step(s, ros, op, sav.QParams(0.7))):
        new, _ = step()
        assert np.array_equal(new.theta, s.theta) and new.r == s.r


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), dt=st.floats(1e-3, 1e3))
def test_r_strictly_decreases_away_from_stationary_points(seed, dt):
    rng = np.random.default_rng(seed)
    ros = problems.RosenbrockProblem(5)
    s = sav.init_state(ros, rng.standard_normal(5), dt)
    for op in (operators.zero(5), operators.composite(0.5, 1.0, 5)):
        new, _ = sav.modified_sav_step(s, ros, op)
        assert new.r < s.r
        assert new.r > 0


def test_savgd_quadratic_converges():
    # with C = 1; at the package default C = 1e-8 plain SAV-GD stalls near 0.09
    # because r decays faster than f (the relaxed variants fix this)
    q = problems.QuadraticProblem(100, shift_C=1.0)
    s = sav.init_state(q, np.ones(100), 1.0)
    for _ in range(1000):
        s, _ = sav.savgd_step(s, q)
    assert evaluate(q, s.theta) <= 1e-8


def test_lower_bound_error():
    obj = FunctionObjective(lambda t: -2.0, lambda t: np.zeros(1), 1, shift_C=1.0)
    with pytest.raises(sav.LowerBoundError):
        sav.init_state(obj, [0.0], 1.0)


def test_bad_dt():
    s = sav.init_state(square(), [1.0], 1.0)
    with pytest.raises(ValueError):
        sav.modified_sav_step(s, square(), Z1, dt=-1.0)


# --------------------------------------------------------------- legacy

def test_legacy_one_step_regression():
    obj = square(C=1.0)
    op = operators.scaled_identity(1.0, 1)
    s = sav.init_legacy_state(obj, op, [1.0], 1.0, C_g=1.0)
    assert s.r == pytest.approx(math.sqrt(1.5))
    new, _ = sav.legacy_sav_step(s, obj, op, C_g=1.0)
    assert new.theta[0] == pytest.approx(1 / 7)
    assert new.r == pytest.approx(15 / (14 * math.sqrt(1.5)))
    assert new.r == pytest.approx(0.874818, abs=1e-6)


def test_legacy_with_zero_operator_is_savgd():
    ros = problems.RosenbrockProblem(3, shift_C=2.0)
    a = sav.init_state(ros, [0.5, -0.2, 0.1], 0.01)
    b = sav.init_legacy_state(ros, operators.zero(3), a.theta, 0.01, C_g=2.0)
    for _ in range(50):
        a, _ = sav.savgd_step(a, ros)
        b, _ = sav.legacy_sav_step(b, ros, operators.zero(3), C_g=2.0)
    assert np.allclose(a.theta, b.theta, rtol=1e-12) and a.r == pytest.approx(b.r, rel=1e-12)


def test_legacy_lower_bound():
    # g = theta^2 - 5 theta^2 / 2 goes below -C_g away from the origin
    obj = square()
    op = operators.scaled_identity(5.0, 1)
    with pytest.raises(sav.LowerBoundError, match="splitting lower bound violated"):
        sav.init_legacy_state(obj, op, [3.0], 0.1, C_g=1.0)


def test_legacy_wrong_fixed_point():
    obj = quartic_poly(C=1.0)
    op = operators.scaled_identity(1.0, 1)
    s = sav.init_legacy_state(obj, op, [10.0], 0.1, C_g=1.0)
    for _ in range(10_000):
        s, _ = sav.legacy_sav_step(s, obj, op, C_g=1.0)
    assert np.abs(gradient(obj, s.theta)).max() > 1e-3
    # the limit satisfies L theta + rho grad g = 0 with rho = r / sqrt(g + C_g) < 0
    th = s.theta[0]
    g = evaluate(obj, s.theta) - 0.5 * th * th
    rho = s.r / math.sqrt(g + 1.0)
    assert rho < 0
    assert th + rho * (gradient(obj, s.theta)[0] - th) == pytest.approx(0.0, abs=1e-10)


# ------------------------------------------------------------------ mSAV

def test_msav():
    new, rec = sav.msav_step(sav.init_state(square(), [1.0], 1.0), square(), Z1)
    assert new.theta[0] == pytest.approx(0.0, abs=1e-16)
    assert new.r == 1.0
    assert rec.r_tilde == pytest.approx(math.sqrt(2) / 2)
    q = problems.QuadraticProblem(10)
    s = sav.init_state(q, np.ones(10), 0.5)
    for _ in range(5):
        s, _ = sav.msav_step(s, q, operators.zero(10))
        assert s.r / math.sqrt(evaluate(q, s.theta) + q.shift_C) == pytest.approx(1.0, rel=1e-15)


# ------------------------------------------------------------- relaxation

def test_compute_xi_clamped_example():
    assert sav.compute_xi(0.9, 1.0, 0.8 ** 2, 0.99) == 0.0
    xi, r = sav.relax_r(0.9, 1.0, 0.8 ** 2, 0.99)
    assert xi == 0.0 and r == pytest.approx(0.8)


def test_compute_xi_interior_example():
    xi = sav.compute_xi(0.9, 1.0, 1.1 ** 2, 0.99)
    # smaller root of 0.04 xi^2 - 0.44 xi + 0.2118 = 0
    assert xi == pytest.approx((0.44 - math.sqrt(0.44 ** 2 - 4 * 0.04 * 0.2118)) / 0.08)
    assert xi == pytest.approx(0.50451, abs=1e-5)
    _, r = sav.relax_r(0.9, 1.0, 1.1 ** 2, 0.99)
    assert r == pytest.approx(xi * 0.9 + (1 - xi) * 1.1, rel=1e-12)
    assert r == pytest.approx(0.99910, abs=1e-5)
    G = -2 * (0.9 - 1.0) * 0.9
    assert r * r - 1.0 == pytest.approx(-(1 - 0.99) * G, abs=1e-15)
    assert r * r - 1.0 == pytest.approx(-0.0018, abs=1e-15)


def test_compute_xi_degenerate():
    assert sav.compute_xi(0.7, 1.0, 0.49, 0.99) == 0.0
    assert sav.relax_r(0.7, 1.0, 0.49, 0.99) == (0.0, pytest.approx(0.7))
    with pytest.raises(sav.LowerBoundError):
        sav.compute_xi(0.7, 1.0, 0.0, 0.99)


@settings(max_examples=200, deadline=None)
@given(rk=st.floats(0.1, 10), shrink=st.floats(0.01, 1.0), s=st.floats(0.01, 20),
       eta=st.floats(0, 1))
def test_relaxed_r_satisfies_dissipation(rk, shrink, s, eta):
    r_tilde = rk * shrink
    xi, r = sav.relax_r(r_tilde, rk, s * s, eta)
    assert 0.0 <= xi <= 1.0
    G = -2 * (r_tilde - rk) * r_tilde
    assert r * r - rk * rk <= -(1 - eta) * G + 1e-12 * rk * rk


def test_rsav_one_step_regression():
    new, rec = sav.rsav_step(sav.init_state(square(), [1.0], 1.0), square(), Z1)
    assert rec.r_tilde == pytest.approx(math.sqrt(2) / 2)
    assert new.theta[0] == pytest.approx(0.0, abs=1e-16)
    assert rec.xi == 0.0
    assert new.r == 1.0


def test_rsav_dissipation_on_quadratic_run():
    q = problems.QuadraticProblem(100)
    op = operators.diagonal(q.hessian_diagonal())
    s = sav.init_state(q, np.ones(100), 1.0)
    for _ in range(500):
        new, rec = sav.rsav_step(s, q, op, sav.RelaxParams(0.99))
        assert new.r ** 2 - s.r ** 2 <= -(1 - 0.99) * rec.G + 1e-12 * max(1.0, s.r ** 2)
        s = new


def test_relax_params_validation():
    with pytest.raises(ValueError):
        sav.RelaxParams(1.5)


# ------------------------------------------------------------ adaptive dt

def test_adapt_dt_rule():
    p = sav.AdaptiveParams(1.0, dt_min=1e-6, rho=1.1, gamma=0.9)
    assert sav.adapt_dt(1.0, 1.0, p) == pytest.approx(1.1)
    assert sav.adapt_dt(1.0, 0.5, p) == pytest.approx(0.5)
    assert sav.adapt_dt(1e-6, 0.5, p) == pytest.approx(1.1e-6)
    assert sav.adapt_dt(1e-5, 1e-3, p) == 1e-6


def test_adaptive_params_validation():
    for kw in ({"rho": 1.0}, {"gamma": 1.0}, {"dt_min": 2.0}):
        with pytest.raises(ValueError):
            sav.AdaptiveParams(1.0, **kw)


def test_adaptive_step_records_indicator_before_restart():
    q = problems.QuadraticProblem(10)
    s = sav.init_state(q, np.ones(10), 1.0)
    s = sav.SavState(s.theta, 0.5 * s.r, 1.0)
    new, rec = sav.adaptive_rsav_step(s, q, operators.zero(10), restart=True)
    assert rec.indicator == pytest.approx(0.5)
    assert rec.r == s.r
    assert rec.dt == pytest.approx(0.5)
    assert new.dt == pytest.approx(0.5)


# ---------------------------------------------------------- generalized q

def test_rsavq_half_is_savgd_bitwise():
    q = problems.QuadraticProblem(30)
    a = b = sav.init_state(q, np.ones(30), 0.7)
    for _ in range(1000):
        a, _ = sav.savgd_step(a, q)
        b, _ = sav.rsavq_step(b, q, operators.zero(30), sav.QParams(0.5, False))
        assert np.array_equal(a.theta, b.theta) and a.r == b.r


def test_rsavq_restart_step_formula():
    ros = problems.RosenbrockProblem(3)
    op = operators.composite(0.2, 0.5, 3)
    th = np.array([0.3, -0.7, 1.2])
    qp = sav.QParams(0.3, restart=True)
    s = sav.init_state(ros, th, 0.8, q=0.3)
    new, rec = sav.rsavq_step(s, ros, op, qp)
    g = gradient(ros, th)
    ghat = op.solve_shifted(0.8, g)
    fc = evaluate(ros, th) + ros.shift_C
    alpha = sav.sav_alpha(0.8, 0.3, g @ ghat, fc)
    assert rec.alpha == pytest.approx(alpha, rel=1e-14)
    assert np.allclose(new.theta, th - alpha * ghat, rtol=1e-14)


def test_rsavq_large_dt_limit_on_square():
    obj = square(C=0.0)
    s = sav.init_state(obj, [1.0], 1e12)
    new, rec = sav.rsavq_step(s, obj, Z1, sav.QParams(0.5, restart=True))
    assert rec.alpha == pytest.approx(0.5, rel=1e-9)
    assert new.theta[0] == pytest.approx(0.0, abs=1e-9)


def test_qparams_validation():
    with pytest.raises(ValueError):
        sav.QParams(0.0)


# ----------------------------------------------------------- line search

def test_descent_direction(rng):
    ros = problems.RosenbrockProblem(6)
    op = operators.composite(0.4, 1.0, 6)
    for _ in range(50):
        th = rng.standard_normal(6)
        g = gradient(ros, th)
        assert g @ -op.solve_shifted(rng.uniform(0.01, 100), g) < 0


def test_wolfe_examples():
    half = problems.SeparablePolynomial([0.0, 0.0, 0.5], 1)
    assert sav.wolfe_check(half, [1.0], [-1.0], 1.0, 1e-4, 0.9) == (True, True)
    dec, curv = sav.wolfe_check(half, [1.0], [-1.0], 0.0)
    assert dec and not curv
    q4 = problems.SeparablePolynomial([0.0, 0.0, 0.0, 0.0, 1.0], 1)
    assert sav.wolfe_check(q4, [1.0], -gradient(q4, [1.0]), 10.0)[0] is False
    with pytest.raises(ValueError):
        sav.wolfe_check(half, [1.0], [1.0], 1.0)
    with pytest.raises(ValueError):
        sav.wolfe_check(half, [1.0], [-1.0], 1.0, 0.9, 0.1)


@settings(max_examples=100, deadline=None)
@given(gg=st.floats(1e-6, 1e6), fc=st.floats(1e-6, 1e6), dt=st.floats(1e-4, 1e4),
       q=st.floats(0.05, 2.0))
def test_alpha_monotone_in_dt_and_q(gg, fc, dt, q):
    a = sav.sav_alpha(dt, q, gg, fc)
    assert sav.sav_alpha(2 * dt, q, gg, fc) >= a
    assert sav.sav_alpha(dt, 1.5 * q, gg, fc) <= a
    assert 0 < a <= dt


def test_linesearch_wolfe_terminates():
    ros = problems.RosenbrockProblem(2)
    s = sav.init_state(ros, [-3.0, -4.0], 10.0)
    for _ in range(100):
        s, rec = sav.linesearch_sav_step(s, ros, operators.zero(2), wolfe=(1e-4, 0.9))
        assert rec.dt <= 10.0
        assert s.dt == 10.0


def test_linesearch_wolfe_error():
    # a tiny step fails the curvature condition, and halving only shrinks it
    ros = problems.RosenbrockProblem(2)
    s = sav.init_state(ros, [-3.0, -4.0], 1e-6)
    with pytest.raises(sav.WolfeError, match="wolfe-not-found"):
        sav.linesearch_sav_step(s, ros, operators.zero(2), wolfe=(1e-4, 0.9))


def test_quadratic_alpha_oracle_examples():
    a, b = sav.quadratic_alpha_oracle(np.eye(3), np.zeros(3), [1.0, -2.0, 0.5])
    assert (a, b) == (pytest.approx(1.0), pytest.approx(1.0))
    a, b = sav.quadratic_alpha_oracle(np.diag([1.0, 2.0]), np.zeros(2), [1.0, 1.0])
    assert a == pytest.approx(5 / 17) and b == pytest.approx(17 / 65)
    assert sav.quadratic_alpha_oracle(np.eye(2), [1.0, 1.0], [1.0, 1.0]) is None


def test_large_dt_alpha_matches_oracle(rng):
    A = rng.standard_normal((8, 5))
    b = rng.standard_normal(8)
    ls = problems.LeastSquaresProblem(A, b, shift_C=0.0)
    th = rng.standard_normal(5)
    s = sav.init_state(ls, th, 1e12)
    for _ in range(5):
        alpha, _ = sav.quadratic_alpha_oracle(A, b, s.theta)
        s, rec = sav.rsavq_step(s, ls, operators.zero(5), sav.QParams(0.5, restart=True))
        assert rec.alpha == pytest.approx(alpha, rel=1e-6)
