from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st
from mpmath import mp, mpf, pi

import fdsl.basic as basic_mod
from fdsl.basic import (
    c_tilde_bracket,
    c_tilde_closed,
    characteristic,
    characteristic_derivative,
    eval_u0,
    eval_u0_prime,
    solve_basic,
    u0_sup_norm,
)
from fdsl.core import ProblemSpec
from fdsl.errors import BracketFailure

from problems import worked_example

# root of y cos(y/2) + sin(y/2) = 0 on (pi, 2 pi) by 200 bisection steps
Y1_HALF_BETA2 = mpf("3.673194406304251445502605004882020631637")
# direct evaluation, matches a double-precision evaluation to 1e-15
CHAR_4_THIRD_15 = mpf("3.63939897501779642690705329422")


def test_characteristic_examples():
    assert abs(characteristic(pi, "1/2", 0)) < mpf(10) ** -45
    assert abs(characteristic(2 * pi, "1/2", 2)) < mpf(10) ** -45
    assert abs(characteristic(4, "1/3", 15) - CHAR_4_THIRD_15) < mpf(10) ** -28


@pytest.mark.parametrize("y,alpha,beta", [(4, "1/3", 15), ("3.2", "1/30", 10), (9, "0.37", 3)])
def test_characteristic_derivative_matches_numerical(y, alpha, beta):
    f = lambda t: characteristic(t, alpha, beta)  # noqa: E731
    exact = characteristic_derivative(y, alpha, beta)
    assert abs(exact - mp.diff(f, mpf(y))) < mpf(10) ** -40


def test_resonant_case_second_eigenvalue():
    b = solve_basic(worked_example(), 2)
    assert b.resonant
    assert b.lambda0 == (2 * pi) ** 2
    assert abs(b.c0 + 1 / (2 * pi)) < mpf(10) ** -45


def test_beta_zero_first_eigenpair():
    b = solve_basic(ProblemSpec(alpha="1/2"), 1)
    assert b.lambda0 == pi ** 2
    assert b.M == mpf(1) / 2
    assert abs(b.c_tilde - 1) < mpf(10) ** -45


def test_nonresonant_root_matches_bisection_oracle():
    b = solve_basic(worked_example(), 1)
    assert not b.resonant
    assert abs(b.sqrt_lambda - Y1_HALF_BETA2) < mpf(10) ** -35
    assert pi ** 2 < b.lambda0 < 4 * pi ** 2


def test_invalid_index():
    with pytest.raises(ValueError):
        solve_basic(worked_example(), 0)


def test_bracket_failure(monkeypatch):
    monkeypatch.setattr(basic_mod, "characteristic", lambda y, a, b: mpf(1))
    with pytest.raises(BracketFailure):
        solve_basic(ProblemSpec(alpha="0.3", beta=1), 1)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_u0_boundary_values(n):
    b = solve_basic(ProblemSpec(alpha="0.37", beta=3), n)
    assert abs(eval_u0(b, 0)) < mpf(10) ** -45
    assert abs(eval_u0(b, 1)) < mpf(10) ** -45
    y, a = b.sqrt_lambda, b.alpha
    right_at_alpha = b.c0 * mp.sin(y * (1 - a))
    assert abs(eval_u0(b, a) - right_at_alpha) < mpf(10) ** -40


def test_u0_midpoint_beta_zero():
    b = solve_basic(ProblemSpec(alpha="1/2"), 1)
    assert abs(eval_u0(b, "0.5") - 1 / pi) < mpf(10) ** -45


def test_u0_derivative_jump():
    b = solve_basic(ProblemSpec(alpha="0.37", beta=3), 2)
    jump = eval_u0_prime(b, b.alpha, "right") - eval_u0_prime(b, b.alpha, "left")
    assert abs(jump - 3 * eval_u0(b, b.alpha)) < mpf(10) ** -40


def test_sup_norm_bounds():
    b1 = solve_basic(ProblemSpec(alpha="1/2"), 1)
    assert abs(u0_sup_norm(b1)[0] - 1 / pi) < mpf(10) ** -45
    b3 = solve_basic(ProblemSpec(alpha="1/2"), 3)
    assert abs(u0_sup_norm(b3)[0] - 1 / (3 * pi)) < mpf(10) ** -45
    bw = solve_basic(worked_example(), 1)
    bound, sampled = u0_sup_norm(bw)
    assert abs(bound - max(1, mp.sqrt(bw.c_tilde)) / Y1_HALF_BETA2) < mpf(10) ** -30
    assert sampled <= bound * (1 + mpf(10) ** -30)


def test_norm_constant_against_quadrature():
    b = solve_basic(ProblemSpec(alpha="0.37", beta=3), 2)
    integral = mp.quad(lambda x: eval_u0(b, x) ** 2, [0, b.alpha, 1])
    assert abs(b.lambda0 * integral - b.M) < mpf(10) ** -30


def test_constants_approach_free_values():
    b = solve_basic(worked_example(), 20)
    assert abs(b.M - mpf(1) / 2) < 0.1
    assert abs(b.c_tilde - 1) < 0.2


_alpha = st.fractions(min_value=Fraction(1, 50), max_value=Fraction(49, 50), max_denominator=60)


@given(_alpha, st.integers(0, 20), st.integers(1, 8))
def test_invariants(alpha, beta, n):
    spec = ProblemSpec(alpha=alpha, beta=beta)
    b = solve_basic(spec, n)
    assert pi ** 2 * n ** 2 <= b.lambda0 < pi ** 2 * (n + 1) ** 2
    assert abs(characteristic(b.sqrt_lambda, alpha, beta)) < mpf(10) ** -40
    assert b.c0 != 0
    assert abs(b.c_tilde - b.lambda0 * b.c0 ** 2) < mpf(10) ** -40
    y = b.sqrt_lambda
    assert abs(c_tilde_closed(y, b.alpha, b.beta) - c_tilde_bracket(y, b.alpha, b.beta)) < mpf(10) ** -40
    if beta == 0:
        assert abs(b.lambda0 - pi ** 2 * n ** 2) < mpf(10) ** -40 and b.M == mpf(1) / 2


@given(st.floats(0.05, 0.95), st.floats(0.1, 20), st.integers(1, 6))
def test_reduced_map_decreasing(alpha, beta, n):
    """cot(y a) + cot(y (1-a)) + beta/y decreases between its poles."""
    a = mpf(alpha)
    f = lambda y: mp.sin(y) / (mp.sin(y * a) * mp.sin(y * (1 - a))) + beta / y  # noqa: E731
    lo, hi = pi * n, pi * (n + 1)
    for k in range(1, 21):
        y = lo + (hi - lo) * k / mpf(21)
        den = mp.sin(y * a) * mp.sin(y * (1 - a))
        if abs(den) < 1e-3:
            continue
        assert mp.diff(f, y) < 0
