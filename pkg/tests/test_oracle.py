import math

import numpy as np
import pytest
from mpmath import mpf

from fdsl.basic import eval_u0, eval_u0_prime, solve_basic
from fdsl.core import ProblemSpec
from fdsl.errors import NoSignChange
from fdsl.oracle import find_eigenvalue, shoot, shoot_profile

from problems import REF_LAMBDA, smooth_linear, unperturbed, worked_example


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_free_string_eigenvalues(n):
    target = (math.pi * n) ** 2
    res = find_eigenvalue(unperturbed("0.37", 0), (target - 1, target + 1))
    assert abs(res.lam - target) < 1e-9 * target
    assert res.steps > 0 and res.error_estimate > 0


def test_shoot_closed_form():
    # u = sin(sqrt(lam) x) / sqrt(lam) without potential or jump
    lam = 7.3
    assert abs(shoot(unperturbed(), lam) - math.sin(math.sqrt(lam)) / math.sqrt(lam)) < 1e-11


def test_jump_eigenvalue_matches_characteristic_root():
    spec = unperturbed("1/2", 2)
    lam0 = float(solve_basic(spec, 1).lambda0)
    res = find_eigenvalue(spec, (lam0 - 0.5, lam0 + 0.5))
    assert abs(res.lam - lam0) < 1e-9


def test_profile_against_closed_form():
    spec = unperturbed("0.3", 4)
    basic = solve_basic(spec, 2)
    xs = np.linspace(0, 1, 23)
    u, du = shoot_profile(spec, float(basic.lambda0), xs)
    for x, a, b in zip(xs, u, du):
        assert abs(a - float(eval_u0(basic, mpf(x)))) < 1e-9
        if abs(x - 0.3) > 1e-12:
            assert abs(b - float(eval_u0_prime(basic, mpf(x)))) < 1e-8
    with pytest.raises(ValueError):
        shoot_profile(spec, 1.0, [1.5])


def test_tolerance_invariance():
    spec = smooth_linear("0.4", 3, [2, -1, 4])
    lam0 = float(solve_basic(spec, 1).lambda0)
    coarse = find_eigenvalue(spec, (lam0, lam0 + 8), rtol=1e-8, atol=1e-10)
    fine = find_eigenvalue(spec, (lam0, lam0 + 8))
    assert abs(coarse.lam - fine.lam) < 1e-6


def test_singular_worked_example_first_eigenvalue():
    ref = float(REF_LAMBDA[1])
    res = find_eigenvalue(worked_example(), (ref - 0.5, ref + 0.5))
    assert abs(res.lam - ref) < 1e-8


def test_no_sign_change():
    with pytest.raises(NoSignChange):
        find_eigenvalue(unperturbed(), (1.0, 2.0))


def test_nonlinear_term_is_used():
    lin = ProblemSpec(alpha="1/2", beta=1)
    non = ProblemSpec(alpha="1/2", beta=1, nonlin={3: 50})
    assert shoot(lin, 15.0) != shoot(non, 15.0)
