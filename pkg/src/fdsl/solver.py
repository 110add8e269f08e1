"""The functional-discrete recursion.

Writing u = sum_j u^(j) and lambda = sum_j lambda^(j), each correction
j >= 1 solves

    u^(j)'' + lambda0 u^(j) = F^(j),   u^(j)(0) = u^(j)'(0) = u^(j)(1) = 0,
    u^(j)'(alpha+0) - u^(j)'(alpha-0) = beta u^(j)(alpha),

with F^(j) = F~^(j) - lambda^(j) u0 and

    F~^(j) = -sum_{p=1}^{j-1} lambda^(j-p) u^(p) + q u^(j-1) + A_{j-1}(N; u^(0..j-1)).

lambda^(j) is fixed by orthogonality of F^(j) to u0.  With y = sqrt(lambda0)
the correction is

    u(z) = int_0^z sin(y (z - xi)) F(xi) dxi / y                       z < alpha
    u(z) = c_j sin(y (1 - z)) - int_z^1 sin(y (z - xi)) F(xi) dxi / y   z > alpha

where c_j makes the two pieces meet at alpha.  The integrals are evaluated
on a composite sinc grid with the tanh rule and Stenger's formula.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from mpmath import mp, mpf

from .adomian import AdomianSeries
from .basic import BasicSolution, solve_basic
from .core import ProblemSpec, to_scalar
from .errors import DegenerateDenominator, DivergenceWarning
from .sincquad import (
    CompositeGrid,
    QuadratureParameters,
    build_composite,
    choose_parameters,
    default_d,
    default_mu,
    definite_integral,
    stenger_prefix,
    step_size,
)

GROWTH_STEPS = 3


@dataclass
class Correction:
    """Order-j correction: lambda^(j), c^(j) and node samples of u^(j), u^(j)'."""

    j: int
    lambda_j: mpf
    c_j: mpf
    u_samples: np.ndarray
    uprime_samples: np.ndarray
    u_at_alpha: mpf
    uprime_at_alpha_left: mpf
    uprime_at_alpha_right: mpf
    sup_abs_u: mpf

    @property
    def jump_defect(self) -> mpf:
        return self.uprime_at_alpha_right - self.uprime_at_alpha_left


@dataclass
class FDSolution:
    spec: ProblemSpec
    basic: BasicSolution
    grid: CompositeGrid
    quad: QuadratureParameters
    corrections: list
    lambda_m: mpf
    residual_r: mpf
    jump_defect: mpf
    u_samples: np.ndarray
    uprime_samples: np.ndarray
    u_at_alpha: mpf
    residual_history: list = field(default_factory=list)
    jump_history: list = field(default_factory=list)

    @property
    def rank(self) -> int:
        return len(self.corrections)

    @property
    def lambda_history(self) -> list:
        """|lambda^(j)| for j = 0..m (j = 0 is lambda0)."""
        return [abs(self.basic.lambda0)] + [abs(c.lambda_j) for c in self.corrections]

    @property
    def norm_history(self) -> list:
        """sup |u^(j)| for j = 0..m over the grid nodes and alpha."""
        return [self._u0_sup()] + [c.sup_abs_u for c in self.corrections]

    def lambda_partial(self, m: int) -> mpf:
        return self.basic.lambda0 + mp.fsum(c.lambda_j for c in self.corrections[:m])

    def _u0_sup(self) -> mpf:
        u0 = _Trig(self.basic, self.grid).u0
        return max(max(abs(v) for v in u0), abs(_u0_alpha(self.basic)))


# ---------------------------------------------------------------------------
# node tables


class _Trig:
    """sin/cos tables at the grid nodes for y = sqrt(lambda0)."""

    def __init__(self, basic: BasicSolution, grid: CompositeGrid):
        y = basic.sqrt_lambda
        self.y = y
        zs = grid.nodes
        self.s = np.array([mp.sin(y * z) for z in zs], dtype=object)
        self.c = np.array([mp.cos(y * z) for z in zs], dtype=object)
        # 1 - z from the subinterval offsets, which stays exact near x = 1
        one_minus = []
        for g in grid.grids:
            tail = 1 - g.b
            one_minus.extend(tail + off for off in g.right_offsets)
        one_minus = np.array(one_minus, dtype=object)
        L, R = grid.left, grid.right
        self.s_right = np.array([mp.sin(y * w) for w in one_minus[R]], dtype=object)
        self.c_right = np.array([mp.cos(y * w) for w in one_minus[R]], dtype=object)
        u0 = np.empty(grid.size, dtype=object)
        du0 = np.empty(grid.size, dtype=object)
        u0[L] = self.s[L] / y
        du0[L] = self.c[L]
        u0[R] = basic.c0 * self.s_right
        du0[R] = -basic.c0 * y * self.c_right
        self.u0, self.du0 = u0, du0
        a = basic.alpha
        self.s_alpha, self.c_alpha = mp.sin(y * a), mp.cos(y * a)
        self.s_tail, self.c_tail = mp.sin(y * (1 - a)), mp.cos(y * (1 - a))


def _u0_alpha(basic: BasicSolution) -> mpf:
    y = basic.sqrt_lambda
    return mp.sin(y * basic.alpha) / y


def _left_prefix(grid: CompositeGrid, samples) -> tuple:
    """Prefix integrals on the left-of-alpha grids and the total over (0, alpha)."""
    out = np.empty(grid.left.stop, dtype=object)
    acc = mpf(0)
    for g, sl in zip(grid.grids[:grid.n_left], grid.slices[:grid.n_left]):
        part = samples[sl]
        out[sl] = stenger_prefix(g, part) + acc
        acc += definite_integral(g, part)
    return out, acc


def _right_suffix(grid: CompositeGrid, samples) -> tuple:
    """Suffix integrals on the right-of-alpha grids and the total over (alpha, 1)."""
    start = grid.right.start
    out = np.empty(grid.size - start, dtype=object)
    acc = mpf(0)
    pairs = list(zip(grid.grids[grid.n_left:], grid.slices[grid.n_left:]))
    for g, sl in reversed(pairs):
        part = samples[sl]
        total = definite_integral(g, part)
        local = slice(sl.start - start, sl.stop - start)
        out[local] = total - stenger_prefix(g, part) + acc
        acc += total
    return out, acc


# ---------------------------------------------------------------------------
# one step of the recursion


def rhs_F(spec: ProblemSpec, basic: BasicSolution, corrections: list, grid: CompositeGrid,
          *, q_samples=None, u0=None, adomian: AdomianSeries | None = None) -> np.ndarray:
    """F~^(j) at every node for j = len(corrections) + 1 (lambda^(j) u0 term excluded).

    ``corrections`` holds orders 1..j-1.  ``adomian`` may carry the running
    Adomian state over u^(0..j-1); it is built from scratch when omitted.
    """
    j = len(corrections) + 1
    q = grid.eval_potential(spec) if q_samples is None else q_samples
    u0 = _Trig(basic, grid).u0 if u0 is None else u0
    us = [u0] + [c.u_samples for c in corrections]
    lams = [basic.lambda0] + [c.lambda_j for c in corrections]
    out = q * us[j - 1]
    for p in range(1, j):
        lam = lams[j - p]
        if lam != 0:
            out = out - lam * us[p]
    if not spec.is_linear:
        if adomian is None:
            adomian = AdomianSeries(spec.nonlin_coeffs)
        while len(adomian.coefficients) < j:
            adomian.append(us[len(adomian.coefficients)])
        out = out + adomian.coefficients[j - 1]
    return out


def next_lambda(basic: BasicSolution, F_tilde, grid: CompositeGrid, *, u0=None) -> mpf:
    """lambda^(j) = int F~ u0 / int u0^2, both by the tanh rule over (0, 1)."""
    u0 = _Trig(basic, grid).u0 if u0 is None else u0
    num = grid.integrate(F_tilde * u0)
    den = grid.integrate(u0 * u0)
    return num / den


def next_c(basic: BasicSolution, F, grid: CompositeGrid, *, trig: _Trig | None = None) -> mpf:
    """c^(j) from the continuity of u^(j) at alpha.

    Non-resonant: int_0^1 sin(y (alpha - xi)) F dxi / (y sin(y (1 - alpha))).
    Resonant (n alpha integer): (-1)^(n+1) int_0^1 cos(y xi) F / (pi n)
    + (-1)^n beta int_0^alpha sin(y xi) F / (pi n)^2.
    """
    t = _Trig(basic, grid) if trig is None else trig
    L = grid.left
    Ic_alpha = grid.integrate(t.c * F, L)
    Ic1 = Ic_alpha + grid.integrate(t.c * F, grid.right)
    Is_alpha = grid.integrate(t.s * F, L)
    if basic.resonant:
        n = basic.n
        y = mp.pi * n
        sign = -1 if n % 2 == 0 else 1
        return sign * Ic1 / y - sign * basic.beta * Is_alpha / (y * y)
    if abs(t.s_tail) < mpf(10) ** (-mp.dps / 2):
        raise DegenerateDenominator(
            f"sin(sqrt(lambda0)(1 - alpha)) = {mp.nstr(t.s_tail, 5)} for n={basic.n}")
    Is1 = Is_alpha + grid.integrate(t.s * F, grid.right)
    return (t.s_alpha * Ic1 - t.c_alpha * Is1) / (t.y * t.s_tail)


def next_c_jump(basic: BasicSolution, F, grid: CompositeGrid, *, trig: _Trig | None = None) -> mpf:
    """c^(j) from the derivative jump at alpha instead of continuity.

    Agrees with :func:`next_c` whenever F is orthogonal to u0.
    """
    t = _Trig(basic, grid) if trig is None else trig
    L, R = grid.left, grid.right
    Ic_a, Is_a = grid.integrate(t.c * F, L), grid.integrate(t.s * F, L)
    Jc_a, Js_a = grid.integrate(t.c * F, R), grid.integrate(t.s * F, R)
    u_alpha = (t.s_alpha * Ic_a - t.c_alpha * Is_a) / t.y
    d_left = t.c_alpha * Ic_a + t.s_alpha * Is_a
    # d_right = -c y cos(y(1-alpha)) - (c_a Jc + s_a Js) = d_left + beta u(alpha)
    rest = -(t.c_alpha * Jc_a + t.s_alpha * Js_a)
    denom = t.y * t.c_tail
    if abs(denom) < mpf(10) ** (-mp.dps / 2):
        raise DegenerateDenominator(f"cos(sqrt(lambda0)(1 - alpha)) vanishes for n={basic.n}")
    return (rest - d_left - basic.beta * u_alpha) / denom


def next_u(basic: BasicSolution, F, c_j, grid: CompositeGrid, *, trig: _Trig | None = None,
           j: int = 0, lambda_j=mpf(0)) -> Correction:
    """Node samples of u^(j) and u^(j)' plus the one-sided values at alpha."""
    t = _Trig(basic, grid) if trig is None else trig
    y = t.y
    L, R = grid.left, grid.right
    Ic, Ic_a = _left_prefix(grid, t.c * F)
    Is, Is_a = _left_prefix(grid, t.s * F)
    Jc, Jc_a = _right_suffix(grid, t.c * F)
    Js, Js_a = _right_suffix(grid, t.s * F)
    s, c = t.s, t.c
    u = np.empty(grid.size, dtype=object)
    du = np.empty(grid.size, dtype=object)
    u[L] = (s[L] * Ic - c[L] * Is) / y
    du[L] = c[L] * Ic + s[L] * Is
    u[R] = c_j * t.s_right - (s[R] * Jc - c[R] * Js) / y
    du[R] = -c_j * y * t.c_right - (c[R] * Jc + s[R] * Js)
    u_alpha = (t.s_alpha * Ic_a - t.c_alpha * Is_a) / y
    d_left = t.c_alpha * Ic_a + t.s_alpha * Is_a
    d_right = -c_j * y * t.c_tail - (t.c_alpha * Jc_a + t.s_alpha * Js_a)
    sup = max(max(abs(v) for v in u), abs(u_alpha))
    return Correction(j, to_scalar(lambda_j), to_scalar(c_j), u, du, u_alpha, d_left, d_right, sup)


# ---------------------------------------------------------------------------
# diagnostics


def residual(sol: FDSolution, m: int | None = None) -> mpf:
    """Integrated residual of the rank-m approximation.

    With G = q u_m - lambda_m u_m + N(u_m),

        r = int_0^alpha |1 - u_m' + int_0^xi G| + int_alpha^1 |1 - u_m' + beta u_m(alpha) + int_0^xi G|.
    """
    m = sol.rank if m is None else m
    trig = _Trig(sol.basic, sol.grid)
    q = sol.grid.eval_potential(sol.spec)
    u, du, ua = _rank_sums(sol, trig, m)
    return _residual_value(sol.spec, sol.grid, q, u, du, ua, sol.lambda_partial(m))


def jump_defect(sol: FDSolution, m: int | None = None) -> mpf:
    """u_m'(alpha+0) - u_m'(alpha-0) - beta u_m(alpha) for the rank-m sums."""
    m = sol.rank if m is None else m
    trig = _Trig(sol.basic, sol.grid)
    return _jump_value(sol.basic, trig, sol.corrections[:m])


def _rank_sums(sol: FDSolution, trig: _Trig, m: int) -> tuple:
    u, du = trig.u0.copy(), trig.du0.copy()
    ua = _u0_alpha(sol.basic)
    for c in sol.corrections[:m]:
        u = u + c.u_samples
        du = du + c.uprime_samples
        ua += c.u_at_alpha
    return u, du, ua


def _residual_value(spec, grid, q, u, du, u_alpha, lam) -> mpf:
    from .core import eval_poly_map

    G = q * u - lam * u
    if not spec.is_linear:
        G = G + eval_poly_map(spec.nonlin_coeffs, u)
    inner = grid.prefix(G)
    integrand = 1 - du + inner
    R = grid.right
    integrand[R] = integrand[R] + spec.beta * u_alpha
    return grid.integrate(np.array([abs(v) for v in integrand], dtype=object))


def _jump_value(basic: BasicSolution, trig: _Trig, corrections: list) -> mpf:
    y = trig.y
    d_left = trig.c_alpha
    d_right = -basic.c0 * y * trig.c_tail
    ua = _u0_alpha(basic)
    for c in corrections:
        d_left += c.uprime_at_alpha_left
        d_right += c.uprime_at_alpha_right
        ua += c.u_at_alpha
    return d_right - d_left - basic.beta * ua


# ---------------------------------------------------------------------------
# driver


def make_quadrature(spec: ProblemSpec, basic: BasicSolution, *, eps=None, K=None, d=None,
                    mu=None, K_cap: int = 2 ** 14) -> QuadratureParameters:
    """Fixed K when given, otherwise the a-posteriori choice for ``eps``."""
    d = default_d() if d is None else to_scalar(d)
    mu = default_mu() if mu is None else to_scalar(mu)
    if K is not None:
        h = step_size(int(K), d, mu)
        return QuadratureParameters(int(K), d, mu, (h,) * len(spec.subintervals()))
    eps = mpf("1e-12") if eps is None else to_scalar(eps)
    return choose_parameters(spec, basic, eps, d=d, mu=mu, K_cap=K_cap)


def run_fd(spec: ProblemSpec, n: int, m: int, *, eps=None, K=None, d=None, mu=None,
           K_cap: int = 2 ** 14, quad: QuadratureParameters | None = None,
           diagnostics: str = "all") -> FDSolution:
    """Rank-m FD approximation of eigenpair ``n``.

    Parameters
    ----------
    spec : ProblemSpec
    n : int
        Eigenpair index, n >= 1.
    m : int
        Rank; corrections 1..m are computed.
    eps, K, d, mu, K_cap
        Quadrature settings.  ``K`` overrides the search driven by ``eps``,
        which stops with an error once K would exceed ``K_cap``.
    quad : QuadratureParameters, optional
        Precomputed parameters; takes precedence over the other settings.
    diagnostics : {"all", "final", "none"}
        Ranks at which the residual and jump functionals are evaluated.
    """
    if m < 0:
        raise ValueError(f"rank must be >= 0, got {m}")
    basic = solve_basic(spec, n)
    if quad is None:
        quad = make_quadrature(spec, basic, eps=eps, K=K, d=d, mu=mu, K_cap=K_cap)
    grid = build_composite(spec, quad.K, quad.d, quad.mu)
    trig = _Trig(basic, grid)
    q = grid.eval_potential(spec) if spec.has_potential else np.array([mpf(0)] * grid.size, dtype=object)
    adomian = None if spec.is_linear else AdomianSeries(spec.nonlin_coeffs)

    corrections: list = []
    growth = 0
    for j in range(1, m + 1):
        F_tilde = rhs_F(spec, basic, corrections, grid, q_samples=q, u0=trig.u0, adomian=adomian)
        lam_j = next_lambda(basic, F_tilde, grid, u0=trig.u0)
        F = F_tilde - lam_j * trig.u0
        c_j = next_c(basic, F, grid, trig=trig)
        corr = next_u(basic, F, c_j, grid, trig=trig, j=j, lambda_j=lam_j)
        if corrections and abs(lam_j) > abs(corrections[-1].lambda_j):
            growth += 1
            if growth == GROWTH_STEPS:
                warnings.warn(f"|lambda^(j)| grew for {GROWTH_STEPS} consecutive orders "
                              f"(n={n}, j={j})", DivergenceWarning, stacklevel=2)
        else:
            growth = 0
        corrections.append(corr)

    sol = FDSolution(spec, basic, grid, quad, corrections, mpf(0), mpf(0), mpf(0),
                     trig.u0, trig.du0, _u0_alpha(basic))
    sol.lambda_m = sol.lambda_partial(m)
    ranks = {"all": range(m + 1), "final": [m], "none": []}[diagnostics]
    for k in ranks:
        u, du, ua = _rank_sums(sol, trig, k)
        sol.residual_history.append(
            (k, _residual_value(spec, grid, q, u, du, ua, sol.lambda_partial(k))))
        sol.jump_history.append((k, _jump_value(basic, trig, corrections[:k])))
    u, du, ua = _rank_sums(sol, trig, m)
    sol.u_samples, sol.uprime_samples, sol.u_at_alpha = u, du, ua
    if ranks:
        sol.residual_r = sol.residual_history[-1][1]
        sol.jump_defect = sol.jump_history[-1][1]
    return sol
