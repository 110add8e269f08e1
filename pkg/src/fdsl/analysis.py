"""A-priori convergence data: majorants, generating function, radius and rate.

For the linear problem the majorant numbers v_j obey

    v_1 = w2 v0,    v_j = sum_{p=1}^{j-1} v_{j-p} v_p + w2 v_{j-1},   w2 = (1 + v0) ||q||,

so f(z) = sum_j v_j z^j solves f = f^2 + z w2 (f + v0), which gives

    f(z) = (1 - w2 z - sqrt((w1 - w2 z)(1/w1 - w2 z))) / 2,
    w1 = 1 + 2 v0 + 2 sqrt(v0 (1 + v0)),

with radius R = 1 / (w1 w2).  The nonlinear radius is the maximum of the
explicit inverse map z(f) on (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np
from mpmath import mp, mpf

from .adomian import AdomianSeries, MajorantNonlinearity
from .basic import BasicSolution
from .core import to_scalar
from .errors import NotConvergent, ZeroNorm


def constants_ab(basic: BasicSolution) -> tuple:
    """(a(n), b(n)) scaling the corrections into the majorant problem."""
    y = basic.sqrt_lambda
    a = (mp.sqrt(1 + (1 + basic.beta / y) ** 2) + 1) / y
    b = max(mpf(1), y / basic.M, y * mp.sqrt(basic.c_tilde) / basic.M)
    return a, b


def v0_bar(basic: BasicSolution) -> mpf:
    """max{1, c~, sqrt(c~) M / sqrt(lambda0)} / M."""
    ct, M = basic.c_tilde, basic.M
    return max(mpf(1), ct, mp.sqrt(ct) * M / basic.sqrt_lambda) / M


def w_constants(v0, q_norm) -> tuple:
    v0, q_norm = to_scalar(v0), to_scalar(q_norm)
    w1 = 1 + 2 * v0 + 2 * mp.sqrt(v0 * (1 + v0))
    w2 = (1 + v0) * q_norm
    return w1, w2


def radius_linear(v0, q_norm) -> mpf:
    """R = (1 + 2 v0 - 2 sqrt(v0 (1 + v0))) / ((1 + v0) ||q||)."""
    v0, q_norm = to_scalar(v0), to_scalar(q_norm)
    if q_norm == 0:
        raise ZeroNorm("||q|| = 0: the linear series converges for every z")
    return (1 + 2 * v0 - 2 * mp.sqrt(v0 * (1 + v0))) / ((1 + v0) * q_norm)


def generating_function(z, v0, q_norm) -> mpf:
    """Closed form of sum_j v_j z^j in the linear case, valid for 0 <= z <= R."""
    z = to_scalar(z)
    w1, w2 = w_constants(v0, q_norm)
    return (1 - w2 * z - mp.sqrt((w1 - w2 * z) * (1 / w1 - w2 * z))) / 2


def _inverse_map(v0, q_norm, majorant: MajorantNonlinearity | None):
    v0, q_norm = to_scalar(v0), to_scalar(q_norm)
    if majorant is None or majorant.is_zero():
        n0, n1 = mpf(0), mpf(0)
        nf = lambda f: mpf(0)  # noqa: E731
        dnf = lambda f: mpf(0)  # noqa: E731
    else:
        n0, n1 = majorant.value_at_zero(), majorant.slope_at_zero()
        nf, dnf = majorant, majorant.derivative

    def z(f):
        den = (1 + v0) * (q_norm * (f + v0) + nf(f) + n1 * v0 - n0)
        return (f - f * f) / den

    def dz_sign(f):
        den = (1 + v0) * (q_norm * (f + v0) + nf(f) + n1 * v0 - n0)
        dden = (1 + v0) * (q_norm + dnf(f))
        return (1 - 2 * f) * den - (f - f * f) * dden

    return z, dz_sign


def radius_nonlinear(v0, q_norm, majorant: MajorantNonlinearity | None = None) -> mpf:
    """Maximum over f in (0, 1) of the inverse map z(f).

    Golden-section search narrows the maximiser, then bisection on the sign
    of z'(f) pins it down at the working precision.
    """
    v0, q_norm = to_scalar(v0), to_scalar(q_norm)
    n1 = mpf(0) if majorant is None else majorant.slope_at_zero()
    if q_norm == 0 and n1 == 0:
        # every majorant number past v0 vanishes
        raise ZeroNorm("perturbation vanishes at first order: radius unbounded")
    z, dz = _inverse_map(v0, q_norm, majorant)
    lo, hi = mpf(0), mpf(1)
    g = (mp.sqrt(5) - 1) / 2
    x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
    z1, z2 = z(x1), z(x2)
    for _ in range(60):
        if z1 < z2:
            lo, x1, z1 = x1, x2, z2
            x2 = lo + g * (hi - lo)
            z2 = z(x2)
        else:
            hi, x2, z2 = x2, x1, z1
            x1 = hi - g * (hi - lo)
            z1 = z(x1)
    # widen slightly so the bracket surely contains the sign change of z'
    lo, hi = max(mpf(0), lo - (hi - lo)), min(mpf(1), hi + (hi - lo))
    if dz(lo) > 0 > dz(hi):
        for _ in range(mp.prec + 10):
            mid = (lo + hi) / 2
            if dz(mid) > 0:
                lo = mid
            else:
                hi = mid
    return z((lo + hi) / 2)


def rate_rn(basic: BasicSolution, R) -> mpf:
    """r_n = (1 + sqrt(1 + (1 + beta/sqrt(lambda0))^2)) / (sqrt(lambda0) R) = a(n) / R."""
    R = to_scalar(R)
    if R <= 0:
        raise ValueError("R must be positive")
    a, _ = constants_ab(basic)
    return a / R


def alpha_coeff(j: int) -> mpf:
    """(2j-3)!! / (2 (2j)!!) for j >= 2 and 1/4 for j = 1."""
    if j < 1:
        raise ValueError("j must be >= 1")
    if j == 1:
        return mpf(1) / 4
    # (2j-3)!! = (2j-2)! / (2^(j-1) (j-1)!),  (2j)!! = 2^j j!
    odd = Fraction(factorial(2 * j - 2), 2 ** (j - 1) * factorial(j - 1))
    even = 2 ** j * factorial(j)
    val = odd / (2 * even)
    return mpf(val.numerator) / val.denominator


def majorant_sequence(v0, q_norm, majorant: MajorantNonlinearity | None, count: int) -> tuple:
    """Majorant numbers (v_0..v_J, mu_1..mu_J as a list with mu[0] = None).

    v_1 = (1 + v0)(||q|| v0 + N~_1'(0) v0) and for j >= 2
    v_j = sum_{p=1}^{j-1} v_{j-p} v_p + (1 + v0)(||q|| v_{j-1} + A_{j-1}(N~_1; 0, v_1, ..., v_{j-1})),
    mu_j = v_j / (1 + v0).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    v0, q_norm = to_scalar(v0), to_scalar(q_norm)
    k = 1 + v0
    n1 = mpf(0) if majorant is None else majorant.slope_at_zero()
    ado = None if majorant is None or majorant.is_zero() else AdomianSeries(majorant.shifted)
    v = [v0, k * (q_norm * v0 + n1 * v0)]
    if ado is not None:
        ado.append(mpf(0))
        ado.append(v[1])
    for j in range(2, count + 1):
        acc = mp.fsum(v[j - p] * v[p] for p in range(1, j))
        extra = ado.coefficients[j - 1] if ado is not None else mpf(0)
        v.append(acc + k * (q_norm * v[j - 1] + extra))
        if ado is not None:
            ado.append(v[j])
    mu = [None] + [x / k for x in v[1:]]
    return v, mu


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ConvergenceReport:
    n: int
    v0_bar: mpf
    a_n: mpf
    b_n: mpf
    M_n: mpf
    c_tilde: mpf
    lambda0: mpf
    q_norm: mpf
    R: mpf
    R_linear: mpf | None
    r_n: mpf
    m: int
    C_nm: mpf | None
    eigenvalue_bound: mpf | None
    eigenfunction_bound: mpf | None
    majorant: MajorantNonlinearity | None = None

    @property
    def converged_flag(self) -> bool:
        return self.r_n < 1


def error_bounds(report: ConvergenceReport, m: int) -> tuple:
    """(eigenvalue bound, eigenfunction bound) for rank m; needs r_n < 1.

    C = alpha_{m+1} M / (1 - r_n), where for a nonlinear problem alpha_{m+1}
    is replaced by the computed envelope v_{m+1} R^(m+1);
    eigenfunction: C min{1/M, 1/sqrt(lambda0), 1/(sqrt(lambda0) sqrt(c~))} r_n^(m+1);
    eigenvalue:    C r_n^m / ((M + max{1, c~, sqrt(c~) M / sqrt(lambda0)}) R).
    """
    r = report.r_n
    if r >= 1:
        raise NotConvergent(f"r_n = {mp.nstr(r, 6)} >= 1 for n={report.n}")
    C = _c_nm(report, m)
    M, ct, y = report.M_n, report.c_tilde, mp.sqrt(report.lambda0)
    fn = C * min(1 / M, 1 / y, 1 / (y * mp.sqrt(ct))) * r ** (m + 1)
    ev = C * r ** m / ((M + max(mpf(1), ct, mp.sqrt(ct) * M / y)) * report.R)
    return ev, fn


def _c_nm(report: ConvergenceReport, m: int) -> mpf:
    maj = report.majorant
    if maj is None or maj.is_zero():
        coef = alpha_coeff(m + 1)
    else:
        v, _ = majorant_sequence(report.v0_bar, report.q_norm, maj, m + 1)
        coef = v[m + 1] * report.R ** (m + 1)
    return coef * report.M_n / (1 - report.r_n)


def convergence_report(basic: BasicSolution, q_norm, nonlin_coeffs=None, m: int = 10,
                       shift=None) -> ConvergenceReport:
    """Collect v0, a, b, R, r_n and, when r_n < 1, the rank-m bounds.

    ``shift`` is s0 = ||u0||_inf for the nonlinear majorant; the closed-form
    bound max{1, sqrt(c~)}/sqrt(lambda0) is used when omitted.
    """
    from .basic import u0_sup_norm

    q_norm = to_scalar(q_norm)
    v0 = v0_bar(basic)
    a, b = constants_ab(basic)
    coeffs = dict(nonlin_coeffs or {})
    coeffs = {p: c for p, c in coeffs.items() if c != 0}
    R_lin = radius_linear(v0, q_norm) if q_norm > 0 else None
    majorant = None
    if coeffs:
        s0 = u0_sup_norm(basic, samples=16)[0] if shift is None else to_scalar(shift)
        majorant = MajorantNonlinearity.build(coeffs, s0)
        R = radius_nonlinear(v0, q_norm, majorant)
    else:
        if R_lin is None:
            raise ZeroNorm("q = 0 and N = 0: nothing to bound")
        R = R_lin
    r = a / R
    rep = ConvergenceReport(basic.n, v0, a, b, basic.M, basic.c_tilde, basic.lambda0, q_norm,
                            R, R_lin, r, m, None, None, None, majorant)
    if r < 1:
        ev, fn = error_bounds(rep, m)
        rep = ConvergenceReport(**{**rep.__dict__, "C_nm": _c_nm(rep, m),
                                   "eigenvalue_bound": ev, "eigenfunction_bound": fn})
    return rep


# ---------------------------------------------------------------------------
# slope regression


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line a m + b through (m, ln value) and its max deviation e."""

    slope: float
    intercept: float
    deviation: float


def fit_line(values) -> SlopeFit:
    vals = [to_scalar(v) for v in values]
    if any(v <= 0 for v in vals):
        raise ValueError("values must be positive")
    ms = np.arange(len(vals), dtype=float)
    ys = np.array([float(mp.log(v)) for v in vals])
    slope, intercept = np.polyfit(ms, ys, 1)
    dev = float(np.max(np.abs(slope * ms + intercept - ys)))
    return SlopeFit(float(slope), float(intercept), dev)


def fit_slopes(u_norms, lambda_abs, residuals) -> tuple:
    """SlopeFits for ln ||u^(m)||, ln |lambda^(m)| and ln r^m over m = 0..10."""
    return fit_line(u_norms), fit_line(lambda_abs), fit_line(residuals)
