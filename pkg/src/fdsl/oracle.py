"""Independent shooting solver in double precision.

u'' = q u - lambda u + N(u) is integrated from u(0) = 0, u'(0) = 1 with an
adaptive Runge-Kutta method, one subinterval at a time, applying
u'(alpha+0) = u'(alpha-0) + beta u(alpha).  On each subinterval (l, r) the
substitution x = l + (r - l) sin^2(theta) removes the 1/sqrt endpoint
singularities of q: dx/dtheta vanishes like the distance to the endpoint, so
the transformed right-hand side stays bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .core import Callback, InverseSqrt, Polynomial, ProblemSpec
from .errors import NoSignChange, StepUnderflow

MIN_OFFSET = 1e-12


@dataclass(frozen=True)
class ShootingResult:
    lam: float
    u_end: float
    steps: int
    error_estimate: float


def _float_terms(spec: ProblemSpec):
    """Float evaluators f(x, dl, dr, l, r) for each potential term."""
    out = []
    for t in spec.q_terms:
        if isinstance(t, InverseSqrt):
            a, s, x0 = float(t.scale), float(t.stretch), float(t.singular_point)
            out.append(("isqrt", a, abs(s), x0))
        elif isinstance(t, Polynomial):
            out.append(("poly", np.array([float(c) for c in reversed(t.coefficients)] or [0.0])))
        elif isinstance(t, Callback):
            out.append(("cb", t))
        else:  # pragma: no cover
            raise TypeError(f"unsupported potential term {t!r}")
    return out


def _make_q_jacobian(spec: ProblemSpec):
    """q(x(theta)) * dx/dtheta on a subinterval (l, r) with x = l + w sin^2(theta).

    An inverse-sqrt term singular at l contributes a / sqrt(s w sin^2) * w sin(2 theta)
    = 2 a sqrt(w / s) cos(theta), and one singular at r contributes
    2 a sqrt(w / s) sin(theta); both are evaluated in that cancelled form.
    Other singular abscissae keep a distance of at least MIN_OFFSET.
    """
    terms = _float_terms(spec)

    def qj(theta, x, l, r, w):
        st, ct = np.sin(theta), np.cos(theta)
        dxdt = 2 * w * st * ct
        total = 0.0
        for t in terms:
            if t[0] == "isqrt":
                _, a, s, x0 = t
                if abs(x0 - l) < 1e-14:
                    total += 2 * a * np.sqrt(w / s) * ct
                elif abs(x0 - r) < 1e-14:
                    total += 2 * a * np.sqrt(w / s) * st
                else:
                    total += a / np.sqrt(s * max(abs(x - x0), MIN_OFFSET)) * dxdt
            elif t[0] == "poly":
                total += float(np.polyval(t[1], x)) * dxdt
            else:
                total += float(t[1](x)) * dxdt
        return total, dxdt

    return qj


def _make_n(spec: ProblemSpec):
    coeffs = [(p, float(a)) for p, a in spec.nonlin]
    if not coeffs:
        return lambda u: 0.0
    return lambda u: sum(a * u ** p for p, a in coeffs)


def _pieces(spec: ProblemSpec) -> list:
    return [(float(a), float(b)) for a, b in spec.subintervals()]


def _integrate(spec: ProblemSpec, lam: float, rtol: float, atol: float, dense: bool = False):
    qj, N = _make_q_jacobian(spec), _make_n(spec)
    alpha, beta = float(spec.alpha), float(spec.beta)
    state = np.array([0.0, 1.0])
    steps = 0
    sols = []
    for l, r in _pieces(spec):
        w = r - l

        def rhs(theta, y, l=l, r=r, w=w):
            x = l + w * np.sin(theta) ** 2
            qd, dxdt = qj(theta, x, l, r, w)
            return [y[1] * dxdt, qd * y[0] + (N(y[0]) - lam * y[0]) * dxdt]

        sol = solve_ivp(rhs, (0.0, np.pi / 2), state, method="DOP853", rtol=rtol, atol=atol,
                        dense_output=dense)
        if sol.status != 0:
            raise StepUnderflow(f"integrator failed on ({l}, {r}) at lambda={lam}: {sol.message}")
        steps += sol.t.size - 1
        state = sol.y[:, -1].copy()
        if abs(r - alpha) < 1e-15:
            state[1] += beta * state[0]
        sols.append((l, r, sol))
    return state, steps, sols


def shoot(spec: ProblemSpec, lam, rtol: float = 1e-11, atol: float = 1e-13) -> float:
    """u(1; lambda) for the initial data u(0) = 0, u'(0) = 1."""
    state, _, _ = _integrate(spec, float(lam), rtol, atol)
    return float(state[0])


def shoot_profile(spec: ProblemSpec, lam, xs, rtol: float = 1e-11, atol: float = 1e-13) -> tuple:
    """(u, u') sampled at the abscissae ``xs``; at alpha the left limit of u' is used."""
    _, _, sols = _integrate(spec, float(lam), rtol, atol, dense=True)
    xs = np.asarray(xs, dtype=float)
    u, du = np.empty_like(xs), np.empty_like(xs)
    for i, x in enumerate(xs):
        for l, r, sol in sols:
            if l <= x <= r:
                theta = np.arcsin(np.sqrt(min(max((x - l) / (r - l), 0.0), 1.0)))
                u[i], du[i] = sol.sol(theta)
                break
        else:
            raise ValueError(f"x={x} outside [0, 1]")
    return u, du


def find_eigenvalue(spec: ProblemSpec, bracket, xtol: float = 1e-12, rtol: float = 1e-11,
                    atol: float = 1e-13) -> ShootingResult:
    """Root of lambda -> u(1; lambda) inside ``bracket`` by Brent's method."""
    lo, hi = (float(v) for v in bracket)
    f_lo, f_hi = shoot(spec, lo, rtol, atol), shoot(spec, hi, rtol, atol)
    if f_lo == 0:
        return ShootingResult(lo, 0.0, 0, 0.0)
    if f_hi == 0:
        return ShootingResult(hi, 0.0, 0, 0.0)
    if f_lo * f_hi > 0:
        raise NoSignChange(f"u(1) has one sign on [{lo}, {hi}]")

    def f(lam):
        return shoot(spec, lam, rtol, atol)

    lam = brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    state, steps, _ = _integrate(spec, lam, rtol, atol)
    # sensitivity of the root to an integration error of size rtol
    h = max(1e-6, 1e-7 * abs(lam))
    slope = (shoot(spec, lam + h, rtol, atol) - shoot(spec, lam - h, rtol, atol)) / (2 * h)
    err = xtol + (rtol * 10 / abs(slope) if slope else np.inf)
    return ShootingResult(float(lam), float(state[0]), int(steps), float(err))
