"""The unperturbed problem: q and N dropped, the delta interaction kept.

With y = sqrt(lambda), the solution normalised by u'(0) = 1 is

    u0(x) = sin(y x) / y            on [0, alpha],
    u0(x) = c0 sin(y (1 - x))       on (alpha, 1],

and y solves  y sin(y) + beta sin(y alpha) sin(y (1 - alpha)) = 0.  There is
exactly one root with y^2 in [pi^2 n^2, pi^2 (n+1)^2) for every n >= 1.
"""

from __future__ import annotations

from dataclasses import dataclass

from mpmath import mp, mpf

from .core import ProblemSpec, to_scalar
from .errors import BracketFailure

SCAN_INTERVALS = 64
MAX_SCAN_INTERVALS = 64 * 2 ** 8


@dataclass(frozen=True)
class BasicSolution:
    n: int
    alpha: mpf
    beta: mpf
    lambda0: mpf
    c0: mpf
    M: mpf
    c_tilde: mpf
    resonant: bool

    @property
    def sqrt_lambda(self) -> mpf:
        return mp.sqrt(self.lambda0)


def characteristic(y, alpha, beta) -> mpf:
    """y sin(y) + beta sin(y alpha) sin(y (1 - alpha))."""
    y, alpha, beta = to_scalar(y), to_scalar(alpha), to_scalar(beta)
    return y * mp.sin(y) + beta * mp.sin(y * alpha) * mp.sin(y * (1 - alpha))


def characteristic_derivative(y, alpha, beta) -> mpf:
    y, alpha, beta = to_scalar(y), to_scalar(alpha), to_scalar(beta)
    ya, yb = y * alpha, y * (1 - alpha)
    return (mp.sin(y) + y * mp.cos(y)
            + beta * (alpha * mp.cos(ya) * mp.sin(yb) + (1 - alpha) * mp.sin(ya) * mp.cos(yb)))


def solve_basic(spec: ProblemSpec, n: int) -> BasicSolution:
    """Eigenpair number ``n`` of the unperturbed problem."""
    if n < 1:
        raise ValueError(f"eigenpair index must be >= 1, got {n}")
    alpha, beta = spec.alpha, spec.beta
    resonant = spec.is_resonant(n)
    if beta == 0 or resonant:
        y = mp.pi * n
        c0 = mpf(-1) ** (n + 1) / y
    else:
        y = _characteristic_root(n, alpha, beta)
        s_right = mp.sin(y * (1 - alpha))
        if abs(s_right) < mpf(10) ** (-mp.dps / 2):
            c0 = -mp.cos(y) / y
        else:
            c0 = mp.sin(y * alpha) / (y * s_right)
    lam = y * y
    return BasicSolution(
        n=n, alpha=alpha, beta=beta, lambda0=lam, c0=c0,
        M=norm_constant(y, alpha, beta), c_tilde=c_tilde_closed(y, alpha, beta),
        resonant=resonant,
    )


def _characteristic_root(n: int, alpha, beta) -> mpf:
    lo_end, hi_end = mp.pi * n, mp.pi * (n + 1)
    eps = mpf(10) ** -6 * mp.pi
    # the right end may itself be a (resonant) root of the next bracket
    edge = mpf(10) ** (-mp.dps // 3) * mp.pi
    f = lambda y: characteristic(y, alpha, beta)  # noqa: E731
    count = SCAN_INTERVALS
    while count <= MAX_SCAN_INTERVALS:
        xs = [lo_end + eps + (hi_end - lo_end - 2 * eps) * k / count for k in range(count + 1)]
        xs = [lo_end] + xs + [hi_end - edge]
        vals = [f(x) for x in xs]
        for x0, x1, v0, v1 in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
            if v0 == 0:
                return x0
            if v0 * v1 < 0:
                return _polish(f, lambda y: characteristic_derivative(y, alpha, beta), x0, x1, v0)
        count *= 4
    raise BracketFailure(f"no sign change of the characteristic function for n={n}")


def _polish(f, df, lo, hi, flo):
    """Newton iteration safeguarded by the bracket [lo, hi]."""
    tol = mpf(2) ** (-mp.prec + 4) * hi
    x = (lo + hi) / 2
    for _ in range(4 * mp.prec):
        fx = f(x)
        if fx == 0:
            return x
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
        else:
            hi = x
        dfx = df(x)
        step = fx / dfx if dfx else None
        nxt = x - step if step is not None else None
        if nxt is None or not lo < nxt < hi:
            nxt = (lo + hi) / 2
        if abs(nxt - x) <= tol or hi - lo <= tol:
            return nxt
        x = nxt
    return x


def norm_constant(y, alpha, beta) -> mpf:
    """M_n = lambda0 * int_0^1 u0^2 in closed form."""
    lam = y * y
    s = mp.sin(y * alpha)
    bracket = beta * mp.sin(2 * y * alpha) / y + beta ** 2 * s ** 2 / lam
    return (1 + bracket * (1 - alpha) + beta * s ** 2 / lam) / 2


def c_tilde_closed(y, alpha, beta) -> mpf:
    """c~_n = lambda0 * c0^2 from the simplified expansion."""
    s, c = mp.sin(y * alpha), mp.cos(y * alpha)
    return 1 + 2 * beta / y * c * s + beta ** 2 / (y * y) * s ** 2


def c_tilde_bracket(y, alpha, beta) -> mpf:
    """c~_n = sin^2(y alpha) + (cos(y alpha) + beta sin(y alpha) / y)^2."""
    s, c = mp.sin(y * alpha), mp.cos(y * alpha)
    return s ** 2 + (c + beta * s / y) ** 2


def eval_u0(basic: BasicSolution, x) -> mpf:
    x = to_scalar(x)
    y = basic.sqrt_lambda
    if x <= basic.alpha:
        return mp.sin(y * x) / y
    return basic.c0 * mp.sin(y * (1 - x))


def eval_u0_prime(basic: BasicSolution, x, side: str = "auto") -> mpf:
    """du0/dx; ``side`` selects the one-sided value at alpha ("left"/"right")."""
    x = to_scalar(x)
    y = basic.sqrt_lambda
    left = x < basic.alpha or (x == basic.alpha and side == "left")
    if side == "right":
        left = False
    if left:
        return mp.cos(y * x)
    return -basic.c0 * y * mp.cos(y * (1 - x))


def u0_sup_norm(basic: BasicSolution, samples: int = 2000) -> tuple:
    """(closed-form bound max{1, sqrt(c~)}/sqrt(lambda0), sampled maximum of |u0|)."""
    y = basic.sqrt_lambda
    bound = max(mpf(1), mp.sqrt(basic.c_tilde)) / y
    xs = [mpf(k) / samples for k in range(samples + 1)] + [basic.alpha]
    sampled = max(abs(eval_u0(basic, x)) for x in xs)
    return bound, sampled
