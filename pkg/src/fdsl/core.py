"""Precision handling, problem definition and potential/nonlinearity evaluation.

All real numbers are carried as :class:`mpmath.mpf` at a process-wide
decimal precision (50 significant digits unless changed with
:func:`set_precision`).
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from mpmath import mp, mpf

from .errors import SingularEvaluation

DEFAULT_PRECISION = 50

mp.dps = DEFAULT_PRECISION


def set_precision(digits: int) -> None:
    """Set the global working precision in significant decimal digits."""
    if digits < 15:
        raise ValueError(f"precision must be at least 15 digits, got {digits}")
    mp.dps = int(digits)


def get_precision() -> int:
    return mp.dps


@contextlib.contextmanager
def precision(digits: int):
    """Temporarily switch the working precision."""
    old = mp.dps
    set_precision(digits)
    try:
        yield
    finally:
        mp.dps = old


def eps_mach() -> mpf:
    """Comparison tolerance 10^(-P+5) for computed reals."""
    return mpf(10) ** (5 - mp.dps)


def to_scalar(value) -> mpf:
    """Convert ints, floats, Fractions, decimal strings or "m/n" strings to mpf."""
    if isinstance(value, Fraction):
        return mpf(value.numerator) / value.denominator
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            return to_scalar(Fraction(text))
        return mpf(text)
    return mpf(value)


def parse_rational(value) -> Fraction | None:
    """Return an exact Fraction for Fraction, int or "m/n" input, else None."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return Fraction(value)
    if isinstance(value, str) and "/" in value:
        return Fraction(value.strip())
    return None


# ---------------------------------------------------------------------------
# potential terms


@dataclass(frozen=True)
class Polynomial:
    """Polynomial term sum_k coefficients[k] * x**k."""

    coefficients: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(to_scalar(c) for c in self.coefficients))

    @property
    def singular_points(self) -> tuple:
        return ()

    def __call__(self, x):
        acc = mpf(0)
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coefficients)

    def sign_on_unit_interval(self) -> int:
        """+1 / -1 if the polynomial keeps one sign on [0, 1], 0 otherwise."""
        if self.is_zero():
            return 0
        cuts = [mpf(0)] + _real_roots_in_unit(self.coefficients) + [mpf(1)]
        signs = {_sign(self((a + b) / 2)) for a, b in zip(cuts[:-1], cuts[1:]) if b > a}
        signs.discard(0)
        return signs.pop() if len(signs) == 1 else 0

    def abs_integral(self) -> mpf:
        """Closed-form integral of |p| over [0, 1]."""
        if self.is_zero():
            return mpf(0)
        anti = [mpf(0)] + [c / (k + 1) for k, c in enumerate(self.coefficients)]

        def prim(x):
            acc = mpf(0)
            for c in reversed(anti):
                acc = acc * x + c
            return acc

        cuts = [mpf(0)] + _real_roots_in_unit(self.coefficients) + [mpf(1)]
        return sum((abs(prim(b) - prim(a)) for a, b in zip(cuts[:-1], cuts[1:])), mpf(0))


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def _real_roots_in_unit(coefficients: Sequence[mpf]) -> list:
    coeffs = list(coefficients)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    if len(coeffs) < 2:
        return []
    roots = mp.polyroots(list(reversed(coeffs)), maxsteps=200, extraprec=2 * mp.prec)
    tol = mpf(10) ** (-mp.dps // 2)
    found = sorted(mpf(mp.re(r)) for r in roots if abs(mp.im(r)) < tol and 0 < mp.re(r) < 1)
    return found


@dataclass(frozen=True)
class InverseSqrt:
    """Term scale / sqrt(|center - stretch * x|), singular at center / stretch."""

    scale: mpf
    center: mpf
    stretch: mpf = mpf(1)

    def __post_init__(self):
        for name in ("scale", "center", "stretch"):
            object.__setattr__(self, name, to_scalar(getattr(self, name)))
        if self.stretch == 0:
            raise ValueError("inverse_sqrt stretch must be nonzero")
        if not 0 <= self.singular_point <= 1:
            raise ValueError(f"singular abscissa {self.singular_point} outside [0, 1]")

    @property
    def singular_point(self) -> mpf:
        return self.center / self.stretch

    @property
    def singular_points(self) -> tuple:
        return (self.singular_point,)

    def __call__(self, x):
        return self.scale / mp.sqrt(abs(self.center - self.stretch * x))

    def at_distance(self, dist):
        """Value at a point whose distance from the singular abscissa is ``dist``."""
        return self.scale / mp.sqrt(abs(self.stretch) * dist)

    def is_zero(self) -> bool:
        return self.scale == 0

    def sign_on_unit_interval(self) -> int:
        return _sign(self.scale)

    def abs_integral(self) -> mpf:
        x0 = self.singular_point
        return abs(self.scale) / mp.sqrt(abs(self.stretch)) * 2 * (mp.sqrt(x0) + mp.sqrt(1 - x0))


@dataclass(frozen=True)
class Callback:
    """Host-provided potential term; ``func`` maps an mpf x to an mpf value."""

    func: Callable
    singular_points: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "singular_points", tuple(to_scalar(s) for s in self.singular_points))

    def __call__(self, x):
        return to_scalar(self.func(x))

    def is_zero(self) -> bool:
        return False

    def sign_on_unit_interval(self) -> int:
        return 0


PotentialTerm = Polynomial | InverseSqrt | Callback


# ---------------------------------------------------------------------------
# problem definition


@dataclass(frozen=True)
class ProblemSpec:
    """u'' - [beta*delta(x-alpha) + q(x)] u + lambda u - N(u) = 0 on (0, 1).

    ``alpha`` may be given as a Fraction or an "m/n" string, in which case
    resonance decisions (n*alpha integer) are made exactly.
    """

    alpha: mpf
    beta: mpf = mpf(0)
    q_terms: tuple = ()
    nonlin: tuple = ()
    breakpoints: tuple = ()
    alpha_exact: Fraction | None = field(default=None, compare=False)

    def __post_init__(self):
        exact = self.alpha_exact if self.alpha_exact is not None else parse_rational(self.alpha)
        if exact is not None:
            exact = Fraction(exact)
        alpha = to_scalar(exact if exact is not None else self.alpha)
        beta = to_scalar(self.beta)
        if not 0 < alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        if beta < 0:
            raise ValueError(f"beta must be nonnegative, got {beta}")
        nonlin = self.nonlin.items() if isinstance(self.nonlin, Mapping) else self.nonlin
        coeffs = {}
        for p, a in nonlin:
            p = int(p)
            if p < 1:
                raise ValueError(f"nonlinearity degrees must be >= 1, got {p}")
            coeffs[p] = coeffs.get(p, mpf(0)) + to_scalar(a)
        bps = sorted(to_scalar(b) for b in self.breakpoints)
        for b in bps:
            if not 0 < b < 1:
                raise ValueError(f"breakpoint {b} outside (0, 1)")
        for b0, b1 in zip(bps[:-1], bps[1:]):
            if b1 - b0 < eps_mach():
                raise ValueError(f"duplicate breakpoint {b0}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "alpha_exact", exact)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "q_terms", tuple(self.q_terms))
        object.__setattr__(self, "nonlin", tuple(sorted(coeffs.items())))
        object.__setattr__(self, "breakpoints", tuple(bps))

    @property
    def nonlin_coeffs(self) -> dict:
        return dict(self.nonlin)

    @property
    def is_linear(self) -> bool:
        return all(a == 0 for _, a in self.nonlin)

    @property
    def has_potential(self) -> bool:
        return any(not t.is_zero() for t in self.q_terms)

    def singular_points(self) -> list:
        pts = []
        for term in self.q_terms:
            pts.extend(term.singular_points)
        return sorted(pts)

    def cut_points(self) -> list:
        """Interior subinterval endpoints: breakpoints, interior singular points and alpha."""
        candidates = list(self.breakpoints) + [self.alpha]
        candidates += [s for s in self.singular_points() if 0 < s < 1]
        cuts = []
        for c in sorted(candidates):
            if not cuts or c - cuts[-1] > eps_mach():
                cuts.append(c)
            elif c == self.alpha:
                cuts[-1] = c
        return cuts

    def subintervals(self) -> list:
        pts = [mpf(0)] + self.cut_points() + [mpf(1)]
        return list(zip(pts[:-1], pts[1:]))

    def is_resonant(self, n: int) -> bool:
        """True when n * alpha is a positive integer."""
        if self.alpha_exact is not None:
            return (n * self.alpha_exact).denominator == 1
        prod = n * self.alpha
        return abs(prod - mp.nint(prod)) < mpf(10) ** (-mp.dps / 2)

    def scaled_potential(self, factor) -> "ProblemSpec":
        """Copy with every potential term multiplied by ``factor``."""
        factor = to_scalar(factor)
        terms = []
        for t in self.q_terms:
            if isinstance(t, Polynomial):
                terms.append(Polynomial(tuple(factor * c for c in t.coefficients)))
            elif isinstance(t, InverseSqrt):
                terms.append(InverseSqrt(factor * t.scale, t.center, t.stretch))
            else:
                f = t.func
                terms.append(Callback(lambda x, f=f: factor * f(x), t.singular_points))
        return self.replace(q_terms=tuple(terms))

    def replace(self, **changes) -> "ProblemSpec":
        kw = dict(
            alpha=self.alpha_exact if self.alpha_exact is not None else self.alpha,
            beta=self.beta,
            q_terms=self.q_terms,
            nonlin=self.nonlin,
            breakpoints=self.breakpoints,
        )
        kw.update(changes)
        return ProblemSpec(**kw)


# ---------------------------------------------------------------------------
# evaluation


def eval_potential(spec: ProblemSpec, x) -> mpf:
    """q(x) as the sum of all potential terms."""
    x = to_scalar(x)
    tol = eps_mach()
    for s in spec.singular_points():
        if abs(x - s) < tol:
            raise SingularEvaluation(f"q evaluated at singular abscissa {s}")
    return mp.fsum(term(x) for term in spec.q_terms)


def eval_potential_offset(spec: ProblemSpec, x, left, right) -> mpf:
    """q at a node given with exact offsets from the enclosing subinterval ends.

    ``left`` is ``(a, x - a)`` and ``right`` is ``(b, b - x)``.  Inverse-sqrt
    terms singular at ``a`` or ``b`` are evaluated from the offset, which
    stays accurate even when ``x`` itself rounds onto the endpoint.
    """
    a, da = left
    b, db = right
    tol = eps_mach()
    total = []
    for term in spec.q_terms:
        if isinstance(term, InverseSqrt):
            s = term.singular_point
            if abs(s - a) < tol:
                total.append(term.at_distance(da))
                continue
            if abs(s - b) < tol:
                total.append(term.at_distance(db))
                continue
        total.append(term(x))
    return mp.fsum(total)


def eval_nonlinearity(spec: ProblemSpec, u) -> mpf:
    """N(u) = sum_p a_p u**p."""
    return eval_poly_map(spec.nonlin_coeffs, u)


def eval_poly_map(coeffs: Mapping[int, mpf], u):
    """Evaluate sum_p coeffs[p] * u**p for a degree->coefficient map."""
    if not coeffs:
        return u * 0
    deg = max(coeffs)
    acc = u * 0
    for p in range(deg, -1, -1):
        acc = acc * u + coeffs.get(p, 0)
    return acc


def q_l1_norm(spec: ProblemSpec) -> mpf:
    """||q||_{0,1}, the L1 norm of the potential on (0, 1).

    Closed form when every term keeps a single common sign on [0, 1];
    otherwise tanh-sinh quadrature of |q| split at singular points and
    sign changes.
    """
    terms = [t for t in spec.q_terms if not t.is_zero()]
    if not terms:
        return mpf(0)
    signs = {t.sign_on_unit_interval() for t in terms}
    if len(signs) == 1 and 0 not in signs:
        return mp.fsum(t.abs_integral() for t in terms)
    return _abs_quadrature(spec)


def _abs_quadrature(spec: ProblemSpec) -> mpf:
    def q(x):
        return mp.fsum(t(x) for t in spec.q_terms)

    pts = sorted({mpf(0), mpf(1), *[s for s in spec.singular_points() if 0 <= s <= 1]})
    pieces = []
    for a, b in zip(pts[:-1], pts[1:]):
        pieces.append(a)
        pieces.extend(_sign_changes(q, a, b))
    pieces.append(mpf(1))
    return mp.fsum(abs(mp.quad(q, [a, b])) for a, b in zip(pieces[:-1], pieces[1:]) if b > a)


def _sign_changes(func, a, b, samples: int = 400) -> list:
    width = b - a
    xs = [a + width * (k + mpf(1) / 2) / samples for k in range(samples)]
    vals = [func(x) for x in xs]
    roots = []
    for x0, x1, v0, v1 in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
        if v0 == 0:
            roots.append(x0)
        elif v0 * v1 < 0:
            roots.append(mp.findroot(func, (x0, x1), solver="anderson"))
    return roots
