"""Adomian polynomials of a polynomial nonlinearity.

A_k(N; v_0, ..., v_k) is the coefficient of t^k in N(sum_p v_p t^p), i.e. the
normalised convention that includes the 1/k! of the Taylor coefficient.  For
a polynomial N the coefficients follow exactly from truncated Cauchy
products of the jet with itself.

Every routine here only uses ``+`` and ``*`` on the jet entries, so the jet
may hold scalars or whole arrays of node values.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Mapping, Sequence

from mpmath import mp, mpf

from .core import eval_poly_map, to_scalar


def _clean(coeffs: Mapping[int, object]) -> dict:
    out = {int(p): to_scalar(a) for p, a in dict(coeffs).items()}
    return {p: a for p, a in out.items() if a != 0}


def cauchy_coefficient(a: Sequence, b: Sequence, k: int):
    """Coefficient of t^k in (sum a_i t^i)(sum b_i t^i)."""
    acc = a[0] * b[k]
    for i in range(1, k + 1):
        acc = acc + a[i] * b[k - i]
    return acc


def adomian_all(nonlin_coeffs: Mapping[int, object], jet: Sequence) -> list:
    """A_0 .. A_k for N(u) = sum_p a_p u^p and the jet (v_0, ..., v_k).

    Parameters
    ----------
    nonlin_coeffs : mapping degree -> coefficient
    jet : sequence of scalars or arrays, length k + 1 >= 1

    Returns
    -------
    list
        Coefficients of t^0 .. t^k in the truncated composition.
    """
    if len(jet) == 0:
        raise ValueError("jet must be nonempty")
    series = AdomianSeries(nonlin_coeffs)
    for v in jet:
        series.append(v)
    return list(series.coefficients)


class AdomianSeries:
    """Incremental Adomian polynomials.

    ``append(v_j)`` extends the jet by one entry and returns A_j; earlier
    coefficients and the powers of the series are kept, so building
    A_0..A_k one at a time costs O(k^2 * deg) products in total.
    """

    def __init__(self, nonlin_coeffs: Mapping[int, object]):
        self.coeffs = _clean(nonlin_coeffs)
        self.degree = max(self.coeffs, default=0)
        self.jet: list = []
        # powers[p - 1][k] = coefficient of t^k in V(t)^p
        self.powers: list = [[] for _ in range(self.degree)]
        self.coefficients: list = []

    def append(self, v):
        self.jet.append(v)
        k = len(self.jet) - 1
        if self.degree == 0:
            out = v * 0 + (self.coeffs.get(0, 0) if k == 0 else 0)
            self.coefficients.append(out)
            return out
        self.powers[0].append(v)
        for p in range(1, self.degree):
            self.powers[p].append(cauchy_coefficient(self.powers[p - 1], self.jet, k))
        out = v * 0
        for p, a in self.coeffs.items():
            if p == 0:
                out = out + a if k == 0 else out
            else:
                out = out + a * self.powers[p - 1][k]
        self.coefficients.append(out)
        return out


def brute_force_composition(nonlin_coeffs: Mapping[int, object], jet: Sequence) -> list:
    """Truncated expansion of N(sum v_p t^p) by repeated full polynomial products.

    Independent of :class:`AdomianSeries`; used as a cross-check.
    """
    k = len(jet) - 1
    base = [to_scalar(v) for v in jet]
    out = [mpf(0)] * (k + 1)
    for p, a in _clean(nonlin_coeffs).items():
        power = [mpf(1)]
        for _ in range(p):
            full = [mpf(0)] * (len(power) + len(base) - 1)
            for i, x in enumerate(power):
                for j, y in enumerate(base):
                    full[i + j] += x * y
            power = full[:k + 1]
        for i, c in enumerate(power):
            out[i] += a * c
    return out


def majorant_shifted(nonlin_coeffs: Mapping[int, object], shift) -> dict:
    """Coefficients of sum_p |a_p| (s0 + v)^p re-expanded about v = 0.

    Returns a map degree -> coefficient including degree 0 when s0 > 0.
    """
    s0 = to_scalar(shift)
    if s0 < 0:
        raise ValueError("shift must be nonnegative")
    out: dict = {}
    for p, a in _clean(nonlin_coeffs).items():
        for i in range(p + 1):
            term = abs(a) * comb(p, i) * s0 ** (p - i)
            if term != 0:
                out[i] = out.get(i, mpf(0)) + term
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class MajorantNonlinearity:
    """N~(u) = sum |a_p| u^p and its shift N~_1(v) = N~(s0 + v)."""

    coefficients: tuple
    shift: mpf

    @classmethod
    def build(cls, nonlin_coeffs: Mapping[int, object], shift) -> "MajorantNonlinearity":
        coeffs = tuple(sorted((p, abs(a)) for p, a in _clean(nonlin_coeffs).items()))
        s0 = to_scalar(shift)
        if s0 < 0:
            raise ValueError("shift must be nonnegative")
        return cls(coeffs, s0)

    @property
    def shifted(self) -> dict:
        return majorant_shifted(dict(self.coefficients), self.shift)

    def is_zero(self) -> bool:
        return not self.coefficients

    def __call__(self, v) -> mpf:
        """N~_1(v)."""
        return eval_poly_map(self.shifted, to_scalar(v))

    def derivative(self, v) -> mpf:
        """N~_1'(v)."""
        v = to_scalar(v)
        return mp.fsum(p * c * v ** (p - 1) for p, c in self.shifted.items() if p >= 1)

    def value_at_zero(self) -> mpf:
        return self.shifted.get(0, mpf(0))

    def slope_at_zero(self) -> mpf:
        return self.shifted.get(1, mpf(0))
