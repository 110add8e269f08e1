"""Sinc grids, the tanh rule and Stenger's indefinite-integration formula.

A grid on (a, b) with parameters K and h has nodes

    z_j = (a + b e^{jh}) / (1 + e^{jh}),            j = -K..K,
    mu_j = (b - a) / (e^{-jh/2} + e^{jh/2})^2,

and the definite integral is approximated by h * sum_j f(z_j) mu_j.  The
indefinite integral from ``a`` to node z_k uses the sine-integral table

    delta_m = 1/2 + Si(pi m) / pi,                 m = -2K..2K,

as h * sum_p delta_{k-p} f(z_p) mu_p.  That sum is a Toeplitz product; it is
evaluated for all k at once as an exact convolution of fixed-point integers
(Kronecker substitution), so the cost per grid is one big-integer product
instead of (2K+1)^2 multiprecision operations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from mpmath import libmp, mp, mpf

from .core import ProblemSpec, eval_nonlinearity, eval_potential_offset, to_scalar
from .errors import ParameterSearchExhausted

GUARD_BITS = 24


def default_d() -> mpf:
    return mp.pi / 2


def default_mu() -> mpf:
    return mpf(1) / 2


def sine_integral(x) -> mpf:
    """Si(x) = int_0^x sin(t)/t dt at the working precision."""
    return mp.si(x)


@lru_cache(maxsize=32)
def _stenger_table(K: int, prec: int) -> tuple:
    half = mpf(1) / 2
    pos = [half + sine_integral(mp.pi * k) / mp.pi for k in range(1, 2 * K + 1)]
    neg = [1 - d for d in pos]
    return tuple(reversed(neg)) + (half,) + tuple(pos)


def stenger_coefficients(K: int) -> tuple:
    """delta_k for k = -2K..2K (index k + 2K), with delta_k + delta_{-k} = 1."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return _stenger_table(int(K), mp.prec)


@lru_cache(maxsize=32)
def _stenger_fixed(K: int, prec: int) -> tuple:
    bits = prec + GUARD_BITS
    table = _stenger_table(K, prec)
    return tuple(libmp.to_fixed(d._mpf_, bits) for d in table), bits


# ---------------------------------------------------------------------------
# single-interval grids


@dataclass(frozen=True)
class SincGrid:
    """Sinc grid on one interval; arrays are indexed j + K for j = -K..K."""

    a: mpf
    b: mpf
    K: int
    h: mpf
    nodes: np.ndarray
    mu: np.ndarray
    left_offsets: np.ndarray
    right_offsets: np.ndarray

    @property
    def size(self) -> int:
        return 2 * self.K + 1

    @property
    def weights(self) -> np.ndarray:
        """h * mu_j, the tanh-rule weights."""
        return self.mu * self.h

    def node(self, j: int) -> mpf:
        return self.nodes[j + self.K]


def step_size(K: int, d=None, mu=None) -> mpf:
    """h_s = sqrt(pi d / (mu K))."""
    d = default_d() if d is None else to_scalar(d)
    mu = default_mu() if mu is None else to_scalar(mu)
    if not 0 < d < mp.pi:
        raise ValueError("d must lie in (0, pi)")
    if mu <= 0:
        raise ValueError("mu must be positive")
    return mp.sqrt(mp.pi * d / (mu * K))


def build_grid(interval, K: int, d=None, mu=None) -> SincGrid:
    a, b = (to_scalar(v) for v in interval)
    if not a < b:
        raise ValueError(f"empty interval ({a}, {b})")
    if K < 1:
        raise ValueError("K must be positive")
    h = step_size(K, d, mu)
    width = b - a
    nodes, mus, lo, hi = [], [], [], []
    for j in range(-K, K + 1):
        e = mp.exp(j * h)
        ie = 1 / e
        nodes.append((a + b * e) / (1 + e))
        lo.append(width / (1 + ie))
        hi.append(width / (1 + e))
        mus.append(width / (mp.sqrt(ie) + mp.sqrt(e)) ** 2)
    arr = lambda xs: np.array(xs, dtype=object)  # noqa: E731
    return SincGrid(a, b, K, h, arr(nodes), arr(mus), arr(lo), arr(hi))


def definite_integral(grid: SincGrid, samples) -> mpf:
    """Tanh rule h * sum_j f(z_j) mu_j."""
    return grid.h * mp.fdot(samples, grid.mu)


def indefinite_integral(grid: SincGrid, samples, k: int, orientation: str = "left") -> mpf:
    """Stenger's formula at node ``k`` (j-index, -K..K).

    ``orientation="left"`` approximates int_a^{z_k} f, ``"right"`` int_{z_k}^b f.
    """
    K = grid.K
    if not -K <= k <= K:
        raise IndexError(f"node index {k} outside [-{K}, {K}]")
    delta = stenger_coefficients(K)
    if orientation == "left":
        coef = [delta[k - p + 2 * K] for p in range(-K, K + 1)]
    elif orientation == "right":
        coef = [delta[p - k + 2 * K] for p in range(-K, K + 1)]
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    g = [f * m for f, m in zip(samples, grid.mu)]
    return grid.h * mp.fdot(coef, g)


def stenger_prefix(grid: SincGrid, samples) -> np.ndarray:
    """int_a^{z_k} f for every node k, via one fixed-point convolution."""
    g = np.asarray(samples, dtype=object) * grid.mu
    return toeplitz_delta(g, grid.K) * grid.h


def stenger_suffix(grid: SincGrid, samples) -> np.ndarray:
    """int_{z_k}^b f for every node k."""
    return definite_integral(grid, samples) - stenger_prefix(grid, samples)


def toeplitz_delta(values, K: int) -> np.ndarray:
    """sum_p delta_{k-p} values[p] for k = -K..K, exact up to the final rounding."""
    n = 2 * K + 1
    if len(values) != n:
        raise ValueError(f"expected {n} values, got {len(values)}")
    dints, dbits = _stenger_fixed(K, mp.prec)
    mags = [mp.mag(v) for v in values if v]
    if not mags:
        return np.array([mpf(0)] * n, dtype=object)
    gbits = mp.prec + GUARD_BITS - max(mags)
    gints = [libmp.to_fixed(mpf(v)._mpf_, gbits) for v in values]
    conv = _convolve(gints, dints)
    scale = -(dbits + gbits)
    return np.array([mpf((c, scale)) for c in conv[2 * K:4 * K + 1]], dtype=object)


def _convolve(x: list, y: list) -> list:
    """Exact linear convolution of two signed integer sequences."""
    bound = len(x) * max(abs(v) for v in x) * max(abs(v) for v in y)
    width = (bound.bit_length() + 2 + 7) // 8 * 8
    nbytes = width // 8
    half = 1 << (width - 1)
    xp = _pack(x, nbytes, half)
    yp = _pack(y, nbytes, half)
    out_len = len(x) + len(y) - 1
    prod = xp * yp + _bias(out_len, width)
    raw = prod.to_bytes(out_len * nbytes + 1, "little")
    return [
        int.from_bytes(raw[s * nbytes:(s + 1) * nbytes], "little") - half
        for s in range(out_len)
    ]


def _pack(values: list, nbytes: int, half: int) -> int:
    blob = b"".join((v + half).to_bytes(nbytes, "little") for v in values)
    return int.from_bytes(blob, "little") - _bias(len(values), nbytes * 8)


@lru_cache(maxsize=64)
def _bias(count: int, width: int) -> int:
    half = 1 << (width - 1)
    return int.from_bytes(b"".join(half.to_bytes(width // 8, "little") for _ in range(count)), "little")


# ---------------------------------------------------------------------------
# composite grids


@dataclass(frozen=True)
class CompositeGrid:
    """Sinc grids on consecutive subintervals covering (0, 1), split at alpha.

    Node arrays are flattened over subintervals in order; ``slices[i]``
    selects subinterval ``i``.  ``n_left`` subintervals lie left of alpha.
    """

    grids: tuple
    nodes: np.ndarray
    weights: np.ndarray
    slices: tuple
    n_left: int

    @property
    def K(self) -> int:
        return self.grids[0].K

    @property
    def h(self) -> mpf:
        return self.grids[0].h

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def left(self) -> slice:
        return slice(0, self.slices[self.n_left - 1].stop)

    @property
    def right(self) -> slice:
        return slice(self.slices[self.n_left].start, self.size)

    def integrate(self, samples, part: slice | None = None) -> mpf:
        part = slice(None) if part is None else part
        return mp.fdot(samples[part], self.weights[part])

    def sub_integrals(self, samples) -> list:
        return [self.integrate(samples, sl) for sl in self.slices]

    def prefix(self, samples) -> np.ndarray:
        """int_0^{z} f at every node."""
        out = np.empty(self.size, dtype=object)
        acc = mpf(0)
        for grid, sl in zip(self.grids, self.slices):
            part = samples[sl]
            out[sl] = stenger_prefix(grid, part) + acc
            acc += definite_integral(grid, part)
        return out

    def suffix(self, samples) -> np.ndarray:
        """int_z^1 f at every node."""
        out = np.empty(self.size, dtype=object)
        acc = mpf(0)
        for grid, sl in reversed(list(zip(self.grids, self.slices))):
            part = samples[sl]
            total = definite_integral(grid, part)
            out[sl] = total - stenger_prefix(grid, part) + acc
            acc += total
        return out

    def locate(self, node: int) -> tuple:
        """(subinterval index, j-index) of a flat node index."""
        for i, sl in enumerate(self.slices):
            if sl.start <= node < sl.stop:
                return i, node - sl.start - self.grids[i].K
        raise IndexError(node)

    def eval_potential(self, spec: ProblemSpec) -> np.ndarray:
        vals = []
        for g in self.grids:
            for x, lo, hi in zip(g.nodes, g.left_offsets, g.right_offsets):
                vals.append(eval_potential_offset(spec, x, (g.a, lo), (g.b, hi)))
        return np.array(vals, dtype=object)


def build_composite(spec: ProblemSpec, K: int, d=None, mu=None) -> CompositeGrid:
    subs = spec.subintervals()
    grids = tuple(build_grid(iv, K, d, mu) for iv in subs)
    slices, start = [], 0
    for g in grids:
        slices.append(slice(start, start + g.size))
        start += g.size
    nodes = np.concatenate([g.nodes for g in grids])
    weights = np.concatenate([g.weights for g in grids])
    n_left = sum(1 for a, b in subs if b <= spec.alpha)
    return CompositeGrid(grids, nodes, weights, tuple(slices), n_left)


def prefix_integral(cg: CompositeGrid, samples, node: int) -> mpf:
    """int_0^{z_node} f: full integrals of earlier subintervals plus Stenger inside."""
    i, j = cg.locate(node)
    acc = mp.fsum(cg.integrate(samples, sl) for sl in cg.slices[:i])
    return acc + indefinite_integral(cg.grids[i], samples[cg.slices[i]], j, "left")


# ---------------------------------------------------------------------------
# a-posteriori parameter choice


@dataclass(frozen=True)
class QuadratureParameters:
    K: int
    d: mpf
    mu: mpf
    steps: tuple
    probe_history: tuple = ()

    @property
    def h(self) -> mpf:
        return self.steps[0]


def probe_integral(spec: ProblemSpec, basic, K: int, d=None, mu=None) -> mpf:
    """Tanh-rule value of int_0^1 (q + u0 + N(u0)) dx on the composite grid."""
    from .basic import eval_u0

    cg = build_composite(spec, K, d, mu)
    q = cg.eval_potential(spec)
    vals = []
    for x, qx in zip(cg.nodes, q):
        u = eval_u0(basic, x)
        vals.append(qx + u + eval_nonlinearity(spec, u))
    return cg.integrate(np.array(vals, dtype=object))


def choose_parameters(spec: ProblemSpec, basic, eps, *, K_start: int = 32,
                      K_cap: int = 2 ** 14, d=None, mu=None) -> QuadratureParameters:
    """Double K until the probe integral changes by less than ``eps``.

    Returns the smaller K of the first pair of successive values that agree
    within ``eps``; its estimated quadrature error is that difference.
    """
    eps = to_scalar(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = default_d() if d is None else to_scalar(d)
    mu = default_mu() if mu is None else to_scalar(mu)
    K = K_start
    prev = probe_integral(spec, basic, K, d, mu)
    history = [(K, prev)]
    while True:
        if 2 * K > K_cap:
            raise ParameterSearchExhausted(f"no stable K up to cap {K_cap} for eps={eps}")
        cur = probe_integral(spec, basic, 2 * K, d, mu)
        history.append((2 * K, cur))
        if abs(cur - prev) < eps:
            break
        K, prev = 2 * K, cur
    n_sub = len(spec.subintervals())
    h = step_size(K, d, mu)
    return QuadratureParameters(K, d, mu, (h,) * n_sub, tuple(history))
