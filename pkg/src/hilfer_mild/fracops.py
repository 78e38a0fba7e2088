r"""Grid realizations of Riemann-Liouville, Caputo and Hilfer operators.

Functions are sampled on a graded mesh :math:`t_j = T (j/M)^q`. Fractional
integrals use product integration: the sampled function is interpolated
linearly on each subinterval and the kernel :math:`(t-s)^{a-1}/\Gamma(a)` is
integrated exactly against the two hat functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "TimeGrid",
    "SampledFn",
    "product_weights",
    "rl_integral",
    "grid_derivative",
    "rl_derivative",
    "caputo_derivative",
    "hilfer_derivative",
]


@dataclass(frozen=True)
class TimeGrid:
    """Graded mesh with ``intervals`` subintervals, i.e. ``intervals + 1`` nodes."""

    horizon_T: float
    intervals: int
    grading_q: float = 1.0
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.horizon_T > 0.0:
            raise DomainError("horizon_T must be positive")
        if int(self.intervals) != self.intervals or self.intervals < 1:
            raise DomainError("a grid needs at least 2 nodes")
        if not self.grading_q >= 1.0:
            raise DomainError("grading_q must be >= 1")
        j = np.arange(self.intervals + 1, dtype=float)
        t = self.horizon_T * (j / self.intervals) ** self.grading_q
        t[-1] = self.horizon_T
        t.flags.writeable = False
        object.__setattr__(self, "nodes", t)

    @property
    def node_count(self) -> int:
        return self.intervals + 1

    def refined(self) -> "TimeGrid":
        return TimeGrid(self.horizon_T, 2 * self.intervals, self.grading_q)


@dataclass(frozen=True)
class SampledFn:
    """Node values of a function on ``grid``.

    ``values`` has shape ``(M+1,)`` or ``(M+1, k)`` for ``k`` components.
    When ``singular_at_zero`` is set the first row is a placeholder and is
    excluded from norms.
    """

    grid: TimeGrid
    values: np.ndarray
    singular_at_zero: bool = False

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape[0] != self.grid.node_count:
            raise DomainError(
                f"expected {self.grid.node_count} node values, got {v.shape[0]}"
            )
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: TimeGrid, fn, singular_at_zero: bool = False) -> "SampledFn":
        t = grid.nodes
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.array([fn(x) if (x > 0 or not singular_at_zero) else np.nan for x in t], float)
        return cls(grid, v, singular_at_zero)

    def interior(self) -> np.ndarray:
        return self.values[1:] if self.singular_at_zero else self.values


# ------------------------------------------------------------------ integration


def _phi(p: float, r: np.ndarray) -> np.ndarray:
    """(1+r)^p - 1 - p r without cancellation for small r."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    small = r < 0.05
    rs = r[small]
    # binomial series from the quadratic term on
    acc = np.zeros_like(rs)
    coef = p * (p - 1.0) / 2.0
    power = rs * rs
    for k in range(2, 30):
        acc = acc + coef * power
        coef = coef * (p - k) / (k + 1.0)
        power = power * rs
    out[small] = acc
    rb = r[~small]
    out[~small] = np.expm1(p * np.log1p(rb)) - p * rb
    return out


@lru_cache(maxsize=64)
def _power_weights(order: float, nodes_key: tuple) -> np.ndarray:
    """Lower-triangular matrix W with (I^a f)(t_j) = sum_i W[j, i] f_i."""
    t = np.asarray(nodes_key, dtype=float)
    a = float(order)
    M = t.size - 1
    W = np.zeros((M + 1, M + 1))
    g2 = math.gamma(a + 2.0)
    for j in range(1, M + 1):
        ti = t[:j]
        ti1 = t[1 : j + 1]
        h = ti1 - ti
        B = t[j] - ti1
        A = t[j] - ti
        wl = np.empty(j)  # weight on f(t_i)
        wr = np.empty(j)  # weight on f(t_{i+1})
        last = B <= 0.0
        # panel ending at t_j: closed form in h only
        wl[last] = h[last] ** a * a / g2
        wr[last] = h[last] ** a / g2
        far = ~last
        if far.any():
            Bf, hf = B[far], h[far]
            r = hf / Bf
            pa1 = _phi(a + 1.0, r)
            pa = _phi(a, r)
            scale = Bf ** (a + 1.0) / (hf * g2)
            # int_B^A u^{a-1}(A-u) du and int_B^A u^{a-1}(u-B) du, scaled by a(a+1)
            wr[far] = scale * pa1
            wl[far] = scale * (a * pa1 - (a + 1.0) * pa)
        W[j, :j] += wl
        W[j, 1 : j + 1] += wr
    W.flags.writeable = False
    return W


def product_weights(order: float, grid: TimeGrid) -> np.ndarray:
    """Product-integration matrix for :math:`I^{a}` on ``grid`` (cached)."""
    return _power_weights(float(order), tuple(grid.nodes.tolist()))


def _power_fit(t1: float, t2: float, f1: np.ndarray, f2: np.ndarray):
    """Fit f ~ c t^p through two points, per component, with a validity mask."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = f2 / f1
        p = np.log(ratio) / math.log(t2 / t1)
        c = f1 / t1**p
    ok = np.isfinite(p) & (ratio > 0.0) & (p > -1.0) & np.isfinite(c)
    return p, c, ok


def _sublinear_start(t: np.ndarray, v: np.ndarray, strict: bool = False):
    """Columns whose start looks like f0 + c t^p with 0 < p < 1, and their p, c.

    With ``strict`` the power law fitted on nodes 0-2 must also reproduce
    node 3 to relative 1e-6, which rejects mixtures of several powers.
    """
    if t.size < (4 if strict else 3):
        return np.empty(0, dtype=int), np.empty(0), np.empty(0)
    d1, d2 = v[1] - v[0], v[2] - v[0]
    p, c, ok = _power_fit(t[1], t[2], d1, d2)
    # ignore differences at roundoff level, e.g. a numerically constant f
    noise = 1e-11 * np.max(np.abs(v), axis=0)
    sub = ok & (p > 0.0) & (p < 1.0 - 1e-3) & (np.abs(d1) > noise)
    if strict:
        d3 = v[3] - v[0]
        with np.errstate(invalid="ignore", over="ignore"):
            pred = c * t[3] ** p
        sub &= np.abs(pred - d3) <= 1e-6 * np.abs(d3)
    cols = np.flatnonzero(sub)
    return cols, p[cols], c[cols]


def _as2d(v: np.ndarray):
    return (v[:, None], True) if v.ndim == 1 else (v, False)


def rl_integral(order: float, f: SampledFn) -> SampledFn:
    r"""Riemann-Liouville integral

    .. math::

        I^{a} f(t) = \frac{1}{\Gamma(a)} \int_0^t (t-s)^{a-1} f(s)\, ds

    at every node, by product integration.
    """
    order = float(order)
    if not order > 0.0:
        raise DomainError(f"integral order must be positive, got {order}")
    return _integral(order, f)


def _integral(order: float, f: SampledFn) -> SampledFn:
    """:func:`rl_integral` with ``I^0`` as the identity, for compositions."""
    if order == 0.0:
        return f
    grid = f.grid
    t = grid.nodes
    v, flat = _as2d(f.values)
    if not np.isfinite(v[1:]).all():
        raise DomainError("sampled function must be finite at interior nodes")
    W = product_weights(order, grid)
    if not f.singular_at_zero:
        out = W @ v
        cols, p, c = _sublinear_start(t, v, strict=True)
        if cols.size:
            # f0 + c t^p with 0 < p < 1: integrate the power exactly
            model = c * t[:, None] ** p
            ratio = special.gamma(p + 1.0) / special.gamma(p + 1.0 + order)
            out[:, cols] = W @ (v[:, cols] - model) + c * ratio * t[:, None] ** (p + order)
        return SampledFn(grid, out[:, 0] if flat else out, False)
    if grid.intervals < 2:
        raise DomainError("singular integrand needs at least 2 intervals")
    # subtract c t^p fitted at t_1, t_2 and integrate it exactly
    p, c, ok = _power_fit(t[1], t[2], v[1], v[2])
    p = np.where(ok, p, 0.0)
    c = np.where(ok, c, v[1])
    rem = np.empty_like(v)
    rem[0] = 0.0
    rem[1:] = v[1:] - c * t[1:, None] ** p
    out = W @ rem
    ratio = special.gamma(p + 1.0) / special.gamma(p + 1.0 + order)
    out[1:] += c * ratio * t[1:, None] ** (p + order)
    e0 = p + order
    out[0] = np.where(e0 > 1e-8, 0.0, np.where(e0 >= -1e-8, c * ratio, np.nan))
    singular = bool(np.isnan(out[0]).any())
    if singular:
        out[0] = np.nan
    return SampledFn(grid, out[:, 0] if flat else out, singular)


# ------------------------------------------------------------------ derivatives


def grid_derivative(f: SampledFn) -> SampledFn:
    """First derivative by three-point non-uniform differences.

    Interior nodes use the centered stencil, the ends use one-sided
    second-order stencils. If ``f`` behaves like ``f0 + c t^p`` with ``p < 1``
    near 0, that power law is differentiated exactly, the remainder by
    differences, and the result is flagged singular at 0.
    """
    grid = f.grid
    t = grid.nodes
    v, flat = _as2d(f.values)
    M = grid.intervals
    start = 1 if f.singular_at_zero else 0
    if M - start < 2:
        raise DomainError("derivative needs at least three usable nodes")
    out = _stencil(t, v, start)
    if f.singular_at_zero:
        return SampledFn(grid, out[:, 0] if flat else out, True)
    singular = False
    # a sub-linear start f0 + c t^p (p < 1) has an unbounded derivative;
    # differentiate that part exactly and the remainder by differences
    cols, ps, cs = _sublinear_start(t, v)
    if cols.size:
        singular = True
        model = v[0, cols] + cs * t[:, None] ** ps
        with np.errstate(divide="ignore", invalid="ignore"):
            dmodel = cs * ps * t[:, None] ** (ps - 1.0)
        out[:, cols] = _stencil(t, v[:, cols] - model, 0) + dmodel
        out[0, cols] = np.nan
    return SampledFn(grid, out[:, 0] if flat else out, singular)


def _stencil(t: np.ndarray, v: np.ndarray, start: int) -> np.ndarray:
    out = np.full(v.shape, np.nan)
    x0, x1, x2 = t[:-2], t[1:-1], t[2:]
    h0 = x1 - x0
    h1 = x2 - x1
    c0 = -h1 / (h0 * (h0 + h1))
    c1 = (h1 - h0) / (h0 * h1)
    c2 = h0 / (h1 * (h0 + h1))
    out[1:-1] = c0[:, None] * v[:-2] + c1[:, None] * v[1:-1] + c2[:, None] * v[2:]
    out[-1] = _one_sided(t[-1], t[-2], t[-3], v[-1], v[-2], v[-3])
    s = start
    out[s] = _one_sided(t[s], t[s + 1], t[s + 2], v[s], v[s + 1], v[s + 2])
    return out


def _one_sided(x0, x1, x2, v0, v1, v2):
    h1 = x1 - x0
    h2 = x2 - x0
    c1 = h2 / (h1 * (h2 - h1))
    c2 = -h1 / (h2 * (h2 - h1))
    return -(c1 + c2) * v0 + c1 * v1 + c2 * v2


def _check_order(order: float) -> float:
    order = float(order)
    if not (0.0 < order < 1.0):
        raise DomainError(f"derivative order must lie in (0, 1), got {order}")
    return order


def rl_derivative(order: float, f: SampledFn) -> SampledFn:
    r"""Riemann-Liouville derivative :math:`D\, I^{1-a} f`."""
    order = _check_order(order)
    return grid_derivative(rl_integral(1.0 - order, f))


def caputo_derivative(order: float, f: SampledFn) -> SampledFn:
    r"""Caputo derivative :math:`I^{1-a} D f`."""
    order = _check_order(order)
    return rl_integral(1.0 - order, grid_derivative(f))


def hilfer_derivative(order: float, type_g: float, f: SampledFn) -> SampledFn:
    r"""Hilfer derivative of order :math:`a` and type :math:`\gamma`,

    .. math::

        D^{a,\gamma} f = I^{\gamma(1-a)}\, D\, I^{(1-\gamma)(1-a)} f.

    ``type_g = 0`` and ``type_g = 1`` run exactly the Riemann-Liouville and
    Caputo code paths, since integrals of order zero are the identity.
    """
    order = _check_order(order)
    type_g = float(type_g)
    if not (0.0 <= type_g <= 1.0):
        raise DomainError(f"type must lie in [0, 1], got {type_g}")
    inner = _integral((1.0 - type_g) * (1.0 - order), f)
    return _integral(type_g * (1.0 - order), grid_derivative(inner))
