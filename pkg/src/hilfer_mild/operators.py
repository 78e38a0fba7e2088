r"""Diagonal almost sectorial operator and its fractional solution families.

The operator acts on the Dirichlet sine basis :math:`\varphi_n(y) = \sin(ny)`
of :math:`L^2[0,\pi]` with eigenvalues :math:`\lambda_n = n^2 + \delta`.
Every family is diagonal, so it is fully described by a scalar multiplier per
mode. With :math:`s = \lambda t^\alpha`:

=================  ==========================================================
family             multiplier
=================  ==========================================================
``Q``              :math:`e^{-\lambda t}`
``S_alpha``        :math:`E_{\alpha,1}(-s)`
``T_alpha``        :math:`E_{\alpha,\alpha}(-s)`
``R_alpha``        :math:`t^{\alpha-1}E_{\alpha,\alpha}(-s)`
``S_alpha_gamma``  :math:`t^{(\alpha-1)(1-\gamma)}E_{\alpha,\alpha+\gamma(1-\alpha)}(-s)`
=================  ==========================================================

``S_alpha`` and ``T_alpha`` can also be evaluated from their subordination
integrals against the Wright density, which gives an independent check of
the Mittag-Leffler closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import _parallel
from .errors import DomainError
from .fracops import SampledFn, TimeGrid, rl_integral
from .specfun import ml_array, rgamma, wright_integrate

__all__ = [
    "Family",
    "Path",
    "FracParams",
    "DiagonalSectorialOperator",
    "SpectralField",
    "BoundProbeReport",
    "ContinuityReport",
    "multiplier",
    "subordinated_multiplier",
    "s_alpha_gamma_quadrature",
    "semigroup_apply",
    "resolvent_probe",
    "s_alpha_apply",
    "t_alpha_apply",
    "r_alpha_apply",
    "s_alpha_gamma_apply",
    "norm_bound_probe",
    "strong_continuity_probe",
]


class Family(str, Enum):
    Q = "Q"
    S_ALPHA = "S_alpha"
    T_ALPHA = "T_alpha"
    R_ALPHA = "R_alpha"
    S_ALPHA_GAMMA = "S_alpha_gamma"


class Path(str, Enum):
    DIRECT = "direct"
    SUBORDINATION = "subordination"


@dataclass(frozen=True)
class FracParams:
    """Order ``alpha``, type ``gamma_type``, sectoriality exponent ``beta_sect``
    and horizon ``horizon_T``."""

    alpha: float
    gamma_type: float
    beta_sect: float = -0.5
    horizon_T: float = 1.0

    def __post_init__(self) -> None:
        problems = []
        if not (0.0 < self.alpha < 1.0):
            problems.append(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (0.0 <= self.gamma_type <= 1.0):
            problems.append(f"gamma must lie in [0, 1], got {self.gamma_type}")
        if not (-1.0 < self.beta_sect < 0.0):
            problems.append(f"beta must lie in (-1, 0), got {self.beta_sect}")
        if not self.horizon_T > 0.0:
            problems.append(f"T must be positive, got {self.horizon_T}")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def weight_exponent(self) -> float:
        """w = (1 + alpha beta)(1 - gamma), the weight of the solution space."""
        return (1.0 + self.alpha * self.beta_sect) * (1.0 - self.gamma_type)

    @property
    def initial_exponent(self) -> float:
        """(alpha - 1)(1 - gamma), the t -> 0 power of S_{alpha,gamma}."""
        return (self.alpha - 1.0) * (1.0 - self.gamma_type)

    @property
    def beta_ml_initial(self) -> float:
        return self.alpha + self.gamma_type * (1.0 - self.alpha)


@dataclass(frozen=True)
class DiagonalSectorialOperator:
    """Eigenvalues n^2 + shift for n = 1..mode_count."""

    mode_count: int
    shift: float = 0.0
    eigenvalues: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if int(self.mode_count) != self.mode_count or self.mode_count < 1:
            raise DomainError("mode_count must be a positive integer")
        if not self.shift >= 0.0:
            raise DomainError("shift must be non-negative")
        n = np.arange(1, self.mode_count + 1, dtype=float)
        lam = n * n + self.shift
        lam.flags.writeable = False
        object.__setattr__(self, "eigenvalues", lam)


@dataclass(frozen=True)
class SpectralField:
    """Coefficients of sin(n y), n = 1..N, on [0, pi]."""

    coefficients: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.coefficients, dtype=float).reshape(-1)
        if not np.isfinite(c).all():
            raise DomainError("spectral coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    @property
    def mode_count(self) -> int:
        return self.coefficients.size

    @classmethod
    def zeros(cls, n: int) -> "SpectralField":
        return cls(np.zeros(n))

    @classmethod
    def unit(cls, n: int, k: int = 1) -> "SpectralField":
        c = np.zeros(n)
        c[k - 1] = 1.0
        return cls(c)

    def norm(self) -> float:
        """L^2(0, pi) norm."""
        return l2_norm(self.coefficients)

    def evaluate(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        n = np.arange(1, self.mode_count + 1)
        return np.sin(np.multiply.outer(y, n)) @ self.coefficients


def l2_norm(coeffs: np.ndarray) -> np.ndarray:
    """L^2(0, pi) norm of sine series, over the last axis."""
    return np.sqrt(0.5 * np.pi * np.sum(np.square(coeffs), axis=-1))


@dataclass(frozen=True)
class BoundProbeReport:
    """Result of fitting ``norm(t) <= C t^exponent`` (or ``C |z|^beta``).

    ``max_violation`` is the signed worst slack ``norm / bound - 1`` over a
    validation grid; negative means the inequality holds everywhere.
    """

    family: str
    exponent_expected: float
    constant_fitted: float
    max_violation: float
    exponent_fitted: float = math.nan
    violations: int = 0
    samples: int = 0


@dataclass(frozen=True)
class ContinuityReport:
    gaps: tuple[float, ...]
    defects: tuple[float, ...]

    @property
    def monotone(self) -> bool:
        d = self.defects
        return all(d[i + 1] < d[i] for i in range(len(d) - 1))


# ------------------------------------------------------------------ multipliers


def _s_of(alpha: float, lam, t):
    return np.multiply.outer(np.asarray(t, dtype=float) ** alpha, np.asarray(lam, dtype=float))


def _ml_by_modes(alpha: float, beta: float, s: np.ndarray) -> np.ndarray:
    """E_{alpha,beta}(-s) with the mode axis (last) split into fixed chunks."""
    s = np.atleast_1d(s)
    n = s.shape[-1]
    parts = _parallel.chunks(n)
    res = _parallel.map_ordered(lambda sl: ml_array(alpha, beta, -s[..., sl]), parts)
    return np.concatenate(res, axis=-1)


def multiplier(family: Family | str, alpha: float, lam, t, gamma_type: float = 0.0) -> np.ndarray:
    """Direct multipliers with shape ``t.shape + lam.shape``.

    ``lam`` may contain 0 and ``alpha`` may equal 1 here, which the tests use
    for closed-form reductions.
    """
    family = Family(family)
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if family is Family.Q:
        return np.exp(-np.multiply.outer(t, lam))
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    s = _s_of(alpha, lam, t)
    if family is Family.S_ALPHA:
        return _ml_by_modes(alpha, 1.0, s).reshape(s.shape)
    if family is Family.T_ALPHA:
        return _ml_by_modes(alpha, alpha, s).reshape(s.shape)
    tt = np.expand_dims(t, -1) if lam.ndim else t
    if family is Family.R_ALPHA:
        if (t <= 0.0).any():
            raise DomainError("R_alpha is singular at t = 0")
        return tt ** (alpha - 1.0) * _ml_by_modes(alpha, alpha, s).reshape(s.shape)
    # S_{alpha,gamma}
    b = alpha + gamma_type * (1.0 - alpha)
    e = (alpha - 1.0) * (1.0 - gamma_type)
    if (t <= 0.0).any() and e != 0.0:
        raise DomainError("S_alpha_gamma is singular at t = 0 for gamma < 1")
    with np.errstate(divide="ignore"):
        pw = np.where(tt > 0.0, tt**e, 1.0) if e != 0.0 else np.ones_like(tt)
    return pw * _ml_by_modes(alpha, b, s).reshape(s.shape)


def subordinated_multiplier(family: Family | str, alpha: float, lam, t) -> np.ndarray:
    r"""``S_alpha`` / ``T_alpha`` multipliers from the subordination integrals

    .. math::

        \int_0^\infty M_\alpha(\theta) e^{-s\theta}\,d\theta, \qquad
        \int_0^\infty \alpha\theta M_\alpha(\theta) e^{-s\theta}\,d\theta,

    by panel Gauss-Legendre quadrature on the truncated Wright support.
    """
    family = Family(family)
    if family not in (Family.S_ALPHA, Family.T_ALPHA):
        raise DomainError("only S_alpha and T_alpha have a subordination path")
    s = np.asarray(_s_of(alpha, lam, t), dtype=float)
    flat = s.reshape(-1)
    if family is Family.S_ALPHA:
        weight = lambda th: np.exp(-np.multiply.outer(th, flat))  # noqa: E731
    else:
        weight = lambda th: (alpha * th)[:, None] * np.exp(-np.multiply.outer(th, flat))  # noqa: E731
    vals = wright_integrate(alpha, weight)
    return np.asarray(vals).reshape(s.shape)


def s_alpha_gamma_quadrature(
    params: FracParams, lam, t: float, nodes: int = 400, grading_q: float = 2.0
) -> np.ndarray:
    r"""``S_{alpha,gamma}(t)`` multipliers as :math:`I^{\gamma(1-\alpha)}` of sampled ``R_alpha``.

    A graded mesh with ``nodes`` points on [0, t] carries :math:`R_\alpha`,
    which is then integrated with :func:`~hilfer_mild.fracops.rl_integral`.
    """
    if not t > 0.0:
        raise DomainError("quadrature path needs t > 0")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    grid = TimeGrid(float(t), nodes - 1, grading_q)
    tau = grid.nodes
    vals = np.full((tau.size, lam.size), np.nan)
    vals[1:] = multiplier(Family.R_ALPHA, params.alpha, lam, tau[1:])
    order = params.gamma_type * (1.0 - params.alpha)
    if order == 0.0:
        return vals[-1]
    out = rl_integral(order, SampledFn(grid, vals, singular_at_zero=True))
    return out.values[-1]


# -------------------------------------------------------------------- appliers


def _check_field(op: DiagonalSectorialOperator, x: SpectralField) -> None:
    if x.mode_count != op.mode_count:
        raise DomainError(f"field has {x.mode_count} modes, operator has {op.mode_count}")


def semigroup_apply(op: DiagonalSectorialOperator, t: float, x: SpectralField) -> SpectralField:
    """Q(t) x = sum_n exp(-lambda_n t) c_n sin(n y)."""
    if t < 0.0:
        raise DomainError("semigroup needs t >= 0")
    _check_field(op, x)
    return SpectralField(np.exp(-op.eigenvalues * t) * x.coefficients)


def _apply(family, params, op, t, x, path=Path.DIRECT) -> SpectralField:
    _check_field(op, x)
    path = Path(path)
    if path is Path.SUBORDINATION:
        m = subordinated_multiplier(family, params.alpha, op.eigenvalues, float(t))
    else:
        m = multiplier(family, params.alpha, op.eigenvalues, float(t), params.gamma_type)
    return SpectralField(m * x.coefficients)


def s_alpha_apply(params: FracParams, op, t: float, x: SpectralField, path: Path | str = Path.DIRECT):
    if not t > 0.0:
        raise DomainError("S_alpha is evaluated for t > 0")
    return _apply(Family.S_ALPHA, params, op, t, x, path)


def t_alpha_apply(params: FracParams, op, t: float, x: SpectralField, path: Path | str = Path.DIRECT):
    if not t > 0.0:
        raise DomainError("T_alpha is evaluated for t > 0")
    return _apply(Family.T_ALPHA, params, op, t, x, path)


def r_alpha_apply(params: FracParams, op, t: float, x: SpectralField) -> SpectralField:
    if not t > 0.0:
        raise DomainError("R_alpha is singular at t = 0")
    return _apply(Family.R_ALPHA, params, op, t, x)


def s_alpha_gamma_apply(params: FracParams, op, t: float, x: SpectralField) -> SpectralField:
    """S_{alpha,gamma}(t) x; at t = 0 only the Caputo-type case gamma = 1 is defined."""
    if t < 0.0:
        raise DomainError("t must be non-negative")
    if t == 0.0:
        if params.gamma_type < 1.0:
            raise DomainError("S_alpha_gamma is singular at t = 0 for gamma < 1")
        _check_field(op, x)
        return x
    return _apply(Family.S_ALPHA_GAMMA, params, op, t, x)


# ---------------------------------------------------------------------- probes


def resolvent_probe(
    op: DiagonalSectorialOperator, z_samples: Iterable[complex], beta_sect: float
) -> BoundProbeReport:
    """Fit ``||R(z, -A)|| <= M |z|^beta`` with ``||R|| = max_n 1/|z + lambda_n|``."""
    z = np.asarray(list(z_samples), dtype=complex)
    if z.size == 0:
        raise DomainError("no samples")
    dist = np.abs(np.add.outer(z, op.eigenvalues))
    if (dist <= 1e-14 * (1.0 + op.eigenvalues.max())).any() or (z == 0).any():
        raise DomainError("sample lies on the spectrum")
    rnorm = 1.0 / dist.min(axis=1)
    scale = np.abs(z) ** beta_sect
    ratio = rnorm / scale
    c = float(ratio.max())
    return BoundProbeReport(
        family="resolvent",
        exponent_expected=float(beta_sect),
        constant_fitted=c,
        max_violation=float((ratio / c - 1.0).max()),
        violations=0,
        samples=int(z.size),
    )


def family_exponent(params: FracParams, family: Family | str) -> float:
    family = Family(family)
    a, b, g = params.alpha, params.beta_sect, params.gamma_type
    if family is Family.T_ALPHA:
        return -a * (1.0 + b)
    if family is Family.S_ALPHA_GAMMA:
        return g * (1.0 - a) - a * b - 1.0
    raise DomainError(f"no norm bound for family {family.value}")


def _operator_norm(params, op, family, t) -> np.ndarray:
    m = multiplier(family, params.alpha, op.eigenvalues, t, params.gamma_type)
    return np.abs(m).max(axis=-1)


def norm_bound_probe(
    params: FracParams,
    op: DiagonalSectorialOperator,
    family: Family | str,
    t_samples: Sequence[float],
    exponent: float | None = None,
    rtol: float = 1e-2,
) -> BoundProbeReport:
    """Fit the smallest C with ``||F(t)|| <= C t^e`` on ``t_samples`` and validate it.

    The operator norm is the largest mode multiplier. The fitted constant is
    then checked on a four-times refined log grid that also extends one decade
    below the smallest sample; points exceeding the bound by more than
    ``rtol`` count as violations.
    """
    family = Family(family)
    e = family_exponent(params, family) if exponent is None else float(exponent)
    t = np.asarray(sorted(t_samples), dtype=float)
    if (t <= 0.0).any() or (t > params.horizon_T).any():
        raise DomainError("t samples must lie in (0, T]")
    norms = _operator_norm(params, op, family, t)
    c = float((norms / t**e).max())
    lo, hi = math.log10(t[0]) - 1.0, math.log10(t[-1])
    tv = np.logspace(lo, hi, 4 * t.size + 1)
    ratio = _operator_norm(params, op, family, tv) / (c * tv**e)
    slack = ratio - 1.0
    slope = np.polyfit(np.log(t), np.log(norms), 1)[0] if t.size > 1 else math.nan
    return BoundProbeReport(
        family=family.value,
        exponent_expected=e,
        constant_fitted=c,
        max_violation=float(slack.max()),
        exponent_fitted=float(slope),
        violations=int((slack > rtol).sum()),
        samples=int(t.size),
    )


def strong_continuity_probe(
    params: FracParams,
    op: DiagonalSectorialOperator,
    family: Family | str,
    x: SpectralField,
    t_pairs: Sequence[tuple[float, float]],
) -> ContinuityReport:
    """Largest ``||F(t2) x - F(t1) x||`` per gap, gaps in decreasing order."""
    family = Family(family)
    _check_field(op, x)
    buckets: dict[float, float] = {}
    for t1, t2 in t_pairs:
        if not (0.0 < t1 <= params.horizon_T and 0.0 < t2 <= params.horizon_T):
            raise DomainError("t pairs must lie in (0, T]")
        m = multiplier(family, params.alpha, op.eigenvalues, np.array([t1, t2]), params.gamma_type)
        d = float(l2_norm((m[1] - m[0]) * x.coefficients))
        gap = round(abs(t2 - t1), 12)
        buckets[gap] = max(buckets.get(gap, 0.0), d)
    gaps = sorted(buckets, reverse=True)
    return ContinuityReport(tuple(gaps), tuple(buckets[g] for g in gaps))


def initial_multiplier_at_zero(params: FracParams, lam) -> np.ndarray:
    """Limit of t^{-(alpha-1)(1-gamma)} S_{alpha,gamma}(t) as t -> 0: 1/Gamma(b)."""
    return np.full(np.shape(lam), float(rgamma(params.beta_ml_initial)))
