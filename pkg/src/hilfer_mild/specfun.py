r"""Special functions: Gamma, two-parameter Mittag-Leffler and the Wright-type
density :math:`M_\alpha`.

Scalar entry points (:func:`gamma`, :func:`mittag_leffler`, :func:`wright_m`)
favour accuracy; the ``*_array`` variants are vectorized for the operator
families and pick a branch per element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import mpmath
import numpy as np
from scipy import special

from .errors import AccuracyError, DomainError

__all__ = [
    "MLParams",
    "EvalPolicy",
    "gamma",
    "rgamma",
    "mittag_leffler",
    "ml_array",
    "ml_series",
    "ml_large_argument",
    "wright_m",
    "wright_m_array",
    "wright_theta_max",
    "wright_integrate",
    "wright_moment",
    "wright_laplace_check",
    "panel_gauss_legendre",
]

# double precision can't represent anything below exp(-745)
_LOG_TINY = -745.0
_WRIGHT_CUTOFF = 50.0


@dataclass(frozen=True)
class MLParams:
    """Order ``alpha`` in (0, 2] and second parameter ``beta_ml`` > 0."""

    alpha: float
    beta_ml: float

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 2.0):
            raise DomainError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not self.beta_ml > 0.0:
            raise DomainError(f"beta_ml must be positive, got {self.beta_ml}")


@dataclass(frozen=True)
class EvalPolicy:
    """Branch-selection knobs for :func:`mittag_leffler`."""

    series_terms_max: int = 2000
    series_radius: float = 5.0
    tail_tolerance: float = 1e-15
    asymptotic_terms: int = 10

    def __post_init__(self) -> None:
        if self.series_terms_max < 1:
            raise DomainError("series_terms_max must be >= 1")
        if not self.series_radius > 0.0:
            raise DomainError("series_radius must be positive")
        if not self.tail_tolerance > 0.0:
            raise DomainError("tail_tolerance must be positive")
        if self.asymptotic_terms < 1:
            raise DomainError("asymptotic_terms must be >= 1")


DEFAULT_POLICY = EvalPolicy()


# --------------------------------------------------------------------------- gamma


def _pole(x: float) -> bool:
    return x <= 0.0 and x == math.floor(x)


def gamma(x: float) -> float:
    """Gamma function for real ``x`` away from the poles 0, -1, -2, ..."""
    x = float(x)
    if _pole(x):
        raise DomainError(f"gamma has a pole at x = {int(x)}")
    try:
        return math.gamma(x)
    except OverflowError:
        return math.inf


def rgamma(x):
    """Reciprocal Gamma, entire: returns 0 at the poles."""
    return special.rgamma(x)


# ----------------------------------------------------------------- Mittag-Leffler


def _check_ml(p: MLParams, z: float) -> float:
    if not isinstance(p, MLParams):
        raise DomainError("expected MLParams")
    z = float(z)
    if not math.isfinite(z):
        raise DomainError(f"z must be finite, got {z}")
    return z


def _series_peak_log10(alpha: float, beta: float, x: float, kmax: int) -> float:
    """log10 of the largest series term |x|^k / Gamma(alpha k + beta)."""
    if x == 0.0:
        return -math.log10(abs(gamma(beta))) if not _pole(beta) else 0.0
    k = np.arange(kmax + 1, dtype=float)
    arg = alpha * k + beta
    lg = special.gammaln(arg)
    vals = k * math.log(x) - lg
    return float(vals.max()) / math.log(10.0)


def _series_reaches(alpha: float, beta: float, x: float, kmax: int, log_tol: float = -80.0) -> bool:
    """True when the series term at ``kmax`` is already negligible."""
    if x == 0.0:
        return True
    return kmax * math.log(x) - float(special.gammaln(alpha * kmax + beta)) < log_tol


def ml_series(p: MLParams, z: float, policy: EvalPolicy = DEFAULT_POLICY) -> float:
    """Power series summed in extended precision.

    The working precision is chosen from the largest term so the alternating
    cancellation for negative ``z`` does not destroy the result.
    """
    z = _check_ml(p, z)
    a, b = p.alpha, p.beta_ml
    if z == 0.0:
        return float(rgamma(b))
    peak = _series_peak_log10(a, b, abs(z), policy.series_terms_max)
    result_guess = 0.0
    for _attempt in range(3):
        dps = int(25 + max(peak, 0.0) - min(result_guess, 0.0))
        with mpmath.workdps(dps):
            zz = mpmath.mpf(z)
            am, bm = mpmath.mpf(a), mpmath.mpf(b)
            tol = mpmath.mpf(policy.tail_tolerance) * mpmath.mpf(10) ** (-3)
            s = mpmath.mpf(0)
            term = mpmath.mpf(0)
            zk = mpmath.mpf(1)
            k = 0
            converged = False
            while k < policy.series_terms_max:
                # the Gamma argument must be formed in working precision
                term = zk * mpmath.rgamma(am * k + bm)
                s += term
                past_peak = k * a + b > abs(z) ** (1.0 / a) + 2.0
                if past_peak and abs(term) <= tol * abs(s) and k > 2:
                    converged = True
                    break
                zk *= zz
                k += 1
            if not converged:
                bound = float(abs(term) / abs(s)) if s != 0 else math.inf
                raise AccuracyError(
                    f"Mittag-Leffler series did not converge in {policy.series_terms_max} terms",
                    bound,
                )
            val = float(s)
        mag = math.log10(abs(val)) if val != 0.0 else -300.0
        if mag >= result_guess - 1.0:
            return val
        result_guess = mag
    return val


def _asymptotic(alpha: float, beta: float, z: np.ndarray, terms: int):
    """Real-axis expansion -sum_{k=1}^{K} z^{-k}/Gamma(beta - alpha k).

    Returns the partial sum and the largest of the next three omitted terms
    (single terms can vanish at Gamma poles).
    """
    z = np.asarray(z, dtype=float)
    inv = 1.0 / z
    s = np.zeros_like(z)
    zk = np.ones_like(z)
    for k in range(1, terms + 1):
        zk = zk * inv
        s = s - zk * rgamma(beta - alpha * k)
    nxt = np.zeros_like(z)
    zk2 = zk
    for k in range(terms + 1, terms + 4):
        zk2 = zk2 * inv
        nxt = np.maximum(nxt, np.abs(zk2 * rgamma(beta - alpha * k)))
    return s, nxt


# Talbot-type cotangent contour (Weideman & Trefethen parameters)
_TALBOT_N = 32


@lru_cache(maxsize=256)
def _contour_nodes(alpha: float, beta: float, n: int = _TALBOT_N):
    th = -np.pi + (np.arange(1, n + 1) - 0.5) * 2.0 * np.pi / n
    th = th[th > 0.0]
    c1, c2, c3, c4 = 0.5017, 0.6407, 0.6122, 0.2645
    s = n * (c1 * th / np.tan(c2 * th) - c3 + 1j * c4 * th)
    ds = n * (c1 / np.tan(c2 * th) - c1 * c2 * th / np.sin(c2 * th) ** 2 + 1j * c4)
    coef = np.exp(s) * s ** (alpha - beta) * ds * (2.0 / n)
    return coef, s**alpha


def _contour(alpha: float, beta: float, z: np.ndarray) -> np.ndarray:
    """Inverse Laplace transform of s^(a-b)/(s^a - z) along a Talbot contour.

    Accurate to ~1e-11 relative for 0 < alpha <= 0.8 and z <= 0 with
    |z| up to about 1e3.
    """
    coef, sa = _contour_nodes(float(alpha), float(beta))
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape)
    flat = z.reshape(-1)
    res = out.reshape(-1)
    chunk = 65536
    for i in range(0, flat.size, chunk):
        x = -flat[i : i + chunk, None]
        res[i : i + chunk] = (coef / (sa + x)).imag.sum(axis=1)
    return out


_CONTOUR_ALPHA_MAX = 0.8
# the vectorized path may go further down the divergent expansion than the
# scalar policy; the tail test below decides whether the result is kept
_ASYM_TERMS_VECTOR = 40
_CONTOUR_Z_MAX = 1.0e3


def ml_large_argument(p: MLParams, z: float, policy: EvalPolicy = DEFAULT_POLICY) -> float:
    """Branch used outside the series disc for negative ``z``.

    The truncated asymptotic expansion is used when its first omitted term is
    below ``tail_tolerance`` relative to the sum; otherwise a contour integral
    (0 < alpha <= 0.8) or, failing that, the extended-precision series.
    """
    z = _check_ml(p, z)
    a, b = p.alpha, p.beta_ml
    if z >= 0.0:
        raise DomainError("large-argument branch is for negative z")
    if a < 1.0:
        s, nxt = _asymptotic(a, b, np.array([z]), policy.asymptotic_terms)
        s, nxt = float(s[0]), float(nxt[0])
        if s != 0.0 and nxt <= max(policy.tail_tolerance, 1e-15) * abs(s) * 10.0:
            return s
        if a <= _CONTOUR_ALPHA_MAX and -z <= _CONTOUR_Z_MAX:
            return float(_contour(a, b, np.array([z]))[0])
    peak = _series_peak_log10(a, b, abs(z), policy.series_terms_max)
    if peak < 300.0:
        return ml_series(p, z, policy)
    if a < 1.0:
        s, nxt = _asymptotic(a, b, np.array([z]), policy.asymptotic_terms)
        raise AccuracyError("no Mittag-Leffler branch reaches tolerance", float(nxt[0] / abs(s[0])))
    raise AccuracyError("series infeasible for this argument", math.inf)


def mittag_leffler(p: MLParams, z: float, policy: EvalPolicy = DEFAULT_POLICY) -> float:
    r"""Two-parameter Mittag-Leffler function

    .. math::

        E_{\alpha,\beta}(z) = \sum_{k\ge 0} \frac{z^k}{\Gamma(\alpha k + \beta)}.

    Inside ``|z| <= series_radius`` (and for every positive ``z``) the series
    is summed in extended precision. For large negative ``z`` the real-axis
    asymptotic expansion is used when its tail is small enough.
    """
    z = _check_ml(p, z)
    if p.alpha == 1.0 and p.beta_ml == 1.0:
        return math.exp(z)
    if z >= 0.0:
        return ml_series(p, z, policy)
    if abs(z) <= policy.series_radius:
        # small alpha pushes the series peak past the term budget even for |z| <= radius
        feasible = _series_reaches(p.alpha, p.beta_ml, abs(z), policy.series_terms_max)
        if feasible or p.alpha > _CONTOUR_ALPHA_MAX:
            return ml_series(p, z, policy)
    return ml_large_argument(p, z, policy)


def _series_double(alpha: float, beta: float, z: np.ndarray, kmax: int = 400):
    """Double-precision series with a cancellation estimate."""
    s = np.zeros_like(z)
    absum = np.zeros_like(z)
    zk = np.ones_like(z)
    done = np.zeros(z.shape, dtype=bool)
    for k in range(kmax):
        t = zk * rgamma(alpha * k + beta)
        s = s + t
        absum = absum + np.abs(t)
        if k > 4:
            done = np.abs(t) <= 1e-17 * np.maximum(np.abs(s), 1e-300)
            if done.all():
                break
        zk = zk * z
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = absum / np.abs(s)
    cond[~done] = np.inf
    return s, cond


def ml_array(alpha: float, beta: float, z) -> np.ndarray:
    """Vectorized :math:`E_{\\alpha,\\beta}(z)` for real ``z``.

    Negative arguments with ``alpha <= 0.8`` go through the asymptotic
    expansion (large ``|z|``) or the contour integral; everything else uses a
    double-precision series when it is well conditioned and falls back to
    :func:`mittag_leffler` element-wise.
    """
    alpha, beta = float(alpha), float(beta)
    MLParams(alpha, beta)
    z = np.asarray(z, dtype=float)
    if alpha == 1.0 and beta == 1.0:
        return np.exp(z)
    out = np.full(z.shape, np.nan)
    todo = np.ones(z.shape, dtype=bool)

    if alpha < 1.0:
        big = z <= -15.0
        if big.any():
            s, nxt = _asymptotic(alpha, beta, z[big], _ASYM_TERMS_VECTOR)
            ok = nxt <= 1e-15 * np.abs(s)
            idx = np.flatnonzero(big)[ok]
            out.flat[idx] = s[ok]
            todo.flat[idx] = False
        if alpha <= _CONTOUR_ALPHA_MAX:
            # the series is exact and well conditioned on [-1, 0]
            neg = todo & (z < -1.0) & (z >= -_CONTOUR_Z_MAX)
            if neg.any():
                out[neg] = _contour(alpha, beta, z[neg])
                todo[neg] = False

    if todo.any():
        zz = z[todo]
        small = np.abs(zz) <= 30.0
        vals = np.full(zz.shape, np.nan)
        if small.any():
            s, cond = _series_double(alpha, beta, zz[small])
            good = cond < 1e2
            tmp = np.full(s.shape, np.nan)
            tmp[good] = s[good]
            vals[small] = tmp
        out[todo] = vals
        todo &= np.isnan(out)

    if todo.any():
        p = MLParams(alpha, beta)
        for i in np.flatnonzero(todo):
            out.flat[i] = mittag_leffler(p, float(z.flat[i]))
    return out


# ---------------------------------------------------------------------- Wright M


def _check_wright_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"wright_m needs 0 < alpha < 1, got {alpha}")
    return alpha


def _wright_series(alpha: float, theta: np.ndarray, nmax: int = 160):
    """Double-precision series with a cancellation estimate ``cond``."""
    n = np.arange(1, nmax + 1, dtype=float)
    rg = rgamma(1.0 - alpha * n)
    lfac = special.gammaln(n)
    th = theta[:, None]
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        logmag = (n - 1.0) * np.log(th) - lfac + np.log(np.abs(rg))
        mag = np.exp(logmag)
        mag[:, 0] = abs(rg[0])
        sign = np.sign(rg) * np.where((n - 1) % 2 == 0, 1.0, -1.0)
        terms = sign * mag
        s = terms.sum(axis=1)
        absum = mag.sum(axis=1)
        cond = absum / np.abs(s)
    cond[~np.isfinite(cond)] = np.inf
    # truncation check: last few terms must be negligible
    tail = mag[:, -5:].max(axis=1)
    cond[tail > 1e-17 * np.abs(s)] = np.inf
    return s, cond


@lru_cache(maxsize=8)
def _tanh_sinh_0_pi(h: float = 1.0 / 64.0, kmax: float = 4.5):
    k = np.arange(-round(kmax / h), round(kmax / h) + 1) * h
    u = 0.5 * np.pi * np.sinh(k)
    w = h * 0.5 * np.pi * np.cosh(k) / np.cosh(u) ** 2 * 0.5 * np.pi
    # phi = pi/(1+exp(-2u)), pi - phi = pi/(1+exp(2u)); both without cancellation
    phi = np.pi / (1.0 + np.exp(-2.0 * u))
    phic = np.pi / (1.0 + np.exp(2.0 * u))
    keep = (w > 1e-300) & (phi > 0.0) & (phic > 0.0)
    return phi[keep], phic[keep], w[keep]


@lru_cache(maxsize=64)
def _zolotarev_kernel(alpha: float):
    phi, phic, w = _tanh_sinh_0_pi()
    p = 1.0 / (1.0 - alpha)
    # sin(phi) computed from the nearer endpoint
    sphi = np.where(phi < 0.5 * np.pi, np.sin(phi), np.sin(phic))
    la = p * (np.log(np.sin(alpha * phi)) - np.log(sphi)) + np.log(
        np.sin((1.0 - alpha) * phi)
    ) - np.log(np.sin(alpha * phi))
    with np.errstate(over="ignore"):
        A = np.exp(la)
    A0 = alpha ** (alpha * p) * (1.0 - alpha)
    return A, la, A0, w


def _wright_zolotarev(alpha: float, theta: np.ndarray) -> np.ndarray:
    r"""Integral representation valid for :math:`\theta > 0`,

    .. math::

        M_\alpha(\theta) = \frac{\theta^{\alpha/(1-\alpha)}}{\pi(1-\alpha)}
        \int_0^\pi A(\varphi)\, e^{-\theta^{1/(1-\alpha)} A(\varphi)}\, d\varphi,

    with :math:`A(\varphi) = (\sin\alpha\varphi/\sin\varphi)^{1/(1-\alpha)}
    \sin((1-\alpha)\varphi)/\sin\alpha\varphi`, evaluated in log form.
    """
    A, logA, A0, w = _zolotarev_kernel(alpha)
    p = 1.0 / (1.0 - alpha)
    out = np.zeros(theta.shape)
    X = theta ** p
    lead = alpha * p * np.log(theta) - math.log(math.pi * (1.0 - alpha)) - X * A0
    live = lead > _LOG_TINY - 50.0
    chunk = 2048
    idx = np.flatnonzero(live)
    for i in range(0, idx.size, chunk):
        j = idx[i : i + chunk]
        with np.errstate(over="ignore", invalid="ignore"):
            e = np.exp(logA[None, :] - X[j, None] * (A[None, :] - A0))
        integral = (e * w[None, :]).sum(axis=1)
        with np.errstate(divide="ignore"):
            logv = lead[j] + np.log(integral)
        out[j] = np.where(logv > _LOG_TINY, np.exp(logv), 0.0)
    return out


def wright_m_array(alpha: float, theta) -> np.ndarray:
    r"""Vectorized :math:`M_\alpha(\theta)`; zero beyond :math:`\theta = 50`."""
    alpha = _check_wright_alpha(alpha)
    theta = np.asarray(theta, dtype=float)
    if (theta < 0).any():
        raise DomainError("wright_m needs theta >= 0")
    out = np.zeros(theta.shape)
    flat = theta.reshape(-1)
    res = out.reshape(-1)
    inside = flat <= _WRIGHT_CUTOFF
    zero = flat == 0.0
    res[zero] = float(rgamma(1.0 - alpha))
    pos = np.flatnonzero(inside & ~zero)
    if pos.size:
        th = flat[pos]
        s, cond = _wright_series(alpha, th)
        good = cond < 1e3
        vals = np.empty(th.shape)
        vals[good] = s[good]
        if (~good).any():
            vals[~good] = _wright_zolotarev(alpha, th[~good])
        res[pos] = vals
    return out


def wright_m(alpha: float, theta: float) -> float:
    r"""Wright-type density

    .. math::

        M_\alpha(\theta) = \sum_{n\ge1} \frac{(-\theta)^{n-1}}{\Gamma(1-\alpha n)\,(n-1)!}.

    For :math:`\theta > 50` the function returns 0; the neglected mass is below
    :math:`\exp(-c\,\theta^{1/(1-\alpha)})` with
    :math:`c = \alpha^{\alpha/(1-\alpha)}(1-\alpha)`.
    """
    theta = float(theta)
    if theta < 0.0:
        raise DomainError(f"wright_m needs theta >= 0, got {theta}")
    return float(wright_m_array(alpha, np.array([theta]))[0])


def wright_tail_constant(alpha: float) -> float:
    alpha = _check_wright_alpha(alpha)
    return alpha ** (alpha / (1.0 - alpha)) * (1.0 - alpha)


def wright_theta_max(alpha: float, log_tail: float = 60.0, width: float = 0.5) -> float:
    """Truncation point where exp(-c theta^(1/(1-alpha))) drops below exp(-log_tail)."""
    c = wright_tail_constant(alpha)
    t = (log_tail / c) ** (1.0 - alpha)
    t = min(t, _WRIGHT_CUTOFF)
    return math.ceil(t / width) * width


# ------------------------------------------------------------ panel quadrature

_GL16 = np.polynomial.legendre.leggauss(16)


def _gl_nodes(a: float, b: float):
    x, w = _GL16
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def panel_gauss_legendre(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    width: float = 0.5,
    tol: float = 1e-13,
    max_depth: int = 12,
) -> np.ndarray:
    """Composite 16-point Gauss-Legendre rule on panels of ``width``.

    Each panel is bisected until the two halves agree with the whole panel to
    ``tol`` (relative to the running total). ``func`` maps an array of nodes
    with shape ``(k,)`` to values with shape ``(k,)`` or ``(k, m)``.
    """
    edges = np.arange(a, b + 0.5 * width, width)
    if edges[-1] < b:
        edges = np.append(edges, b)
    edges[-1] = b
    stack = [(float(edges[i]), float(edges[i + 1]), 0) for i in range(len(edges) - 1)]

    def rule(lo, hi):
        x, w = _gl_nodes(lo, hi)
        v = np.asarray(func(x), dtype=float)
        return np.tensordot(w, v, axes=(0, 0))

    whole = {(lo, hi): rule(lo, hi) for lo, hi, _ in stack}
    scale = np.abs(sum(whole.values()))
    total = 0.0
    worst = 0.0
    while stack:
        lo, hi, depth = stack.pop()
        full = whole.pop((lo, hi))
        mid = 0.5 * (lo + hi)
        left, right = rule(lo, mid), rule(mid, hi)
        err = np.max(np.abs(left + right - full) / np.maximum(scale, 1e-300))
        if err <= tol:
            total = total + left + right
            continue
        if depth >= max_depth:
            worst = max(worst, float(err))
            total = total + left + right
            continue
        whole[(lo, mid)] = left
        whole[(mid, hi)] = right
        stack.append((lo, mid, depth + 1))
        stack.append((mid, hi, depth + 1))
    if worst > 0.0:
        raise AccuracyError("panel quadrature did not converge", worst)
    return np.asarray(total)


def wright_integrate(
    alpha: float,
    weight: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-13,
) -> np.ndarray:
    r"""Integrate :math:`\int_0^{\Theta_{\max}} w(\theta) M_\alpha(\theta)\,d\theta`.

    ``weight`` may return shape ``(k,)`` or ``(k, m)`` for ``k`` nodes.
    Wright values on each panel are cached per ``alpha``.
    """
    alpha = _check_wright_alpha(alpha)
    tmax = wright_theta_max(alpha)

    def integrand(x):
        m = _wright_on_nodes(alpha, float(x[0]), float(x[-1]))
        w = np.asarray(weight(x), dtype=float)
        return w * (m if w.ndim == 1 else m[:, None])

    return panel_gauss_legendre(integrand, 0.0, tmax, tol=tol)


@lru_cache(maxsize=8192)
def _wright_on_nodes_cached(alpha: float, first: float, last: float):
    # recover the panel from its first and last Gauss node
    x = _GL16[0]
    half = (last - first) / (x[-1] - x[0])
    lo = first - half * (x[0] + 1.0)
    nodes = lo + half * (x + 1.0)
    vals = wright_m_array(alpha, nodes)
    vals.flags.writeable = False
    return vals


def _wright_on_nodes(alpha: float, first: float, last: float) -> np.ndarray:
    return _wright_on_nodes_cached(alpha, first, last)


def wright_moment(alpha: float, sigma: float) -> float:
    r"""Quadrature value of :math:`\int_0^\infty \theta^\sigma M_\alpha(\theta)\,d\theta`."""
    if not sigma > -1.0:
        raise DomainError("moment order must exceed -1")
    with np.errstate(divide="ignore"):
        return float(wright_integrate(alpha, lambda x: x**sigma))


def wright_laplace_check(alpha: float, r: float) -> float:
    r"""Absolute defect of

    .. math::

        \int_0^\infty \frac{\alpha}{\theta^{\alpha+1}} e^{-r\theta}
        M_\alpha(\theta^{-\alpha})\,d\theta = e^{-r^\alpha}.

    The substitution :math:`\zeta = \theta^{-\alpha}` turns the left side into
    :math:`\int_0^\infty M_\alpha(\zeta)\, e^{-r\zeta^{-1/\alpha}}\,d\zeta`,
    which is integrated on the same panels as the moments.
    """
    alpha = _check_wright_alpha(alpha)
    r = float(r)
    if not r > 0.0:
        raise DomainError("r must be positive")

    def weight(z):
        with np.errstate(divide="ignore", over="ignore"):
            return np.exp(-r * z ** (-1.0 / alpha))

    lhs = float(wright_integrate(alpha, weight))
    return abs(lhs - math.exp(-(r**alpha)))
