r"""Mild solutions of the nonlocal Hilfer problem by damped Picard iteration.

The fixed-point map is

.. math::

    (\mathcal{P}u)(t) = S_{\alpha,\gamma}(t)[u_0 - h(u)]
        + \int_0^t R_\alpha(t-r)\, g(r, u(r), \mathcal{B}u(r))\, dr,

evaluated mode by mode. Iterates live in the weighted space with norm
:math:`\sup_t t^{w}\|u(t)\|`, :math:`w = (1+\alpha\beta)(1-\gamma)`; node 0
of a trajectory stores the weighted limit at :math:`t \to 0^+`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from . import _parallel
from .errors import ConfigError, DivergenceError, EvaluationError, InvariantViolation
from .fracops import SampledFn, TimeGrid, rl_integral
from .operators import (
    DiagonalSectorialOperator,
    Family,
    FracParams,
    SpectralField,
    l2_norm,
    multiplier,
)
from .specfun import ml_array

__all__ = [
    "GrowthBounds",
    "ProblemSpec",
    "Trajectory",
    "SolverConfig",
    "ResidualReport",
    "SpectralGrid",
    "ContractionSequence",
    "EquicontinuityTable",
    "b_term",
    "nonlocal_h",
    "picard_map",
    "solve",
    "volterra_residual",
    "equicontinuity_probe",
    "random_omega_samples",
    "mnc_contraction_sequence",
    "contraction_n0",
    "linear_oracle",
    "linear_errors",
    "reconstruct_weighted",
    "convolution_weights",
    "h4_lhs",
]

log = logging.getLogger(__name__)

# g(t, y, z, bz) and f(t, y, z) act on physical values; all arguments broadcast
GFunc = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
FFunc = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
KFunc = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GrowthBounds:
    """Constants for the (H2)-(H4) audits: ||g|| <= k1 + k2 exp(-delta t), ||h|| <= k."""

    k1: float = 5.0
    k2: float = 0.5
    delta_decay: float = 1.0
    k_bound_h3: float = 0.2


@dataclass(frozen=True)
class ProblemSpec:
    params: FracParams
    op: DiagonalSectorialOperator
    u0: SpectralField
    g: Optional[GFunc] = None
    f: Optional[FFunc] = None
    kernel_k: Optional[KFunc] = None
    nonlocal_points: tuple[tuple[float, float], ...] = ()
    growth_bounds: GrowthBounds = GrowthBounds()

    def __post_init__(self) -> None:
        if self.u0.mode_count != self.op.mode_count:
            raise ConfigError("u0 and operator disagree on the number of modes")
        pts = tuple((float(t), float(c)) for t, c in self.nonlocal_points)
        object.__setattr__(self, "nonlocal_points", pts)
        T = self.params.horizon_T
        bad = [t for t, _ in pts if not 0.0 < t <= T * (1.0 + 1e-12)]
        if bad:
            raise ConfigError(f"nonlocal times must lie in (0, T = {T}], got {bad}")

    @property
    def is_linear(self) -> bool:
        return self.g is None and not self.nonlocal_points


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 100
    tolerance: float = 1e-8
    relaxation: float = 0.8
    quadrature_order: int = 1
    radius_r: float = 20.0
    residual_cap: float = 1e-3

    def __post_init__(self) -> None:
        problems = []
        if self.max_iterations < 1:
            problems.append("max_iterations must be >= 1")
        if not self.tolerance > 0.0:
            problems.append("tolerance must be positive")
        if not (0.0 < self.relaxation <= 1.0):
            problems.append("relaxation must lie in (0, 1]")
        if not self.radius_r > 0.0:
            problems.append("radius_r must be positive")
        if self.quadrature_order != 1:
            problems.append("only piecewise-linear product integration (order 1) is implemented")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class Trajectory:
    """Mode coefficients at every node; row 0 is the weighted limit at 0+."""

    grid: TimeGrid
    coeffs: np.ndarray
    weight_exponent: float

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != self.grid.node_count:
            raise ConfigError("trajectory needs one coefficient row per node")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_weighted(cls, grid: TimeGrid, weighted: np.ndarray, w: float) -> "Trajectory":
        t = grid.nodes
        c = np.array(weighted, dtype=float)
        c[1:] = c[1:] / t[1:, None] ** w
        return cls(grid, c, w)

    def weighted(self) -> np.ndarray:
        t = self.grid.nodes
        out = np.array(self.coeffs)
        out[1:] *= t[1:, None] ** self.weight_exponent
        return out

    def weighted_norms(self) -> np.ndarray:
        return l2_norm(self.weighted())

    def weighted_sup(self) -> float:
        return float(self.weighted_norms().max())

    def state(self, j: int) -> SpectralField:
        if j == 0 and self.weight_exponent != 0.0:
            raise InvariantViolation("node 0 stores a weighted limit, not a state")
        return SpectralField(self.coeffs[j])


@dataclass
class ResidualReport:
    iterations_used: int
    final_update_norm: float
    volterra_residual_weighted: float
    mild_self_consistency: float
    hypothesis_checks: dict[str, bool]
    converged: bool
    update_history: list[float] = field(default_factory=list)
    omega_r_max_norm: float = 0.0
    omega_r_violations: int = 0
    nonlocal_snap_error: float = 0.0
    h_norm: float = 0.0
    modal_tail: float = 0.0
    warnings: list[str] = field(default_factory=list)

    def as_pairs(self) -> list[tuple[str, str]]:
        hc = self.hypothesis_checks
        pairs = [
            ("converged", str(self.converged).lower()),
            ("iterations_used", str(self.iterations_used)),
            ("final_update_norm", f"{self.final_update_norm:.16e}"),
            ("volterra_residual_weighted", f"{self.volterra_residual_weighted:.16e}"),
            ("mild_self_consistency", f"{self.mild_self_consistency:.16e}"),
            ("omega_r_max_norm", f"{self.omega_r_max_norm:.16e}"),
            ("omega_r_violations", str(self.omega_r_violations)),
            ("nonlocal_snap_error", f"{self.nonlocal_snap_error:.16e}"),
            ("h_norm", f"{self.h_norm:.16e}"),
            ("modal_tail", f"{self.modal_tail:.16e}"),
        ]
        pairs += [(f"check_{k}", "pass" if v else "fail") for k, v in sorted(hc.items())]
        return pairs


# ------------------------------------------------------------ spatial transform


@dataclass(frozen=True)
class SpectralGrid:
    """Sine synthesis/analysis on P = 2N interior points y_p = p pi / (P + 1)."""

    modes: int
    points: int = 0
    y: np.ndarray = field(init=False, repr=False, compare=False)
    synth: np.ndarray = field(init=False, repr=False, compare=False)
    analysis: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        P = self.points or 2 * self.modes
        object.__setattr__(self, "points", P)
        y = np.arange(1, P + 1) * np.pi / (P + 1)
        S = np.sin(np.outer(y, np.arange(1, self.modes + 1)))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "synth", S)
        object.__setattr__(self, "analysis", (2.0 / (P + 1)) * S.T)

    def to_physical(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self.synth.T

    def to_modes(self, values: np.ndarray) -> np.ndarray:
        return values @ self.analysis.T


# ---------------------------------------------------------------- quadrature


def _trapezoid_matrix(t: np.ndarray, kernel: KFunc) -> np.ndarray:
    """B[j, i] so that sum_i B[j, i] v_i ~ int_0^{t_j} k(t_j, s) v(s) ds."""
    M1 = t.size
    h = np.diff(t)
    Wt = np.zeros((M1, M1))
    for j in range(1, M1):
        Wt[j, :j] += 0.5 * h[:j]
        Wt[j, 1 : j + 1] += 0.5 * h[:j]
    K = np.asarray(kernel(t[:, None], t[None, :]), dtype=float)
    K = np.broadcast_to(K, (M1, M1))
    out = Wt * np.tril(K)
    if not np.isfinite(out).all():
        raise EvaluationError("kernel k(t, s) is not finite on the mesh triangle")
    return out


def convolution_weights(alpha: float, lam: np.ndarray, t: np.ndarray) -> np.ndarray:
    r"""Exact product-integration weights for the kernel
    :math:`K(\tau) = \tau^{\alpha-1}E_{\alpha,\alpha}(-\lambda\tau^\alpha)`.

    With :math:`K_1(\tau) = \tau^\alpha E_{\alpha,\alpha+1}(-\lambda\tau^\alpha)`
    and :math:`L(\tau) = \tau^{\alpha+1}E_{\alpha,\alpha+2}(-\lambda\tau^\alpha)`
    (first and second antiderivatives of K), the hat functions on panel
    :math:`[t_i, t_{i+1}]` seen from :math:`t_j` get

    .. math::

        w_i = K_1(A) - \frac{L(A)-L(B)}{h}, \qquad
        w_{i+1} = \frac{L(A)-L(B)}{h} - K_1(B),

    with :math:`A = t_j - t_i`, :math:`B = t_j - t_{i+1}`, :math:`h = t_{i+1}-t_i`.
    Returns shape ``(len(lam), M+1, M+1)``.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    M1 = t.size
    D = t[:, None] - t[None, :]
    mask = D > 0.0
    d = D[mask]
    da = d**alpha
    h = np.diff(t)
    out = np.zeros((lam.size, M1, M1))

    def one(sl: slice) -> np.ndarray:
        res = np.zeros((sl.stop - sl.start, M1, M1))
        for k, lm in enumerate(lam[sl]):
            s = -lm * da
            K1 = np.zeros((M1, M1))
            L = np.zeros((M1, M1))
            K1[mask] = da * ml_array(alpha, alpha + 1.0, s)
            L[mask] = d * da * ml_array(alpha, alpha + 2.0, s)
            dL = (L[:, :-1] - L[:, 1:]) / h[None, :]
            w_prev = K1[:, :-1] - dL
            w_next = dL - K1[:, 1:]
            valid = np.tri(M1, M1 - 1, -1, dtype=bool)
            w_prev[~valid] = 0.0
            w_next[~valid] = 0.0
            W = res[k]
            W[:, :-1] += w_prev
            W[:, 1:] += w_next
        return res

    parts = _parallel.chunks(lam.size)
    for sl, block in zip(parts, _parallel.map_ordered(one, parts)):
        out[sl] = block
    return out


# ------------------------------------------------------------------- context


class _Context:
    """Everything a Picard sweep needs that does not depend on the iterate."""

    def __init__(self, spec: ProblemSpec, grid: TimeGrid, weights: bool = True) -> None:
        p = spec.params
        if abs(grid.horizon_T - p.horizon_T) > 1e-12 * p.horizon_T:
            raise ConfigError("grid horizon differs from the problem horizon")
        self.spec = spec
        self.grid = grid
        self.t = grid.nodes
        self.w = p.weight_exponent
        self.lam = spec.op.eigenvalues
        self.space = SpectralGrid(spec.op.mode_count)
        self.singular = p.gamma_type < 1.0
        t = self.t
        # S_{alpha,gamma}(t_j) multipliers; row 0 holds the weighted limit
        S = np.zeros((t.size, self.lam.size))
        S[1:] = multiplier(Family.S_ALPHA_GAMMA, p.alpha, self.lam, t[1:], p.gamma_type)
        if not self.singular:
            S[0] = 1.0
        self.S = S
        self.tw = np.ones_like(t)
        self.tw[1:] = t[1:] ** self.w
        self.snaps = self._snap_nonlocal()
        self.B = None
        if spec.f is not None and spec.kernel_k is not None:
            self.B = _trapezoid_matrix(t, spec.kernel_k)
        self.W = None
        if weights and spec.g is not None:
            self.W = convolution_weights(p.alpha, self.lam, t)

    def _snap_nonlocal(self):
        T = self.grid.horizon_T
        out = []
        for ti, ci in self.spec.nonlocal_points:
            if ti > T * (1.0 + 1e-12):
                raise ConfigError(f"nonlocal time {ti} exceeds the horizon T = {T}")
            j = int(np.argmin(np.abs(self.t - ti)))
            if j == 0:
                j = 1
            out.append((j, ci, abs(self.t[j] - ti)))
        return out

    # node 0 of a singular trajectory carries no state; reuse node 1 there
    def physical_states(self, traj: Trajectory) -> np.ndarray:
        c = np.array(traj.coeffs)
        if self.singular:
            c[0] = c[1]
        return self.space.to_physical(c)

    def b_values(self, z: np.ndarray) -> np.ndarray:
        spec = self.spec
        if self.B is None:
            return np.zeros_like(z)
        fv = np.asarray(spec.f(self.t[:, None], self.space.y[None, :], z), dtype=float)
        fv = np.broadcast_to(fv, z.shape)
        bad = ~np.isfinite(fv)
        if bad.any():
            j, p = np.argwhere(bad)[0]
            raise EvaluationError(
                f"f is not finite at t = {self.t[j]:.6g}, y = {self.space.y[p]:.6g}"
            )
        return self.B @ fv

    def g_modes(self, traj: Trajectory) -> np.ndarray:
        spec = self.spec
        if spec.g is None:
            return np.zeros_like(traj.coeffs)
        z = self.physical_states(traj)
        bz = self.b_values(z)
        gv = np.asarray(spec.g(self.t[:, None], self.space.y[None, :], z, bz), dtype=float)
        gv = np.broadcast_to(gv, z.shape)
        bad = ~np.isfinite(gv)
        if bad.any():
            j, p = np.argwhere(bad)[0]
            raise EvaluationError(
                f"g is not finite at t = {self.t[j]:.6g}, y = {self.space.y[p]:.6g}"
            )
        return self.space.to_modes(gv)

    def h_value(self, traj: Trajectory) -> np.ndarray:
        h = np.zeros(self.lam.size)
        for j, c, _ in self.snaps:
            h += c * traj.coeffs[j]
        return h

    def convolve(self, gm: np.ndarray) -> np.ndarray:
        if self.W is None:
            return np.zeros_like(gm)
        out = np.empty_like(gm)
        for n in range(self.lam.size):
            out[:, n] = self.W[n] @ gm[:, n]
        return out

    def apply(self, traj: Trajectory) -> Trajectory:
        data = self.spec.u0.coefficients - self.h_value(traj)
        c = self.S * data[None, :]
        c = c + self.convolve(self.g_modes(traj))
        if self.singular:
            c[0] = 0.0  # weighted limit vanishes since w + (alpha-1)(1-gamma) > 0
        return Trajectory(self.grid, c, self.w)

    def initial(self) -> Trajectory:
        c = self.S * self.spec.u0.coefficients[None, :]
        if self.singular:
            c[0] = 0.0
        return Trajectory(self.grid, c, self.w)


def _weighted_sup_diff(a: Trajectory, b: Trajectory) -> float:
    return float(l2_norm(a.weighted() - b.weighted()).max())


# ---------------------------------------------------------------- operations


def b_term(spec: ProblemSpec, traj: Trajectory, t_index: int) -> SpectralField:
    r""":math:`\mathcal{B}u(t_j) = \int_0^{t_j} k(t_j,s) f(s,u(s))\,ds` by the trapezoid rule."""
    if t_index < 1 or t_index > traj.grid.intervals:
        raise ConfigError("t_index must address a positive node")
    ctx = _Context(spec, traj.grid, weights=False)
    if ctx.B is None:
        return SpectralField.zeros(spec.op.mode_count)
    bz = ctx.b_values(ctx.physical_states(traj))
    return SpectralField(ctx.space.to_modes(bz[t_index]))


def nonlocal_h(spec: ProblemSpec, traj: Trajectory) -> tuple[SpectralField, float]:
    """h(u) = sum_i c_i u(t_i) with every t_i snapped to the nearest node.

    Returns the field and the largest snap distance.
    """
    ctx = _Context(spec, traj.grid, weights=False)
    snap = max((s for _, _, s in ctx.snaps), default=0.0)
    return SpectralField(ctx.h_value(traj)), snap


def picard_map(spec: ProblemSpec, traj: Trajectory) -> Trajectory:
    """One application of the fixed-point map."""
    return _Context(spec, traj.grid).apply(traj)


def _audit_h2(ctx: _Context, traj: Trajectory) -> tuple[bool, float]:
    gb = ctx.spec.growth_bounds
    if ctx.spec.g is None:
        return True, 0.0
    gm = ctx.g_modes(traj)
    gnorm = l2_norm(gm)[1:]
    bound = gb.k1 + gb.k2 * np.exp(-gb.delta_decay * ctx.t[1:])
    slack = float((gnorm - bound).max())
    return slack <= 0.0, slack


def h4_lhs(spec: ProblemSpec, grid: TimeGrid) -> float:
    r"""Left side of the (H4) condition on ``grid``:

    .. math::

        \sup_t t^{w}\bigl(\|S_{\alpha,\gamma}(t)u_0\| + \|S_{\alpha,\gamma}(t)\|\,k\bigr)
        + t^{w}\int_0^t (t-r)^{-\alpha\beta-1}(k_1 + k_2 e^{-\delta r})\,dr.

    The scalar k is carried through the operator norm (triangle inequality).
    """
    p = spec.params
    gb = spec.growth_bounds
    t = grid.nodes[1:]
    lam = spec.op.eigenvalues
    S = multiplier(Family.S_ALPHA_GAMMA, p.alpha, lam, t, p.gamma_type)
    first = l2_norm(S * spec.u0.coefficients) + np.abs(S).max(axis=1) * gb.k_bound_h3
    a = -p.alpha * p.beta_sect
    # int_0^t (t-r)^{a-1} e^{-delta r} dr = t^a 1F1(1; a+1; -delta t) / a
    conv = gb.k1 * t**a / a + gb.k2 * t**a * special.hyp1f1(1.0, a + 1.0, -gb.delta_decay * t) / a
    tw = t**p.weight_exponent
    return float((tw * (first + conv)).max())


def solve(spec: ProblemSpec, config: SolverConfig, grid: TimeGrid):
    """Damped Picard iteration u <- (1 - omega) u + omega P u from S_{alpha,gamma}(t) u0.

    Returns ``(trajectory, report)``. Non-convergence returns the iterate with
    the smallest update, flagged ``converged = False``; a sustained tenfold
    growth of the update over five sweeps raises :class:`DivergenceError`.
    """
    ctx = _Context(spec, grid)
    omega = config.relaxation
    warnings: list[str] = []

    h4 = h4_lhs(spec, grid)
    h4_ok = h4 <= config.radius_r
    if not h4_ok:
        warnings.append(f"H4 left side {h4:.4g} exceeds r = {config.radius_r:.4g}")

    u = ctx.initial()
    history: list[float] = []
    best, best_upd = u, math.inf
    omega_max = u.weighted_sup()
    omega_viol = 0
    converged = False
    r_tol = config.radius_r * (1.0 + 1e-6)
    for k in range(config.max_iterations):
        # the ball maps into itself when the pre-image satisfies (H2)-(H4)
        covered = h4_ok and u.weighted_sup() <= r_tol and _audit_h2(ctx, u)[0]
        covered = covered and float(l2_norm(ctx.h_value(u))) <= spec.growth_bounds.k_bound_h3
        pu = ctx.apply(u)
        new = Trajectory(grid, (1.0 - omega) * u.coeffs + omega * pu.coeffs, ctx.w)
        upd = _weighted_sup_diff(new, u)
        history.append(upd)
        u = new
        nrm = u.weighted_sup()
        omega_max = max(omega_max, nrm)
        if nrm > config.radius_r * (1.0 + 1e-9):
            omega_viol += 1
            if covered and nrm > r_tol:
                raise InvariantViolation(
                    f"iterate {k + 1} left the ball: weighted norm {nrm:.6g} > r = {config.radius_r:.6g}"
                )
        if upd < best_upd:
            best, best_upd = u, upd
        if upd <= config.tolerance:
            converged = True
            break
        if len(history) > 5:
            recent = history[-6:]
            rising = all(recent[i + 1] > recent[i] for i in range(5))
            if rising and recent[-1] >= 10.0 * recent[0]:
                raise DivergenceError(
                    f"Picard update grew from {recent[0]:.3e} to {recent[-1]:.3e} over 5 sweeps",
                    history,
                )
    if not converged:
        u = best
        warnings.append(f"no convergence in {config.max_iterations} sweeps; best update {best_upd:.3e}")
    if omega_viol:
        warnings.append(f"{omega_viol} iterates left the ball of radius {config.radius_r}")

    mild = _weighted_sup_diff(ctx.apply(u), u)
    resid = _volterra_residual(ctx, u)
    h2_ok, h2_slack = _audit_h2(ctx, u)
    if not h2_ok:
        warnings.append(f"H2 bound exceeded by {h2_slack:.4g}")
    hval = ctx.h_value(u)
    hn = float(l2_norm(hval))
    h3_ok = hn <= spec.growth_bounds.k_bound_h3
    if not h3_ok:
        warnings.append(f"H3 bound: ||h(u)|| = {hn:.4g} > k = {spec.growth_bounds.k_bound_h3:.4g}")
    for wmsg in warnings:
        log.warning(wmsg)

    report = ResidualReport(
        iterations_used=len(history),
        final_update_norm=history[-1] if converged else best_upd,
        volterra_residual_weighted=resid,
        mild_self_consistency=mild,
        hypothesis_checks={"H2": h2_ok, "H3": h3_ok, "H4": h4_ok},
        converged=converged,
        update_history=history,
        omega_r_max_norm=omega_max,
        omega_r_violations=omega_viol,
        nonlocal_snap_error=max((s for _, _, s in ctx.snaps), default=0.0),
        h_norm=hn,
        modal_tail=_modal_tail(u),
        warnings=warnings,
    )
    return u, report


def _modal_tail(traj: Trajectory) -> float:
    """Share of weighted L2 mass in the upper half of the modes (worst node)."""
    c = traj.weighted()
    n = c.shape[1]
    if n < 2:
        return 0.0
    total = l2_norm(c)
    upper = l2_norm(c[:, n // 2 :])
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(total > 0.0, upper / total, 0.0)
    return float(r.max())


def _volterra_residual(ctx: _Context, traj: Trajectory) -> float:
    p = ctx.spec.params
    t = ctx.t[1:]
    lam = ctx.lam
    u = np.array(traj.coeffs[1:])
    data = ctx.spec.u0.coefficients - ctx.h_value(traj)
    e = p.initial_exponent
    b = p.beta_ml_initial
    # split u = t^e E_{a,b}(-lam t^a) data + v: I^a of the first part is
    # t^{e+a} E_{a,b+a}(-lam t^a) data exactly, and v is bounded with v(0) = 0
    s = np.multiply.outer(t**p.alpha, lam)
    lead = (t[:, None] ** e) * ml_array(p.alpha, b, -s) * data
    lead_int = (t[:, None] ** (e + p.alpha)) * ml_array(p.alpha, b + p.alpha, -s) * data
    v = np.zeros_like(traj.coeffs)
    v[1:] = u - lead
    gm = ctx.g_modes(traj)
    # integrated separately: v starts like t^alpha, g(0) is a copy of g(t_1)
    I = -lam * rl_integral(p.alpha, SampledFn(ctx.grid, v)).values[1:]
    I += rl_integral(p.alpha, SampledFn(ctx.grid, gm)).values[1:]
    rhs = data * (t[:, None] ** e) / math.gamma(b) - lam * lead_int + I
    mism = (rhs - u) * ctx.tw[1:, None]
    return float(l2_norm(mism).max())


def volterra_residual(spec: ProblemSpec, traj: Trajectory) -> float:
    r"""Weighted sup mismatch between ``traj`` and the right side of the
    equivalent Volterra equation

    .. math::

        u(t) = \frac{u_0 - h(u)}{\Gamma(\gamma(1-\alpha)+\alpha)}\,t^{(1-\alpha)(\gamma-1)}
            + \frac{1}{\Gamma(\alpha)}\int_0^t (t-r)^{\alpha-1}
              \bigl[-\mathcal{A}u(r) + g(r,u(r),\mathcal{B}u(r))\bigr]\,dr.
    """
    return _volterra_residual(_Context(spec, traj.grid, weights=False), traj)


def linear_oracle(spec: ProblemSpec, t: np.ndarray) -> np.ndarray:
    """Closed form S_{alpha,gamma}(t) u0 per mode (the solution when g = 0, h = 0)."""
    p = spec.params
    lam = spec.op.eigenvalues
    s = np.multiply.outer(np.asarray(t, dtype=float) ** p.alpha, lam)
    e = ml_array(p.alpha, p.beta_ml_initial, -s)
    return (np.asarray(t)[..., None] ** p.initial_exponent) * e * spec.u0.coefficients


def reconstruct_weighted(traj: Trajectory, times: np.ndarray, singular_exponent: float) -> np.ndarray:
    """Weighted values between nodes on [t_1, T].

    ``t^{-e} u`` (e the known t -> 0 power) is interpolated linearly, so the
    singular factor is reproduced exactly instead of being smeared.
    """
    t = traj.grid.nodes[1:]
    x = np.asarray(times, dtype=float)
    if x.min() < t[0] * (1.0 - 1e-12) or x.max() > t[-1] * (1.0 + 1e-12):
        raise ConfigError("reconstruction times must lie in [t_1, T]")
    e = singular_exponent
    psi = traj.coeffs[1:] * t[:, None] ** (-e)
    vals = _interp_rows(t, psi, x)
    return vals * x[:, None] ** (e + traj.weight_exponent)


def linear_errors(spec: ProblemSpec, traj: Trajectory, per_panel: int = 8) -> tuple[float, float]:
    """Weighted sup errors against :func:`linear_oracle`: at the nodes, and over
    ``per_panel`` interior points of every panel of [t_1, T]."""
    grid = traj.grid
    t = grid.nodes
    w = traj.weight_exponent
    ref = linear_oracle(spec, t[1:]) * t[1:, None] ** w
    nodal = float(l2_norm(traj.weighted()[1:] - ref).max())
    s = np.arange(1, per_panel + 1) / (per_panel + 1)
    x = (t[1:-1, None] + np.outer(np.diff(t[1:]), s)).ravel()
    y = reconstruct_weighted(traj, x, spec.params.initial_exponent)
    dense = float(l2_norm(y - linear_oracle(spec, x) * x[:, None] ** w).max())
    return nodal, dense


# ------------------------------------------------------------ equicontinuity


def random_omega_samples(
    spec: ProblemSpec, grid: TimeGrid, count: int, radius: float, seed: int = 0
) -> list[Trajectory]:
    """Trajectories whose weighted values y(t) = a + b t stay inside the ball of ``radius``."""
    rng = np.random.default_rng(seed)
    n = spec.op.mode_count
    t = grid.nodes
    out = []
    decay = 1.0 / np.arange(1, n + 1) ** 2
    for _ in range(count):
        a = rng.standard_normal(n) * decay
        b = rng.standard_normal(n) * decay
        y = a[None, :] + np.outer(t / grid.horizon_T, b)
        scale = radius * rng.uniform(0.2, 1.0) / l2_norm(y).max()
        out.append(Trajectory.from_weighted(grid, y * scale, spec.params.weight_exponent))
    return out


@dataclass(frozen=True)
class EquicontinuityTable:
    """Moduli of continuity of the weighted images, one entry per gap.

    ``defects[k]`` is the largest weighted difference over node pairs with
    ``0 < t2 - t1 <= gaps[k]`` (t = 0 included through the weighted limit);
    ``origin_defects[k]`` restricts t1 to the smallest positive node.
    """

    gaps: tuple[float, ...]
    defects: tuple[float, ...]
    origin_defects: tuple[float, ...]
    boundary_t: tuple[float, ...]
    boundary_defects: tuple[float, ...]

    @staticmethod
    def _strict(d: Sequence[float]) -> bool:
        return all(d[i + 1] < d[i] for i in range(len(d) - 1))

    @property
    def strictly_decreasing(self) -> bool:
        return self._strict(self.defects) and self._strict(self.origin_defects)


def _interp_rows(t: np.ndarray, vals: np.ndarray, x: np.ndarray) -> np.ndarray:
    j = np.clip(np.searchsorted(t, x, side="right") - 1, 0, t.size - 2)
    lam = ((x - t[j]) / (t[j + 1] - t[j]))[:, None]
    return (1.0 - lam) * vals[j] + lam * vals[j + 1]


def _modulus(t: np.ndarray, img: np.ndarray, gap: float, start: int = 0, stop: Optional[int] = None) -> float:
    worst = 0.0
    stop = t.size if stop is None else stop
    for i in range(start, stop):
        j_end = np.searchsorted(t, t[i] + gap * (1.0 + 1e-12), side="right")
        if j_end <= i + 1:
            continue
        d = l2_norm(img[i + 1 : j_end] - img[i])
        worst = max(worst, float(d.max()))
    return worst


def equicontinuity_probe(
    spec: ProblemSpec,
    traj_samples: Sequence[Trajectory],
    gap_buckets: Sequence[float],
) -> EquicontinuityTable:
    r"""Weighted continuity defects :math:`\|t_2^w(\mathcal{P}y)(t_2) - t_1^w(\mathcal{P}y)(t_1)\|`
    of the fixed-point map over the samples, per gap (largest first).

    ``boundary_defects`` give the distance to the weighted limit at 0 for the
    first few positive nodes.
    """
    if not traj_samples:
        raise ConfigError("no trajectory samples")
    grid = traj_samples[0].grid
    ctx = _Context(spec, grid)
    t = grid.nodes
    T = grid.horizon_T
    images = [ctx.apply(y).weighted() for y in traj_samples]
    gaps = tuple(sorted((float(g) for g in gap_buckets), reverse=True))
    defects, origin = [], []
    for gap in gaps:
        if not 0.0 < gap < T:
            raise ConfigError(f"gap {gap} must lie in (0, T)")
        defects.append(max(_modulus(t, img, gap) for img in images))
        origin.append(max(_modulus(t, img, gap, 1, 2) for img in images))
    k = min(6, t.size - 1)
    bt = t[1 : k + 1]
    bd = [max(float(l2_norm(img[j] - img[0])) for img in images) for j in range(1, k + 1)]
    return EquicontinuityTable(gaps, tuple(defects), tuple(origin), tuple(bt.tolist()), tuple(bd))


# -------------------------------------------------------- contraction sequence


@dataclass(frozen=True)
class ContractionSequence:
    log_values: np.ndarray
    n0: Optional[int]

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(self.log_values)

    def monotone_after(self, n_from: int, count: int) -> bool:
        """a_{n+1} < a_n for n = n_from .. n_from + count - 1."""
        if n_from is None or n_from < 1:
            raise ConfigError("monotonicity needs a starting index >= 1")
        lv = self.log_values
        lo, hi = n_from - 1, n_from - 1 + count
        if hi >= lv.size:
            raise ConfigError("sequence too short for the requested range")
        return bool(np.all(np.diff(lv[lo : hi + 1]) < 0.0))


def mnc_contraction_sequence(
    params: FracParams, C_p: float, k_lip: float, n_max: int
) -> ContractionSequence:
    r"""The Gamma-ratio sequence

    .. math::

        a_n = (4C_pk)^n T^{-n\alpha\beta}\,\Gamma(-\alpha\beta)^n\,
              \frac{\Gamma(-\alpha\beta+\gamma(1+\alpha\beta))}
                   {\Gamma(-(n+1)\alpha\beta+\gamma(1+\alpha\beta))},

    evaluated in log space for n = 1..n_max, with the first n where a_n < 1.
    """
    if not (C_p > 0.0 and k_lip > 0.0):
        raise ConfigError("C_p and k_lip must be positive")
    if n_max < 1:
        raise ConfigError("n_max must be >= 1")
    a, b, g, T = params.alpha, params.beta_sect, params.gamma_type, params.horizon_T
    ab = -a * b
    c = g * (1.0 + a * b)
    n = np.arange(1, n_max + 1, dtype=float)
    args = [ab, ab + c] + list(-(n + 1.0) * a * b + c)
    for x in args[:2]:
        if x <= 0.0 and x == math.floor(x):
            raise ConfigError(f"Gamma pole at {x}")
    lv = (
        n * (math.log(4.0 * C_p * k_lip) + ab * math.log(T) + math.lgamma(ab))
        + math.lgamma(ab + c)
        - special.gammaln(ab * (n + 1.0) + c)
    )
    below = np.flatnonzero(lv < 0.0)
    n0 = int(below[0]) + 1 if below.size else None
    return ContractionSequence(lv, n0)


def _log_a(params: FracParams, C_p: float, k_lip: float, n: float) -> float:
    a, b, g, T = params.alpha, params.beta_sect, params.gamma_type, params.horizon_T
    ab = -a * b
    c = g * (1.0 + a * b)
    return (
        n * (math.log(4.0 * C_p * k_lip) + ab * math.log(T) + math.lgamma(ab))
        + math.lgamma(ab + c)
        - math.lgamma(ab * (n + 1.0) + c)
    )


def contraction_n0(params: FracParams, C_p: float, k_lip: float, n_limit: int = 10**15) -> Optional[int]:
    """First n with a_n < 1, searched up to ``n_limit`` without storing the sequence.

    log a_n is concave in n (minus a log-Gamma of an affine argument), so
    once a_1 >= 1 the first crossing lies past the maximum and is bracketed
    by doubling, then located by bisection.
    """
    if not (C_p > 0.0 and k_lip > 0.0):
        raise ConfigError("C_p and k_lip must be positive")
    f = lambda n: _log_a(params, C_p, k_lip, float(n))
    if f(1) < 0.0:
        return 1
    hi = 2
    while f(hi) >= 0.0:
        if hi >= n_limit:
            return None
        hi = min(2 * hi, n_limit)
    lo = hi // 2
    # f(lo) >= 0 > f(hi) and f decreases across the bracket past the maximum
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if f(mid) < 0.0:
            hi = mid
        else:
            lo = mid
    return hi

