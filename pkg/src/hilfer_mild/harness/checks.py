"""Executable property suites behind ``verify``.

Every check reports a measured value against a limit; ``slack`` is
``limit - value`` for upper bounds and ``value - limit`` for lower bounds, so
a pass always has non-negative slack.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from ..fracops import (
    SampledFn,
    TimeGrid,
    caputo_derivative,
    hilfer_derivative,
    rl_derivative,
    rl_integral,
)
from ..operators import (
    DiagonalSectorialOperator,
    Family,
    FracParams,
    SpectralField,
    l2_norm,
    multiplier,
    norm_bound_probe,
    s_alpha_gamma_apply,
    s_alpha_gamma_quadrature,
    semigroup_apply,
    subordinated_multiplier,
)
from ..specfun import (
    MLParams,
    ml_large_argument,
    ml_series,
    mittag_leffler,
    wright_laplace_check,
    wright_m_array,
    wright_moment,
)
from ..solver import (
    contraction_n0,
    linear_errors,
    mnc_contraction_sequence,
    picard_map,
    solve,
    volterra_residual,
)
from .scenario import build_problem, load_scenario

__all__ = ["CheckResult", "SUITES", "run_suite", "render"]

DEMO = FracParams(0.75, 0.5, -0.5, 1.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    limit: float
    upper: bool = True
    seconds: float = 0.0

    @property
    def slack(self) -> float:
        return self.limit - self.value if self.upper else self.value - self.limit

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value)) and self.slack >= 0.0


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


# ----------------------------------------------------------------- specfun


def _specfun() -> list[CheckResult]:
    out = []
    worst = 0.0
    for a in (0.25, 0.5, 0.75):
        th = np.linspace(0.0, 50.0, 2001)
        worst = min(worst, float(wright_m_array(a, th).min()))
    out.append(CheckResult("A1 wright_m nonnegative (min over samples)", worst, -1e-12, upper=False))
    for a in (0.25, 0.5, 0.75):
        for s in (0.0, 1.0, 2.0, 3.5):
            ref = math.gamma(1.0 + s) / math.gamma(1.0 + a * s)
            out.append(CheckResult(f"A2 moment alpha={a} sigma={s}", _rel(wright_moment(a, s), ref), 1e-8))
    for a in (0.5, 0.75):
        for r in (1.0, 2.0):
            out.append(CheckResult(f"A3 laplace alpha={a} r={r}", wright_laplace_check(a, r), 1e-8))
    z = np.linspace(-5.0, 2.0, 71)
    e11 = max(_rel(mittag_leffler(MLParams(1.0, 1.0), float(x)), math.exp(x)) for x in z)
    out.append(CheckResult("E_{1,1} = exp on [-5, 2]", e11, 1e-10))
    e12 = max(_rel(mittag_leffler(MLParams(1.0, 2.0), x), math.expm1(x) / x) for x in (0.1, 1.0, -1.0))
    out.append(CheckResult("E_{1,2}(z) = (e^z - 1)/z", e12, 1e-10))
    eh = max(
        _rel(mittag_leffler(MLParams(0.5, 1.0), -x), float(special.erfcx(x)))
        for x in (0.5, 1.0, 2.0)
    )
    out.append(CheckResult("E_{1/2,1}(-x) = exp(x^2) erfc(x)", eh, 1e-9))
    agree = 0.0
    for a, b in ((0.5, 1.0), (0.75, 0.75), (0.75, 1.75), (0.9, 1.0)):
        p = MLParams(a, b)
        agree = max(agree, abs(ml_series(p, -5.0) - ml_large_argument(p, -5.0)))
    out.append(CheckResult("series / large-argument agreement at |z| = 5", agree, 1e-7))
    return out


# ----------------------------------------------------------------- fracops


def _orders(errs: list[float]) -> list[float]:
    return [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]


def _fracops() -> list[CheckResult]:
    out = []
    worst_order = math.inf
    for p in (0.5, 1.0, 2.0):
        for a in (0.25, 0.5, 0.75):
            errs = []
            for M in (40, 80, 160):
                g = TimeGrid(1.0, M, 2.0)
                v = rl_integral(a, SampledFn(g, g.nodes**p)).values
                ex = math.gamma(p + 1) / math.gamma(p + 1 + a) * g.nodes ** (p + a)
                errs.append(float(np.abs(v - ex).max()))
            if errs[-1] < 1e-13:
                continue  # exact for linear data
            worst_order = min(worst_order, min(_orders(errs)))
    out.append(CheckResult("power calculus order (worst case)", worst_order, 1.5, upper=False))
    g = TimeGrid(1.0, 200, 2.0)
    f = SampledFn(g, np.sin(g.nodes))
    rec = rl_derivative(0.5, rl_integral(0.5, f)).values
    out.append(CheckResult("left inverse D^a I^a f = f", float(np.abs(rec[1:] - f.values[1:]).max()), 1e-3))
    lin = SampledFn(g, g.nodes.copy())
    rl = hilfer_derivative(0.5, 0.0, lin).values
    cap = hilfer_derivative(0.5, 1.0, lin).values
    out.append(
        CheckResult(
            "hilfer gamma=0 equals RL path",
            float(np.abs(rl[1:] - rl_derivative(0.5, lin).values[1:]).max()),
            1e-10,
        )
    )
    out.append(
        CheckResult(
            "hilfer gamma=1 equals Caputo path",
            float(np.nanmax(np.abs(cap - caputo_derivative(0.5, lin).values))),
            1e-10,
        )
    )
    mid = hilfer_derivative(0.5, 0.5, lin).values[1:]
    lo = np.minimum(rl[1:], cap[1:])
    hi = np.maximum(rl[1:], cap[1:])
    excess = float(np.maximum(lo - mid, mid - hi).max())
    out.append(CheckResult("hilfer gamma=0.5 between RL and Caputo (excess)", excess, 1e-3))
    return out


# --------------------------------------------------------------- operators


def _operators() -> list[CheckResult]:
    out = []
    op = DiagonalSectorialOperator(16)
    x = SpectralField(1.0 / np.arange(1, 17) ** 2)
    sg = 0.0
    for t, s in ((0.1, 0.2), (0.5, 0.25), (1.0, 0.0)):
        lhs = semigroup_apply(op, t + s, x).coefficients
        rhs = semigroup_apply(op, t, semigroup_apply(op, s, x)).coefficients
        sg = max(sg, float(np.abs(lhs - rhs).max()))
    out.append(CheckResult("semigroup law Q(t+s) = Q(t)Q(s)", sg, 1e-14))
    qn = max(float(np.abs(multiplier(Family.Q, 0.5, op.eigenvalues, t)).max()) for t in (0.0, 0.01, 1.0))
    out.append(CheckResult("||Q(t)|| <= 1", qn, 1.0))
    lam = np.array([1.0, 4.0, 25.0])
    ts = np.array([0.01, 0.1, 0.5, 1.0])
    pe = 0.0
    for a in (0.5, 0.75):
        for fam in (Family.S_ALPHA, Family.T_ALPHA):
            d = multiplier(fam, a, lam, ts)
            s = subordinated_multiplier(fam, a, lam, ts)
            pe = max(pe, float((np.abs(d - s) / np.abs(d)).max()))
    out.append(CheckResult("path equivalence S_alpha, T_alpha (relative)", pe, 1e-6))
    lam_all = np.arange(1, 17, dtype=float) ** 2
    mono = 0.0
    for fam in (Family.S_ALPHA, Family.T_ALPHA):
        for t in (0.01, 0.1, 1.0):
            m = multiplier(fam, 0.75, lam_all, t)
            bad = float(max(-m.min(), np.diff(m).max()))
            mono = max(mono, bad)
    out.append(CheckResult("multipliers positive and decreasing in lambda", mono, 0.0))
    tsamp = np.logspace(-3, 0, 13)
    for fam in (Family.T_ALPHA, Family.S_ALPHA_GAMMA):
        rep = norm_bound_probe(DEMO, DiagonalSectorialOperator(32), fam, tsamp)
        out.append(CheckResult(f"norm bound {fam.value} violations", rep.violations, 0))
        out.append(CheckResult(f"norm bound {fam.value} fitted constant finite", rep.constant_fitted, 1e300))
    q = 0.0
    for t in (0.05, 0.5):
        d = s_alpha_gamma_apply(DEMO, op, t, x).coefficients
        qv = s_alpha_gamma_quadrature(DEMO, op.eigenvalues[:5], t) * x.coefficients[:5]
        q = max(q, float(np.abs(qv - d[:5]).max() / np.abs(d[:5]).max()))
    out.append(CheckResult("S_{alpha,gamma} term-wise vs quadrature path", q, 1e-4))
    return out


# ------------------------------------------------------------------ solver


def _solver() -> list[CheckResult]:
    out = []
    lin = load_scenario("linear-demo")
    spec, cfg, grid = build_problem(lin)
    traj, rep = solve(spec, cfg, grid)
    t = grid.nodes
    ref = np.array([s_alpha_gamma_apply(spec.params, spec.op, tj, spec.u0).coefficients for tj in t[1:]])
    out.append(CheckResult("linear case equals s_alpha_gamma_apply", float(np.abs(traj.coeffs[1:] - ref).max()), 1e-10))
    errs = []
    for M in (100, 200, 400):
        s2, c2, g2 = build_problem(lin.with_mesh(M))
        tr2, _ = solve(s2, c2, g2)
        errs.append(linear_errors(s2, tr2)[1])
    out.append(CheckResult("linear dense error at M=400", errs[-1], 1e-5))
    out.append(CheckResult("linear empirical order (worst)", min(_orders(errs)), 0.7, upper=False))
    sec5 = load_scenario("example-sec5")
    spec, cfg, grid = build_problem(sec5)
    traj, rep = solve(spec, cfg, grid)
    fp = float(l2_norm(picard_map(spec, traj).weighted() - traj.weighted()).max())
    out.append(CheckResult("fixed-point certificate ||Pu - u|| / (2 tol)", fp / (2 * cfg.tolerance), 1.0))
    out.append(CheckResult("volterra residual of sec5 run", volterra_residual(spec, traj), cfg.residual_cap))
    out.append(CheckResult("sec5 iterations", rep.iterations_used, 50))
    out.append(CheckResult("sec5 omega_r max weighted norm", rep.omega_r_max_norm, cfg.radius_r))
    audits = sum(not v for v in rep.hypothesis_checks.values())
    out.append(CheckResult("sec5 hypothesis audits failing", audits, 0))
    for F in (1.0, 10.0):
        n0 = contraction_n0(DEMO, F / 4.0, 1.0)
        seq = mnc_contraction_sequence(DEMO, F / 4.0, 1.0, n0 + 201)
        ok = seq.n0 == n0 and seq.monotone_after(n0, 200)
        out.append(CheckResult(f"contraction sequence 4Cpk={F:g}: n0={n0}, decreasing 200 past n0", float(ok), 1.0, upper=False))
    return out


SUITES: dict[str, Callable[[], list[CheckResult]]] = {
    "specfun": _specfun,
    "fracops": _fracops,
    "operators": _operators,
    "solver": _solver,
}


def run_suite(name: str) -> list[tuple[str, list[CheckResult], float]]:
    names = list(SUITES) if name == "all" else [name]
    if any(n not in SUITES for n in names):
        raise KeyError(name)
    out = []
    for n in names:
        start = time.perf_counter()
        res = SUITES[n]()
        out.append((n, res, time.perf_counter() - start))
    return out


def render(results: list[tuple[str, list[CheckResult], float]]) -> str:
    lines = []
    for suite, checks, secs in results:
        for c in checks:
            status = "PASS" if c.passed else "FAIL"
            op = "<=" if c.upper else ">="
            lines.append(f"{status} [{suite}] {c.name}: value={c.value:.3e} {op} {c.limit:.3e} slack={c.slack:.3e}")
        lines.append(f"# suite {suite}: {sum(c.passed for c in checks)}/{len(checks)} passed in {secs:.2f} s")
    return "\n".join(lines) + "\n"
