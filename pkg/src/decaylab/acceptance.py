"""Acceptance suite: the quantitative exit criteria of the laboratory.

Each criterion is a function returning a CriterionResult with the measured
numbers and its stated tolerance; run_all prints one pass/fail line per
criterion.  Expensive simulations are shared between criteria through a
module-level cache, so the whole suite stays desk scale.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from decaylab.gronwall import (
    ComparisonODE,
    PiecewiseConstant,
    closed_form_bound,
    comparison_check,
    fit_decay,
    majorant_decomposition,
    power_psi,
    solve_comparison,
)
from decaylab.grids import (
    interval_grid,
    radial_grid,
    rect2d_grid,
    to_sampled,
    w1p_seminorm,
)
from decaylab.lorentz import (
    LorentzExponents,
    SampledFunction,
    dist_to_linf,
    lorentz_norm,
    sample_radial_profile,
    sobolev_constant,
    unit_ball_volume,
)
from decaylab.runner import fit_dissipation_constant
from decaylab.solver import (
    model_problem,
    nominal_mu_threshold,
    picard_fixed_point,
    psi_profile,
    solve,
    truncated_scheme,
    weak_type_check,
    weak_type_m0,
)

__all__ = ["CriterionResult", "run_criterion", "run_all", "CRITERIA"]

_LEVEL_KS = (0.1, 0.5, 1.0, 5.0)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    elapsed: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} [{tag}] {self.title} ({self.elapsed:.1f}s)"

    def as_dict(self) -> dict:
        return {
            "number": self.number,
            "title": self.title,
            "passed": self.passed,
            "elapsed": self.elapsed,
            "details": self.details,
        }


# ---------------------------------------------------------------------------
# shared simulations


_CACHE: dict = {}


def _cached(key, builder):
    if key not in _CACHE:
        _CACHE[key] = builder()
    return _CACHE[key]


def _heat_run():
    grid = interval_grid(0.0, math.pi, 400)
    spec = model_problem(grid, 2.0, 2.0, np.sin(grid.centers), name="heat")
    return spec, solve(spec, 1e-3, level_ks=_LEVEL_KS), 1e-3


def _drift_run():
    mu = 0.5 * nominal_mu_threshold(3, 2.0)
    grid = radial_grid(3, 120)
    spec = model_problem(grid, 2.0, 0.5, 1.0 - grid.centers**2, mu=mu, name="p2_drift")
    return spec, solve(spec, 2e-3, level_ks=_LEVEL_KS), 2e-3


def _power_run(p):
    n_dim = int(p) + 1  # keeps the drift window p < N
    mu = 0.5 * nominal_mu_threshold(n_dim, p)
    grid = radial_grid(n_dim, 120)
    spec = model_problem(grid, p, 40.0, 2.0 * (1.0 - grid.centers**2), mu=mu, name=f"power_p{p:g}")
    return spec, solve(spec, 5e-3, level_ks=_LEVEL_KS), 5e-3


def _exp_run(p):
    mu = 0.3 * nominal_mu_threshold(3, p)
    grid = radial_grid(3, 120)
    spec = model_problem(grid, p, 0.25, 1.0 - grid.centers**2, mu=mu, name=f"exp_p{p:g}")
    return spec, solve(spec, 1e-3, level_ks=_LEVEL_KS), 1e-3


def _subcritical_runs():
    return [
        _cached("heat", _heat_run),
        _cached("drift", _drift_run),
        _cached("exp_1.8", lambda: _exp_run(1.8)),
        _cached("power_3", lambda: _power_run(3.0)),
        _cached("power_4", lambda: _power_run(4.0)),
    ]


# ---------------------------------------------------------------------------
# criteria


def criterion_1() -> CriterionResult:
    """Distance to L^inf of B/|x| equals B omega_N^{1/N} within 1 percent."""
    start = time.perf_counter()
    f = sample_radial_profile(lambda r: 1.0 / r, N=2, n_cells=10000)
    got = dist_to_linf(f, 2.0)
    expect = math.sqrt(math.pi)
    elapsed = time.perf_counter() - start
    rel = abs(got - expect) / expect
    passed = rel <= 0.01 and elapsed < 1.0
    return CriterionResult(
        1, "distance of B/|x| to bounded functions", passed, elapsed,
        {"computed": got, "expected": expect, "rel_error": rel, "runtime_limit_s": 1.0},
    )


def criterion_2() -> CriterionResult:
    """Sobolev constant closed form and the embedding direction on random fields."""
    start = time.perf_counter()
    sc = sobolev_constant(3, 2.0)
    closed = (4.0 * math.pi / 3.0) ** (-1.0 / 3.0) * 2.0
    const_err = abs(sc.S_Np - closed)
    rng = np.random.default_rng(2)
    worst = 0.0
    grid_r = radial_grid(3, 2000)
    for _ in range(50):
        coeffs = rng.standard_normal(3) / (1.0 + np.arange(3)) ** 2
        vals = sum(c * np.sin((k + 1) * math.pi * grid_r.centers) for k, c in enumerate(coeffs))
        u = grid_r.function(vals)
        lhs = lorentz_norm(to_sampled(u), LorentzExponents(sc.p_star, 2.0))
        rhs = sc.S_Np * w1p_seminorm(u, 2.0)
        if rhs > 0:
            worst = max(worst, lhs / rhs)
    sc2 = sobolev_constant(2, 1.5)
    grid_q = rect2d_grid(48, 48)
    x, y = grid_q.centers[:, 0], grid_q.centers[:, 1]
    for _ in range(50):
        vals = np.zeros(grid_q.n_cells)
        for k in range(1, 4):
            for l in range(1, 4):
                vals += rng.standard_normal() / (k * l) ** 2 * np.sin(k * math.pi * x) * np.sin(l * math.pi * y)
        u = grid_q.function(vals)
        lhs = lorentz_norm(to_sampled(u), LorentzExponents(sc2.p_star, 1.5))
        rhs = sc2.S_Np * w1p_seminorm(u, 1.5)
        if rhs > 0:
            worst = max(worst, lhs / rhs)
    elapsed = time.perf_counter() - start
    passed = const_err < 1e-12 and worst <= 1.1
    return CriterionResult(
        2, "Sobolev-Lorentz constant and embedding direction", passed, elapsed,
        {"constant_error": const_err, "worst_ratio": worst, "fields": 100, "slack": 1.1},
    )


def criterion_3() -> CriterionResult:
    """Lorentz Holder inequality on 1000 random step-function pairs."""
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    violations = 0
    worst = -np.inf
    for _ in range(1000):
        n = rng.integers(1, 10)
        measures = rng.uniform(0.0, 2.0, size=n)
        fvals = rng.uniform(-8, 8, size=n)
        gvals = rng.uniform(-8, 8, size=n)
        f = SampledFunction(fvals, measures)
        g = SampledFunction(gvals, measures)
        p = rng.uniform(1.1, 5.0)
        choice = int(rng.integers(0, 3))
        q = {0: 1.0, 1: float(rng.uniform(1.0, 8.0)), 2: None}[choice]
        e = LorentzExponents(p, q)
        lhs = float(np.sum(np.abs(fvals * gvals) * measures))
        rhs = lorentz_norm(f, e) * lorentz_norm(g, e.conjugate())
        excess = (lhs - rhs) / max(rhs, 1e-300)
        worst = max(worst, excess)
        if excess > 1e-12:
            violations += 1
    elapsed = time.perf_counter() - start
    return CriterionResult(
        3, "Holder-type inequality on 1000 random pairs", violations == 0, elapsed,
        {"violations": violations, "worst_relative_excess": worst},
    )


def criterion_4() -> CriterionResult:
    """Heat-equation oracle: fitted decay rate of the squared norm is 2."""
    start = time.perf_counter()
    spec, trace, _ = _cached("heat", _heat_run)
    fit = fit_decay(trace, (0.1, 2.0))
    elapsed = time.perf_counter() - start
    rel = abs(fit.rate - 2.0) / 2.0
    passed = fit.kind == "exp" and rel <= 0.02 and elapsed < 30.0
    return CriterionResult(
        4, "heat-equation decay rate 2*lambda_1", passed, elapsed,
        {"rate": fit.rate, "rel_error": rel, "r_squared": fit.r_squared, "runtime_limit_s": 30.0},
    )


def criterion_5() -> CriterionResult:
    """Power-decay exponent -2/(p-2) for p in {3, 4} with subcritical drift."""
    start = time.perf_counter()
    details = {}
    passed = True
    for p in (3.0, 4.0):
        t0 = time.perf_counter()
        spec, trace, _ = _cached(f"power_{p:g}", lambda p=p: _power_run(p))
        fit = fit_decay(trace, (4.0, 40.0))
        per_p = time.perf_counter() - t0
        target = -2.0 / (p - 2.0)
        rel = abs(fit.exponent - target) / abs(target)
        ok = fit.kind == "power" and rel <= 0.10 and per_p < 300.0
        passed = passed and ok
        details[f"p={p:g}"] = {
            "slope": fit.exponent, "target": target, "rel_error": rel,
            "r_squared": fit.r_squared, "elapsed_s": per_p,
        }
    elapsed = time.perf_counter() - start
    return CriterionResult(5, "late-time power decay exponents", passed, elapsed, details)


def criterion_6() -> CriterionResult:
    """Exponential regime p <= 2: log-linear fit with R^2 above 0.99."""
    start = time.perf_counter()
    details = {}
    passed = True
    for p in (1.8, 2.0):
        spec, trace, _ = _cached(f"exp_{p:g}", lambda p=p: _exp_run(p))
        fit = fit_decay(trace, (0.0, 0.2))
        ok = fit.kind == "exp" and fit.r_squared > 0.99
        passed = passed and ok
        details[f"p={p:g}"] = {"rate": fit.rate, "r_squared": fit.r_squared}
    elapsed = time.perf_counter() - start
    return CriterionResult(6, "exponential decay regime", passed, elapsed, details)


def criterion_7() -> CriterionResult:
    """Comparison engine against closed forms with piecewise-constant forcing."""
    start = time.perf_counter()
    mesh = np.linspace(0.0, 10.0, 201)
    g = PiecewiseConstant(np.array([0.0, 2.0, 5.0, 10.0]), np.array([0.8, 0.2, 0.0]))
    details = {}
    ok = True
    # exponential branch: variation of constants is the exact solution
    M, C = 1.3, 0.7
    num = solve_comparison(
        ComparisonODE(psi=power_psi(M, 1.0), g=PiecewiseConstant(g.breaks, C * g.levels), x0=2.0), mesh
    )
    closed = np.asarray(closed_form_bound(2.0, M, C, 2.0, g, mesh))
    rel_exp = float(np.max(np.abs(num.values - closed) / np.maximum(closed, 1e-12)))
    details["exp_branch_rel_error"] = rel_exp
    ok = ok and rel_exp <= 1e-6
    # power branch: exact solution when unforced, majorant when forced
    for p in (3.0, 4.0):
        num0 = solve_comparison(ComparisonODE(psi=power_psi(M, p / 2.0), x0=1.5), mesh)
        closed0 = np.asarray(closed_form_bound(p, M, C, 1.5, None, mesh))
        rel_pow = float(np.max(np.abs(num0.values - closed0) / np.maximum(closed0, 1e-12)))
        details[f"power_branch_p{p:g}_rel_error"] = rel_pow
        ok = ok and rel_pow <= 1e-6
        numg = solve_comparison(
            ComparisonODE(psi=power_psi(M, p / 2.0), g=PiecewiseConstant(g.breaks, C * g.levels), x0=1.5), mesh
        )
        closedg = np.asarray(closed_form_bound(p, M, C, 1.5, g, mesh))
        dominated = bool(np.all(numg.values <= closedg + 1e-9))
        details[f"power_branch_p{p:g}_forced_dominated"] = dominated
        ok = ok and dominated
    elapsed = time.perf_counter() - start
    return CriterionResult(7, "comparison engine vs closed forms", ok, elapsed, details)


def criterion_8() -> CriterionResult:
    """Comparison and sandwich lemmas verified on every simulated trace."""
    start = time.perf_counter()
    details = {}
    ok = True
    for spec, trace, _ in _subcritical_runs():
        exponent = spec.p / 2.0 if spec.p > 2.0 else 1.0
        M = fit_dissipation_constant(trace.times, trace.l2_sq, exponent)
        if M is None or M <= 0.0:
            details[spec.name] = "skipped: no decay"
            continue
        ode = ComparisonODE(psi=power_psi(M, exponent), x0=float(trace.l2_sq[0]))
        rep = comparison_check(trace.times, trace.l2_sq, ode)
        entry = {"fitted_m": M, "max_violation": rep.max_violation, "premise": "holds"}
        ok = ok and rep.passed and rep.max_violation <= 1e-6
        z, tail = majorant_decomposition(trace.times, trace.l2_sq, power_psi(M, exponent), None)
        entry["core_min"] = float(np.min(z.values))
        entry["sandwich"] = "holds"
        details[spec.name] = entry
    elapsed = time.perf_counter() - start
    return CriterionResult(8, "comparison and sandwich lemmas on traces", ok, elapsed, details)


def criterion_9() -> CriterionResult:
    """Weak-type level-set bound on all subcritical scenarios."""
    start = time.perf_counter()
    details = {}
    ok = True
    for spec, trace, dt in _subcritical_runs():
        prof = psi_profile(spec.p)
        m0 = weak_type_m0(spec, dt)
        rep = weak_type_check(trace, prof, m0, _LEVEL_KS)
        details[spec.name] = {"m0": m0, "min_margin": min(rep.margins), "passed": bool(rep.passed)}
        ok = ok and rep.passed
    elapsed = time.perf_counter() - start
    return CriterionResult(9, "weak-type level-set estimate", ok, elapsed, details)


def criterion_10() -> CriterionResult:
    """Picard fixed point with bounded drift: few iterations, stable energies."""
    start = time.perf_counter()
    grid = radial_grid(3, 100)
    spec = model_problem(grid, 2.0, 0.4, 1.0 - grid.centers**2, b0=lambda x, t: 0.6 + 0.0 * x)
    res = picard_fixed_point(spec, 0.02, tol=1e-8, max_iter=25)
    res_half = picard_fixed_point(spec, 0.01, tol=1e-8, max_iter=25)
    a1, a2 = res.trace.apriori_value(), res_half.trace.apriori_value()
    drift_rel = abs(a1 - a2) / abs(a2)
    elapsed = time.perf_counter() - start
    ok = (
        res.iterations <= 25
        and res_half.iterations <= 25
        and all(np.isfinite(v) for v in res.apriori_values)
        and drift_rel <= 0.05
    )
    return CriterionResult(
        10, "Picard fixed point in the a priori ball", ok, elapsed,
        {
            "iterations": res.iterations,
            "iterations_half_dt": res_half.iterations,
            "apriori": a1,
            "apriori_half_dt": a2,
            "halving_rel_change": drift_rel,
            "iterate_apriori_max": max(res.apriori_values),
        },
    )


def criterion_11() -> CriterionResult:
    """Coefficient truncation: one energy bound, Cauchy solution distances."""
    start = time.perf_counter()
    mu = 0.5 * nominal_mu_threshold(3, 2.0)
    grid = radial_grid(3, 100)
    spec = model_problem(grid, 2.0, 0.4, 1.0 - grid.centers**2, mu=mu)
    rep = truncated_scheme(spec, 0.01, levels=[2, 4, 8, 16, 32])
    nonincreasing = all(
        b <= a * (1.0 + 1e-9) for a, b in zip(rep.successive_distances, rep.successive_distances[1:])
    )
    bound = max(rep.apriori_values)
    elapsed = time.perf_counter() - start
    ok = nonincreasing and math.isfinite(bound)
    return CriterionResult(
        11, "truncated-coefficient scheme", ok, elapsed,
        {
            "levels": rep.levels,
            "successive_distances": rep.successive_distances,
            "shared_energy_bound": bound,
            "nonincreasing": nonincreasing,
        },
    )


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
}


def run_criterion(number: int) -> CriterionResult:
    return CRITERIA[number]()


def run_all(criteria=None, verbose: bool = False):
    numbers = sorted(CRITERIA) if criteria is None else list(criteria)
    results = []
    for number in numbers:
        result = run_criterion(number)
        results.append(result)
        if verbose:
            print(result.line(), flush=True)
    return results
