"""Checks for comparison ODEs, closed-form majorants and rate fitting."""

from __future__ import annotations

import math

import numpy as np
import pytest

from decaylab.gronwall import (
    ComparisonODE,
    DegenerateWindow,
    GFunction,
    HypothesisFailed,
    PiecewiseConstant,
    PremiseFailed,
    closed_form_bound,
    comparison_check,
    exp_tail_bound,
    fit_decay,
    majorant_decomposition,
    power_psi,
    solve_comparison,
    universal_bound,
)
from decaylab.grids import interval_grid, smallest_dirichlet_eigenvalue
from decaylab.solver import model_problem, solve


PW_G = PiecewiseConstant(np.array([0.0, 2.0, 5.0, 10.0]), np.array([1.0, 0.25, 0.0]))


# ---------------------------------------------------------------------------
# piecewise-constant forcing


def test_piecewise_constant_integral():
    assert PW_G.integral(0.0, 10.0) == pytest.approx(2.0 + 0.75, rel=1e-14)
    assert PW_G.integral(1.0, 3.0) == pytest.approx(1.0 + 0.25, rel=1e-14)
    assert PW_G.integral(6.0, 3.0) == 0.0


def test_piecewise_constant_exp_convolution():
    # adaptive quadrature per smooth piece is the independent oracle
    import scipy.integrate

    for t in (1.5, 4.0, 9.0):
        oracle = 0.0
        for a, b, lev in zip(PW_G.breaks[:-1], PW_G.breaks[1:], PW_G.levels):
            lo, hi = min(a, t), min(b, t)
            if hi > lo:
                val, _ = scipy.integrate.quad(lambda s: math.exp(-2.0 * (t - s)) * lev, lo, hi)
                oracle += val
        assert PW_G.exp_convolution(2.0, t) == pytest.approx(oracle, abs=1e-10)


def test_gfunction_interp_and_integral():
    g = GFunction(np.array([0.0, 1.0, 2.0]), np.array([1.0, 3.0, 3.0]))
    assert g(0.5) == pytest.approx(2.0)
    assert g.integral(0.0, 2.0) == pytest.approx(5.0)


# ---------------------------------------------------------------------------
# solve_comparison oracles


def test_solve_comparison_pure_quadrature():
    ode = ComparisonODE(psi=lambda t, x: 0.0, g=PW_G, x0=0.3)
    mesh = np.linspace(0.0, 10.0, 81)
    curve = solve_comparison(ode, mesh)
    expect = 0.3 + np.array([PW_G.integral(0.0, t) for t in mesh])
    assert np.max(np.abs(curve.values - expect) / np.maximum(expect, 1.0)) < 1e-8


def test_solve_comparison_linear_decay():
    M = 3.0
    ode = ComparisonODE(psi=power_psi(M, 1.0), x0=2.0)
    mesh = np.linspace(0.0, 4.0, 33)
    curve = solve_comparison(ode, mesh)
    assert np.max(np.abs(curve.values - 2.0 * np.exp(-M * mesh))) < 1e-8


def test_solve_comparison_power_nonlinearity():
    # x' = -x^2, x(0) = 1 solves to 1/(1+t); this is the p = 4 comparison ODE
    ode = ComparisonODE(psi=power_psi(1.0, 2.0), x0=1.0)
    mesh = np.linspace(0.0, 8.0, 65)
    curve = solve_comparison(ode, mesh)
    assert np.max(np.abs(curve.values - 1.0 / (1.0 + mesh))) < 1e-8


def test_solve_comparison_rejects_bad_mesh():
    ode = ComparisonODE(psi=power_psi(1.0, 1.0), x0=1.0)
    with pytest.raises(ValueError):
        solve_comparison(ode, np.array([0.0, 0.0, 1.0]))


def test_solve_comparison_clamps_only_with_vanishing_psi():
    ode = ComparisonODE(psi=power_psi(50.0, 1.0), x0=1e-12)
    mesh = np.linspace(0.0, 2.0, 21)
    assert np.min(solve_comparison(ode, mesh).values) >= 0.0


# ---------------------------------------------------------------------------
# closed forms


def test_closed_form_equals_x0_at_time_zero():
    for p in (1.6, 2.0, 3.0, 4.0):
        assert closed_form_bound(p, 1.3, 0.7, 2.5, PW_G, 0.0) == pytest.approx(2.5, rel=1e-14)


def test_closed_form_exponential_branch_no_forcing():
    t = np.linspace(0.0, 5.0, 11)
    vals = closed_form_bound(2.0, 1.5, 1.0, 2.0, None, t)
    assert np.allclose(vals, 2.0 * np.exp(-1.5 * t), rtol=1e-14)


def test_closed_form_power_branch_example():
    # p=3, M=2, x0=1: (p/2-1) M x0^{1/2} = 1, exponent 2/(p-2) = 2
    t = np.linspace(0.0, 6.0, 13)
    vals = closed_form_bound(3.0, 2.0, 1.0, 1.0, None, t)
    assert np.allclose(vals, 1.0 / (1.0 + t) ** 2, rtol=1e-14)


def test_closed_form_power_matches_numeric_without_forcing():
    mesh = np.linspace(0.0, 10.0, 101)
    numeric = solve_comparison(ComparisonODE(psi=power_psi(2.0, 1.5), x0=1.0), mesh)
    closed = closed_form_bound(3.0, 2.0, 1.0, 1.0, None, mesh)
    rel = np.abs(numeric.values - closed) / np.abs(closed)
    assert rel.max() < 1e-6


def test_closed_form_exponential_matches_numeric_piecewise_forcing():
    M, C = 1.2, 0.8
    mesh = np.linspace(0.0, 10.0, 201)
    ode = ComparisonODE(psi=power_psi(M, 1.0), g=PiecewiseConstant(PW_G.breaks, C * PW_G.levels), x0=1.7)
    numeric = solve_comparison(ode, mesh)
    closed = closed_form_bound(2.0, M, C, 1.7, PW_G, mesh)
    rel = np.abs(numeric.values - closed) / np.maximum(np.abs(closed), 1e-12)
    assert rel.max() < 1e-6


def test_closed_form_power_majorizes_numeric_with_forcing():
    # with g > 0 the power branch is an upper bound, not the exact solution
    M, C = 1.0, 0.5
    mesh = np.linspace(0.0, 10.0, 101)
    g = PiecewiseConstant(np.array([0.0, 1.0, 10.0]), np.array([0.4, 0.05]))
    ode = ComparisonODE(psi=power_psi(M, 2.0), g=PiecewiseConstant(g.breaks, C * g.levels), x0=1.0)
    numeric = solve_comparison(ode, mesh)
    closed = closed_form_bound(4.0, M, C, 1.0, g, mesh)
    assert np.all(numeric.values <= closed + 1e-9)


def test_closed_form_rejects_floor_violation():
    with pytest.raises(ValueError):
        closed_form_bound(1.0, 1.0, 1.0, 1.0, None, 1.0)
    with pytest.raises(ValueError):
        closed_form_bound(1.2, 1.0, 1.0, 1.0, None, 1.0, N=3)  # 2N/(N+2) = 1.2


def test_closed_form_monotone_in_data():
    rng = np.random.default_rng(3)
    t = np.linspace(0.0, 5.0, 21)
    for _ in range(30):
        p = rng.choice([1.8, 2.0, 3.0])
        M = rng.uniform(0.2, 3.0)
        x0 = rng.uniform(0.0, 2.0)
        bump = rng.uniform(0.0, 1.0)
        lo = closed_form_bound(p, M, 1.0, x0, PW_G, t)
        hi = closed_form_bound(p, M, 1.0, x0 + bump, PW_G, t)
        assert np.all(hi >= lo - 1e-12)
        hi_g = closed_form_bound(p, M, 1.0 + bump, x0, PW_G, t)
        assert np.all(hi_g >= lo - 1e-12)


def test_numeric_monotone_in_data():
    mesh = np.linspace(0.0, 4.0, 41)
    base = solve_comparison(ComparisonODE(psi=power_psi(1.0, 2.0), g=PW_G, x0=1.0), mesh)
    bigger = solve_comparison(ComparisonODE(psi=power_psi(1.0, 2.0), g=PW_G, x0=1.5), mesh)
    assert np.all(bigger.values >= base.values - 1e-9)


def test_loglog_slope_of_power_branch():
    # for p > 2, g = 0 the bound is asymptotically log-log linear, slope -2/(p-2)
    for p in (3.0, 4.0):
        t = np.geomspace(10.0, 100.0, 40)
        vals = closed_form_bound(p, 10.0, 1.0, 1.0, None, t)
        slope = np.polyfit(np.log(t), np.log(vals), 1)[0]
        assert slope == pytest.approx(-2.0 / (p - 2.0), rel=0.01)


def test_loglinear_exactness_of_exp_branch():
    t = np.linspace(0.0, 8.0, 30)
    vals = closed_form_bound(1.8, 0.9, 1.0, 3.0, None, t)
    slope, r2 = np.polyfit(t, np.log(vals), 1)[0], None
    pred = np.polyval(np.polyfit(t, np.log(vals), 1), t)
    assert np.max(np.abs(pred - np.log(vals))) < 1e-12
    assert slope == pytest.approx(-0.9, rel=1e-12)


# ---------------------------------------------------------------------------
# universal and tail bounds


def test_universal_bound_examples():
    assert universal_bound(4.0, 1.0, 1.0, None, 2.5) == pytest.approx(1.0 / 2.5, rel=1e-14)
    # p=3, M1=2: [(1/2)*2]^{-2} * t^{-2} = 1 at t = 1
    assert universal_bound(3.0, 2.0, 1.0, None, 1.0) == pytest.approx(1.0, rel=1e-14)


def test_universal_bound_vanishes_at_infinity():
    g = PiecewiseConstant(np.array([0.0, 1.0]), np.array([2.0]))  # integrable forcing
    vals = universal_bound(3.0, 1.0, 1.0, g, np.array([1.0, 10.0, 100.0, 1000.0]))
    assert np.all(np.diff(vals) < 0.0)
    assert vals[-1] < 1e-3


def test_universal_bound_dominates_numeric_no_forcing():
    mesh = np.linspace(0.5, 20.0, 100)
    for x0 in (0.5, 5.0, 50.0):
        ode = ComparisonODE(psi=power_psi(1.0, 2.0), x0=x0)
        numeric = solve_comparison(ode, np.concatenate([[0.0], mesh]))
        bound = universal_bound(4.0, 1.0, 1.0, None, mesh)
        assert np.all(numeric.values[1:] <= bound * (1.0 + 1e-9))


def test_universal_bound_rejects_bad_arguments():
    with pytest.raises(ValueError):
        universal_bound(2.0, 1.0, 1.0, None, 1.0)
    with pytest.raises(ValueError):
        universal_bound(3.0, 1.0, 1.0, None, 0.0)


def test_exp_tail_bound_shape():
    vals = exp_tail_bound(2.0, 1.0, 3.0, None, np.array([0.0, 1.0, 4.0]), g_l1=0.0)
    assert np.allclose(vals, 3.0 * np.exp(-1.0 * np.array([0.0, 1.0, 4.0])), rtol=1e-14)


# ---------------------------------------------------------------------------
# comparison checks on traces


def test_comparison_check_on_exact_solution():
    mesh = np.linspace(0.0, 3.0, 301)
    ode = ComparisonODE(psi=power_psi(1.0, 1.0), g=None, x0=1.0)
    x = solve_comparison(ode, mesh)
    rep = comparison_check(mesh, x.values, ode, premise_slack=1e-6)
    assert rep.passed
    assert abs(rep.max_violation) < 1e-6


def test_comparison_check_halved_trace_strict_margin():
    mesh = np.linspace(0.0, 3.0, 301)
    ode = ComparisonODE(psi=power_psi(1.0, 2.0), g=None, x0=1.0)
    x = solve_comparison(ode, mesh)
    gamma = x.values / 2.0
    rep = comparison_check(mesh, gamma, ComparisonODE(psi=power_psi(1.0, 2.0), x0=gamma[0]))
    assert rep.passed
    # curves touch at t0 by construction; strictly below afterwards
    assert np.max((gamma - rep.curve.values)[1:]) < -1e-3


def test_comparison_check_heat_trace():
    spec = model_problem(interval_grid(0.0, math.pi, 150), 2.0, 1.0, np.sin(interval_grid(0.0, math.pi, 150).centers))
    tr = solve(spec, 1e-3)
    lam = smallest_dirichlet_eigenvalue(spec.grid)
    M = 2.0 * lam * 0.95
    rep = comparison_check(tr.times, tr.l2_sq, ComparisonODE(psi=power_psi(M, 1.0), x0=tr.l2_sq[0]))
    assert rep.passed
    assert rep.max_violation <= 1e-6


def test_comparison_check_premise_failure_reports_interval():
    mesh = np.linspace(0.0, 1.0, 51)
    gamma = 1.0 + mesh**2  # increasing trace cannot satisfy the decay premise
    with pytest.raises(PremiseFailed) as err:
        comparison_check(mesh, gamma, ComparisonODE(psi=power_psi(1.0, 1.0), x0=1.0))
    lo, hi = err.value.interval
    assert 0.0 <= lo < hi <= 1.0


# ---------------------------------------------------------------------------
# majorant decomposition


def test_majorant_decomposition_no_forcing_collapses():
    mesh = np.linspace(0.0, 3.0, 61)
    psi = power_psi(1.0, 1.0)
    gamma = np.exp(-mesh)  # the exact solution itself
    z, tail = majorant_decomposition(mesh, gamma, psi, None)
    assert np.max(np.abs(z.values - gamma)) < 1e-7
    assert tail(3.0) == 0.0


def test_majorant_decomposition_constant_forcing():
    # x' = -x + c: x = e^{-t} + c(1 - e^{-t}) <= z + c t
    c = 0.4
    mesh = np.linspace(0.0, 5.0, 101)
    psi = power_psi(1.0, 1.0)
    gamma = np.exp(-mesh) + c * (1.0 - np.exp(-mesh))
    z, tail = majorant_decomposition(mesh, gamma, psi, lambda t: c + 0.0 * np.asarray(t))
    assert np.allclose(z.values, np.exp(-mesh), atol=1e-7)
    assert tail(5.0) == pytest.approx(c * 5.0, rel=1e-12)


def test_majorant_decomposition_quadratic_core():
    mesh = np.linspace(0.0, 4.0, 81)
    psi = power_psi(1.0, 2.0)
    gamma = 1.0 / (1.0 + mesh)
    z, _ = majorant_decomposition(mesh, gamma, psi, None)
    assert np.min(z.values) >= 0.0
    assert np.all(np.diff(z.values) <= 1e-12)
    assert np.allclose(z.values, 1.0 / (1.0 + mesh), atol=1e-7)


def test_majorant_decomposition_hypothesis_failures():
    mesh = np.linspace(0.0, 1.0, 21)
    gamma = np.exp(-mesh)
    with pytest.raises(HypothesisFailed):
        majorant_decomposition(mesh, gamma, lambda t, x: abs(x), None)
    with pytest.raises(HypothesisFailed):
        majorant_decomposition(mesh, gamma, power_psi(1.0, 1.0), lambda t: -1.0 + 0.0 * np.asarray(t))


# ---------------------------------------------------------------------------
# decay fitting


def test_fit_decay_synthetic_power():
    t = np.linspace(0.5, 20.0, 200)
    fit = fit_decay(t, (1.0, 20.0), values=3.0 * t**-2.0)
    assert fit.kind == "power"
    assert fit.exponent == pytest.approx(-2.0, abs=1e-6)
    assert fit.r_squared > 1.0 - 1e-12


def test_fit_decay_synthetic_exponential():
    t = np.linspace(0.0, 5.0, 100)
    fit = fit_decay(t, (0.0, 5.0), values=np.exp(-3.0 * t))
    assert fit.kind == "exp"
    assert fit.rate == pytest.approx(3.0, abs=1e-6)
    assert fit.r_squared > 1.0 - 1e-12


def test_fit_decay_heat_trace_rate():
    g = interval_grid(0.0, math.pi, 200)
    tr = solve(model_problem(g, 2.0, 1.5, np.sin(g.centers)), 1e-3)
    fit = fit_decay(tr, (0.1, 1.5))
    assert fit.kind == "exp"
    assert fit.rate == pytest.approx(2.0, rel=0.05)


def test_fit_decay_degenerate_window():
    t = np.linspace(0.0, 1.0, 40)
    with pytest.raises(DegenerateWindow):
        fit_decay(t, (0.9, 0.95), values=np.exp(-t))
