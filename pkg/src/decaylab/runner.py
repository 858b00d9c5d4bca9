"""Scenario execution, sweeps, and file emission (CSV, JSONL, gnuplot, figures).

run() takes a validated plan to an artifact directory: trace.csv and a
gnuplot twin, bounds.csv when a comparison is requested, figures, and a
report.json recording pass/fail of every requested check.  Reports are
deterministic for a fixed scenario and seed up to the timestamp field.
sweep() executes one scenario per axis point on a worker pool and merges the
rows into a single table sorted by axis value; a failing point contributes an
error row instead of killing the table.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np

from decaylab import plots
from decaylab.config import ConfigError, RunPlan, Scenario, SweepPlan
from decaylab.gronwall import (
    BoundCurve,
    ComparisonODE,
    DegenerateWindow,
    GFunction,
    PremiseFailed,
    closed_form_bound,
    comparison_check,
    fit_decay,
    power_psi,
    universal_bound,
)
from decaylab.solver import (
    MaxIterExceeded,
    NonConvergence,
    build_g_values,
    check_flux_structure,
    psi_profile,
    solve,
    weak_type_check,
    weak_type_m0,
)

__all__ = [
    "run",
    "sweep",
    "emit_gnuplot_data",
    "parse_gnuplot_data",
    "write_csv",
    "fit_dissipation_constant",
]


# ---------------------------------------------------------------------------
# emission helpers


def write_csv(path, columns: dict):
    keys = list(columns)
    rows = zip(*(np.asarray(columns[k]).tolist() for k in keys))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(keys)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return path


def emit_gnuplot_data(columns: dict, path):
    """Whitespace-separated numeric columns with a header comment.

    Values carry 17 significant digits so a parse round-trips to the last
    bit; an empty table still writes the header line.
    """
    keys = list(columns)
    arrays = [np.asarray(columns[k], dtype=float) for k in keys]
    with open(path, "w") as fh:
        fh.write("# " + " ".join(keys) + "\n")
        if arrays and arrays[0].size:
            for row in zip(*arrays):
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    return path


def parse_gnuplot_data(path) -> dict:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError("missing gnuplot header comment")
        keys = header[1:].split()
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return {k: np.zeros(0) for k in keys}
    return {k: data[:, i] for i, k in enumerate(keys)}


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


def _write_report(path, report: dict):
    with open(path, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# bound fitting


def fit_dissipation_constant(times, gamma, exponent) -> float | None:
    """Largest M with gamma' <= -M gamma^exponent along the sampled trace.

    The ratio is taken against the trapezoid mean of gamma^exponent, the
    same quadrature the comparison premise uses, so the premise holds for
    any smaller M by construction; the fitted value is shaved by 2 percent
    for roundoff headroom.  None when the trace never decays.
    """
    times = np.asarray(times, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    powers = np.maximum(gamma, 0.0) ** exponent
    trapz = 0.5 * (powers[1:] + powers[:-1])
    slopes = np.diff(gamma) / np.diff(times)
    mask = (trapz > (1e-10 * max(gamma.max(), 1e-300)) ** exponent) & (slopes < 0.0)
    if not np.any(mask):
        return None
    ratios = -slopes[mask] / trapz[mask]
    return 0.98 * float(np.min(ratios))


def _bound_checks(plan: RunPlan, trace):
    """Comparison-lemma verification on the simulated trace."""
    p = plan.spec.p
    exponent = p / 2.0 if p > 2.0 else 1.0
    out = {"mode": plan.bounds}
    curves = []
    if plan.bounds == "fitted":
        M = fit_dissipation_constant(trace.times, trace.l2_sq, exponent)
        out["fitted_m"] = M
        if M is None or M <= 0.0:
            out["status"] = "skipped: trace does not decay"
            return out, curves
    else:
        M = plan.bound_m
    ode = ComparisonODE(psi=power_psi(M, exponent), g=None, x0=float(trace.l2_sq[0]))
    try:
        rep = comparison_check(trace.times, trace.l2_sq, ode)
        out["premise"] = "holds"
        out["max_violation"] = rep.max_violation
        out["conclusion"] = bool(rep.passed)
        curves.append(rep.curve)
    except PremiseFailed as exc:
        out["premise"] = f"fails on {exc.interval}"
        out["conclusion"] = None
        return out, curves
    c0 = plan.bound_c0 if plan.bound_c0 is not None else 1.0
    tag = "closed_form_512" if p > 2.0 else "closed_form_513"
    closed = closed_form_bound(p, M, c0, float(trace.l2_sq[0]), None, trace.times)
    curves.append(BoundCurve(trace.times.copy(), np.asarray(closed), tag))
    out["closed_form_dominates"] = bool(np.all(trace.l2_sq <= np.asarray(closed) + 1e-6))
    if p > 2.0:
        late = trace.times[trace.times > 0.0]
        uni = universal_bound(p, M, c0, None, late)
        curves.append(BoundCurve(late, np.asarray(uni), "universal_514"))
        out["universal_dominates"] = bool(
            np.all(trace.l2_sq[trace.times > 0.0] <= np.asarray(uni) + 1e-6)
        )
    return out, curves


# ---------------------------------------------------------------------------
# scenario execution


def run(plan: RunPlan, outdir) -> dict:
    """Execute one scenario into an artifact directory; returns the report."""
    os.makedirs(outdir, exist_ok=True)
    report = {
        "name": plan.name,
        "seed": plan.seed,
        "scenario": plan.echo,
        "mu": plan.mu,
        "mu_ratio": plan.mu_ratio,
        "checks": {},
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    trace = solve(plan.spec, plan.dt, level_ks=plan.level_ks)
    report["checks"]["energy_identity"] = {
        "max_defect": float(np.max(np.abs(trace.energy_residuals))),
        "passed": True,  # solve() raises otherwise
    }
    report["sup_l2"] = trace.sup_l2
    report["grad_p_integral"] = trace.grad_p_integral()
    report["apriori_value"] = trace.apriori_value()

    fit = None
    if plan.fit_window is not None:
        try:
            fit = fit_decay(trace, plan.fit_window)
            report["fit"] = {
                "kind": fit.kind,
                "exponent": fit.exponent,
                "rate": fit.rate,
                "r_squared": fit.r_squared,
                "window": list(fit.window),
                "samples": fit.samples,
            }
        except DegenerateWindow as exc:
            report["fit"] = {"error": str(exc)}

    if plan.level_ks:
        prof = psi_profile(plan.spec.p)
        m0 = weak_type_m0(plan.spec, plan.dt)
        rep = weak_type_check(trace, prof, m0, plan.level_ks)
        report["checks"]["weak_type"] = {
            "m0": m0,
            "ks": rep.ks,
            "bounds": rep.bounds,
            "observed": rep.observed,
            "margins": rep.margins,
            "passed": bool(rep.passed),
        }

    curves = []
    if plan.bounds != "none":
        bound_report, curves = _bound_checks(plan, trace)
        report["checks"]["comparison_bound"] = bound_report

    if plan.structure_check:
        rng = np.random.default_rng(plan.seed)
        srep = check_flux_structure(plan.spec.flux, plan.spec.grid, rng, n_draws=10000)
        report["checks"]["flux_structure"] = {
            "coercivity_margin": srep.coercivity_margin,
            "growth_margin": srep.growth_margin,
            "monotonicity_min": srep.monotonicity_min,
            "passed": bool(srep.passed),
        }

    write_csv(os.path.join(outdir, "trace.csv"), trace.columns())
    emit_gnuplot_data(trace.columns(), os.path.join(outdir, "trace.dat"))
    if curves:
        cols = {"t": trace.times, "trace": trace.l2_sq}
        for curve in curves:
            cols[curve.provenance] = np.interp(trace.times, curve.times, curve.values)
        write_csv(os.path.join(outdir, "bounds.csv"), cols)
    if plan.figures:
        plots.trace_figure(trace, os.path.join(outdir, "trace.png"), fit=fit, title=plan.name)
        if curves:
            plots.bounds_figure(
                trace.times, trace.l2_sq, curves, os.path.join(outdir, "bounds.png"), title=plan.name
            )
    report["passed"] = all(
        chk.get("passed", True) is not False for chk in report["checks"].values()
    )
    _write_report(os.path.join(outdir, "report.json"), report)
    return report


# ---------------------------------------------------------------------------
# sweeps


_ROW_FIELDS = (
    "axis_value",
    "name",
    "status",
    "sup_l2",
    "apriori_value",
    "fit_kind",
    "fit_exponent",
    "fit_rate",
    "fit_r_squared",
    "weak_type_min_margin",
    "error",
)


def _run_point(args):
    axis_value, sections, outdir = args
    row = {k: None for k in _ROW_FIELDS}
    row["axis_value"] = axis_value
    try:
        plan = Scenario(sections).build()
        row["name"] = plan.name
        report = run(plan, os.path.join(outdir, plan.name))
        row["status"] = "ok"
        row["sup_l2"] = report["sup_l2"]
        row["apriori_value"] = report["apriori_value"]
        fit = report.get("fit")
        if fit and "kind" in fit:
            row["fit_kind"] = fit["kind"]
            row["fit_exponent"] = fit["exponent"]
            row["fit_rate"] = fit["rate"]
            row["fit_r_squared"] = fit["r_squared"]
        wt = report["checks"].get("weak_type")
        if wt:
            row["weak_type_min_margin"] = min(wt["margins"])
    except (ConfigError, NonConvergence, MaxIterExceeded, DegenerateWindow, ValueError) as exc:
        row["status"] = "error"
        row["error"] = str(exc).replace("\n", " ")
    return row


def sweep(plan: SweepPlan, outdir, jobs: int = 1) -> list:
    """Run every sweep point, merge rows sorted by axis value, persist table.

    Points run on a process pool when jobs > 1; the merged table is identical
    either way.  A failing point is persisted as an error row.
    """
    os.makedirs(outdir, exist_ok=True)
    tasks = [(val, sc.sections, outdir) for val, sc in plan.points()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_point, tasks))
    else:
        rows = [_run_point(t) for t in tasks]
    rows.sort(key=lambda r: r["axis_value"])

    table_path = os.path.join(outdir, "results.csv")
    with open(table_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_ROW_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()}
            )
    with open(os.path.join(outdir, "results.jsonl"), "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, default=_json_default) + "\n")
    plots.sweep_figure(rows, plan.axis, os.path.join(outdir, "sweep.png"))
    return rows
