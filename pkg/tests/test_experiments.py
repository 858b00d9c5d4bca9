"""Checks for configuration, scenario execution, sweeps and the CLI."""

from __future__ import annotations

import json
import math
import os

import numpy as np
import pytest

from decaylab.cli import main
from decaylab.config import (
    ConfigError,
    Scenario,
    load_config,
    make_field,
    make_initial_profile,
    make_time_profile,
    parse_sweep,
)
from decaylab.grids import interval_grid, radial_grid
from decaylab.runner import emit_gnuplot_data, parse_gnuplot_data, run, sweep

HEAT_INI = """\
[scenario]
name = heat_demo
seed = 7

[problem]
kind = interval
p = 2.0

[grid]
cells = 80
a = 0.0
b = 3.141592653589793

[time]
dt = 0.002
horizon = 0.5

[fields]
u0 = sine amplitude=1 mode=1

[outputs]
level_ks = 0.1 0.5
fit_window = 0.05 0.5
bounds = fitted
figures = true
"""

DRIFT_INI = """\
[scenario]
name = drift_demo
seed = 3

[problem]
kind = radial
dimension = 3
p = 2.0
mu_ratio = 0.4

[grid]
cells = 60

[time]
dt = 0.01
horizon = 0.2

[fields]
u0 = bump amplitude=1

[outputs]
level_ks = 0.1 0.5 1.0
figures = false
structure_check = true
"""

SWEEP_INI = """\
[scenario]
name = mu_sweep
seed = 1

[problem]
kind = radial
dimension = 3
p = 2.0
mu_ratio = 0.2

[grid]
cells = 40

[time]
dt = 0.02
horizon = 0.2

[fields]
u0 = bump amplitude=1

[outputs]
level_ks = 0.5
fit_window = 0.0 0.2
figures = false

[sweep]
axis = problem.mu_ratio
values = 0.6 0.2 0.4
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# ---------------------------------------------------------------------------
# catalog and validation


def test_make_field_forms():
    g = radial_grid(2, 50)
    power = make_field("power coeff=2 exponent=-1", g)
    assert np.allclose(power(g.centers, 0.0), 2.0 / g.centers)
    const = make_field("constant value=3 decay=1", g)
    assert np.allclose(const(g.centers, 0.0), 3.0)
    assert np.allclose(const(g.centers, 2.0), 3.0 * math.exp(-2.0))
    stepf = make_field("step threshold=0.5 inside=2 outside=0", g)
    vals = stepf(g.centers, 0.0)
    assert set(np.unique(vals)) <= {0.0, 2.0}
    assert make_field("zero", g) is None


def test_make_field_rejects_unknown_form_and_params():
    g = interval_grid(0.0, 1.0, 10)
    with pytest.raises(ValueError):
        make_field("wavelet scale=2", g)
    with pytest.raises(ValueError):
        make_field("constant value=1 bogus=3", g)


def test_time_profile_forms():
    fn, sup = make_time_profile("sinusoid amplitude=0.5 period=2 offset=1")
    assert sup == 1.5
    assert fn(0.0) == pytest.approx(1.0)
    fn2, sup2 = make_time_profile("step t0=1 before=2 after=0.5")
    assert fn2(0.5) == 2.0 and fn2(1.5) == 0.5 and sup2 == 2.0


def test_initial_profiles_vanish_on_boundary():
    g = interval_grid(0.0, 2.0, 100)
    u = make_initial_profile("bump amplitude=2", g)
    assert u[0] < 0.1 and u[-1] < 0.1 and u.max() == pytest.approx(2.0, rel=0.01)
    sine = make_initial_profile("sine amplitude=1 mode=2", g)
    assert abs(sine[0]) < 0.1


def test_scenario_build_heat(tmp_path):
    plan = load_config(_write(tmp_path, "heat.ini", HEAT_INI)).build()
    assert plan.name == "heat_demo"
    assert plan.seed == 7
    assert plan.spec.grid.kind == "interval"
    assert plan.dt == 0.002
    assert plan.level_ks == (0.1, 0.5)
    assert plan.fit_window == (0.05, 0.5)
    assert plan.bounds == "fitted"


def test_scenario_validation_reports_field_paths(tmp_path):
    bad = HEAT_INI.replace("p = 2.0", "p = soup").replace("dt = 0.002", "dt = -1")
    with pytest.raises(ConfigError) as err:
        load_config(_write(tmp_path, "bad.ini", bad)).build()
    msg = str(err.value)
    assert "[problem] p" in msg
    assert "[time] dt" in msg


def test_scenario_validation_unknown_field_form(tmp_path):
    bad = HEAT_INI.replace("u0 = sine amplitude=1 mode=1", "u0 = fractal dim=2")
    with pytest.raises(ConfigError) as err:
        load_config(_write(tmp_path, "bad2.ini", bad)).build()
    assert "[fields] u0" in str(err.value)


def test_mu_ratio_requires_radial(tmp_path):
    bad = HEAT_INI.replace("[time]", "mu_ratio = 0.5\n\n[time]")
    with pytest.raises(ConfigError) as err:
        load_config(_write(tmp_path, "bad3.ini", bad)).build()
    assert "[problem] mu_ratio" in str(err.value)


# ---------------------------------------------------------------------------
# gnuplot emission


def test_gnuplot_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    cols = {"t": rng.standard_normal(40), "l2_sq": np.exp(rng.standard_normal(40)), "grad_p": rng.uniform(0, 1, 40)}
    path = tmp_path / "data.dat"
    emit_gnuplot_data(cols, path)
    header = path.read_text().splitlines()[0]
    assert header == "# t l2_sq grad_p"
    back = parse_gnuplot_data(path)
    for key in cols:
        assert np.array_equal(back[key], cols[key])  # bit-exact round trip


def test_gnuplot_empty_table(tmp_path):
    path = tmp_path / "empty.dat"
    emit_gnuplot_data({"t": np.zeros(0), "l2_sq": np.zeros(0)}, path)
    text = path.read_text()
    assert text == "# t l2_sq\n"
    back = parse_gnuplot_data(path)
    assert back["t"].size == 0


# ---------------------------------------------------------------------------
# scenario execution


def test_run_heat_artifacts(tmp_path):
    plan = load_config(_write(tmp_path, "heat.ini", HEAT_INI)).build()
    outdir = tmp_path / "out"
    report = run(plan, outdir)
    for name in ("trace.csv", "trace.dat", "report.json", "trace.png", "bounds.csv", "bounds.png"):
        target = outdir / name
        assert target.exists(), name
        assert target.stat().st_size > 0
    assert report["passed"]
    assert report["checks"]["energy_identity"]["passed"]
    assert report["checks"]["weak_type"]["passed"]
    assert report["checks"]["comparison_bound"]["conclusion"] is True
    assert report["fit"]["kind"] == "exp"
    assert report["fit"]["rate"] == pytest.approx(2.0, rel=0.05)


def test_run_structure_check_in_report(tmp_path):
    plan = load_config(_write(tmp_path, "drift.ini", DRIFT_INI)).build()
    report = run(plan, tmp_path / "out")
    assert report["checks"]["flux_structure"]["passed"]
    assert report["checks"]["weak_type"]["passed"]
    assert plan.mu > 0.0


def test_run_determinism(tmp_path):
    cfg = _write(tmp_path, "heat.ini", HEAT_INI)
    run(load_config(cfg).build(), tmp_path / "a")
    run(load_config(cfg).build(), tmp_path / "b")
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    ra.pop("timestamp"), rb.pop("timestamp")
    assert json.dumps(ra, sort_keys=True) == json.dumps(rb, sort_keys=True)
    assert (tmp_path / "a" / "trace.csv").read_text() == (tmp_path / "b" / "trace.csv").read_text()


# ---------------------------------------------------------------------------
# sweeps


def test_sweep_serial_parallel_identical(tmp_path):
    cfg = _write(tmp_path, "sweep.ini", SWEEP_INI)
    rows_serial = sweep(parse_sweep(cfg), tmp_path / "serial", jobs=1)
    rows_parallel = sweep(parse_sweep(cfg), tmp_path / "parallel", jobs=2)
    assert [r["axis_value"] for r in rows_serial] == sorted([0.2, 0.4, 0.6])
    strip = lambda rows: json.dumps(rows, sort_keys=True, default=str)
    assert strip(rows_serial) == strip(rows_parallel)
    assert (tmp_path / "serial" / "results.csv").read_text() == (tmp_path / "parallel" / "results.csv").read_text()
    assert (tmp_path / "serial" / "sweep.png").exists()


def test_sweep_persists_partial_failures(tmp_path):
    broken = SWEEP_INI.replace("axis = problem.mu_ratio", "axis = time.dt").replace(
        "values = 0.6 0.2 0.4", "values = 0.02 0"
    )
    cfg = _write(tmp_path, "sweep.ini", broken)
    rows = sweep(parse_sweep(cfg), tmp_path / "out", jobs=1)
    statuses = {r["axis_value"]: r["status"] for r in rows}
    assert statuses[0.0] == "error"
    assert statuses[0.02] == "ok"
    table = (tmp_path / "out" / "results.csv").read_text()
    assert "error" in table and "ok" in table


def test_sweep_linked_overrides(tmp_path):
    linked = SWEEP_INI.replace(
        "values = 0.6 0.2 0.4", "values = 0.2 0.4\nlink.grid.cells = 40 50"
    )
    plan = parse_sweep(_write(tmp_path, "sweep.ini", linked))
    points = list(plan.points())
    assert [p[0] for p in points] == [0.2, 0.4]
    assert points[1][1].get("grid", "cells") == "50"


def test_sweep_rejects_bad_plan(tmp_path):
    no_axis = SWEEP_INI.replace("axis = problem.mu_ratio", "axis = nodots")
    with pytest.raises(ConfigError):
        parse_sweep(_write(tmp_path, "s1.ini", no_axis))
    short_link = SWEEP_INI.replace("values = 0.6 0.2 0.4", "values = 0.2 0.4\nlink.grid.cells = 40")
    with pytest.raises(ConfigError):
        parse_sweep(_write(tmp_path, "s2.ini", short_link))


# ---------------------------------------------------------------------------
# CLI


def test_cli_simulate_and_bound(tmp_path, capsys):
    cfg = _write(tmp_path, "heat.ini", HEAT_INI)
    out = tmp_path / "artifacts"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "report.json").exists()
    rc = main(["bound", "--trace", str(out / "trace.csv"), "--p", "2.0", "--out", str(tmp_path / "bounds")])
    assert rc == 0
    assert (tmp_path / "bounds" / "bounds.csv").exists()
    assert (tmp_path / "bounds" / "bounds.png").exists()
    text = capsys.readouterr().out
    assert "premise holds" in text


def test_cli_lorentz_inverse_field(tmp_path, capsys):
    rc = main([
        "lorentz", "--field", "inverse", "--dim", "2", "--cells", "10000", "--p", "2.0", "--out",
        str(tmp_path / "lorentz.txt"),
    ])
    assert rc == 0
    text = capsys.readouterr().out
    dist_line = [l for l in text.splitlines() if "dist_to_Linf" in l][0]
    value = float(dist_line.split("=")[1].split()[0])
    assert value == pytest.approx(math.sqrt(math.pi), rel=0.01)
    assert (tmp_path / "lorentz.txt").exists()


def test_cli_sweep(tmp_path, capsys):
    cfg = _write(tmp_path, "sweep.ini", SWEEP_INI)
    rc = main(["sweep", "--config", cfg, "--out", str(tmp_path / "sw"), "--jobs", "1"])
    assert rc == 0
    assert (tmp_path / "sw" / "results.csv").exists()
    assert (tmp_path / "sw" / "results.jsonl").exists()


def test_cli_check_single_criterion(tmp_path, capsys):
    rc = main(["check", "--criteria", "1,7", "--out", str(tmp_path / "acc.json")])
    assert rc == 0
    text = capsys.readouterr().out
    assert "criterion  1 [PASS]" in text
    assert "criterion  7 [PASS]" in text
    payload = json.loads((tmp_path / "acc.json").read_text())
    assert len(payload) == 2
