"""Command line entry points.

Subcommands: simulate (one scenario to an artifact directory), sweep (axis of
scenarios on a worker pool), lorentz (norm and distance queries on analytic
radial fields), bound (comparison bounds against a supplied trace file) and
check (the acceptance suite, one line per criterion).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="run one scenario config")
    p.add_argument("--config", required=True, help="scenario INI file")
    p.add_argument("--out", required=True, help="artifact directory")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")


def _add_sweep(sub):
    p = sub.add_parser("sweep", help="run a sweep config")
    p.add_argument("--config", required=True, help="sweep INI file")
    p.add_argument("--out", required=True, help="artifact directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def _add_lorentz(sub):
    p = sub.add_parser("lorentz", help="norms and distance of analytic radial fields")
    p.add_argument("--field", choices=("inverse", "power", "indicator", "constant"), default="inverse")
    p.add_argument("--amplitude", type=float, default=1.0, help="field amplitude B or c")
    p.add_argument("--exponent", type=float, default=-1.0, help="power-field exponent")
    p.add_argument("--threshold", type=float, default=0.5, help="indicator radius")
    p.add_argument("--dim", type=int, default=2, help="ambient dimension N")
    p.add_argument("--cells", type=int, default=10000)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, default=None, help="second exponent; omit for weak norm")
    p.add_argument("--out", default=None, help="optional output file for the summary")


def _add_bound(sub):
    p = sub.add_parser("bound", help="Gronwall comparison on a trace file")
    p.add_argument("--trace", required=True, help="CSV with t and l2_sq columns")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--m", type=float, default=None, help="dissipation constant; fitted when omitted")
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--out", required=True, help="artifact directory")


def _add_check(sub):
    p = sub.add_parser("check", help="run the acceptance suite")
    p.add_argument("--criteria", default=None, help="comma list, e.g. 1,4,7; default all")
    p.add_argument("--out", default=None, help="optional JSON report path")


def _cmd_simulate(args) -> int:
    from decaylab.config import load_config
    from decaylab.runner import run

    scenario = load_config(args.config)
    if args.seed is not None:
        scenario.sections.setdefault("scenario", {})["seed"] = str(args.seed)
    plan = scenario.build()
    report = run(plan, args.out)
    status = "ok" if report["passed"] else "CHECK FAILURES"
    print(f"{plan.name}: {status}  (artifacts in {args.out})")
    return 0 if report["passed"] else 1


def _cmd_sweep(args) -> int:
    from decaylab.config import parse_sweep
    from decaylab.runner import sweep

    rows = sweep(parse_sweep(args.config), args.out, jobs=args.jobs)
    bad = [r for r in rows if r["status"] != "ok"]
    for row in rows:
        print(f"{row['axis_value']:g}: {row['status']}")
    print(f"{len(rows) - len(bad)}/{len(rows)} points ok  (table in {args.out}/results.csv)")
    return 0 if not bad else 1


def _cmd_lorentz(args) -> int:
    from decaylab.lorentz import (
        LorentzExponents,
        dist_to_linf,
        lorentz_norm,
        sample_radial_profile,
    )

    profiles = {
        "inverse": lambda r: args.amplitude / r,
        "power": lambda r: args.amplitude * r**args.exponent,
        "indicator": lambda r: args.amplitude if r <= args.threshold else 0.0,
        "constant": lambda r: args.amplitude,
    }
    f = sample_radial_profile(profiles[args.field], args.dim, args.cells, args.radius)
    norm = lorentz_norm(f, LorentzExponents(args.p, args.q))
    dist, heights, tails = dist_to_linf(f, args.p, full_output=True)
    qname = "inf" if args.q is None else f"{args.q:g}"
    lines = [
        f"field: {args.field} (N={args.dim}, {args.cells} radial cells, radius {args.radius:g})",
        f"lorentz_norm(p={args.p:g}, q={qname}) = {norm:.12g}",
        f"dist_to_Linf(p={args.p:g})          = {dist:.12g}   (largest truncation height {heights[-1]:.6g})",
    ]
    text = "\n".join(lines)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return 0


def _cmd_bound(args) -> int:
    import csv as _csv

    from decaylab.gronwall import BoundCurve, ComparisonODE, PremiseFailed, closed_form_bound, comparison_check, power_psi, universal_bound
    from decaylab.plots import bounds_figure
    from decaylab.runner import fit_dissipation_constant, write_csv

    with open(args.trace) as fh:
        reader = _csv.DictReader(fh)
        rows = list(reader)
    try:
        times = np.array([float(r["t"]) for r in rows])
        gamma = np.array([float(r["l2_sq"]) for r in rows])
    except KeyError as exc:
        print(f"trace file lacks column {exc}", file=sys.stderr)
        return 2
    exponent = args.p / 2.0 if args.p > 2.0 else 1.0
    m = args.m if args.m is not None else fit_dissipation_constant(times, gamma, exponent)
    if m is None or m <= 0.0:
        print("trace does not decay; supply --m explicitly", file=sys.stderr)
        return 2
    ode = ComparisonODE(psi=power_psi(m, exponent), x0=float(gamma[0]))
    os.makedirs(args.out, exist_ok=True)
    try:
        rep = comparison_check(times, gamma, ode)
    except PremiseFailed as exc:
        print(f"premise failed: {exc}")
        return 1
    curves = [rep.curve]
    tag = "closed_form_512" if args.p > 2.0 else "closed_form_513"
    closed = closed_form_bound(args.p, m, args.c0, float(gamma[0]), None, times)
    curves.append(BoundCurve(times.copy(), np.asarray(closed), tag))
    if args.p > 2.0:
        late = times[times > 0.0]
        curves.append(BoundCurve(late, np.asarray(universal_bound(args.p, m, args.c0, None, late)), "universal_514"))
    cols = {"t": times, "trace": gamma}
    for curve in curves:
        cols[curve.provenance] = np.interp(times, curve.times, curve.values)
    write_csv(os.path.join(args.out, "bounds.csv"), cols)
    bounds_figure(times, gamma, curves, os.path.join(args.out, "bounds.png"))
    print(f"M = {m:.6g}, premise holds, max violation {rep.max_violation:.3e} -> {'ok' if rep.passed else 'VIOLATED'}")
    return 0 if rep.passed else 1


def _cmd_check(args) -> int:
    from decaylab import acceptance

    wanted = None
    if args.criteria:
        wanted = sorted(int(tok) for tok in args.criteria.split(","))
    results = acceptance.run_all(criteria=wanted, verbose=True)
    if args.out:
        import json

        with open(args.out, "w") as fh:
            json.dump([r.as_dict() for r in results], fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="decaylab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_simulate(sub)
    _add_sweep(sub)
    _add_lorentz(sub)
    _add_bound(sub)
    _add_check(sub)
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "lorentz": _cmd_lorentz,
        "bound": _cmd_bound,
        "check": _cmd_check,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
