"""Flat key-value scenario configuration and the named field catalog.

Scenarios are INI files (configparser syntax) with sections

    [scenario]  name, seed
    [problem]   kind, p, dimension, mu | mu_ratio
    [grid]      cells, and the extent keys of the chosen kind
    [time]      dt, horizon
    [fields]    u0, f, b0, H, K, h   as "form key=val ..." entries
    [outputs]   level_ks, fit_window, bounds, figures, structure_check

Function-valued inputs come from a small named catalog (constant, power of
|x|, sinusoid, step, zero; time profiles additionally decay exponentially via
`decay=RATE`).  Arbitrary expressions are deliberately not supported.
A [sweep] section turns the file into a sweep plan: one axis key, a list of
values, and optional `link.<section.key>` lists varied in lockstep.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from decaylab.grids import Grid, interval_grid, radial_grid, rect2d_grid
from decaylab.solver import ProblemSpec, model_flux, nominal_mu_threshold

__all__ = [
    "ConfigError",
    "Scenario",
    "RunPlan",
    "SweepPlan",
    "load_config",
    "parse_scenario",
    "parse_sweep",
    "make_field",
    "make_time_profile",
    "make_initial_profile",
]


class ConfigError(ValueError):
    """Validation failure; the message lists every offending field path."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  {e}" for e in self.errors))


# ---------------------------------------------------------------------------
# catalog


def _spec_params(text: str):
    parts = text.split()
    if not parts:
        raise ValueError("empty field specification")
    form, params = parts[0], {}
    for item in parts[1:]:
        if "=" not in item:
            raise ValueError(f"malformed parameter {item!r} (expected key=value)")
        key, val = item.split("=", 1)
        params[key] = float(val)
    return form, params


def _radius_of(pos):
    pos = np.asarray(pos, dtype=float)
    if pos.ndim == 2:
        return np.linalg.norm(pos, axis=1)
    return np.abs(pos)


def _normalized(pos, grid: Grid):
    pos = np.asarray(pos, dtype=float)
    if grid.kind == "interval":
        a, b = grid.extent
        return (pos - a) / (b - a)
    if grid.kind == "radial":
        return pos / grid.extent[1]
    lx, ly = grid.extent
    return pos[:, 0] / lx, pos[:, 1] / ly


def make_field(text: str, grid: Grid):
    """Space-time scalar coefficient from a catalog entry, or None for zero."""
    form, prm = _spec_params(text)
    decay = prm.pop("decay", 0.0)

    if form == "zero":
        return None
    if form == "constant":
        value = prm.pop("value", 1.0)
        base = lambda pos, t: value * np.ones(np.shape(_radius_of(pos)))
    elif form == "power":
        coeff = prm.pop("coeff", 1.0)
        expo = prm.pop("exponent", -1.0)
        base = lambda pos, t: coeff * _radius_of(pos) ** expo
    elif form == "sinusoid":
        amp = prm.pop("amplitude", 1.0)
        mode = prm.pop("mode", 1.0)
        if grid.kind == "rect2d":
            base = lambda pos, t: amp * np.sin(mode * np.pi * _normalized(pos, grid)[0]) * np.sin(
                mode * np.pi * _normalized(pos, grid)[1]
            )
        else:
            base = lambda pos, t: amp * np.sin(mode * np.pi * _normalized(pos, grid))
    elif form == "step":
        thresh = prm.pop("threshold", 0.5)
        inside = prm.pop("inside", 1.0)
        outside = prm.pop("outside", 0.0)
        base = lambda pos, t: np.where(_radius_of(pos) <= thresh, inside, outside)
    else:
        raise ValueError(f"unknown field form {form!r}")
    if prm:
        raise ValueError(f"unused parameters {sorted(prm)} for form {form!r}")
    if decay == 0.0:
        return base
    return lambda pos, t: np.exp(-decay * t) * base(pos, t)


def make_time_profile(text: str):
    """Bounded scalar function of time from a catalog entry."""
    form, prm = _spec_params(text)
    if form == "constant":
        value = prm.pop("value", 1.0)
        fn, sup = (lambda t: value), abs(value)
    elif form == "sinusoid":
        amp = prm.pop("amplitude", 0.5)
        period = prm.pop("period", 1.0)
        offset = prm.pop("offset", 1.0)
        fn = lambda t: offset + amp * np.sin(2.0 * np.pi * t / period)
        sup = abs(offset) + abs(amp)
    elif form == "step":
        t0 = prm.pop("t0", 0.5)
        before = prm.pop("before", 1.0)
        after = prm.pop("after", 0.0)
        fn = lambda t: before if t < t0 else after
        sup = max(abs(before), abs(after))
    else:
        raise ValueError(f"unknown time profile {form!r}")
    if prm:
        raise ValueError(f"unused parameters {sorted(prm)} for form {form!r}")
    return fn, sup


def make_initial_profile(text: str, grid: Grid) -> np.ndarray:
    """Initial datum with zero boundary trace from a catalog entry."""
    form, prm = _spec_params(text)
    if form == "zero":
        return np.zeros(grid.n_cells)
    amp = prm.pop("amplitude", 1.0)
    if form == "sine":
        mode = prm.pop("mode", 1.0)
        if grid.kind == "rect2d":
            xi, eta = _normalized(grid.centers, grid)
            vals = amp * np.sin(mode * np.pi * xi) * np.sin(mode * np.pi * eta)
        else:
            vals = amp * np.sin(mode * np.pi * _normalized(grid.centers, grid))
    elif form == "bump":
        if grid.kind == "radial":
            vals = amp * (1.0 - (_normalized(grid.centers, grid)) ** 2)
        elif grid.kind == "interval":
            xi = _normalized(grid.centers, grid)
            vals = amp * 4.0 * xi * (1.0 - xi)
        else:
            xi, eta = _normalized(grid.centers, grid)
            vals = amp * 16.0 * xi * (1.0 - xi) * eta * (1.0 - eta)
    else:
        raise ValueError(f"unknown initial profile {form!r}")
    if prm:
        raise ValueError(f"unused parameters {sorted(prm)} for form {form!r}")
    return vals


# ---------------------------------------------------------------------------
# scenarios


@dataclass
class RunPlan:
    """A validated scenario, ready to execute."""

    name: str
    seed: int
    spec: ProblemSpec
    dt: float
    level_ks: tuple
    fit_window: tuple | None
    bounds: str  # "none" | "fitted" | "given"
    bound_m: float | None
    bound_c0: float | None
    figures: bool
    structure_check: bool
    mu: float
    mu_ratio: float | None
    echo: dict


@dataclass
class Scenario:
    """Raw scenario sections; build() validates and produces a RunPlan."""

    sections: dict = field(default_factory=dict)

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def with_overrides(self, overrides: dict) -> "Scenario":
        merged = {s: dict(kv) for s, kv in self.sections.items()}
        for path, value in overrides.items():
            sec, key = path.split(".", 1)
            merged.setdefault(sec, {})[key] = str(value)
        return Scenario(merged)

    def build(self) -> RunPlan:
        errors = []

        def fetch(section, key, cast, default=None, required=False):
            raw = self.get(section, key)
            if raw is None:
                if required:
                    errors.append(f"[{section}] {key}: required key missing")
                return default
            try:
                return cast(raw)
            except (ValueError, TypeError) as exc:
                errors.append(f"[{section}] {key}: {exc}")
                return default

        name = self.get("scenario", "name", "unnamed")
        seed = fetch("scenario", "seed", int, default=0)
        kind = fetch("problem", "kind", str, required=True)
        p = fetch("problem", "p", float, required=True)
        cells = fetch("grid", "cells", int, required=True)
        dt = fetch("time", "dt", float, required=True)
        horizon = fetch("time", "horizon", float, required=True)

        grid = None
        if kind == "interval":
            a = fetch("grid", "a", float, default=0.0)
            b = fetch("grid", "b", float, default=1.0)
            dimension = 1
            if cells and b is not None and a is not None:
                try:
                    grid = interval_grid(a, b, cells)
                except ValueError as exc:
                    errors.append(f"[grid] a/b/cells: {exc}")
        elif kind == "radial":
            dimension = fetch("problem", "dimension", int, required=True)
            radius = fetch("grid", "radius", float, default=1.0)
            if cells and dimension:
                try:
                    grid = radial_grid(dimension, cells, radius)
                except ValueError as exc:
                    errors.append(f"[grid] radius/cells or [problem] dimension: {exc}")
        elif kind == "rect2d":
            dimension = 2
            nx = fetch("grid", "nx", int, default=cells)
            ny = fetch("grid", "ny", int, default=cells)
            lx = fetch("grid", "lx", float, default=1.0)
            ly = fetch("grid", "ly", float, default=1.0)
            try:
                grid = rect2d_grid(nx, ny, lx, ly)
            except (ValueError, TypeError) as exc:
                errors.append(f"[grid] nx/ny/lx/ly: {exc}")
        elif kind is not None:
            errors.append(f"[problem] kind: unknown grid kind {kind!r}")

        h_fn, h_sup = None, 1.0
        raw_h = self.get("fields", "h")
        if raw_h is not None:
            try:
                h_fn, h_sup = make_time_profile(raw_h)
            except ValueError as exc:
                errors.append(f"[fields] h: {exc}")

        mu = fetch("problem", "mu", float, default=0.0)
        mu_ratio = fetch("problem", "mu_ratio", float, default=None)
        if mu_ratio is not None and grid is not None and kind == "radial" and p is not None:
            try:
                mu = mu_ratio * nominal_mu_threshold(dimension, p, h_sup)
            except ValueError as exc:
                errors.append(f"[problem] mu_ratio: {exc}")
        elif mu_ratio is not None and kind != "radial":
            errors.append("[problem] mu_ratio: only meaningful on radial grids")
        if mu and mu < 0.0:
            errors.append("[problem] mu: must be nonnegative")

        fields = {}
        if grid is not None:
            for key in ("f", "b0", "H", "K"):
                raw = self.get("fields", key, "zero")
                try:
                    fields[key] = make_field(raw, grid)
                except ValueError as exc:
                    errors.append(f"[fields] {key}: {exc}")
                    fields[key] = None
            try:
                u0 = make_initial_profile(self.get("fields", "u0", "zero"), grid)
            except ValueError as exc:
                errors.append(f"[fields] u0: {exc}")
                u0 = np.zeros(grid.n_cells)

        level_ks = ()
        raw_ks = self.get("outputs", "level_ks")
        if raw_ks:
            try:
                level_ks = tuple(float(v) for v in raw_ks.split())
            except ValueError as exc:
                errors.append(f"[outputs] level_ks: {exc}")
        fit_window = None
        raw_window = self.get("outputs", "fit_window")
        if raw_window:
            try:
                lo, hi = (float(v) for v in raw_window.split())
                if not hi > lo:
                    raise ValueError("window must satisfy t_hi > t_lo")
                fit_window = (lo, hi)
            except ValueError as exc:
                errors.append(f"[outputs] fit_window: {exc}")
        bounds = self.get("outputs", "bounds", "none")
        if bounds not in ("none", "fitted", "given"):
            errors.append(f"[outputs] bounds: unknown mode {bounds!r}")
        bound_m = fetch("outputs", "bound_m", float, default=None)
        bound_c0 = fetch("outputs", "bound_c0", float, default=None)
        if bounds == "given" and (bound_m is None or bound_c0 is None):
            errors.append("[outputs] bound_m/bound_c0: required for bounds = given")
        figures = self.get("outputs", "figures", "true").lower() in ("1", "true", "yes")
        structure_check = self.get("outputs", "structure_check", "false").lower() in ("1", "true", "yes")

        if dt is not None and horizon is not None and dt is not None and not (0.0 < dt <= (horizon or 0.0)):
            errors.append("[time] dt: need 0 < dt <= horizon")

        spec = None
        if grid is not None and not errors:
            try:
                flux = model_flux(p, mu=mu or 0.0, h_of_t=h_fn, b0=fields["b0"])
                spec = ProblemSpec(
                    grid=grid, p=p, T=horizon, u0=u0, flux=flux,
                    f=fields["f"], H=fields["H"], K=fields["K"], name=name,
                )
            except ValueError as exc:
                errors.append(f"[problem] {exc}")
        if errors:
            raise ConfigError(errors)

        echo = {s: dict(kv) for s, kv in self.sections.items()}
        return RunPlan(
            name=name, seed=seed, spec=spec, dt=dt, level_ks=level_ks,
            fit_window=fit_window, bounds=bounds, bound_m=bound_m, bound_c0=bound_c0,
            figures=figures, structure_check=structure_check,
            mu=mu or 0.0, mu_ratio=mu_ratio, echo=echo,
        )


@dataclass
class SweepPlan:
    template: Scenario
    axis: str  # "section.key"
    values: list
    links: dict  # "section.key" -> list of parallel values

    def points(self):
        """Scenario per axis point, in sorted axis order."""
        order = np.argsort(np.asarray(self.values, dtype=float))
        for idx in order:
            overrides = {self.axis: self.values[idx]}
            for path, vals in self.links.items():
                overrides[path] = vals[idx]
            sc = self.template.with_overrides(overrides)
            base = sc.get("scenario", "name", "sweep")
            sc.sections.setdefault("scenario", {})["name"] = f"{base}_{self.axis.split('.')[1]}_{self.values[idx]}"
            yield float(self.values[idx]), sc


def load_config(path) -> Scenario:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path) as fh:
        parser.read_file(fh)
    sections = {s: dict(parser.items(s)) for s in parser.sections()}
    return Scenario(sections)


def parse_scenario(path) -> RunPlan:
    return load_config(path).build()


def parse_sweep(path) -> SweepPlan:
    scenario = load_config(path)
    sweep_raw = scenario.sections.pop("sweep", None)
    if sweep_raw is None:
        raise ConfigError(["[sweep]: section missing from sweep configuration"])
    errors = []
    axis = sweep_raw.get("axis")
    if not axis or "." not in axis:
        errors.append("[sweep] axis: must be a section.key path")
    try:
        values = [float(v) for v in sweep_raw.get("values", "").split()]
    except ValueError as exc:
        errors.append(f"[sweep] values: {exc}")
        values = []
    if not values:
        errors.append("[sweep] values: need at least one axis value")
    if any(not np.isfinite(v) for v in values):
        errors.append("[sweep] values: must be finite")
    links = {}
    for key, raw in sweep_raw.items():
        if key.startswith("link."):
            path = key[len("link.") :]
            vals = raw.split()
            if len(vals) != len(values):
                errors.append(f"[sweep] {key}: needs exactly {len(values)} entries")
            links[path] = vals
    if errors:
        raise ConfigError(errors)
    return SweepPlan(scenario, axis, values, links)
