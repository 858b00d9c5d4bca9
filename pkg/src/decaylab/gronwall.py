"""Scalar comparison ODEs and closed-form decay majorants for energy traces.

The workhorse is the Cauchy problem x' = -psi(t, x) + g(t), x(t0) = gamma(t0),
whose solution dominates any trace gamma satisfying the integral one-sided
estimate; on top of it sit the closed-form majorants for the two regimes
(negative power of time for p > 2, exponential for p <= 2), the initial-datum
free tail bound, and least-squares rate extraction from simulated traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.integrate

__all__ = [
    "GronwallError",
    "StiffnessFailure",
    "PremiseFailed",
    "HypothesisFailed",
    "DegenerateWindow",
    "PiecewiseConstant",
    "GFunction",
    "ComparisonODE",
    "BoundCurve",
    "power_psi",
    "solve_comparison",
    "closed_form_bound",
    "universal_bound",
    "exp_tail_bound",
    "comparison_check",
    "ComparisonReport",
    "majorant_decomposition",
    "fit_decay",
    "DecayFit",
]


class GronwallError(RuntimeError):
    pass


class StiffnessFailure(GronwallError):
    pass


class PremiseFailed(GronwallError):
    def __init__(self, interval, excess):
        self.interval, self.excess = interval, excess
        super().__init__(f"integral premise fails on {interval}: excess {excess:.3e}")


class HypothesisFailed(GronwallError):
    pass


class DegenerateWindow(GronwallError):
    pass


# ---------------------------------------------------------------------------
# forcing terms


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-open piecewise-constant forcing with exact integrals."""

    breaks: np.ndarray  # length k+1, increasing
    levels: np.ndarray  # length k

    def __post_init__(self):
        breaks = np.asarray(self.breaks, dtype=float)
        levels = np.asarray(self.levels, dtype=float)
        if breaks.size != levels.size + 1 or np.any(np.diff(breaks) <= 0):
            raise ValueError("need increasing breaks with one level per interval")
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "levels", levels)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, self.levels.size - 1)
        out = self.levels[idx]
        out = np.where((t < self.breaks[0]) | (t > self.breaks[-1]), 0.0, out)
        return out if out.ndim else float(out)

    def integral(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        lo = np.maximum(self.breaks[:-1], a)
        hi = np.minimum(self.breaks[1:], b)
        return float(np.sum(self.levels * np.maximum(hi - lo, 0.0)))

    def exp_convolution(self, rate: float, t: float, lower: float = 0.0) -> float:
        """int_lower^t e^{-rate (t-s)} g(s) ds, exact per interval."""
        if t <= lower:
            return 0.0
        lo = np.maximum(self.breaks[:-1], lower)
        hi = np.minimum(self.breaks[1:], t)
        mask = hi > lo
        if rate == 0.0:
            return float(np.sum(self.levels[mask] * (hi - lo)[mask]))
        terms = (np.exp(-rate * (t - hi[mask])) - np.exp(-rate * (t - lo[mask]))) / rate
        return float(np.sum(self.levels[mask] * terms))


@dataclass(frozen=True)
class GFunction:
    """Forcing sampled on a time mesh; linear interpolation off-mesh."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or np.any(values < 0.0):
            raise ValueError("need matching arrays with nonnegative values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        return np.interp(t, self.times, self.values, left=self.values[0], right=self.values[-1])

    def integral(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        grid = np.unique(np.concatenate([[a, b], self.times[(self.times > a) & (self.times < b)]]))
        return float(np.trapezoid(self(grid), grid))


def _integrate_g(g, a: float, b: float) -> float:
    if g is None or b <= a:
        return 0.0
    if hasattr(g, "integral"):
        return g.integral(a, b)
    val, _ = scipy.integrate.quad(g, a, b, limit=200)
    return val


def _exp_conv_g(g, rate: float, t: float, lower: float) -> float:
    if g is None or t <= lower:
        return 0.0
    if isinstance(g, PiecewiseConstant):
        return g.exp_convolution(rate, t, lower)
    val, _ = scipy.integrate.quad(lambda s: math.exp(-rate * (t - s)) * g(s), lower, t, limit=200)
    return val


# ---------------------------------------------------------------------------
# comparison problem


def power_psi(M: float, exponent: float) -> Callable:
    """Dissipation psi(t, x) = M max(x, 0)^exponent; vanishes on x <= 0."""
    if M < 0.0 or exponent <= 0.0:
        raise ValueError("need M >= 0 and a positive exponent")

    def psi(t, x):
        return M * max(x, 0.0) ** exponent

    return psi


@dataclass(frozen=True, eq=False)
class ComparisonODE:
    """x' = -psi(t, x) + g(t) with x(t0) = x0 >= 0."""

    psi: Callable
    g: object = None
    x0: float = 0.0
    t0: float = 0.0

    def __post_init__(self):
        if self.x0 < 0.0:
            raise ValueError("initial value must be nonnegative")

    def psi_vanishes_on_nonpositive(self, t_probe=(0.0, 0.5, 1.0)) -> bool:
        return all(self.psi(t, a) == 0.0 for t in t_probe for a in (0.0, -0.3, -1.0, -4.0))


@dataclass
class BoundCurve:
    """A comparison solution or closed-form majorant on a time mesh."""

    times: np.ndarray
    values: np.ndarray
    provenance: str  # numeric | closed_form_512 | closed_form_513 | universal_514 | exp_515

    def __call__(self, t):
        return np.interp(t, self.times, self.values)


def solve_comparison(ode: ComparisonODE, mesh, rtol: float = 1e-9) -> BoundCurve:
    """Integrate the comparison problem on the mesh with adaptive RK45.

    Piecewise-constant forcing is integrated segment by segment between its
    breakpoints so the jumps never degrade the local error control.  The
    output is clamped at zero from below only when psi vanishes on the
    nonpositive axis (then the exact solution is nonnegative and any
    undershoot is integrator noise).
    """
    mesh = np.asarray(mesh, dtype=float)
    if mesh.ndim != 1 or mesh.size < 2 or np.any(np.diff(mesh) <= 0):
        raise ValueError("mesh must be increasing with at least two points")
    if mesh[0] < ode.t0 - 1e-14:
        raise ValueError("mesh starts before the initial time")

    seg_pts = [ode.t0, float(mesh[-1])]
    if isinstance(ode.g, PiecewiseConstant):
        inner = ode.g.breaks[(ode.g.breaks > ode.t0) & (ode.g.breaks < mesh[-1])]
        seg_pts.extend(inner.tolist())
    segments = np.unique(np.asarray(seg_pts))

    def rhs(t, y):
        forcing = 0.0 if ode.g is None else float(np.asarray(ode.g(t), dtype=float))
        return [-ode.psi(t, y[0]) + forcing]

    values = np.empty(mesh.size)
    x = float(ode.x0)
    if abs(mesh[0] - ode.t0) <= 1e-14:
        values[0] = x
        filled = 1
    else:
        filled = 0
    for a, b in zip(segments[:-1], segments[1:]):
        wanted = mesh[(mesh > a + 1e-15) & (mesh <= b + 1e-15)]
        t_eval = np.unique(np.concatenate([wanted, [b]]))
        sol = scipy.integrate.solve_ivp(
            rhs, (a, b), [x], method="RK45", t_eval=t_eval, rtol=rtol, atol=1e-12
        )
        if not sol.success:
            raise StiffnessFailure(f"integration failed on [{a:g}, {b:g}]: {sol.message}")
        x = float(sol.y[0, -1])
        take = sol.y[0][np.isin(sol.t, wanted)]
        values[filled : filled + take.size] = take
        filled += take.size
    if ode.psi_vanishes_on_nonpositive():
        g_ok = True
        if ode.g is not None:
            g_ok = bool(np.all(np.asarray(ode.g(mesh)) >= 0.0))
        if g_ok:
            values = np.maximum(values, 0.0)
    return BoundCurve(mesh.copy(), values, "numeric")


# ---------------------------------------------------------------------------
# closed forms


def closed_form_bound(p: float, M: float, C0: float, x0: float, g, t, N: int | None = None):
    """Closed-form decay majorant for the comparison solution.

    p > 2: power branch  x0 / [1 + (p/2-1) M x0^{(p-2)/2} t]^{2/(p-2)}
           + C0 int_0^t g;
    p <= 2: exponential branch  x0 e^{-M t} + C0 int_0^t e^{-M(t-s)} g(s) ds.
    Evaluates at scalar or array t; t = 0 returns x0 exactly.
    """
    floor = 1.0 if N is None else 2.0 * N / (N + 2.0)
    if p <= floor:
        raise ValueError(f"exponent p={p} at or below the admissible floor {floor}")
    if x0 < 0.0 or M < 0.0:
        raise ValueError("need x0 >= 0 and M >= 0")
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(ts.size)
    for i, ti in enumerate(ts):
        if p > 2.0:
            nu = p / 2.0 - 1.0
            denom = (1.0 + nu * M * x0 ** ((p - 2.0) / 2.0) * ti) ** (2.0 / (p - 2.0))
            out[i] = x0 / denom + C0 * _integrate_g(g, 0.0, ti)
        else:
            out[i] = x0 * math.exp(-M * ti) + C0 * _exp_conv_g(g, M, ti, 0.0)
    return out if np.ndim(t) else float(out[0])


def universal_bound(p: float, M1: float, C0: float, g, t):
    """Initial-datum free tail majorant for the degenerate regime p > 2.

    [(p/2-1) M1]^{-2/(p-2)} t^{-2/(p-2)} + C0 int_{t/2}^t g; by design it
    takes no initial value, so it is structurally invariant under changes of
    the starting datum.
    """
    if p <= 2.0:
        raise ValueError("the universal bound needs p > 2")
    if M1 <= 0.0:
        raise ValueError("decay constant must be positive")
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0.0):
        raise ValueError("the universal bound needs t > 0")
    nu = p / 2.0 - 1.0
    expo = 2.0 / (p - 2.0)
    out = np.array([(nu * M1) ** (-expo) * ti ** (-expo) + C0 * _integrate_g(g, ti / 2.0, ti) for ti in ts])
    return out if np.ndim(t) else float(out[0])


def exp_tail_bound(M2: float, C0: float, x0: float, g, t, g_l1: float | None = None):
    """Split-rate exponential tail majorant for the regime p <= 2.

    (x0 + C0 ||g||_{L1}) e^{-M2 t / 2} + C0 int_{t/2}^t e^{-M2 (t-s)/2} g ds.
    g_l1 defaults to the integral of g over [0, max t].
    """
    if M2 <= 0.0:
        raise ValueError("decay constant must be positive")
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if g_l1 is None:
        g_l1 = _integrate_g(g, 0.0, float(np.max(ts)))
    rate = M2 / 2.0
    out = np.array(
        [(x0 + C0 * g_l1) * math.exp(-rate * ti) + C0 * _exp_conv_g(g, rate, ti, ti / 2.0) for ti in ts]
    )
    return out if np.ndim(t) else float(out[0])


# ---------------------------------------------------------------------------
# checks against traces


@dataclass
class ComparisonReport:
    passed: bool
    max_violation: float
    premise_margin: float
    curve: BoundCurve


def comparison_check(times, gamma, ode: ComparisonODE, premise_slack: float = 1e-8, tol: float = 1e-6) -> ComparisonReport:
    """Verify the one-sided integral premise on a trace, then the domination.

    Premise: gamma(t2) - gamma(t1) + int psi(t, gamma) dt <= int g dt on every
    mesh subinterval, equivalent to monotonicity of the accumulated defect
    (trapezoid quadrature, slack 1e-8).  If it fails, PremiseFailed names the
    worst interval and the conclusion is not asserted.  Otherwise the
    comparison solution from gamma(t0) is computed and gamma <= x + tol is
    reported with the largest violation.
    """
    times = np.asarray(times, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if times.shape != gamma.shape or times.size < 2:
        raise ValueError("need matching time/value arrays")
    psi_vals = np.array([ode.psi(t, x) for t, x in zip(times, gamma)])
    g_vals = np.zeros_like(times) if ode.g is None else np.asarray(ode.g(times), dtype=float) * np.ones_like(times)
    defect = gamma + _cumtrapz(psi_vals - g_vals, times)
    scale = max(1.0, float(np.max(np.abs(defect))))
    increments = np.diff(defect)
    worst = int(np.argmax(increments))
    margin = float(np.max(increments))
    if margin > premise_slack * scale:
        raise PremiseFailed((float(times[worst]), float(times[worst + 1])), margin)
    x = solve_comparison(
        ComparisonODE(psi=ode.psi, g=ode.g, x0=float(gamma[0]), t0=float(times[0])), times
    )
    violation = float(np.max(gamma - x.values))
    return ComparisonReport(violation <= tol, violation, margin, x)


def _cumtrapz(values, times):
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(times))
    return out


def majorant_decomposition(times, gamma, psi, g, tol: float = 1e-6):
    """Split the comparison majorant into a decaying core and a forcing tail.

    Requires psi(t, a) = 0 for a <= 0, g >= 0 and psi increasing in x
    (sampled).  Solves z' = -psi(t, z) from gamma(t0), checks z >= 0 and the
    sandwich gamma <= x <= z + int g on the mesh, and returns (z, tail).
    """
    times = np.asarray(times, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    probe = ComparisonODE(psi=psi, g=g, x0=float(gamma[0]), t0=float(times[0]))
    if not probe.psi_vanishes_on_nonpositive(t_probe=times[:: max(1, times.size // 4)]):
        raise HypothesisFailed("psi does not vanish on the nonpositive axis")
    g_vals = np.zeros_like(times) if g is None else np.asarray(g(times), dtype=float) * np.ones_like(times)
    if np.any(g_vals < 0.0):
        raise HypothesisFailed("forcing g takes negative values on the mesh")
    rng = np.random.default_rng(0)
    for t in times[:: max(1, times.size // 8)]:
        a, b = np.sort(rng.uniform(0.0, 10.0, size=2))
        if psi(t, b) < psi(t, a) - 1e-12:
            raise HypothesisFailed("psi is not increasing in its second argument")
    z = solve_comparison(ComparisonODE(psi=psi, g=None, x0=float(gamma[0]), t0=float(times[0])), times)
    z.provenance = "decaying_core"
    x = solve_comparison(probe, times)
    tail = _cumtrapz(g_vals, times)
    if np.min(z.values) < -tol:
        raise AssertionError("decaying core went negative")
    if np.max(gamma - x.values) > tol or np.max(x.values - (z.values + tail)) > tol:
        raise AssertionError("sandwich gamma <= x <= z + int g violated")

    def tail_fn(t):
        return np.interp(t, times, tail)

    return z, tail_fn


# ---------------------------------------------------------------------------
# rate fitting


@dataclass
class DecayFit:
    kind: str  # "power" or "exp"
    exponent: float  # slope of log y vs log t (power model)
    rate: float  # decay rate of e^{-rate t} (exp model)
    r_squared: float
    alt_r_squared: float
    window: tuple
    samples: int


def _linfit(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 and ss_res <= 1e-28 else 1.0 - ss_res / max(ss_tot, 1e-300)
    return slope, r2


def fit_decay(trace, window, values=None) -> DecayFit:
    """Fit power and exponential decay models to a trace on a time window.

    `trace` is either an object with times/l2_sq attributes or an array of
    times (then `values` holds the series).  Returns the better model by R^2;
    the power fit regresses log y on log t, the exponential fit log y on t.
    """
    if values is None:
        times, series = np.asarray(trace.times, float), np.asarray(trace.l2_sq, float)
    else:
        times, series = np.asarray(trace, float), np.asarray(values, float)
    t_lo, t_hi = window
    mask = (times >= t_lo) & (times <= t_hi) & (series > 0.0)
    if np.count_nonzero(mask) < 8:
        raise DegenerateWindow(f"only {np.count_nonzero(mask)} usable samples in {window}")
    t, y = times[mask], np.log(series[mask])
    exp_slope, exp_r2 = _linfit(t, y)
    pow_mask = t > 0.0
    if np.count_nonzero(pow_mask) >= 8:
        pow_slope, pow_r2 = _linfit(np.log(t[pow_mask]), y[pow_mask])
    else:
        pow_slope, pow_r2 = 0.0, -np.inf
    if pow_r2 >= exp_r2:
        return DecayFit("power", pow_slope, -exp_slope, pow_r2, exp_r2, (t_lo, t_hi), t.size)
    return DecayFit("exp", pow_slope, -exp_slope, exp_r2, pow_r2, (t_lo, t_hi), t.size)
