"""Implicit time integration of quasilinear parabolic problems.

The equation  u_t - div A(x,t,u,grad u) = f  with zero Dirichlet data is
marched by backward Euler.  The flux is the degenerate p-modulus plus an
optional lower-order drift  D(x,t) |u|^{p-2} u  directed along x/|x|, which is
upwinded (the drift transports toward the origin when D > 0).  Each implicit
step is solved by damped Newton on the regularized system to a fixed residual
tolerance; the discrete energy identity is then checked step by step at the
same resolution, Euler dissipation included, so the bookkeeping is exact up
to the solver leftover.

Also here: the step-by-step energy trace, the frozen-coefficient map and its
Picard fixed-point iteration, the coefficient-truncation scheme, and the
weak-type level-set diagnostics built on the profile functions phi / Phi and
the decreasing reciprocal Psi = 1/Phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from decaylab.grids import Grid, GridFunction, to_sampled
from decaylab.lorentz import sobolev_constant, unit_ball_volume, weak_norm

__all__ = [
    "NonConvergence",
    "MaxIterExceeded",
    "EnergyIdentityError",
    "QuasilinearFlux",
    "model_flux",
    "nominal_mu_threshold",
    "ProblemSpec",
    "model_problem",
    "EnergyTrace",
    "step",
    "solve",
    "frozen_solve",
    "picard_fixed_point",
    "PicardResult",
    "truncated_scheme",
    "TruncationReport",
    "PsiProfile",
    "psi_profile",
    "weak_type_m0",
    "weak_type_check",
    "WeakTypeReport",
    "check_flux_structure",
    "StructureReport",
    "dual_norm",
    "lp_space_time_distance",
    "build_g_values",
]


class NonConvergence(RuntimeError):
    """Inner nonlinear iteration failed; usually dt too large or flux too stiff."""

    def __init__(self, t, iterations, residual):
        self.t, self.iterations, self.residual = t, iterations, residual
        super().__init__(f"no convergence at t={t:g} after {iterations} iterations, residual={residual:.3e}")


class MaxIterExceeded(RuntimeError):
    """Fixed-point iteration did not reach tolerance; history is attached."""

    def __init__(self, residual_history):
        self.residual_history = list(residual_history)
        super().__init__(f"fixed point not reached, residuals={self.residual_history}")


class EnergyIdentityError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# flux


def _mod_coef(mod_sq, p, eps):
    return (mod_sq + eps * eps) ** ((p - 2.0) / 2.0)


def _phi(v, p, eps):
    """Regularized |v|^{p-2} v (odd, increasing)."""
    return _mod_coef(v * v, p, eps) * v


def _phi_prime(v, p, eps):
    s = v * v + eps * eps
    return s ** ((p - 2.0) / 2.0 - 1.0) * ((p - 1.0) * v * v + eps * eps)


@dataclass(frozen=True, eq=False)
class QuasilinearFlux:
    """Flux A(x,t,u,xi) = |xi|^{p-2} xi + D(x,t) |u|^{p-2} u * x/|x|.

    `drift` is the scalar coefficient D(position, t), or None for the pure
    p-modulus.  The declared structural constants are provable pointwise:
    with drift, Young's inequality gives coercivity constant alpha = 1/p' and
    growth companion b(x,t) = |D|^{1/(p-1)} (growth holds with equality,
    coercivity with room to spare); without drift, alpha = beta = 1 and
    b = 0.  `u_scale` rescales the u-argument (the lambda-family hook); 1 is
    the plain problem.
    """

    p: float
    drift: object = None
    eps: float = 1e-8
    u_scale: float = 1.0

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError("flux exponent must exceed 1")
        if not 0.0 < self.u_scale <= 1.0:
            raise ValueError("u_scale must lie in (0, 1]")

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def alpha(self) -> float:
        return 1.0 if self.drift is None else 1.0 - 1.0 / self.p

    @property
    def beta(self) -> float:
        return 1.0

    def b_struct(self, pos, t):
        """Growth coefficient of the structure conditions."""
        if self.drift is None:
            return np.zeros_like(np.asarray(pos, dtype=float))
        d = np.abs(np.asarray(self.drift(pos, t), dtype=float))
        return d ** (1.0 / (self.p - 1.0))

    def vector_eval(self, pos, t, u, xi):
        """Full flux vector at one sample point (structural checks)."""
        xi = np.asarray(xi, dtype=float)
        a = _mod_coef(float(xi @ xi), self.p, self.eps) * xi
        if self.drift is not None:
            direction = np.zeros_like(xi)
            direction[0] = 1.0
            d = float(self.drift(np.asarray([pos]), t)[0])
            a = a + d * _phi(self.u_scale * u, self.p, self.eps) * direction
        return a

    def with_truncated_drift(self, level: float) -> "QuasilinearFlux":
        """Flux with the drift coefficient clamped to [-level, level]."""
        if self.drift is None:
            return self
        base = self.drift

        def clamped(pos, t, _base=base, _m=float(level)):
            return np.clip(np.asarray(_base(pos, t), dtype=float), -_m, _m)

        return replace(self, drift=clamped)


def model_flux(p: float, mu: float = 0.0, h_of_t=None, b0=None, eps: float = 1e-8) -> QuasilinearFlux:
    """Model flux with drift coefficient D(x,t) = mu h(t)/|x| + b0(x,t)."""
    if mu < 0.0:
        raise ValueError("drift amplitude mu must be nonnegative")
    if mu == 0.0 and b0 is None:
        return QuasilinearFlux(p=p, eps=eps)
    h_fn = h_of_t if h_of_t is not None else (lambda t: 1.0)

    def drift(pos, t):
        pos = np.asarray(pos, dtype=float)
        out = np.zeros_like(pos)
        if mu > 0.0:
            out = out + mu * h_fn(t) / pos
        if b0 is not None:
            out = out + b0(pos, t)
        return out

    return QuasilinearFlux(p=p, drift=drift, eps=eps)


def nominal_mu_threshold(N: int, p: float, h_sup: float = 1.0) -> float:
    """Largest drift amplitude mu considered subcritical for the model.

    Derived from dist(mu h/|x|, L^inf) = mu sup|h| omega_N^{1/N} against the
    threshold alpha^{1/p}/S_{N,p} with the unit diffusion constant; the
    bookkeeping is exact for p = 2 (optimal Young split) and serves as the
    exploratory scale otherwise.
    """
    sc = sobolev_constant(N, p)
    return 1.0 / (sc.S_Np * unit_ball_volume(N) ** (1.0 / N) * h_sup)


# ---------------------------------------------------------------------------
# problem description


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """One Cauchy-Dirichlet problem: flux, data and horizon on a grid."""

    grid: Grid
    p: float
    T: float
    u0: np.ndarray
    flux: QuasilinearFlux
    f: object = None  # source f(position, t) or None
    H: object = None  # coercivity remainder field (position, t)
    K: object = None  # growth remainder field (position, t)
    name: str = ""

    def __post_init__(self):
        u0 = np.asarray(self.u0, dtype=float)
        if u0.shape != (self.grid.n_cells,):
            raise ValueError("u0 must have one value per grid cell")
        object.__setattr__(self, "u0", u0)
        if not self.T > 0.0:
            raise ValueError("horizon T must be positive")
        if self.flux.p != self.p:
            raise ValueError("flux exponent differs from problem exponent")
        N = self.grid.ndim_theory
        if N >= 2:
            if not self.p > 2.0 * N / (N + 2.0):
                raise ValueError(f"need p > 2N/(N+2), got p={self.p}, N={N}")
            # the drift-absorption theory needs the Sobolev window p < N
            if self.flux.drift is not None and not self.p < N:
                raise ValueError(f"drift problems need p < N, got p={self.p}, N={N}")
        elif not self.p > 1.0:
            raise ValueError("need p > 1 on interval domains")
        if self.flux.drift is not None and self.grid.kind == "rect2d":
            raise ValueError("drift terms are only exercised on 1d and radial grids")


def model_problem(grid, p, T, u0_values, mu=0.0, h_of_t=None, b0=None, f=None, H=None, K=None, name=""):
    flux = model_flux(p, mu=mu, h_of_t=h_of_t, b0=b0)
    return ProblemSpec(grid=grid, p=p, T=T, u0=np.asarray(u0_values, float), flux=flux, f=f, H=H, K=K, name=name)


# ---------------------------------------------------------------------------
# face assembly (single source of truth for stepping and energy bookkeeping)


def _face_modulus_sq(grid: Grid, g: np.ndarray):
    if grid.kind != "rect2d":
        return g * g
    ny, nx = grid.shape2d
    nxf = ny * (nx + 1)
    gx = g[:nxf].reshape(ny, nx + 1)
    gy = g[nxf:].reshape(ny + 1, nx)
    gxc = 0.5 * (gx[:, :-1] + gx[:, 1:])  # per-cell averages
    gyc = 0.5 * (gy[:-1, :] + gy[1:, :])
    pad_y = np.pad(gyc, ((0, 0), (1, 1)), mode="edge")
    cross_x = 0.5 * (pad_y[:, :-1] + pad_y[:, 1:])  # at x-faces
    pad_x = np.pad(gxc, ((1, 1), (0, 0)), mode="edge")
    cross_y = 0.5 * (pad_x[:-1, :] + pad_x[1:, :])  # at y-faces
    mod = np.concatenate([(gx * gx + cross_x * cross_x).ravel(), (gy * gy + cross_y * cross_y).ravel()])
    return mod


def _drift_data(spec: ProblemSpec, t: float):
    """Face drift coefficient and the upwind cell per face (-1: boundary)."""
    grid, flux = spec.grid, spec.flux
    d = np.asarray(flux.drift(grid.face_positions, t), dtype=float) * np.ones(grid.face_weights.size)
    up = np.where(d >= 0.0, grid.upwind_outer, grid.upwind_inner)
    return d, up


def _upwind_matrix(grid: Grid, up: np.ndarray) -> sp.csr_matrix:
    rows = np.flatnonzero(up >= 0)
    return sp.csr_matrix(
        (np.ones(rows.size), (rows, up[rows])), shape=(grid.face_weights.size, grid.n_cells)
    )


def _face_flux(spec: ProblemSpec, u: np.ndarray, t: float, drift_u: np.ndarray | None = None):
    """Face flux values A_f plus the pieces needed for energies and Jacobians.

    drift_u overrides the state feeding the lower-order term (the frozen map);
    by default the same u enters both slots.
    """
    grid, flux = spec.grid, spec.flux
    g = grid.grad_op @ u
    mod_sq = _face_modulus_sq(grid, g)
    a_coef = _mod_coef(mod_sq, spec.p, flux.eps)
    a = a_coef * g
    dcoef = upw = None
    if flux.drift is not None:
        dcoef, up = _drift_data(spec, t)
        upw = _upwind_matrix(grid, up)
        ud = u if drift_u is None else drift_u
        a = a + dcoef * _phi(flux.u_scale * (upw @ ud), spec.p, flux.eps)
    return a, g, mod_sq, a_coef, dcoef, upw


def _grad_p_quadrature(grid: Grid, mod_sq: np.ndarray, p: float) -> float:
    total = float(np.sum(grid.face_weights * mod_sq ** (p / 2.0)))
    return 0.5 * total if grid.kind == "rect2d" else total


def _source_values(spec: ProblemSpec, t: float) -> np.ndarray:
    if spec.f is None:
        return np.zeros(spec.grid.n_cells)
    return spec.grid.sample(spec.f, t)


def _residual(spec, u, u_prev, t, dt, f_vals, drift_u=None):
    grid = spec.grid
    a, g, mod_sq, a_coef, dcoef, upw = _face_flux(spec, u, t, drift_u)
    r = grid.cell_measures * (u - u_prev) + dt * (grid.grad_op.T @ (grid.face_weights * a)) - dt * grid.cell_measures * f_vals
    rnorm = math.sqrt(float(np.sum(r * r / grid.cell_measures)))
    return r, rnorm, (a, g, mod_sq, a_coef, dcoef, upw)


def _implicit_step(spec, u_prev, t_new, dt, drift_u=None, tol=1e-10, max_inner=50):
    """Solve one backward-Euler stage to residual tolerance; returns the state."""
    grid, flux = spec.grid, spec.flux
    f_vals = _source_values(spec, t_new)
    u = u_prev.copy()

    if grid.kind == "rect2d":
        # frozen-modulus iteration; the linear solve is symmetric 5-point
        M = sp.diags(grid.cell_measures)
        rhs = grid.cell_measures * u_prev + dt * grid.cell_measures * f_vals
        for it in range(max_inner):
            r, rnorm, parts = _residual(spec, u, u_prev, t_new, dt, f_vals, drift_u)
            if rnorm <= tol:
                return u, it
            a_coef = parts[3]
            K = grid.grad_op.T @ sp.diags(grid.face_weights * a_coef) @ grid.grad_op
            u = spla.spsolve((M + dt * K).tocsc(), rhs)
        raise NonConvergence(t_new, max_inner, rnorm)

    for it in range(max_inner):
        r, rnorm, parts = _residual(spec, u, u_prev, t_new, dt, f_vals, drift_u)
        if rnorm <= tol:
            return u, it
        a, g, mod_sq, a_coef, dcoef, upw = parts
        W = sp.diags(grid.face_weights * _phi_prime(g, spec.p, flux.eps))
        jac = sp.diags(grid.cell_measures) + dt * (grid.grad_op.T @ W @ grid.grad_op)
        if dcoef is not None and drift_u is None:
            uval = flux.u_scale * (upw @ u)
            dphi = flux.u_scale * _phi_prime(uval, spec.p, flux.eps)
            jac = jac + dt * (grid.grad_op.T @ sp.diags(grid.face_weights * dcoef * dphi) @ upw)
        delta = spla.spsolve(jac.tocsc(), -r)
        s = 1.0
        for _ in range(30):
            trial = u + s * delta
            _, r_trial, _ = _residual(spec, trial, u_prev, t_new, dt, f_vals, drift_u)
            if r_trial < rnorm or r_trial <= tol:
                u = trial
                break
            s *= 0.5
        else:
            u = u + s * delta  # tiny nudge; let the next Jacobian retry
    _, rnorm, _ = _residual(spec, u, u_prev, t_new, dt, f_vals, drift_u)
    if rnorm <= tol:
        return u, max_inner
    raise NonConvergence(t_new, max_inner, rnorm)


def step(u_prev: GridFunction, t: float, dt: float, spec: ProblemSpec, tol: float = 1e-10, max_inner: int = 50) -> GridFunction:
    """One backward-Euler step from time t to t + dt."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    u_new, _ = _implicit_step(spec, np.asarray(u_prev.values, float), t + dt, dt, tol=tol, max_inner=max_inner)
    return GridFunction(spec.grid, u_new)


# ---------------------------------------------------------------------------
# trace recording


@dataclass
class EnergyTrace:
    """Time series of the discrete energy observables along one run."""

    times: np.ndarray
    l2_sq: np.ndarray
    grad_p: np.ndarray
    flux_work: np.ndarray
    source_work: np.ndarray
    euler_dissipation: np.ndarray
    energy_residuals: np.ndarray
    level_sets: dict = field(default_factory=dict)
    dt: float = 0.0

    @property
    def sup_l2(self) -> float:
        return float(np.max(self.l2_sq))

    def grad_p_integral(self) -> float:
        return float(np.trapezoid(self.grad_p, self.times))

    def apriori_value(self) -> float:
        """sup_t ||u||^2 + int_0^T int |grad u|^p, the a priori observable."""
        return self.sup_l2 + self.grad_p_integral()

    def columns(self):
        return {
            "t": self.times,
            "l2_sq": self.l2_sq,
            "grad_p": self.grad_p,
            "flux_work": self.flux_work,
            "source_work": self.source_work,
            "euler_dissipation": self.euler_dissipation,
            "energy_residual": self.energy_residuals,
        }


def _time_mesh(T: float, dt: float) -> np.ndarray:
    n_full = int(math.floor(T / dt + 1e-12))
    times = dt * np.arange(n_full + 1)
    if T - times[-1] > 1e-12 * max(T, dt):
        times = np.append(times, T)  # shortened last step
    return times


def _trace_entries(spec, u, t, drift_u=None):
    grid = spec.grid
    a, g, mod_sq, *_ = _face_flux(spec, u, t, drift_u)
    f_vals = _source_values(spec, t)
    l2 = float(np.sum(grid.cell_measures * u * u))
    gp = _grad_p_quadrature(grid, mod_sq, spec.p)
    fw = float(np.sum(grid.face_weights * a * g))
    sw = float(np.sum(grid.cell_measures * f_vals * u))
    return l2, gp, fw, sw


def _march(spec, dt, level_ks=(), keep_states=False, inner_tol=1e-10, check_energy=True, frozen=None):
    """Shared driver behind solve() and frozen_solve()."""
    grid = spec.grid
    times = _time_mesh(spec.T, dt)
    n = times.size
    u = spec.u0.copy()
    lam = spec.flux.u_scale

    l2 = np.zeros(n)
    gp = np.zeros(n)
    fw = np.zeros(n)
    sw = np.zeros(n)
    diss = np.zeros(n)
    resid = np.zeros(n)
    sup_level = {float(k): 0.0 for k in level_ks}
    states = [u.copy()] if keep_states else None

    def record(idx, u_curr, drift_u):
        l2[idx], gp[idx], fw[idx], sw[idx] = _trace_entries(spec, u_curr, times[idx], drift_u)
        for k in sup_level:
            lam_k = float(grid.cell_measures[np.abs(lam * u_curr) > k].sum())
            sup_level[k] = max(sup_level[k], lam_k)

    record(0, u, frozen[0] if frozen is not None else None)
    for idx in range(1, n):
        dt_n = times[idx] - times[idx - 1]
        drift_u = frozen[idx] if frozen is not None else None
        u_new, _ = _implicit_step(spec, u, times[idx], dt_n, drift_u=drift_u, tol=inner_tol)
        record(idx, u_new, drift_u)
        diss[idx] = 0.5 * float(np.sum(grid.cell_measures * (u_new - u) ** 2))
        resid[idx] = 0.5 * (l2[idx] - l2[idx - 1]) + diss[idx] + dt_n * (fw[idx] - sw[idx])
        if check_energy:
            scale = max(
                abs(0.5 * (l2[idx] - l2[idx - 1])),
                diss[idx],
                dt_n * abs(fw[idx]),
                dt_n * abs(sw[idx]),
            )
            # the defect can never undercut the inner-solver leftover u . r
            leftover = 10.0 * inner_tol * (1.0 + math.sqrt(l2[idx]))
            if abs(resid[idx]) > 1e-6 * scale + leftover:
                raise EnergyIdentityError(
                    f"discrete energy identity violated at t={times[idx]:g}: "
                    f"defect {resid[idx]:.3e} vs scale {scale:.3e}"
                )
        u = u_new
        if keep_states:
            states.append(u.copy())

    trace = EnergyTrace(times, l2, gp, fw, sw, diss, resid, sup_level, dt)
    if keep_states:
        return trace, np.asarray(states)
    return trace


def solve(spec: ProblemSpec, dt: float, level_ks=(), keep_states=False, inner_tol=1e-10, check_energy=True):
    """March the problem over [0, T] and record the energy trace.

    If dt does not divide T the last step is shortened.  The discrete energy
    identity (with the backward-Euler dissipation term) is asserted at every
    step to 1e-6 relative.  level_ks requests sup_t |{|u(t)| > k}| tracking.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    return _march(spec, dt, level_ks=level_ks, keep_states=keep_states, inner_tol=inner_tol, check_energy=check_energy)


def frozen_solve(v_states: np.ndarray, spec: ProblemSpec, dt: float, inner_tol=1e-10, level_ks=()):
    """Solve with the lower-order argument frozen at the supplied time series.

    v_states must hold one state per time-mesh point; the step toward t_{n}
    feeds v_states[n] to the drift term while the gradient slot stays
    implicit, which is exactly the linearized map of the fixed-point scheme.
    Returns (states, trace).
    """
    times = _time_mesh(spec.T, dt)
    v_states = np.asarray(v_states, dtype=float)
    if v_states.shape != (times.size, spec.grid.n_cells):
        raise ValueError("frozen states must match the time mesh and grid")
    trace, states = _march(spec, dt, level_ks=level_ks, keep_states=True, inner_tol=inner_tol, frozen=v_states)
    return states, trace


def lp_space_time_distance(grid: Grid, times: np.ndarray, states_a, states_b, p: float) -> float:
    """L^p norm over the space-time cylinder of the difference of two runs."""
    diff = np.asarray(states_a, float) - np.asarray(states_b, float)
    dts = np.diff(times)
    slabs = np.sum(np.abs(diff[1:]) ** p * grid.cell_measures[None, :], axis=1)
    return float(np.sum(dts * slabs) ** (1.0 / p))


@dataclass
class PicardResult:
    states: np.ndarray
    iterations: int
    residual_history: list
    apriori_values: list
    trace: EnergyTrace


def picard_fixed_point(spec: ProblemSpec, dt: float, tol: float = 1e-8, max_iter: int = 25) -> PicardResult:
    """Iterate the frozen-coefficient map from the zero series to a fixed point.

    Convergence is declared on the L^p(space-time) distance of successive
    iterates.  Raises MaxIterExceeded with the residual history otherwise;
    existence theory guarantees a fixed point, not that this iteration finds
    it, so failure is reported rather than masked.
    """
    times = _time_mesh(spec.T, dt)
    v = np.zeros((times.size, spec.grid.n_cells))
    history, apriori = [], []
    for it in range(1, max_iter + 1):
        v_next, trace = frozen_solve(v, spec, dt)
        dist = lp_space_time_distance(spec.grid, times, v_next, v, spec.p)
        history.append(dist)
        apriori.append(trace.apriori_value())
        v = v_next
        if dist <= tol:
            return PicardResult(v, it, history, apriori, trace)
    raise MaxIterExceeded(history)


@dataclass
class TruncationReport:
    levels: list
    traces: list
    successive_distances: list
    apriori_values: list


def truncated_scheme(spec: ProblemSpec, dt: float, levels) -> TruncationReport:
    """Solve with the drift coefficient truncated at each level.

    Levels must increase; the report carries the traces, the a priori
    observables and the L^p(space-time) distances between successive
    solutions (the empirical Cauchy property of the approximation scheme).
    """
    levels = [float(n) for n in levels]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("truncation levels must increase")
    times = _time_mesh(spec.T, dt)
    traces, states_list = [], []
    for n in levels:
        spec_n = replace(spec, flux=spec.flux.with_truncated_drift(n))
        trace, states = solve(spec_n, dt, keep_states=True)
        traces.append(trace)
        states_list.append(states)
    dists = [
        lp_space_time_distance(spec.grid, times, a, b, spec.p)
        for a, b in zip(states_list, states_list[1:])
    ]
    return TruncationReport(levels, traces, dists, [t.apriori_value() for t in traces])


# ---------------------------------------------------------------------------
# weak-type level-set machinery


@dataclass(frozen=True)
class PsiProfile:
    """The test profile phi, its primitive Phi, and Psi = 1/Phi.

    phi(w) = sign(w) [1 - (1+|w|)^{1-p}] / (p-1) is odd, increasing and
    bounded by 1/(p-1); Phi(w) = int_0^{|w|} phi has the closed form used
    here and satisfies Phi(k) <= k^2/2.  Psi is the decreasing reciprocal
    1/Phi on (0, inf), the weight in the level-set bound; the monotone
    inverse of Phi is also exposed (bisection) for the profile diagnostics.
    """

    p: float

    def phi(self, w):
        w = np.asarray(w, dtype=float)
        return np.sign(w) * (1.0 - (1.0 + np.abs(w)) ** (1.0 - self.p)) / (self.p - 1.0)

    def big_phi(self, w):
        w = np.abs(np.asarray(w, dtype=float))
        if self.p == 2.0:
            return w - np.log1p(w)
        inner = ((1.0 + w) ** (2.0 - self.p) - 1.0) / (2.0 - self.p)
        return (w - inner) / (self.p - 1.0)

    def psi(self, k):
        k = np.asarray(k, dtype=float)
        if np.any(k <= 0.0):
            raise ValueError("psi is defined on positive levels only")
        return 1.0 / self.big_phi(k)

    def big_phi_inverse(self, y: float, tol: float = 1e-12) -> float:
        """Monotone bisection inverse of Phi restricted to (0, inf)."""
        if y < 0.0:
            raise ValueError("Phi takes nonnegative values")
        if y == 0.0:
            return 0.0
        hi = 1.0
        while self.big_phi(hi) < y:
            hi *= 2.0
        lo = 0.0
        while hi - lo > tol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if self.big_phi(mid) < y:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def psi_profile(p: float) -> PsiProfile:
    if not p > 1.0:
        raise ValueError("profile exponent must exceed 1")
    return PsiProfile(p)


def _capped_time_mesh(T: float, dt: float, cap: int = 65) -> np.ndarray:
    times = _time_mesh(T, dt)
    if times.size <= cap:
        return times
    idx = np.unique(np.linspace(0, times.size - 1, cap).astype(int))
    return times[idx]


def weak_type_m0(spec: ProblemSpec, dt: float) -> float:
    """Data constant of the level-set bound, from discrete norms of the inputs.

    M0 = 1/2 ||u0||_2^2 + ||H||_{L1(Q)} + ||b||^p_{Lp(Q)}
         + alpha^{-1/(p-1)} ||f||^{p'}_{Lp'(0,T; W^{-1,p'})},
    with time integrals on a capped submesh (trapezoid rule).
    """
    grid, p = spec.grid, spec.p
    m0 = 0.5 * float(np.sum(grid.cell_measures * spec.u0**2))
    times = _capped_time_mesh(spec.T, dt)
    if spec.H is not None:
        vals = [float(np.sum(grid.cell_measures * np.abs(grid.sample(spec.H, t)))) for t in times]
        m0 += float(np.trapezoid(vals, times))
    bvals = [float(np.sum(grid.cell_measures * spec.flux.b_struct(grid.centers, t) ** p)) for t in times]
    m0 += float(np.trapezoid(bvals, times))
    if spec.f is not None:
        pc = p / (p - 1.0)
        fvals = [dual_norm(grid, _source_values(spec, t), p) ** pc for t in times]
        m0 += spec.flux.alpha ** (-1.0 / (p - 1.0)) * float(np.trapezoid(fvals, times))
    return m0


@dataclass
class WeakTypeReport:
    ks: list
    bounds: list
    observed: list
    margins: list
    passed: bool


def weak_type_check(trace: EnergyTrace, psi: PsiProfile, m0: float, ks) -> WeakTypeReport:
    """Compare recorded superlevel suprema against the bound Psi(k) M0."""
    ks = [float(k) for k in ks]
    missing = [k for k in ks if k not in trace.level_sets]
    if missing:
        raise ValueError(f"trace did not record level sets at {missing}")
    bounds = [float(psi.psi(k)) * m0 for k in ks]
    observed = [trace.level_sets[k] for k in ks]
    margins = [b - o for b, o in zip(bounds, observed)]
    return WeakTypeReport(ks, bounds, observed, margins, all(m >= -1e-6 for m in margins))


# ---------------------------------------------------------------------------
# structure sampling


@dataclass
class StructureReport:
    coercivity_margin: float
    growth_margin: float
    monotonicity_min: float
    draws: int

    @property
    def passed(self) -> bool:
        return self.coercivity_margin >= -1e-6 and self.growth_margin >= -1e-6 and self.monotonicity_min > 0.0


def check_flux_structure(flux: QuasilinearFlux, spec_like, rng, n_draws: int = 10000, t_max: float = 1.0) -> StructureReport:
    """Random-sampling audit of the declared structure constants.

    Draws (x, t, u, xi, eta) and checks coercivity, growth and strict
    monotonicity pointwise against the declared alpha, beta, b, H, K.
    spec_like supplies the position range (a grid or an (rmin, rmax) pair).
    """
    if hasattr(spec_like, "centers"):
        rmin = float(np.min(spec_like.centers)) if spec_like.kind != "rect2d" else 0.01
        rmax = float(np.max(spec_like.centers)) if spec_like.kind != "rect2d" else 1.0
        ndim = max(spec_like.ndim_theory, 1)
    else:
        rmin, rmax = spec_like
        ndim = 3
    p = flux.p
    coer = math.inf
    grow = math.inf
    mono = math.inf
    for _ in range(n_draws):
        x = rng.uniform(rmin, rmax)
        t = rng.uniform(0.0, t_max)
        u = rng.uniform(-5.0, 5.0)
        xi = rng.uniform(-3.0, 3.0, size=ndim)
        eta = rng.uniform(-3.0, 3.0, size=ndim)
        a = flux.vector_eval(x, t, u, xi)
        b = float(flux.b_struct(np.asarray([x]), t)[0])
        nxi = float(np.linalg.norm(xi))
        coer = min(coer, float(a @ xi) - flux.alpha * nxi**p + (b * abs(u)) ** p)
        grow = min(
            grow,
            flux.beta * nxi ** (p - 1.0) + (b * abs(u)) ** (p - 1.0) - float(np.linalg.norm(a)),
        )
        if float(np.linalg.norm(xi - eta)) > 1e-12:
            a_eta = flux.vector_eval(x, t, u, eta)
            mono = min(mono, float((a - a_eta) @ (xi - eta)))
    return StructureReport(coer, grow, mono, n_draws)


# ---------------------------------------------------------------------------
# negative-norm of sources and the comparison forcing


def dual_norm(grid: Grid, f_values: np.ndarray, p: float, tol: float = 1e-10) -> float:
    """Discrete W^{-1,p'} norm of a nodal source.

    Solves -div(|grad w|^{p-2} grad w) = f on the grid and returns
    |w|_{W^{1,p}_0}^{p-1}, which realizes sup <f,v>/|v|_{1,p} discretely.
    A small mass continuation stabilizes the degenerate p > 2 case.
    """
    f_values = np.asarray(f_values, dtype=float)
    if not np.any(f_values):
        return 0.0
    W = sp.diags(grid.face_weights)
    K2 = (grid.grad_op.T @ W @ grid.grad_op).tocsc()
    rhs = grid.cell_measures * f_values
    w = spla.spsolve(K2, rhs)
    if p != 2.0:
        eps = 1e-8 if p < 2.0 else 1e-6
        for sigma in (1.0, 1e-3, 0.0):
            M = sp.diags(sigma * grid.cell_measures)
            for _ in range(80):
                g = grid.grad_op @ w
                a = _mod_coef(g * g, p, eps) * g
                r = sigma * grid.cell_measures * w + grid.grad_op.T @ (grid.face_weights * a) - rhs
                rnorm = math.sqrt(float(np.sum(r * r / grid.cell_measures)))
                if rnorm <= max(tol, 1e-12 * float(np.abs(rhs).max())):
                    break
                Wp = sp.diags(grid.face_weights * _phi_prime(g, p, eps))
                jac = (M + grid.grad_op.T @ Wp @ grid.grad_op).tocsc()
                delta = spla.spsolve(jac, -r)
                s = 1.0
                for _ in range(25):
                    trial = w + s * delta
                    gt = grid.grad_op @ trial
                    at = _mod_coef(gt * gt, p, eps) * gt
                    rt = sigma * grid.cell_measures * trial + grid.grad_op.T @ (grid.face_weights * at) - rhs
                    if math.sqrt(float(np.sum(rt * rt / grid.cell_measures))) < rnorm:
                        w = trial
                        break
                    s *= 0.5
                else:
                    break
    g = grid.grad_op @ w
    seminorm_p = float(np.sum(grid.face_weights * np.abs(g) ** p))
    return seminorm_p ** ((p - 1.0) / p)


def build_g_values(spec: ProblemSpec, times) -> np.ndarray:
    """Forcing g(t) = ||f(t)||^{p'}_{W^{-1,p'}} + ||H(t)||^p_p + ||b(t)||^p_{N,inf}.

    The weak norm of the drift growth coefficient is taken on the grid via
    the sampled-cell bridge; it requires a dimension N >= 2 grid whenever the
    coefficient is nonzero.
    """
    grid, p = spec.grid, spec.p
    times = np.asarray(times, dtype=float)
    out = np.zeros(times.size)
    pc = p / (p - 1.0)
    for i, t in enumerate(times):
        val = 0.0
        if spec.f is not None:
            val += dual_norm(grid, _source_values(spec, t), p) ** pc
        if spec.H is not None:
            val += float(np.sum(grid.cell_measures * np.abs(grid.sample(spec.H, t)) ** p))
        b_vals = spec.flux.b_struct(grid.centers, t) * np.ones(grid.n_cells)
        if np.any(b_vals):
            if grid.ndim_theory < 2:
                raise ValueError("weak-L^N norms of the drift need a dimension >= 2 grid")
            b_sampled = to_sampled(GridFunction(grid, b_vals))
            val += weak_norm(b_sampled, float(grid.ndim_theory)) ** p
        out[i] = val
    return out
