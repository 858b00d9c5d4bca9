"""Structured grids with homogeneous Dirichlet boundary and discrete calculus.

Three cell-centered grid kinds: a 1d interval, a radial reduction of a ball in
R^N (shell-volume weighted, no node at the origin so singular coefficients
like 1/|x| stay finite), and a 2d rectangle.  Each grid precomputes a sparse
face-gradient operator G and face weights w such that the discrete pairing

    sum_f w_f A_f (G v)_f  =  - sum_i v_i m_i (div A)_i

holds exactly for any face flux A and any grid function v with zero trace.
The PDE solver, the energy bookkeeping and the eigenvalue helpers all run on
this one adjoint pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from decaylab.lorentz import SampledFunction, unit_ball_volume

__all__ = [
    "Grid",
    "GridFunction",
    "interval_grid",
    "radial_grid",
    "rect2d_grid",
    "gradient",
    "lp_norm",
    "w1p_seminorm",
    "l2_norm_sq",
    "dirichlet_seminorm",
    "to_sampled",
    "smallest_dirichlet_eigenvalue",
    "poincare_constant",
]


@dataclass(frozen=True, eq=False)
class Grid:
    kind: str
    ndim_theory: int
    centers: np.ndarray
    cell_measures: np.ndarray
    h: float
    domain_measure: float
    grad_op: sp.csr_matrix
    face_weights: np.ndarray
    face_positions: np.ndarray
    face_areas: np.ndarray | None = None
    upwind_inner: np.ndarray | None = None
    upwind_outer: np.ndarray | None = None
    shape2d: tuple[int, int] | None = None
    extent: tuple = ()

    @property
    def n_cells(self) -> int:
        return self.cell_measures.size

    def function(self, values) -> "GridFunction":
        return GridFunction(self, np.asarray(values, dtype=float))

    def sample(self, fn, t: float = 0.0) -> np.ndarray:
        """Evaluate a coefficient callable fn(position, t) at cell centers."""
        return np.asarray(fn(self.centers, t), dtype=float) * np.ones(self.n_cells)

    def sample_faces(self, fn, t: float = 0.0) -> np.ndarray:
        return np.asarray(fn(self.face_positions, t), dtype=float) * np.ones(self.face_weights.size)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values on a grid; the zero Dirichlet trace is implicit."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_cells,):
            raise ValueError("values must match the number of grid cells")
        object.__setattr__(self, "values", values)


def _oned_grid(kind, n, h, face_r, centers, areas, measures, ndim, extent):
    """Shared face machinery for interval and radial grids."""
    rows, cols, data = [], [], []
    spacing = np.full(n + 1, h)
    for j in range(n + 1):
        if j == 0:
            if kind == "interval":
                spacing[j] = h / 2.0
                rows.append(j), cols.append(0), data.append(1.0 / spacing[j])
            # radial origin face has zero area; gradient row stays empty
        elif j == n:
            spacing[j] = h / 2.0
            rows.append(j), cols.append(n - 1), data.append(-1.0 / spacing[j])
        else:
            rows.append(j), cols.append(j), data.append(1.0 / h)
            rows.append(j), cols.append(j - 1), data.append(-1.0 / h)
    grad = sp.csr_matrix((data, (rows, cols)), shape=(n + 1, n))
    weights = areas * spacing
    inner = np.arange(-1, n)
    outer = np.concatenate([np.arange(n), [-1]])
    positions = face_r.copy()
    if kind == "radial":
        positions[0] = h / 4.0  # zero-area face: value nullified by weight 0
    return Grid(
        kind=kind,
        ndim_theory=ndim,
        centers=centers,
        cell_measures=measures,
        h=h,
        domain_measure=float(measures.sum()),
        grad_op=grad,
        face_weights=weights,
        face_positions=positions,
        face_areas=areas,
        upwind_inner=inner,
        upwind_outer=outer,
        extent=extent,
    )


def interval_grid(a: float, b: float, n: int) -> Grid:
    if not b > a or n < 2:
        raise ValueError("need b > a and at least 2 cells")
    h = (b - a) / n
    faces = a + np.arange(n + 1) * h
    centers = a + (np.arange(n) + 0.5) * h
    return _oned_grid(
        "interval", n, h, faces, centers, np.ones(n + 1), np.full(n, h), 1, (a, b)
    )


def radial_grid(N: int, n: int, radius: float = 1.0) -> Grid:
    """Radial grid on the ball of R^N; cells are spherical shells."""
    if N < 2 or n < 2 or not radius > 0:
        raise ValueError("need N >= 2, radius > 0 and at least 2 cells")
    h = radius / n
    faces = np.arange(n + 1) * h
    centers = (np.arange(n) + 0.5) * h
    omega = unit_ball_volume(N)
    measures = omega * (faces[1:] ** N - faces[:-1] ** N)
    areas = N * omega * faces ** (N - 1)
    return _oned_grid("radial", n, h, faces, centers, areas, measures, N, (0.0, radius))


def rect2d_grid(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0) -> Grid:
    if nx < 2 or ny < 2 or not (lx > 0 and ly > 0):
        raise ValueError("need at least 2x2 cells and positive side lengths")
    hx, hy = lx / nx, ly / ny
    xc = (np.arange(nx) + 0.5) * hx
    yc = (np.arange(ny) + 0.5) * hy
    X, Y = np.meshgrid(xc, yc)  # shape (ny, nx)
    centers = np.column_stack([X.ravel(), Y.ravel()])
    n = nx * ny
    measures = np.full(n, hx * hy)

    def cell(iy, ix):
        return iy * nx + ix

    rows, cols, data, wlist, poslist = [], [], [], [], []
    face = 0
    # x-faces, shape (ny, nx + 1)
    for iy in range(ny):
        for ix in range(nx + 1):
            if ix == 0:
                rows.append(face), cols.append(cell(iy, 0)), data.append(2.0 / hx)
                wlist.append(hx * hy / 2.0)
            elif ix == nx:
                rows.append(face), cols.append(cell(iy, nx - 1)), data.append(-2.0 / hx)
                wlist.append(hx * hy / 2.0)
            else:
                rows.append(face), cols.append(cell(iy, ix)), data.append(1.0 / hx)
                rows.append(face), cols.append(cell(iy, ix - 1)), data.append(-1.0 / hx)
                wlist.append(hx * hy)
            poslist.append((ix * hx, (iy + 0.5) * hy))
            face += 1
    # y-faces, shape (ny + 1, nx)
    for iy in range(ny + 1):
        for ix in range(nx):
            if iy == 0:
                rows.append(face), cols.append(cell(0, ix)), data.append(2.0 / hy)
                wlist.append(hx * hy / 2.0)
            elif iy == ny:
                rows.append(face), cols.append(cell(ny - 1, ix)), data.append(-2.0 / hy)
                wlist.append(hx * hy / 2.0)
            else:
                rows.append(face), cols.append(cell(iy, ix)), data.append(1.0 / hy)
                rows.append(face), cols.append(cell(iy - 1, ix)), data.append(-1.0 / hy)
                wlist.append(hx * hy)
            poslist.append(((ix + 0.5) * hx, iy * hy))
            face += 1
    grad = sp.csr_matrix((data, (rows, cols)), shape=(face, n))
    return Grid(
        kind="rect2d",
        ndim_theory=2,
        centers=centers,
        cell_measures=measures,
        h=max(hx, hy),
        domain_measure=lx * ly,
        grad_op=grad,
        face_weights=np.asarray(wlist),
        face_positions=np.asarray(poslist),
        shape2d=(ny, nx),
        extent=(lx, ly),
    )


# ---------------------------------------------------------------------------
# per-cell calculus


def _cell_gradient_1d(values: np.ndarray, h: float) -> np.ndarray:
    g = np.empty_like(values)
    g[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
    g[0] = (values[1] - values[0]) / h
    g[-1] = (values[-1] - values[-2]) / h
    return g


def gradient(u: GridFunction) -> np.ndarray:
    """Per-cell gradient, shape (n_cells, d).

    Centered second-order differences at interior cells, one-sided two-point
    differences at cells touching the boundary (exact on affine fields).
    """
    grid, v = u.grid, u.values
    if grid.kind in ("interval", "radial"):
        return _cell_gradient_1d(v, grid.h)[:, None]
    ny, nx = grid.shape2d
    vv = v.reshape(ny, nx)
    hx = grid.extent[0] / nx
    hy = grid.extent[1] / ny
    gx = np.apply_along_axis(_cell_gradient_1d, 1, vv, hx)
    gy = np.apply_along_axis(_cell_gradient_1d, 0, vv, hy)
    return np.column_stack([gx.ravel(), gy.ravel()])


def lp_norm(u: GridFunction, p: float) -> float:
    """Cell-measure weighted L^p norm."""
    if p < 1.0:
        raise ValueError("exponent must be >= 1")
    return float(np.sum(u.grid.cell_measures * np.abs(u.values) ** p) ** (1.0 / p))


def l2_norm_sq(u: GridFunction) -> float:
    return float(np.sum(u.grid.cell_measures * u.values**2))


def w1p_seminorm(u: GridFunction, p: float) -> float:
    """Cell-measure weighted L^p norm of the per-cell gradient magnitude."""
    if p < 1.0:
        raise ValueError("exponent must be >= 1")
    mag = np.linalg.norm(gradient(u), axis=1)
    return float(np.sum(u.grid.cell_measures * mag**p) ** (1.0 / p))


def dirichlet_seminorm(u: GridFunction, p: float = 2.0) -> float:
    """Face-based W^{1,p}_0 seminorm; sees the zero trace, so it is definite."""
    g = u.grid.grad_op @ u.values
    return float(np.sum(u.grid.face_weights * np.abs(g) ** p) ** (1.0 / p))


def to_sampled(u: GridFunction) -> SampledFunction:
    """Push a grid function forward to a (value, measure) cell list.

    On interval and rectangle grids each nodal value carries its own cell
    measure.  On radial grids node j instead claims the shell between nodes
    j-1 and j (plus a zero-valued rim at the Dirichlet boundary): superlevel
    measures of radially decreasing profiles are then exact at every nodal
    level, which keeps weak norms of singular fields such as B/|x| honest.
    """
    grid = u.grid
    if grid.kind != "radial":
        return SampledFunction(u.values.copy(), grid.cell_measures.copy())
    omega = unit_ball_volume(grid.ndim_theory)
    bounds = np.concatenate([[0.0], grid.centers, [grid.extent[1]]])
    shells = omega * (bounds[1:] ** grid.ndim_theory - bounds[:-1] ** grid.ndim_theory)
    values = np.concatenate([u.values, [0.0]])
    return SampledFunction(values, shells)


# ---------------------------------------------------------------------------
# spectral helpers


def _dirichlet_stiffness(grid: Grid) -> sp.csr_matrix:
    W = sp.diags(grid.face_weights)
    return (grid.grad_op.T @ W @ grid.grad_op).tocsr()


def smallest_dirichlet_eigenvalue(grid: Grid) -> float:
    """Smallest eigenvalue of the discrete Dirichlet Laplacian on the grid."""
    K = _dirichlet_stiffness(grid)
    M = sp.diags(grid.cell_measures).tocsc()
    if grid.n_cells <= 600:
        import scipy.linalg as la

        minv = 1.0 / np.sqrt(grid.cell_measures)
        B = (K.toarray() * minv[None, :]) * minv[:, None]
        return float(np.min(la.eigvalsh(B)))
    vals = spla.eigsh(K, k=1, M=M, sigma=0.0, which="LM", return_eigenvectors=False)
    return float(vals[0])


def poincare_constant(grid: Grid) -> float:
    """Best constant C with ||u||_2^2 <= C |u|_{W^{1,2}_0}^2 discretely."""
    return 1.0 / smallest_dirichlet_eigenvalue(grid)
