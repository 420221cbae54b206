"""Finite-difference Dirichlet energy on uniform square grids.

The discrete energy of a nodal field u is sum_e a_e (u_i - u_j)^2 over the
grid edges e = (i, j), with a_e the coefficient sampled at the edge
midpoint.  In two dimensions the Dirichlet integral is scale invariant, so
no factor of h appears.  Minimizers under nodal constraints are computed by
preconditioned conjugate gradients.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _multigrid as mg
from .medium import Checkerboard

log = logging.getLogger(__name__)


class PeriodUnresolvedError(ValueError):
    """The grid spacing does not resolve the checkerboard half-cells."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(f"{message} (iterations={iterations}, relative residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class SingularSystemError(ValueError):
    """No constrained node: the energy has a null space."""


@dataclass(frozen=True)
class Grid:
    """n x n nodes at origin + h * (i, j)."""

    n: int
    h: float
    origin: tuple[float, float]

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        k = np.arange(self.n)
        return self.origin[0] + self.h * k, self.origin[1] + self.h * k

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.axes()
        return x[:, None], y[None, :]

    def edge_midpoints(self):
        """Midpoints of x-edges, shape (n-1, n), and y-edges, shape (n, n-1)."""
        x, y = self.axes()
        xm = 0.5 * (x[:-1] + x[1:])
        ym = 0.5 * (y[:-1] + y[1:])
        return (xm[:, None], y[None, :]), (x[:, None], ym[None, :])

    def same_as(self, other: "Grid") -> bool:
        return (
            self.n == other.n
            and math.isclose(self.h, other.h, rel_tol=1e-12)
            and all(math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-14) for a, b in zip(self.origin, other.origin))
        )


def _as_int(value: float, what: str) -> int:
    k = round(value)
    if abs(value - k) > 1e-8 * max(1.0, abs(value)):
        raise ValueError(f"{what} must be an integer, got {value}")
    return int(k)


@dataclass(frozen=True)
class GridProblem:
    """Capacity problem on (-L, L)^2: u = 1 on the closed disc B_eps(z), u = 0 on the boundary."""

    half_width: float
    spacing: float
    center: tuple[float, float]
    eps: float

    def __post_init__(self) -> None:
        L, h, eps = self.half_width, self.spacing, self.eps
        if not (L > 0 and h > 0 and eps > 0):
            raise ValueError("half_width, spacing and eps must be positive")
        _as_int(2 * L / h, "2L/h")
        if eps < 3 * h * (1 - 1e-9):
            raise ValueError(f"inclusion not resolved: eps = {eps:g} < 3h = {3 * h:g}")
        z = np.asarray(self.center, dtype=float)
        if np.max(np.abs(z)) + eps > 0.75 * L * (1 + 1e-12):
            raise ValueError("inclusion must stay L/4 away from the boundary of the domain")
        object.__setattr__(self, "center", (float(z[0]), float(z[1])))

    @property
    def n(self) -> int:
        return _as_int(2 * self.half_width / self.spacing, "2L/h") + 1

    @property
    def grid(self) -> Grid:
        L = self.half_width
        return Grid(self.n, self.spacing, (-L, -L))

    def with_center(self, z: Sequence[float]) -> "GridProblem":
        return GridProblem(self.half_width, self.spacing, (float(z[0]), float(z[1])), self.eps)

    def disc_mask(self) -> np.ndarray:
        X, Y = self.grid.nodes()
        r2 = (X - self.center[0]) ** 2 + (Y - self.center[1]) ** 2
        return r2 <= (self.eps * (1 + 1e-12)) ** 2

    def initial_field(self) -> "GridField":
        n = self.n
        fixed = np.zeros((n, n), dtype=bool)
        fixed[0, :] = fixed[-1, :] = fixed[:, 0] = fixed[:, -1] = True
        disc = self.disc_mask()
        fixed |= disc
        return GridField(self.grid, np.where(disc, 1.0, 0.0), fixed)


@dataclass
class GridField:
    """Nodal values with a constraint mask (``fixed`` nodes keep their value)."""

    grid: Grid
    values: np.ndarray
    fixed: np.ndarray

    def __post_init__(self) -> None:
        shape = (self.grid.n, self.grid.n)
        self.values = np.asarray(self.values, dtype=float)
        self.fixed = np.asarray(self.fixed, dtype=bool)
        if self.values.shape != shape or self.fixed.shape != shape:
            raise ValueError(f"field arrays must have shape {shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def copy(self) -> "GridField":
        return GridField(self.grid, self.values.copy(), self.fixed.copy())


@dataclass
class Operator:
    """Edge-weighted graph Laplacian on a grid.

    ``wx[i, j]`` is the coefficient on edge (i,j)-(i+1,j), ``wy[i, j]`` on
    edge (i,j)-(i,j+1).
    """

    grid: Grid
    wx: np.ndarray
    wy: np.ndarray

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Gradient of half the energy: (L u)_i = sum_j a_ij (u_i - u_j)."""
        out = np.zeros_like(u)
        fx = self.wx * (u[1:, :] - u[:-1, :])
        fy = self.wy * (u[:, 1:] - u[:, :-1])
        out[:-1, :] -= fx
        out[1:, :] += fx
        out[:, :-1] -= fy
        out[:, 1:] += fy
        return out

    def diagonal(self) -> np.ndarray:
        d = np.zeros((self.grid.n, self.grid.n))
        d[:-1, :] += self.wx
        d[1:, :] += self.wx
        d[:, :-1] += self.wy
        d[:, 1:] += self.wy
        return d

    def scaled(self, t: float) -> "Operator":
        return Operator(self.grid, t * self.wx, t * self.wy)


def check_resolution(h: float, medium: Checkerboard) -> None:
    if medium.is_constant:
        return
    if h > medium.delta / 4 * (1 + 1e-9):
        raise PeriodUnresolvedError(
            f"period unresolved: h = {h:g} > delta/4 = {medium.delta / 4:g}"
        )


def assemble(problem: GridProblem | Grid, medium: Checkerboard) -> Operator:
    """Sample the coefficient at every edge midpoint."""
    grid = problem.grid if isinstance(problem, GridProblem) else problem
    check_resolution(grid.h, medium)
    (xa, ya), (xb, yb) = grid.edge_midpoints()
    wx = np.broadcast_to(medium.sample(xa, ya), (grid.n - 1, grid.n)).astype(float)
    wy = np.broadcast_to(medium.sample(xb, yb), (grid.n, grid.n - 1)).astype(float)
    return Operator(grid, wx, wy)


@dataclass
class SolveStats:
    iterations: int
    relative_residual: float
    preconditioner: str


def pcg(
    matvec: Callable[[np.ndarray, np.ndarray], np.ndarray],
    b: np.ndarray,
    precond: Callable[[np.ndarray, np.ndarray], np.ndarray],
    tol: float = 1e-9,
    maxiter: int = 1000,
    dot: Callable[[np.ndarray, np.ndarray], float] = mg.dot,
) -> tuple[np.ndarray, int, float]:
    """Preconditioned conjugate gradients from a zero initial guess.

    ``matvec(x, out)`` and ``precond(r, out)`` write into ``out``.  Stops when
    ||r|| <= tol ||b||; raises ConvergenceError after ``maxiter`` steps.
    """
    x = np.zeros_like(b)
    bnorm = math.sqrt(dot(b, b))
    if bnorm == 0.0:
        return x, 0, 0.0
    r = b.copy()
    z = np.zeros_like(b)
    q = np.zeros_like(b)
    precond(r, z)
    p = z.copy()
    rz = dot(r, z)
    relres = 1.0
    for it in range(1, maxiter + 1):
        matvec(p, q)
        pq = dot(p, q)
        if pq <= 0:
            raise ConvergenceError("operator not positive definite on the search space", it, relres)
        step = rz / pq
        x += step * p
        r -= step * q
        relres = math.sqrt(dot(r, r)) / bnorm
        if relres <= tol:
            return x, it, relres
        precond(r, z)
        rz_new = dot(r, z)
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise ConvergenceError("conjugate gradients did not converge", maxiter, relres)


def _dirichlet_rhs(op: Operator, u0: np.ndarray, free: np.ndarray) -> np.ndarray:
    """-A_fc u_c, with u0 zero on free nodes."""
    return np.where(free, -op.apply(u0), 0.0)


def solve(
    op: Operator,
    field: GridField,
    tol: float = 1e-9,
    maxiter: int | None = None,
    preconditioner: str = "auto",
) -> tuple[GridField, SolveStats]:
    """Energy minimizer among fields that agree with ``field`` on its fixed nodes.

    ``preconditioner`` is ``"jacobi"``, ``"multigrid"`` or ``"auto"``
    (multigrid above 128 nodes per side).
    """
    if not field.grid.same_as(op.grid):
        raise ValueError("field and operator live on different grids")
    fixed = field.fixed
    free = ~fixed
    n = op.grid.n
    if not fixed.any():
        raise SingularSystemError("no constrained node: the minimizer is not unique")
    out = field.copy()
    if not free.any():
        return out, SolveStats(0, 0.0, "none")
    fv = field.values[fixed]
    if np.all(fv == fv[0]):
        # constant data: the constant is the minimizer
        out.values = np.full_like(field.values, fv[0])
        return out, SolveStats(0, 0.0, "none")
    if maxiter is None:
        maxiter = 50 * n
    kind = preconditioner
    if kind == "auto":
        kind = "multigrid" if n > 128 else "jacobi"

    u0 = np.where(fixed, field.values, 0.0)
    rhs = _dirichlet_rhs(op, u0, free)

    if kind == "multigrid":
        size, nlev = mg.padded_size(n)
        fine = mg.fine_level(op.wx, op.wy, free, size)
        pre = mg.Multigrid(fine, nlev)
    elif kind == "jacobi":
        fine = mg.fine_level(op.wx, op.wy, free)
        inv_diag = np.where(fine.mask, 1.0 / fine.c, 0.0)

        def pre(r, z):
            np.multiply(inv_diag, r, out=z)
            return z

    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")

    b = np.zeros_like(fine.c)
    b[1 : n + 1, 1 : n + 1] = rhs
    x, iters, relres = pcg(fine.matvec, b, pre, tol=tol, maxiter=maxiter)
    out.values = np.where(fixed, field.values, x[1 : n + 1, 1 : n + 1])
    log.debug("solve n=%d %s: %d iterations, relres %.2e", n, kind, iters, relres)
    return out, SolveStats(iters, relres, kind)


Region = tuple[str, Callable[[np.ndarray, np.ndarray], np.ndarray]]


def energy(
    field: GridField | np.ndarray,
    op: Operator,
    regions: Iterable[Region] = (),
) -> tuple[float, list[tuple[str, float]]]:
    """Total energy and its split over regions.

    Each edge goes to the first region whose predicate holds at its midpoint;
    unclaimed edges go to ``"rest"``.  The pieces partition the edge set.
    """
    u = field.values if isinstance(field, GridField) else np.asarray(field)
    ex = op.wx * (u[1:, :] - u[:-1, :]) ** 2
    ey = op.wy * (u[:, 1:] - u[:, :-1]) ** 2
    total = float(ex.sum() + ey.sum())
    regions = list(regions)
    if not regions:
        return total, []
    (xa, ya), (xb, yb) = op.grid.edge_midpoints()
    xa, ya = np.broadcast_arrays(xa, ya)
    xb, yb = np.broadcast_arrays(xb, yb)
    left_x = np.ones(ex.shape, dtype=bool)
    left_y = np.ones(ey.shape, dtype=bool)
    parts = []
    for label, pred in regions:
        sx = left_x & np.asarray(pred(xa, ya), dtype=bool)
        sy = left_y & np.asarray(pred(xb, yb), dtype=bool)
        parts.append((label, float(ex[sx].sum() + ey[sy].sum())))
        left_x &= ~sx
        left_y &= ~sy
    parts.append(("rest", float(ex[left_x].sum() + ey[left_y].sum())))
    return total, parts


def disc_region(label: str, center: Sequence[float], radius: float) -> Region:
    cx, cy = float(center[0]), float(center[1])

    def pred(x, y):
        return (x - cx) ** 2 + (y - cy) ** 2 < radius**2

    return label, pred


def dump_field(field: GridField, path: str | Path, **header) -> tuple[Path, Path]:
    """Write ``<path>.bin`` (row-major float64, index [i, j] = (x_i, y_j)) and ``<path>.txt``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    bin_path = path.with_suffix(".bin")
    txt_path = path.with_suffix(".txt")
    np.ascontiguousarray(field.values, dtype="<f8").tofile(bin_path)
    g = field.grid
    lines = [f"n {g.n}", f"h {g.h!r}", f"origin {g.origin[0]!r} {g.origin[1]!r}"]
    for key, val in header.items():
        if isinstance(val, (tuple, list, np.ndarray)):
            val = " ".join(repr(float(v)) for v in val)
        lines.append(f"{key} {val}")
    txt_path.write_text("\n".join(lines) + "\n")
    return bin_path, txt_path


def load_field(path: str | Path) -> tuple[np.ndarray, dict[str, str]]:
    path = Path(path)
    header = {}
    for line in path.with_suffix(".txt").read_text().splitlines():
        key, _, val = line.partition(" ")
        header[key] = val
    n = int(header["n"])
    values = np.fromfile(path.with_suffix(".bin"), dtype="<f8").reshape(n, n)
    return values, header
