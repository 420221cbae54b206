"""Discrete capacity problems built on :mod:`hetcap.elliptic`."""

from __future__ import annotations

import json
import math
import time
import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .elliptic import (
    Grid,
    GridField,
    GridProblem,
    Operator,
    assemble,
    disc_region,
    energy,
    solve,
)
from .medium import Checkerboard

CENTER_POLICIES = ("alpha_cell", "search", "given")


@dataclass
class CapacityResult:
    energy: float
    iterations: int
    relative_residual: float
    breakdown: list[tuple[str, float]]
    metadata: dict = dataclasses.field(default_factory=dict)
    field: GridField | None = dataclasses.field(default=None, repr=False, compare=False)
    operator: Operator | None = dataclasses.field(default=None, repr=False, compare=False)

    def to_record(self) -> dict:
        """Flat JSON-serializable record (no field data)."""
        rec = {
            "energy": self.energy,
            "iterations": self.iterations,
            "relative_residual": self.relative_residual,
        }
        for label, val in self.breakdown:
            rec[f"energy_{label}"] = val
        for key, val in self.metadata.items():
            if isinstance(val, (tuple, list, np.ndarray)):
                for k, v in enumerate(val):
                    rec[f"{key}_{k}"] = float(v)
            else:
                rec[key] = val
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def _center_candidates(medium: Checkerboard, near: Sequence[float]) -> list[tuple[str, np.ndarray]]:
    za = medium.alpha_cell_center(near)
    q = medium.delta / 4
    return [
        ("alpha_cell", za),
        ("beta_cell", za + np.array([2 * q, 0.0])),
        ("cell_corner", za - np.array([q, q])),
    ]


def solve_capacity(
    problem: GridProblem,
    medium: Checkerboard,
    center_policy: str = "alpha_cell",
    tol: float = 1e-9,
    preconditioner: str = "auto",
    keep_field: bool = False,
) -> CapacityResult:
    """Minimal energy with u = 1 on the disc B_eps(z) and u = 0 on the square boundary.

    ``alpha_cell`` centres the disc on the alpha half-cell nearest the domain
    centre; ``search`` also tries a beta half-cell centre and a cell corner
    and keeps the smallest energy; ``given`` uses ``problem.center``.
    """
    if center_policy not in CENTER_POLICIES:
        raise ValueError(f"unknown center policy {center_policy!r}")
    if center_policy == "given":
        candidates = [("given", np.asarray(problem.center))]
    else:
        candidates = _center_candidates(medium, (0.0, 0.0))
        if center_policy == "alpha_cell":
            candidates = candidates[:1]

    op = assemble(problem, medium)
    best = None
    for label, z in candidates:
        prob = problem.with_center(z)
        t0 = time.perf_counter()
        u, stats = solve(op, prob.initial_field(), tol=tol, preconditioner=preconditioner)
        total, parts = energy(u, op, [disc_region("inner", z, math.sqrt(prob.eps))])
        meta = {
            "eps": prob.eps,
            "delta": medium.delta,
            "h": prob.spacing,
            "n": prob.n,
            "L": prob.half_width,
            "alpha": medium.alpha,
            "beta": medium.beta,
            "z": tuple(float(v) for v in z),
            "center": label,
            "seconds": time.perf_counter() - t0,
        }
        res = CapacityResult(total, stats.iterations, stats.relative_residual, parts, meta)
        if keep_field:
            res.field, res.operator = u, op
        if best is None or res.energy < best.energy:
            best = res
    return best


def annulus_grid(R: float, h: float, center: Sequence[float] = (0.0, 0.0)) -> Grid:
    m = R / h
    k = round(m)
    if abs(m - k) > 1e-8 * max(1.0, m):
        raise ValueError(f"R/h must be an integer, got {m}")
    return Grid(2 * k + 1, h, (center[0] - R, center[1] - R))


def annulus_constraints(grid: Grid, R: float, r: float, inner_value: float, outer_value: float,
                        center: Sequence[float] = (0.0, 0.0)) -> GridField:
    X, Y = grid.nodes()
    rho2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    inner = rho2 <= (r * (1 + 1e-12)) ** 2
    outer = rho2 >= (R * (1 - 1e-12)) ** 2
    values = np.where(inner, inner_value, np.where(outer, outer_value, 0.0))
    return GridField(grid, values, inner | outer)


def solve_annulus(
    R: float,
    r: float,
    inner_value: float,
    outer_value: float,
    medium_or_constant: Checkerboard | float,
    h: float,
    center: Sequence[float] = (0.0, 0.0),
    tol: float = 1e-9,
    preconditioner: str = "auto",
    keep_field: bool = False,
) -> CapacityResult:
    """Minimal energy on a grid covering the square around B_R(center).

    Nodes in the closed disc of radius r take ``inner_value``; nodes at
    distance >= R take ``outer_value``.
    """
    if not 0 < r < R:
        raise ValueError(f"need 0 < r < R, got r={r}, R={R}")
    if r < 3 * h * (1 - 1e-9):
        raise ValueError(f"inner radius not resolved: r = {r:g} < 3h = {3 * h:g}")
    medium = (
        medium_or_constant
        if isinstance(medium_or_constant, Checkerboard)
        else Checkerboard.constant(float(medium_or_constant))
    )
    grid = annulus_grid(R, h, center)
    op = assemble(grid, medium)
    f0 = annulus_constraints(grid, R, r, inner_value, outer_value, center)
    t0 = time.perf_counter()
    u, stats = solve(op, f0, tol=tol, preconditioner=preconditioner)
    total, _ = energy(u, op)
    meta = {
        "R": R,
        "r": r,
        "inner_value": inner_value,
        "outer_value": outer_value,
        "h": h,
        "n": grid.n,
        "alpha": medium.alpha,
        "beta": medium.beta,
        "delta": medium.delta,
        "seconds": time.perf_counter() - t0,
    }
    res = CapacityResult(total, stats.iterations, stats.relative_residual, [], meta)
    if keep_field:
        res.field, res.operator = u, op
    return res


def capacity_scaled(result: CapacityResult) -> float:
    """|log eps| times the discrete capacity."""
    eps = result.metadata.get("eps")
    if eps is None:
        raise ValueError("result carries no eps")
    if not 0 < eps < 1:
        raise ValueError(f"scaling needs 0 < eps < 1, got {eps}")
    return abs(math.log(eps)) * result.energy
