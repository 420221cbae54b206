"""Explicit near-optimal capacitary profiles (upper-bound construction).

For lambda = 0 the profile is the radial logarithm between eps and delta.
For lambda in (0, 1] it is a radial logarithm from 1 down to c on
B_rho0(z), rho0 = eps**lambda1, followed by T dyadic annuli
A_k = {rho0 2**(k-1) < |x - z| < rho0 2**k}; on A_k the profile is
(T - k) c / T + (c / T) w_k with w_k the discrete oscillating annulus
minimizer (1 inside, 0 outside), and 0 beyond rho0 2**T.  Every node
within h of a circle rho0 2**k carries the circle value exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .capacity import CapacityResult, annulus_constraints
from .elliptic import (
    Grid,
    GridField,
    GridProblem,
    Operator,
    assemble,
    energy,
    solve,
)
from .formulas import checkerboard_limit, dyadic_scale_count, optimal_boundary_value
from .medium import Checkerboard

_DELTA_GUARD = 1.0 / 8.0
_LAMBDA1_STANDOFF = 0.05


@dataclass(frozen=True)
class ProfileSpec:
    epsilon: float
    delta: float
    lam: float
    lambda1: float
    alpha: float
    beta: float
    z: tuple[float, float]
    T: int
    c: float
    R0: float
    lambda2: float

    def __post_init__(self) -> None:
        if not 0 < self.lambda1 < self.lam:
            raise ValueError(f"need 0 < lambda1 < lambda, got {self.lambda1}, {self.lam}")
        if self.delta > _DELTA_GUARD * self.epsilon**self.lambda1 * (1 + 1e-12):
            raise ValueError(
                f"delta/eps**lambda1 = {self.delta / self.epsilon ** self.lambda1:.3g} above the 1/8 guard"
            )
        if self.T < 2:
            raise ValueError(f"need at least 2 dyadic annuli, got T = {self.T}")
        if not 0.0 <= self.c <= 1.0:
            raise ValueError("boundary value c must lie in [0, 1]")
        if not 0 < self.R0 < 1:
            raise ValueError("R0 must lie in (0, 1)")

    @classmethod
    def make(
        cls,
        epsilon: float,
        medium: Checkerboard,
        lam: float,
        z: Sequence[float],
        R0: float,
        lambda1: float | None = None,
        lambda2: float | None = None,
    ) -> "ProfileSpec":
        """Fill in T, c and the default lambda1 = lambda - 0.05, lambda2 = (lambda1 + 1)/2."""
        if lambda1 is None:
            lambda1 = lam - _LAMBDA1_STANDOFF
        if lambda2 is None:
            lambda2 = 0.5 * (lambda1 + 1.0)
        if not 0 < lambda1 < lam:
            raise ValueError(f"need 0 < lambda1 < lambda, got {lambda1}, {lam}")
        T = dyadic_scale_count(epsilon, lambda1, R0)
        c = optimal_boundary_value(medium.alpha, medium.beta, lam)
        return cls(
            epsilon, medium.delta, lam, lambda1, medium.alpha, medium.beta,
            (float(z[0]), float(z[1])), T, c, R0, lambda2,
        )

    @property
    def rho0(self) -> float:
        return self.epsilon**self.lambda1

    def radii(self) -> np.ndarray:
        """rho0 * 2**k for k = 0..T."""
        return self.rho0 * 2.0 ** np.arange(self.T + 1)

    def circle_values(self) -> np.ndarray:
        """Profile value (T - k) c / T on the circle of radius rho0 2**k."""
        k = np.arange(self.T + 1)
        return (self.T - k) * self.c / self.T

    def inner_energy_bound(self) -> float:
        """Analytic bound for the inner log region with the alpha/beta split at eps**lambda2."""
        L = abs(math.log(self.epsilon))
        l1, l2 = self.lambda1, self.lambda2
        return (
            2 * math.pi * (1 - self.c) ** 2 / L
            * (self.alpha * (1 - l2) + self.beta * (l2 - l1)) / (1 - l1) ** 2
        )

    def inner_energy_radial(self, coefficient: float) -> float:
        """Continuum energy of the inner logarithm for a constant coefficient."""
        L = abs(math.log(self.epsilon))
        return 2 * math.pi * coefficient * (1 - self.c) ** 2 / ((1 - self.lambda1) * L)

    def shell_energy_limit(self) -> float:
        """(2 pi sqrt(alpha beta)/log 2) c^2 / T."""
        return 2 * math.pi * math.sqrt(self.alpha * self.beta) / math.log(2) * self.c**2 / self.T


def guard_lambda1(epsilon: float, delta: float) -> float:
    """Largest lambda1 with delta <= eps**lambda1 / 8."""
    if not 0 < epsilon < 1:
        raise ValueError(f"need 0 < eps < 1, got {epsilon}")
    return math.log(8.0 * delta) / math.log(epsilon)


def _radius(grid: Grid, z: Sequence[float]) -> np.ndarray:
    X, Y = grid.nodes()
    return np.sqrt((X - z[0]) ** 2 + (Y - z[1]) ** 2)


def _capacity_mask(problem: GridProblem) -> np.ndarray:
    return problem.initial_field().fixed


def build_profile_lambda0(epsilon: float, delta: float, z: Sequence[float], problem: GridProblem) -> GridField:
    """1 on B_eps(z), 1 - log(|x-z|/eps)/log(delta/eps) up to delta, 0 outside."""
    if not epsilon < delta:
        raise ValueError(f"need eps < delta, got eps={epsilon}, delta={delta}")
    grid = problem.grid
    r = _radius(grid, z)
    with np.errstate(divide="ignore"):
        u = 1.0 - np.log(np.maximum(r, epsilon) / epsilon) / math.log(delta / epsilon)
    u = np.clip(u, 0.0, 1.0)
    u[r <= epsilon * (1 + 1e-12)] = 1.0
    field = GridField(grid, u, _capacity_mask(problem))
    field.values[field.fixed & ~problem.disc_mask()] = 0.0
    return field


@dataclass
class Profile:
    field: GridField
    energy: float
    breakdown: list[tuple[str, float]]
    spec: ProfileSpec | None
    shell_iterations: list[int]


def _window(grid: Grid, z: Sequence[float], radius: float) -> tuple[slice, slice, Grid]:
    x, y = grid.axes()
    h = grid.h
    i0 = max(0, int(np.searchsorted(x, z[0] - radius - 1.5 * h)))
    i1 = min(grid.n, int(np.searchsorted(x, z[0] + radius + 1.5 * h)) + 1)
    j0 = max(0, int(np.searchsorted(y, z[1] - radius - 1.5 * h)))
    j1 = min(grid.n, int(np.searchsorted(y, z[1] + radius + 1.5 * h)) + 1)
    # square window keeps the multigrid layout simple
    size = max(i1 - i0, j1 - j0)
    i1 = min(grid.n, i0 + size)
    j1 = min(grid.n, j0 + size)
    i0, j0 = i1 - size, j1 - size
    sub = Grid(size, h, (float(x[i0]), float(y[j0])))
    return slice(i0, i1), slice(j0, j1), sub


def _regions(spec: ProfileSpec):
    z = spec.z
    radii = spec.radii()

    def ring(lo, hi):
        def pred(x, y):
            r2 = (x - z[0]) ** 2 + (y - z[1]) ** 2
            return (r2 >= lo**2) & (r2 < hi**2)

        return pred

    out = [("inner", ring(0.0, radii[0]))]
    for k in range(1, spec.T + 1):
        out.append((f"shell_{k}", ring(radii[k - 1], radii[k])))
    return out


def build_profile(
    spec: ProfileSpec,
    medium: Checkerboard,
    problem: GridProblem,
    op: Operator | None = None,
    tol: float = 1e-9,
) -> Profile:
    """Assemble the dyadic-annuli profile on the grid of ``problem``."""
    if not (
        math.isclose(medium.alpha, spec.alpha)
        and math.isclose(medium.beta, spec.beta)
        and math.isclose(medium.delta, spec.delta, rel_tol=1e-12)
    ):
        raise ValueError("medium does not match the profile spec")
    if not math.isclose(problem.eps, spec.epsilon, rel_tol=1e-12):
        raise ValueError("problem and profile use different eps")
    grid = problem.grid
    h = grid.h
    z = spec.z
    radii = spec.radii()
    if radii[0] - spec.epsilon < 4 * h or radii[0] / 2 < 4 * h:
        raise ValueError("unresolved scales: innermost region thinner than 4h")
    if np.max(np.abs(np.asarray(z))) + radii[-1] >= problem.half_width:
        raise ValueError("outermost annulus leaves the domain")

    r = _radius(grid, z)
    L = abs(math.log(spec.epsilon))
    u = np.zeros((grid.n, grid.n))
    inner = r <= radii[0] * (1 + 1e-12)
    with np.errstate(divide="ignore"):
        u0 = 1.0 - (1.0 - spec.c) / ((1.0 - spec.lambda1) * L) * np.log(np.maximum(r, spec.epsilon) / spec.epsilon)
    u[inner] = u0[inner]

    vals = spec.circle_values()
    iters = []
    for k in range(1, spec.T + 1):
        si, sj, sub = _window(grid, z, radii[k])
        sub_op = assemble(sub, medium)
        # circles carry a band of width h on each side
        f0 = annulus_constraints(sub, radii[k] - h, radii[k - 1] + h, 1.0, 0.0, z)
        w, stats = solve(sub_op, f0, tol=tol)
        iters.append(stats.iterations)
        rs = r[si, sj]
        ring = (rs > radii[k - 1]) & (rs < radii[k])
        block = u[si, sj]
        block[ring] = vals[k] + (spec.c / spec.T) * w.values[ring]
    u[r >= radii[-1]] = 0.0
    for rk, vk in zip(radii, vals):
        u[np.abs(r - rk) <= h * (1 + 1e-12)] = vk
    u[r <= spec.epsilon * (1 + 1e-12)] = 1.0

    field = GridField(grid, u, _capacity_mask(problem))
    if op is None:
        op = assemble(problem, medium)
    total, parts = energy(field, op, _regions(spec))
    return Profile(field, total, parts, spec, iters)


def is_admissible(field: GridField, problem: GridProblem) -> bool:
    """1 on every disc node and 0 on every boundary node of the capacity problem."""
    ref = problem.initial_field()
    if not field.grid.same_as(ref.grid):
        return False
    return bool(np.array_equal(field.values[ref.fixed], ref.values[ref.fixed]))


def upper_bound_report(
    profile: Profile,
    problem: GridProblem,
    matched_capacity: CapacityResult,
    lam: float,
) -> dict:
    """Compare a profile with the solver minimum computed on the identical grid and constraints."""
    meta = matched_capacity.metadata
    g = problem.grid
    same = (
        meta.get("n") == g.n
        and math.isclose(meta.get("h", -1.0), g.h, rel_tol=1e-12)
        and math.isclose(meta.get("eps", -1.0), problem.eps, rel_tol=1e-12)
        and np.allclose(meta.get("z", (np.nan, np.nan)), problem.center, rtol=0, atol=1e-12 * g.h)
        and profile.field.grid.same_as(g)
    )
    if not same:
        raise ValueError("profile and capacity were computed on different grids or constraints")
    m = matched_capacity.energy
    E = profile.energy
    L = abs(math.log(problem.eps))
    alpha, beta = meta["alpha"], meta["beta"]
    rec = {
        "eps": problem.eps,
        "lambda": lam,
        "profile_energy": E,
        "capacity": m,
        "ratio": E / m,
        "profile_scaled": L * E,
        "capacity_scaled": L * m,
        "predicted_limit": checkerboard_limit(alpha, beta, lam),
        "admissible": is_admissible(profile.field, problem),
    }
    spec = profile.spec
    if spec is not None:
        rec.update(
            {
                "lambda1": spec.lambda1,
                "T": spec.T,
                "c": spec.c,
                "R0": spec.R0,
                "inner_energy_bound": spec.inner_energy_bound(),
                "shell_energy_limit": spec.shell_energy_limit(),
            }
        )
    for label, val in profile.breakdown:
        rec[f"energy_{label}"] = val
    return rec
