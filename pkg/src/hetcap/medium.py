"""Periodic checkerboard coefficient and inclusion/period scale schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# relative distance (in half-cell units) under which a coordinate is snapped
# onto a cell boundary before the half-open test
_SNAP = 1e-9


@dataclass(frozen=True)
class Checkerboard:
    """a(x/delta + tau) with a = alpha on [0,1/2)^2 u [1/2,1)^2 and beta elsewhere."""

    alpha: float
    beta: float
    delta: float
    tau: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("coefficient values must be positive")
        if self.alpha > self.beta:
            raise ValueError(f"need alpha <= beta, got {self.alpha} > {self.beta}")
        if not self.delta > 0:
            raise ValueError(f"period must be positive, got {self.delta}")
        t = tuple(float(v) % 1.0 for v in self.tau)
        if len(t) != 2:
            raise ValueError("tau must be a 2-vector")
        object.__setattr__(self, "tau", t)

    @classmethod
    def constant(cls, c: float, delta: float = 1.0) -> "Checkerboard":
        return cls(c, c, delta)

    @property
    def is_constant(self) -> bool:
        return self.alpha == self.beta

    def _half_index(self, coord, shift: float) -> np.ndarray:
        t = 2.0 * (np.asarray(coord, dtype=float) / self.delta + shift)
        r = np.rint(t)
        t = np.where(np.abs(t - r) <= _SNAP * np.maximum(1.0, np.abs(t)), r, t)
        return np.floor(t).astype(np.int64) & 1

    def sample(self, x, y) -> np.ndarray:
        """Vectorized coefficient values at points (x, y)."""
        px = self._half_index(x, self.tau[0])
        py = self._half_index(y, self.tau[1])
        return np.where(px == py, self.alpha, self.beta)

    def alpha_cell_center(self, near: Sequence[float]) -> np.ndarray:
        """Centre of the alpha half-cell (side delta/2) closest to ``near``.

        The half-cell containing ``near`` is returned when it is an alpha
        cell; otherwise the nearest alpha neighbour, ties broken by index.
        """
        s = np.asarray(near, dtype=float) / self.delta + np.asarray(self.tau)
        t = 2.0 * s
        r = np.rint(t)
        t = np.where(np.abs(t - r) <= _SNAP * np.maximum(1.0, np.abs(t)), r, t)
        p0, q0 = (int(v) for v in np.floor(t))
        if (p0 - q0) % 2 == 0:
            p, q = p0, q0
        else:
            best = None
            for dp in (-1, 0, 1):
                for dq in (-1, 0, 1):
                    pp, qq = p0 + dp, q0 + dq
                    if (pp - qq) % 2:
                        continue
                    c = np.array([pp / 2 + 0.25, qq / 2 + 0.25])
                    d = float(np.sum((c - s) ** 2))
                    key = (round(d, 12), pp, qq)
                    if best is None or key < best[0]:
                        best = (key, pp, qq)
            _, p, q = best
        centre_cell = np.array([p / 2 + 0.25, q / 2 + 0.25])
        return self.delta * (centre_cell - np.asarray(self.tau))


def sample(medium: Checkerboard, point: Sequence[float]) -> float:
    return float(medium.sample(point[0], point[1]))


def alpha_cell_center(medium: Checkerboard, near: Sequence[float]) -> np.ndarray:
    return medium.alpha_cell_center(near)


SCHEDULE_KINDS = ("power", "inverse_log", "linear_times_log", "proportional", "table")


@dataclass(frozen=True)
class ScaleSchedule:
    """Map epsilon -> delta_epsilon.

    kinds: ``power`` (delta = eps**param), ``inverse_log`` (1/|log eps|),
    ``linear_times_log`` (eps |log eps|), ``proportional`` (param * eps) and
    ``table`` (explicit (eps, delta) pairs, log-log interpolated).
    """

    kind: str
    param: float | None = None
    table: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self) -> None:
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "power":
            if self.param is None or not 0.0 < self.param <= 1.0:
                raise ValueError("power schedule needs an exponent in (0, 1]")
        if self.kind == "proportional":
            if self.param is None or not self.param > 0:
                raise ValueError("proportional schedule needs a positive constant")
        if self.kind == "table":
            rows = tuple(sorted((float(e), float(d)) for e, d in self.table))
            if len(rows) < 2:
                raise ValueError("table schedule needs at least 2 (eps, delta) entries")
            if any(not (0 < e < 1 and d > 0) for e, d in rows):
                raise ValueError("table entries need 0 < eps < 1 and delta > 0")
            if len({e for e, _ in rows}) != len(rows):
                raise ValueError("repeated eps in table schedule")
            object.__setattr__(self, "table", rows)

    def delta(self, eps: float) -> float:
        if not 0.0 < eps < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
        L = abs(math.log(eps))
        if self.kind == "power":
            return eps**self.param
        if self.kind == "inverse_log":
            return 1.0 / L
        if self.kind == "linear_times_log":
            return eps * L
        if self.kind == "proportional":
            return self.param * eps
        es = np.log([e for e, _ in self.table])
        ds = np.log([d for _, d in self.table])
        le = math.log(eps)
        for e, d in self.table:
            if math.isclose(e, eps, rel_tol=1e-12):
                return d
        if not es[0] <= le <= es[-1]:
            raise ValueError(f"epsilon {eps} outside the tabulated range")
        return float(math.exp(np.interp(le, es, ds)))

    @property
    def lambda_is_estimate(self) -> bool:
        return self.kind == "table"

    def describe(self) -> str:
        if self.kind in ("power", "proportional"):
            return f"{self.kind}({self.param:g})"
        if self.kind == "table":
            return f"table[{len(self.table)}]"
        return self.kind


def lambda_of(schedule: ScaleSchedule) -> float:
    """min{1, lim |log delta|/|log eps|}.

    For tabulated schedules this is only an estimate: the log-log slope
    between the two smallest epsilon entries, clipped to [0, 1].
    """
    k = schedule.kind
    if k == "power":
        return float(min(1.0, schedule.param))
    if k == "inverse_log":
        return 0.0
    if k in ("linear_times_log", "proportional"):
        return 1.0
    (e1, d1), (e2, d2) = schedule.table[:2]
    slope = (math.log(d2) - math.log(d1)) / (math.log(e2) - math.log(e1))
    return float(min(1.0, max(0.0, slope)))
