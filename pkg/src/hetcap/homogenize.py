"""Periodic cell problem for the checkerboard and the tau-uniformity probe."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .capacity import solve_annulus
from .elliptic import pcg
from .medium import Checkerboard


@dataclass(frozen=True)
class EffectiveTensor:
    a11: float
    a12: float
    a22: float
    resolution: int

    @property
    def sqrt_det(self) -> float:
        return math.sqrt(self.a11 * self.a22 - self.a12**2)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def to_dict(self) -> dict:
        return {
            "a11": self.a11,
            "a12": self.a12,
            "a22": self.a22,
            "sqrt_det": self.sqrt_det,
            "resolution": self.resolution,
        }


def periodic_weights(alpha: float, beta: float, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Edge coefficients on the unit period with nodes at (i, j)/N.

    ``wx[i, j]`` belongs to the edge (i,j)-(i+1,j) (wrapping), ``wy`` likewise.
    """
    N = resolution
    med = Checkerboard(alpha, beta, 1.0) if alpha <= beta else None
    s = np.arange(N) / N
    m = s + 0.5 / N
    if med is None:
        # beta < alpha: swap roles of the two values, same geometry
        med = Checkerboard(beta, alpha, 1.0)
        swap = {alpha: beta, beta: alpha}
        wx = np.vectorize(swap.get)(med.sample(m[:, None], s[None, :]))
        wy = np.vectorize(swap.get)(med.sample(s[:, None], m[None, :]))
        return wx.astype(float), wy.astype(float)
    wx = med.sample(m[:, None], s[None, :]).astype(float)
    wy = med.sample(s[:, None], m[None, :]).astype(float)
    return wx, wy


def _periodic_apply(wx, wy, w, out):
    fx = wx * (np.roll(w, -1, axis=0) - w)
    fy = wy * (np.roll(w, -1, axis=1) - w)
    out[...] = -fx + np.roll(fx, 1, axis=0) - fy + np.roll(fy, 1, axis=1)
    return out


def _dot(x, y):
    return float(np.dot(x.ravel(), y.ravel()))


def corrector(wx: np.ndarray, wy: np.ndarray, direction: int, tol: float = 1e-10) -> np.ndarray:
    """Mean-zero periodic w minimizing sum_e a_e (Delta(x_dir + w))^2."""
    N = wx.shape[0]
    h = 1.0 / N
    a = wx if direction == 0 else wy
    b = h * (a - np.roll(a, 1, axis=direction))
    diag = wx + np.roll(wx, 1, axis=0) + wy + np.roll(wy, 1, axis=1)
    inv = 1.0 / diag

    def pre(r, z):
        np.multiply(inv, r, out=z)
        return z

    w, _, _ = pcg(lambda x, out: _periodic_apply(wx, wy, x, out), b, pre, tol=tol, maxiter=50 * N * N, dot=_dot)
    return w - w.mean()


def cell_problem(alpha: float, beta: float, resolution: int, tol: float = 1e-10) -> EffectiveTensor:
    """Effective tensor from the two corrector problems on an N x N periodic grid.

    Entries are cell averages of the corrected discrete flux
    a_e Delta_i(x_j + w_j)/h.
    """
    N = int(resolution)
    if N < 16 or N % 2:
        raise ValueError(f"resolution must be even and >= 16, got {resolution}")
    if not (alpha > 0 and beta > 0):
        raise ValueError("coefficients must be positive")
    wx, wy = periodic_weights(alpha, beta, N)
    h = 1.0 / N
    A = np.zeros((2, 2))
    for j in range(2):
        w = corrector(wx, wy, j, tol=tol)
        gx = np.roll(w, -1, axis=0) - w + (h if j == 0 else 0.0)
        gy = np.roll(w, -1, axis=1) - w + (h if j == 1 else 0.0)
        A[0, j] = (wx * gx).sum() * h
        A[1, j] = (wy * gy).sum() * h
    a12 = 0.5 * (A[0, 1] + A[1, 0])
    return EffectiveTensor(float(A[0, 0]), float(a12), float(A[1, 1]), N)


@dataclass(frozen=True)
class ProbeRow:
    eta: float
    tau: tuple[float, float]
    energy: float
    deviation: float


def uniformity_probe(
    alpha: float,
    beta: float,
    eta_list: Iterable[float],
    tau_samples: Sequence[Sequence[float]],
    nodes_per_period: int = 16,
    tol: float = 1e-9,
) -> tuple[list[ProbeRow], dict[float, float]]:
    """Annulus minima on B_1 minus B_1/2 with coefficient a(x/eta + tau).

    Returns all rows and, per eta, the largest relative deviation from
    2 pi sqrt(alpha beta)/log 2 over the tau samples.
    """
    target = 2 * math.pi * math.sqrt(alpha * beta) / math.log(2)
    rows = []
    worst: dict[float, float] = {}
    for eta in eta_list:
        if not 0 < eta <= 0.25:
            raise ValueError(f"eta must lie in (0, 1/4], got {eta}")
        h = eta / nodes_per_period
        k = round(1.0 / h)
        h = 1.0 / k
        for tau in tau_samples:
            med = Checkerboard(alpha, beta, eta, (float(tau[0]), float(tau[1])))
            res = solve_annulus(1.0, 0.5, 1.0, 0.0, med, h, tol=tol)
            dev = abs(res.energy - target) / target
            rows.append(ProbeRow(eta, med.tau, res.energy, dev))
            worst[eta] = max(worst.get(eta, 0.0), dev)
    return rows, worst
