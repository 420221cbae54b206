"""Closed-form constants and limit values.

Every function here is a plain double-precision evaluation.  The other
modules use these values as oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class LimitInputs:
    """Inputs of the limit laws.

    alpha_min is the essential infimum of the coefficient, sqrt_det_hom the
    square root of the determinant of the homogenized matrix, and lam the
    scale ratio in [0, 1].
    """

    alpha_min: float
    sqrt_det_hom: float
    lam: float

    def __post_init__(self) -> None:
        if not self.alpha_min > 0:
            raise ValueError(f"alpha_min must be positive, got {self.alpha_min}")
        if not self.sqrt_det_hom >= self.alpha_min:
            raise ValueError(
                f"sqrt_det_hom ({self.sqrt_det_hom}) must be >= alpha_min ({self.alpha_min})"
            )
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")


def annulus_capacity_exact(R: float, r: float, c: float = 1.0) -> float:
    """Minimal energy of c|grad u|^2 on B_R with u = 1 on B_r, u = 0 on dB_R."""
    if not (r > 0 and R > 0 and c > 0):
        raise ValueError("radii and coefficient must be positive")
    if not r < R:
        raise ValueError(f"inner radius {r} must be smaller than outer radius {R}")
    return TWO_PI * c / math.log(R / r)


def harmonic_limit(inputs: LimitInputs) -> float:
    a, b, lam = inputs.alpha_min, inputs.sqrt_det_hom, inputs.lam
    return TWO_PI * a * b / (lam * a + (1.0 - lam) * b)


def _check_checkerboard(alpha: float, beta: float) -> None:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if alpha > beta:
        raise ValueError(f"checkerboard convention requires alpha <= beta, got {alpha} > {beta}")


def checkerboard_limit(alpha: float, beta: float, lam: float) -> float:
    """Limit of |log eps| m_{eps,delta} for the alpha/beta checkerboard."""
    _check_checkerboard(alpha, beta)
    return harmonic_limit(LimitInputs(alpha, math.sqrt(alpha * beta), lam))


def gl_arithmetic_limit(inputs: LimitInputs) -> float:
    """Hard-core Ginzburg-Landau counterpart: 2 pi times the lambda-weighted arithmetic mean."""
    return TWO_PI * (inputs.lam * inputs.sqrt_det_hom + (1.0 - inputs.lam) * inputs.alpha_min)


def optimal_boundary_value(alpha: float, beta: float, lam: float) -> float:
    """Value of the optimal potential on the circle separating the two regimes."""
    _check_checkerboard(alpha, beta)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    num = alpha * lam
    return num / (num + math.sqrt(alpha * beta) * (1.0 - lam))


def two_term_energy(alpha: float, beta: float, lam: float, c: float) -> float:
    """2 pi alpha (1-c)^2/(1-lam) + 2 pi sqrt(alpha beta) c^2/lam.

    The endpoints lam = 0 and lam = 1 are continuous extensions: the singular
    term is dropped when its numerator vanishes (c = 0, resp. c = 1) and is
    +inf otherwise.
    """
    _check_checkerboard(alpha, beta)
    g = math.sqrt(alpha * beta)
    if lam <= 0.0:
        inner = TWO_PI * alpha * (1.0 - c) ** 2
        outer = 0.0 if c == 0.0 else math.inf
    elif lam >= 1.0:
        inner = 0.0 if c == 1.0 else math.inf
        outer = TWO_PI * g * c**2
    else:
        inner = TWO_PI * alpha * (1.0 - c) ** 2 / (1.0 - lam)
        outer = TWO_PI * g * c**2 / lam
    return inner + outer


def dyadic_scale_count(epsilon: float, lambda1: float, R_outer: float = 1.0) -> int:
    """max{n in N : epsilon**lambda1 * 2**n <= R_outer}."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0.0 < lambda1 <= 1.0:
        raise ValueError(f"lambda1 must lie in (0, 1], got {lambda1}")
    if not R_outer > 0:
        raise ValueError("R_outer must be positive")
    x = (lambda1 * abs(math.log(epsilon)) + math.log(R_outer)) / math.log(2.0)
    # absorb rounding when eps**lambda1 * 2**n hits R_outer exactly
    n = math.floor(x + 1e-12)
    if n < 0:
        raise ValueError(
            f"no admissible n: epsilon**lambda1 = {epsilon ** lambda1:g} exceeds R_outer = {R_outer:g}"
        )
    return n
