"""Circle rounding on dyadic annuli and an empirical study of its constant.

Given u on B_R(z) minus the closed disc B_r(z), R = eta 2**S, the rounding
for index j replaces u on the annulus rho_j/2 < |x - z| < 2 rho_j,
rho_j = eta 2**(S - j), by ``u + phi (mean - u)``.  The cut-off ``phi``
equals 1 within h of the circle rho_j and falls linearly in log-radius to 0
at rho_j/2 and 2 rho_j.  The index of least energy is kept.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .capacity import annulus_constraints, annulus_grid
from .elliptic import Grid, GridField, Operator, assemble, solve
from .medium import Checkerboard

CALIBRATION_FILE = Path(__file__).with_name("data") / "c_emp.json"
SAFETY_FACTOR = 1.5


def _radius(grid: Grid, z: Sequence[float]) -> np.ndarray:
    X, Y = grid.nodes()
    return np.hypot(X - z[0], Y - z[1])


def _edge_masks(grid: Grid, z: Sequence[float], r: float, R: float) -> tuple[np.ndarray, np.ndarray]:
    (xa, ya), (xb, yb) = grid.edge_midpoints()
    ra = np.hypot(xa - z[0], ya - z[1])
    rb = np.hypot(xb - z[0], yb - z[1])
    return (ra > r) & (ra < R), (rb > r) & (rb < R)


def _annulus_energy(u: np.ndarray, op: Operator, masks) -> float:
    ex = op.wx * (u[1:, :] - u[:-1, :]) ** 2
    ey = op.wy * (u[:, 1:] - u[:, :-1]) ** 2
    return float(ex[masks[0]].sum() + ey[masks[1]].sum())


def outer_scale(eta: float, R: float) -> int:
    """Largest S with eta 2**S <= R."""
    if not (0 < eta < 1 and R > 0):
        raise ValueError(f"need 0 < eta < 1 and R > 0, got eta={eta}, R={R}")
    return int(math.floor(math.log2(R / eta) + 1e-12))


def cutoff(rho: np.ndarray, center_radius: float, h: float) -> np.ndarray:
    """1 on |rho - c| <= h, linear in log rho down to 0 at c/2 and 2c, 0 outside."""
    c = center_radius
    lo, hi = math.log(max(c - h, c / 2)), math.log(min(c + h, 2 * c))
    with np.errstate(divide="ignore"):
        t = np.log(np.maximum(rho, 1e-300))
    phi = np.zeros_like(rho, dtype=float)
    left = (t > math.log(c / 2)) & (t < lo)
    right = (t > hi) & (t < math.log(2 * c))
    phi[left] = (t[left] - math.log(c / 2)) / (lo - math.log(c / 2))
    phi[right] = (math.log(2 * c) - t[right]) / (math.log(2 * c) - hi)
    phi[np.abs(rho - c) <= h * (1 + 1e-12)] = 1.0
    phi[(rho <= c / 2) | (rho >= 2 * c)] = 0.0
    return phi


def _check(field: GridField, eta: float, S: int, N: int, r: float) -> None:
    if S < 3:
        raise ValueError(f"need S >= 3, got {S}")
    if not 2 <= N < S:
        raise ValueError(f"need 2 <= N < S, got N={N}, S={S}")
    if not 0 < r <= eta * 2.0 ** (S - N) * (1 + 1e-12):
        raise ValueError(f"need 0 < r <= eta 2**(S-N), got r={r}")
    h = field.grid.h
    if eta * 2.0 ** (S - N) < 4 * h:
        raise ValueError("annulus thinner than 4h: innermost candidate is unresolved")


def candidate(field: GridField, z: Sequence[float], eta: float, S: int, j: int) -> GridField:
    """Rounded field for index j; nodes outside the open annulus are copied."""
    grid = field.grid
    rho_j = eta * 2.0 ** (S - j)
    rho = _radius(grid, z)
    # nodes on the bounding circles (up to rounding) stay untouched
    ring = (rho > rho_j / 2 * (1 + 1e-12)) & (rho < 2 * rho_j * (1 - 1e-12))
    if not ring.any():
        raise ValueError("empty free region")
    if (ring & field.fixed).any():
        raise ValueError("rounding annulus meets constrained nodes")
    u = field.values
    vals = u[ring]
    mean = vals[0] if np.all(vals == vals[0]) else float(vals.mean())
    phi = cutoff(rho, rho_j, grid.h)
    v = u.copy()
    v[ring] = u[ring] + phi[ring] * (mean - u[ring])
    band = ring & (phi == 1.0)
    v[band] = mean
    return GridField(grid, v, field.fixed.copy())


def candidate_ratios(
    field: GridField,
    z: Sequence[float],
    eta: float,
    S: int,
    N: int,
    r: float,
    medium: Checkerboard,
    workers: int = 1,
) -> list[tuple[int, GridField, float]]:
    """(j, v_j, F(v_j)/F(u)) for j = 1..N-1 with F the energy on B_R minus closed B_r."""
    _check(field, eta, S, N, r)
    R = eta * 2.0**S
    op = assemble(field.grid, medium)
    masks = _edge_masks(field.grid, z, r, R)
    base = _annulus_energy(field.values, op, masks)

    def one(j: int):
        v = candidate(field, z, eta, S, j)
        e = _annulus_energy(v.values, op, masks)
        ratio = 1.0 if base == 0.0 and e == 0.0 else e / base
        return j, v, ratio

    js = range(1, N)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, js))
    return [one(j) for j in js]


def round_on_circle(
    field: GridField,
    z: Sequence[float],
    eta: float,
    S: int,
    N: int,
    r: float,
    medium: Checkerboard,
    workers: int = 1,
) -> tuple[GridField, int, float]:
    """Best rounding over j = 1..N-1: (modified field, j, energy ratio)."""
    rows = candidate_ratios(field, z, eta, S, N, r, medium, workers)
    j, v, ratio = min(rows, key=lambda t: (t[2], t[0]))
    return v, j, ratio


def circle_nodes(grid: Grid, z: Sequence[float], radius: float) -> np.ndarray:
    """Nodes within h of the circle."""
    return np.abs(_radius(grid, z) - radius) <= grid.h * (1 + 1e-12)


# ---------------------------------------------------------------- study


@dataclass(frozen=True)
class Instance:
    S: int
    N: int
    seed: int
    j: int
    ratio: float

    @property
    def implied_C(self) -> float:
        return (self.ratio - 1.0) * (self.N - 1)


@dataclass(frozen=True)
class StudyRow:
    S: int
    N: int
    samples: int
    worst_ratio: float
    implied_C: float


def study_medium(alpha: float, beta: float, S: int, tau: Sequence[float]) -> Checkerboard:
    """Checkerboard for the unit-radius instance at scale S: period 16 eta = 2**(4 - S)."""
    return Checkerboard(alpha, beta, 2.0 ** (4 - S), (float(tau[0]), float(tau[1])))


def random_field(
    grid: Grid,
    r: float,
    R: float,
    medium: Checkerboard,
    rng: np.random.Generator,
    modes: int = 4,
    amplitude: float = 0.3,
    tol: float = 1e-10,
) -> GridField:
    """Discrete a-harmonic field on B_R minus B_r with perturbed radial boundary data.

    The inner disc carries 1 + g_in(theta), the outside g_out(theta), both
    random trigonometric polynomials.  Being a minimizer, the field cannot
    lose energy under any change supported in the open annulus.
    """
    f0 = annulus_constraints(grid, R, r, 1.0, 0.0)
    X, Y = grid.nodes()
    theta = np.arctan2(Y, X)

    def trig():
        k = np.arange(1, modes + 1)
        a = rng.normal(size=modes) * amplitude / k
        p = rng.uniform(0, 2 * np.pi, size=modes)
        return np.sum(a[:, None, None] * np.cos(k[:, None, None] * theta + p[:, None, None]), axis=0)

    rho = _radius(grid, (0.0, 0.0))
    inner = rho <= r * (1 + 1e-12)
    outer = f0.fixed & ~inner
    g_in, g_out = trig(), trig()
    f0.values[inner] = 1.0 + g_in[inner]
    f0.values[outer] = g_out[outer]
    u, _ = solve(assemble(grid, medium), f0, tol=tol)
    return u


def study_grid(N: int, nodes_per_unit: int = 256) -> Grid:
    """Grid on [-1, 1]^2 with spacing 1/nodes_per_unit."""
    if 2.0**-N < 4.0 / nodes_per_unit:
        raise ValueError("grid too coarse for the innermost annulus")
    return annulus_grid(1.0, 1.0 / nodes_per_unit)


def make_instance(alpha: float, beta: float, S: int, N: int, seed: int, nodes_per_unit: int = 256):
    """Unit-radius instance: eta = 2**-S, r = eta 2**(S - N) = 2**-N.

    Returns (field, medium, eta, r).
    """
    rng = np.random.default_rng(seed)
    tau = rng.uniform(0, 1, size=2)
    medium = study_medium(alpha, beta, S, tau)
    eta = 2.0**-S
    r = 2.0**-N
    grid = study_grid(N, nodes_per_unit)
    return random_field(grid, r, 1.0, medium, rng), medium, eta, r


def run_instance(alpha: float, beta: float, S: int, N: int, seed: int, nodes_per_unit: int = 256) -> Instance:
    u, medium, eta, r = make_instance(alpha, beta, S, N, seed, nodes_per_unit)
    _, j, ratio = round_on_circle(u, (0.0, 0.0), eta, S, N, r, medium)
    return Instance(S, N, seed, j, ratio)


def constant_study(
    alpha: float,
    beta: float,
    scales: Iterable[int],
    N_list: Iterable[int],
    seeds: Iterable[int],
    nodes_per_unit: int = 256,
) -> tuple[list[StudyRow], list[Instance]]:
    """Worst ratio and implied C = (ratio - 1)(N - 1) per (S, N).

    Each seed fixes tau and the boundary perturbation; the same seeds are
    reused for every S so the scales see matching data.
    """
    seeds = list(seeds)
    rows, instances = [], []
    for S in scales:
        for N in N_list:
            batch = [run_instance(alpha, beta, S, N, s, nodes_per_unit) for s in seeds]
            instances.extend(batch)
            worst = max(batch, key=lambda t: t.ratio)
            rows.append(StudyRow(S, N, len(batch), worst.ratio, max(b.implied_C for b in batch)))
    return rows, instances


def scale_spread(rows: Sequence[StudyRow]) -> float:
    """max/min - 1 of the per-S implied C (maximized over N)."""
    per_S: dict[int, float] = {}
    for row in rows:
        per_S[row.S] = max(per_S.get(row.S, 0.0), row.implied_C)
    vals = list(per_S.values())
    if min(vals) <= 0:
        return math.inf
    return max(vals) / min(vals) - 1.0


def calibrate(rows: Sequence[StudyRow], safety: float = SAFETY_FACTOR) -> float:
    """C_emp = safety * worst implied C."""
    return safety * max(row.implied_C for row in rows)


def _key(alpha: float, beta: float) -> str:
    return f"{float(alpha)!r},{float(beta)!r}"


def save_calibration(alpha: float, beta: float, C_emp: float, rows: Sequence[StudyRow],
                     path: str | Path = CALIBRATION_FILE) -> Path:
    path = Path(path)
    data = json.loads(path.read_text()) if path.exists() else {}
    data[_key(alpha, beta)] = {
        "alpha": alpha,
        "beta": beta,
        "C_emp": C_emp,
        "safety": SAFETY_FACTOR,
        "rows": [asdict(r) for r in rows],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def load_calibration(alpha: float, beta: float, path: str | Path = CALIBRATION_FILE) -> float:
    path = Path(path)
    if not path.exists():
        raise KeyError(f"no calibration file at {path}")
    data = json.loads(path.read_text())
    try:
        return float(data[_key(alpha, beta)]["C_emp"])
    except KeyError:
        raise KeyError(f"no stored C_emp for alpha={alpha}, beta={beta}") from None


def write_study_csv(rows: Sequence[StudyRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["S,N,samples,worst_ratio,implied_C"]
    lines += [f"{r.S},{r.N},{r.samples},{r.worst_ratio!r},{r.implied_C!r}" for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path
