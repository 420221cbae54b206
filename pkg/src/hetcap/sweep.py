"""Epsilon sweeps of the scaled capacity with logarithmic extrapolation."""

from __future__ import annotations

import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .capacity import CENTER_POLICIES, solve_capacity
from .elliptic import GridProblem
from .formulas import checkerboard_limit
from .medium import SCHEDULE_KINDS, Checkerboard, ScaleSchedule, lambda_of
from .profiles import ProfileSpec, build_profile, guard_lambda1, upper_bound_report

BYTES_PER_NODE = 200
CSV_COLUMNS = (
    "epsilon", "delta", "lambda_nominal", "h", "n", "half_width", "m", "scaled",
    "predicted_limit", "gap", "iterations", "relative_residual", "z_x", "z_y",
    "profile_energy", "profile_ratio",
)


def geometric_epsilons(eps_max: float, eps_min: float, count: int) -> list[float]:
    """``count`` values from eps_max down to eps_min, equally spaced in log."""
    if count < 1 or not 0 < eps_min <= eps_max < 1:
        raise ValueError("need 0 < eps_min <= eps_max < 1 and count >= 1")
    if count == 1:
        return [eps_max]
    return [float(v) for v in np.exp(np.linspace(math.log(eps_max), math.log(eps_min), count))]


DEFAULT_EPSILONS = tuple(2.0**-k for k in range(5, 10))


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 1.0
    beta: float = 4.0
    schedule: str = "power"
    schedule_param: float | None = 0.5
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    half_width: float = 1.0
    points_per_eps: float = 3.5
    center_policy: str = "alpha_cell"
    tol: float = 1e-9
    deterministic: bool = True
    output_dir: str = "results"
    workers: int = 1
    memory_budget_gb: float = 3.5
    profile: bool = False
    profile_lambda1: float | None = None
    profile_R0: float = 0.9

    def __post_init__(self) -> None:
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        if not eps:
            raise ValueError("empty epsilon list")
        if any(not 0 < e < 1 for e in eps):
            raise ValueError("epsilons must lie in (0, 1)")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilon list must be strictly decreasing")
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("coefficients must be positive")
        if self.alpha > self.beta:
            raise ValueError("alpha must not exceed beta")
        if self.points_per_eps < 3:
            raise ValueError("points_per_eps must be >= 3 so that h <= eps/3")
        if self.center_policy not in CENTER_POLICIES:
            raise ValueError(f"unknown center policy {self.center_policy!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        self.schedule_obj()

    def schedule_obj(self) -> ScaleSchedule:
        return ScaleSchedule(self.schedule, self.schedule_param)

    @property
    def lam(self) -> float:
        return lambda_of(self.schedule_obj())

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["epsilons"] = list(self.epsilons)
        return d

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "RunConfig":
        """Build from strings (config file or CLI); unknown keys are rejected."""
        names = {f.name: f for f in dataclasses.fields(cls)}
        kw: dict[str, Any] = {}
        for key, raw in values.items():
            if raw is None:
                continue
            if key not in names:
                raise ValueError(f"unknown config key {key!r}")
            kw[key] = _coerce(key, raw)
        return cls(**kw)


def _coerce(key: str, raw: Any) -> Any:
    if not isinstance(raw, str):
        return tuple(raw) if key == "epsilons" else raw
    s = raw.strip()
    if key == "epsilons":
        return tuple(_number(p) for p in s.replace(" ", "").split(",") if p)
    if key in ("schedule", "center_policy", "output_dir"):
        return s
    if key in ("deterministic", "profile"):
        if s.lower() in ("1", "true", "yes", "on"):
            return True
        if s.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key} must be a boolean, got {raw!r}")
    if key == "workers":
        return int(s)
    if key in ("schedule_param", "profile_lambda1") and s.lower() in ("", "none"):
        return None
    return _number(s)


def _number(s: str) -> float:
    """Float, also accepting ``2^-5`` and ``2**-5``."""
    s = s.replace("**", "^")
    if "^" in s:
        base, exp = s.split("^")
        return float(base) ** float(exp)
    return float(s)


def read_config_file(path: str | Path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


@dataclass(frozen=True)
class GridChoice:
    h: float
    half_width: float
    n: int


def grid_policy(eps: float, delta: float, half_width: float, points_per_eps: float) -> GridChoice:
    """h = delta/(2k) with the least k giving h <= min(eps/points_per_eps, delta/4).

    The half-width is rounded to a multiple of h.
    """
    target = min(eps / points_per_eps, delta / 4)
    k = max(2, math.ceil(delta / (2 * target) - 1e-9))
    h = delta / (2 * k)
    m = max(1, round(half_width / h))
    return GridChoice(h, m * h, 2 * m + 1)


def estimated_bytes(n: int) -> int:
    return BYTES_PER_NODE * n * n


@dataclass(frozen=True)
class SweepRecord:
    epsilon: float
    delta: float
    lambda_nominal: float
    h: float
    n: int
    half_width: float
    m: float
    scaled: float
    predicted_limit: float
    gap: float
    iterations: int
    relative_residual: float
    z_x: float
    z_y: float
    runtime: float
    profile_energy: float | None = None
    profile_ratio: float | None = None
    profile: dict | None = None

    def csv_row(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def profile_lambda1(config: RunConfig, eps: float, delta: float) -> float:
    """Configured lambda1, else the default standoff capped by the delta guard."""
    lam = config.lam
    if config.profile_lambda1 is not None:
        return config.profile_lambda1
    return min(lam - 0.05, guard_lambda1(eps, delta))


def run_point(config: RunConfig, eps: float) -> SweepRecord:
    """Solve the capacity problem at one epsilon."""
    t0 = time.perf_counter()
    lam = config.lam
    delta = config.schedule_obj().delta(eps)
    medium = Checkerboard(config.alpha, config.beta, delta)
    g = grid_policy(eps, delta, config.half_width, config.points_per_eps)
    problem = GridProblem(g.half_width, g.h, (0.0, 0.0), eps)
    res = solve_capacity(problem, medium, config.center_policy, tol=config.tol, keep_field=config.profile)
    L = abs(math.log(eps))
    scaled = L * res.energy
    pred = checkerboard_limit(config.alpha, config.beta, lam)
    z = res.metadata["z"]
    prof = {}
    if config.profile:
        prof = _profile_point(config, eps, medium, problem.with_center(z), res, lam)
    return SweepRecord(
        epsilon=eps,
        delta=delta,
        lambda_nominal=lam,
        h=g.h,
        n=g.n,
        half_width=g.half_width,
        m=res.energy,
        scaled=scaled,
        predicted_limit=pred,
        gap=scaled - pred,
        iterations=res.iterations,
        relative_residual=res.relative_residual,
        z_x=z[0],
        z_y=z[1],
        runtime=time.perf_counter() - t0,
        profile_energy=prof.get("profile_energy"),
        profile_ratio=prof.get("ratio"),
        profile=prof or None,
    )


def _profile_point(config, eps, medium, problem, res, lam) -> dict:
    try:
        l1 = profile_lambda1(config, eps, medium.delta)
        spec = ProfileSpec.make(eps, medium, lam, problem.center, config.profile_R0, lambda1=l1)
        prof = build_profile(spec, medium, problem, op=res.operator)
        return upper_bound_report(prof, problem, res, lam)
    except ValueError as exc:
        return {"error": str(exc)}


def extrapolate(records: Sequence[Any]) -> tuple[float, float, float]:
    """Least-squares fit scaled = L_hat + b/|log eps|; returns (L_hat, b, rms residual)."""
    eps = np.array([_get(r, "epsilon") for r in records], dtype=float)
    y = np.array([_get(r, "scaled") for r in records], dtype=float)
    if len(eps) < 3:
        raise ValueError(f"extrapolation needs at least 3 records, got {len(eps)}")
    if len(np.unique(eps)) != len(eps):
        raise ValueError("degenerate design: repeated epsilon")
    x = 1.0 / np.abs(np.log(eps))
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2)))


def _get(r: Any, key: str) -> Any:
    return r[key] if isinstance(r, Mapping) else getattr(r, key)


def trend(records: Sequence[SweepRecord]) -> str:
    """``increasing``, ``decreasing`` or ``mixed`` as eps decreases."""
    d = np.diff([r.scaled for r in records])
    if np.all(d > 0):
        return "increasing"
    if np.all(d < 0):
        return "decreasing"
    return "mixed"


@dataclass
class SweepResult:
    config: RunConfig
    records: list[SweepRecord]
    failures: list[dict]
    extrapolation: dict | None
    seconds: float

    def summary(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "lambda": self.config.lam,
            "predicted_limit": checkerboard_limit(self.config.alpha, self.config.beta, self.config.lam),
            "extrapolation": self.extrapolation,
            "trend": trend(self.records) if len(self.records) > 1 else None,
            "failures": self.failures,
            "runtime": {repr(r.epsilon): r.runtime for r in self.records},
            "profiles": {repr(r.epsilon): r.profile for r in self.records if r.profile},
            "seconds": self.seconds,
        }


def check_memory(config: RunConfig) -> int:
    """Estimated bytes for the largest grid; raises if over budget."""
    sched = config.schedule_obj()
    worst = 0
    for eps in config.epsilons:
        g = grid_policy(eps, sched.delta(eps), config.half_width, config.points_per_eps)
        worst = max(worst, estimated_bytes(g.n))
    if worst > config.memory_budget_gb * 2**30:
        raise MemoryError(
            f"largest grid needs about {worst / 2**30:.2f} GB, budget {config.memory_budget_gb} GB"
        )
    return worst


def _safe_point(args):
    config, eps = args
    try:
        return run_point(config, eps), None
    except Exception as exc:  # recorded, the sweep goes on
        return None, {"epsilon": eps, "error": f"{type(exc).__name__}: {exc}"}


def sweep(config: RunConfig, write: bool = True) -> SweepResult:
    """Run every epsilon, fit the extrapolation and optionally write outputs."""
    check_memory(config)
    t0 = time.perf_counter()
    jobs = [(config, eps) for eps in config.epsilons]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            outcomes = list(pool.map(_safe_point, jobs))
    else:
        outcomes = [_safe_point(j) for j in jobs]
    records = [r for r, _ in outcomes if r is not None]
    failures = [f for _, f in outcomes if f is not None]
    if not records:
        raise RuntimeError(f"no epsilon succeeded: {failures}")
    fit = None
    if len(records) >= 3:
        L_hat, b, resid = extrapolate(records)
        fit = {"L_hat": L_hat, "slope": b, "residual": resid}
    result = SweepResult(config, records, failures, fit, time.perf_counter() - t0)
    if write:
        write_outputs(result)
    return result


def csv_text(records: Iterable[SweepRecord], with_runtime: bool = False) -> str:
    cols = list(CSV_COLUMNS) + (["runtime"] if with_runtime else [])
    lines = [",".join(cols)]
    for r in records:
        row = r.csv_row() + ([_fmt(r.runtime)] if with_runtime else [])
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_outputs(result: SweepResult) -> dict[str, Path]:
    """sweep.csv, summary.json and config.txt in the output directory."""
    out = Path(result.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "sweep.csv", "summary": out / "summary.json", "config": out / "config.txt"}
    paths["csv"].write_text(csv_text(result.records, with_runtime=not result.config.deterministic))
    paths["summary"].write_text(json.dumps(result.summary(), indent=2, sort_keys=True, default=_json_default) + "\n")
    paths["config"].write_text(
        "".join(f"{k} = {_config_value(v)}\n" for k, v in result.config.to_dict().items())
    )
    return paths


def _config_value(v: Any) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(repr(float(x)) for x in v)
    return "none" if v is None else str(v)


def _json_default(v: Any) -> Any:
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, (tuple, np.ndarray)):
        return list(v)
    raise TypeError(f"not serializable: {type(v)}")


__all__ = [
    "DEFAULT_EPSILONS",
    "GridChoice",
    "RunConfig",
    "SCHEDULE_KINDS",
    "SweepRecord",
    "SweepResult",
    "check_memory",
    "extrapolate",
    "geometric_epsilons",
    "grid_policy",
    "read_config_file",
    "run_point",
    "sweep",
    "trend",
]
