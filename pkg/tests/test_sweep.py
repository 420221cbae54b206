import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetcap.sweep import (
    RunConfig,
    csv_text,
    extrapolate,
    geometric_epsilons,
    grid_policy,
    read_config_file,
    sweep,
    trend,
)

SMALL = (2.0**-4, 2.0**-5, 2.0**-6)


def test_extrapolate_exact_model():
    eps = [2.0**-k for k in range(4, 10)]
    recs = [{"epsilon": e, "scaled": 7.5 - 3.25 / abs(math.log(e))} for e in eps]
    L, b, res = extrapolate(recs)
    assert L == pytest.approx(7.5, abs=1e-10)
    assert b == pytest.approx(-3.25, abs=1e-10)
    assert res < 1e-10


def test_extrapolate_constant():
    recs = [{"epsilon": e, "scaled": 4.0} for e in (0.1, 0.01, 0.001)]
    L, b, _ = extrapolate(recs)
    assert L == pytest.approx(4.0, abs=1e-12) and b == pytest.approx(0.0, abs=1e-10)


def test_extrapolate_errors():
    with pytest.raises(ValueError):
        extrapolate([{"epsilon": 0.1, "scaled": 1.0}, {"epsilon": 0.01, "scaled": 1.0}])
    with pytest.raises(ValueError):
        extrapolate([{"epsilon": e, "scaled": 1.0} for e in (0.1, 0.1, 0.01)])


@given(st.integers(3, 12), st.floats(0.05, 1.0), st.floats(3.0, 6.0))
def test_grid_policy_audit(k, lam, ppe):
    eps = 2.0**-k
    delta = eps**lam
    g = grid_policy(eps, delta, 1.0, ppe)
    ratio = delta / 2 / g.h
    assert abs(ratio - round(ratio)) < 1e-9
    assert eps / g.h >= 3 - 1e-9
    assert g.h <= delta / 4 * (1 + 1e-12)
    assert g.n == round(2 * g.half_width / g.h) + 1


def test_geometric_epsilons():
    e = geometric_epsilons(2.0**-5, 2.0**-9, 5)
    np.testing.assert_allclose(e, [2.0**-k for k in range(5, 10)], rtol=1e-12)


@pytest.mark.parametrize(
    "kw",
    [
        {"epsilons": (0.1, 0.2)},
        {"epsilons": (1.5, 0.1)},
        {"epsilons": ()},
        {"alpha": 4.0, "beta": 1.0},
        {"points_per_eps": 2.0},
        {"center_policy": "x"},
        {"schedule": "power", "schedule_param": 2.0},
        {"workers": 0},
    ],
)
def test_config_invalid(kw):
    with pytest.raises(ValueError):
        RunConfig(**kw)


def test_config_from_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# sweep\nalpha = 1\nbeta=4 \nepsilons = 2^-4, 2^-5,2**-6\nprofile = yes\nprofile_lambda1 = none\n")
    cfg = RunConfig.from_mapping(read_config_file(p))
    assert cfg.epsilons == SMALL and cfg.profile is True and cfg.profile_lambda1 is None
    with pytest.raises(ValueError):
        RunConfig.from_mapping({"colour": "red"})
    bad = tmp_path / "bad.cfg"
    bad.write_text("alpha 1\n")
    with pytest.raises(ValueError):
        read_config_file(bad)


@pytest.fixture(scope="module")
def small_sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    cfg = RunConfig(alpha=1.0, beta=1.0, schedule="power", schedule_param=1.0, epsilons=SMALL, output_dir=str(out))
    return cfg, sweep(cfg)


def test_records_consistent(small_sweep):
    cfg, res = small_sweep
    sched = cfg.schedule_obj()
    for r in res.records:
        assert r.scaled > 0
        assert r.scaled == abs(math.log(r.epsilon)) * r.m
        assert r.delta == sched.delta(r.epsilon)
        assert r.gap == r.scaled - r.predicted_limit
        assert r.predicted_limit == pytest.approx(2 * math.pi)
    assert trend(res.records) == "increasing"
    assert res.extrapolation is not None


def test_outputs_written(small_sweep):
    cfg, res = small_sweep
    from pathlib import Path

    out = Path(cfg.output_dir)
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 1 + len(SMALL)
    assert "runtime" not in lines[0]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["extrapolation"]["L_hat"] == res.extrapolation["L_hat"]
    assert set(summary["runtime"]) == {repr(e) for e in SMALL}
    echoed = RunConfig.from_mapping(read_config_file(out / "config.txt"))
    assert echoed == cfg


def test_deterministic_rerun(small_sweep, tmp_path):
    cfg, res = small_sweep
    again = sweep(RunConfig(**{**cfg.to_dict(), "epsilons": cfg.epsilons, "output_dir": str(tmp_path)}))
    assert csv_text(again.records) == csv_text(res.records)


def test_runtime_column_when_not_deterministic(tmp_path):
    cfg = RunConfig(alpha=1.0, beta=1.0, schedule="power", schedule_param=1.0, epsilons=SMALL,
                    deterministic=False, output_dir=str(tmp_path))
    sweep(cfg)
    assert (tmp_path / "sweep.csv").read_text().splitlines()[0].endswith(",runtime")


def test_failures_recorded(tmp_path):
    cfg = RunConfig(alpha=1.0, beta=1.0, schedule="power", schedule_param=1.0,
                    epsilons=(0.2, 0.0625, 0.03125), half_width=0.25, output_dir=str(tmp_path))
    res = sweep(cfg)
    assert [f["epsilon"] for f in res.failures] == [0.2]
    assert len(res.records) == 2 and res.extrapolation is None


def test_all_failed_is_fatal(tmp_path):
    cfg = RunConfig(alpha=1.0, beta=1.0, epsilons=(0.3, 0.2), half_width=0.25, output_dir=str(tmp_path))
    with pytest.raises(RuntimeError):
        sweep(cfg)


def test_memory_budget(tmp_path):
    cfg = RunConfig(epsilons=(2.0**-9,), memory_budget_gb=0.1, output_dir=str(tmp_path))
    with pytest.raises(MemoryError):
        sweep(cfg)


def test_profile_in_sweep(tmp_path):
    cfg = RunConfig(alpha=1.0, beta=4.0, schedule="power", schedule_param=0.75, epsilons=(2.0**-5, 2.0**-7),
                    profile=True, output_dir=str(tmp_path))
    res = sweep(cfg)
    first, last = res.records
    assert first.profile_energy is None and "error" in first.profile
    assert last.profile_ratio >= 1.0 and last.profile["admissible"]


def test_workers_match_serial(small_sweep, tmp_path):
    cfg, res = small_sweep
    par = sweep(RunConfig(**{**cfg.to_dict(), "epsilons": cfg.epsilons, "workers": 2, "output_dir": str(tmp_path)}))
    assert csv_text(par.records) == csv_text(res.records)
