import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetcap import degiorgi as dg
from hetcap.capacity import annulus_grid
from hetcap.elliptic import Grid, GridField
from hetcap.medium import Checkerboard

S, N = 8, 4
ETA = 2.0**-S
R = 1.0


def radial(grid, f, r):
    X, Y = grid.nodes()
    rho = np.hypot(X, Y)
    vals = f(np.maximum(rho, 1e-300))
    fixed = (rho <= r) | (rho >= R)
    return GridField(grid, vals, fixed), rho


def log_field(grid, r):
    return radial(grid, lambda p: np.clip(np.log(R / p) / math.log(R / r), 0.0, 1.0), r)


@pytest.fixture(scope="module")
def grid():
    return annulus_grid(1.0, 1 / 256)


def test_constant_field_unchanged(grid):
    f, _ = radial(grid, lambda p: np.full_like(p, 0.3), 2.0**-N)
    v, j, ratio = dg.round_on_circle(f, (0, 0), ETA, S, N, 2.0**-N, Checkerboard(1, 4, 1 / 16))
    assert ratio == 1.0
    assert np.array_equal(v.values, f.values)


def test_collar_gives_ratio_one(grid):
    r = 2.0**-N
    j0 = 2
    rho_j = ETA * 2.0 ** (S - j0)

    def f(p):
        base = np.clip(np.log(R / p) / math.log(R / r), 0, 1)
        return np.where((p > rho_j / 2 * 0.9) & (p < 2 * rho_j * 1.1), 0.5, base)

    field, _ = radial(grid, f, r)
    rows = dg.candidate_ratios(field, (0, 0), ETA, S, N, r, Checkerboard.constant(1.0))
    ratios = {j: q for j, _, q in rows}
    assert ratios[j0] == 1.0
    v = dict((j, w) for j, w, _ in rows)[j0]
    assert np.array_equal(v.values, field.values)


def test_radial_log_bound(grid):
    r = 2.0**-N
    f, _ = log_field(grid, r)
    C = dg.load_calibration(1.0, 1.0)
    _, _, ratio = dg.round_on_circle(f, (0, 0), ETA, S, N, r, Checkerboard.constant(1.0))
    assert 1.0 <= ratio <= 1 + C / (N - 1)


def test_properties_ii_iii(grid):
    u, med, eta, r = dg.make_instance(1.0, 4.0, S, N, seed=7)
    v, j, ratio = dg.round_on_circle(u, (0, 0), eta, S, N, r, med)
    rho_j = eta * 2.0 ** (S - j)
    X, Y = u.grid.nodes()
    rho = np.hypot(X, Y)
    changed = v.values != u.values
    assert np.all((rho[changed] > rho_j / 2) & (rho[changed] < 2 * rho_j))
    band = dg.circle_nodes(u.grid, (0, 0), rho_j)
    assert np.unique(v.values[band]).size == 1
    assert ratio >= 1 - 1e-9


def test_workers_do_not_change_result():
    u, med, eta, r = dg.make_instance(1.0, 4.0, 6, 4, seed=3)
    a = dg.round_on_circle(u, (0, 0), eta, 6, 4, r, med)
    b = dg.round_on_circle(u, (0, 0), eta, 6, 4, r, med, workers=3)
    assert a[1] == b[1] and a[2] == b[2]
    assert np.array_equal(a[0].values, b[0].values)


def test_homothety(grid):
    u, med, eta, r = dg.make_instance(1.0, 4.0, S, 3, seed=11)
    t = 0.37
    g2 = Grid(grid.n, grid.h * t, (grid.origin[0] * t, grid.origin[1] * t))
    u2 = GridField(g2, u.values.copy(), u.fixed.copy())
    med2 = Checkerboard(med.alpha, med.beta, med.delta * t, med.tau)
    a = dg.round_on_circle(u, (0, 0), eta, S, 3, r, med)
    b = dg.round_on_circle(u2, (0, 0), eta * t, S, 3, r * t, med2)
    assert a[1] == b[1]
    assert b[2] == pytest.approx(a[2], rel=1e-12)


@pytest.mark.parametrize(
    "eta, S_, N_, r",
    [(ETA, 2, 2, 0.1), (ETA, S, S, 0.01), (ETA, S, 1, 0.01), (ETA, S, N, 0.5), (ETA, S, N, 0.0)],
)
def test_preconditions(grid, eta, S_, N_, r):
    f, _ = log_field(grid, 2.0**-N)
    with pytest.raises(ValueError):
        dg.round_on_circle(f, (0, 0), eta, S_, N_, r, Checkerboard.constant(1.0))


def test_thin_annulus_rejected():
    g = annulus_grid(1.0, 1 / 32)
    f, _ = log_field(g, 2.0**-5)
    with pytest.raises(ValueError, match="4h"):
        dg.round_on_circle(f, (0, 0), ETA, S, 5, 2.0**-5, Checkerboard.constant(1.0))


def test_outer_scale():
    assert dg.outer_scale(2.0**-8, 1.0) == 8
    assert dg.outer_scale(0.3, 1.0) == 1


@given(st.floats(0.05, 0.5), st.floats(1e-4, 0.01))
def test_cutoff_shape(c, h):
    rho = np.linspace(0, 1.2, 2001)
    phi = dg.cutoff(rho, c, h)
    assert np.all((phi >= 0) & (phi <= 1))
    assert np.all(phi[np.abs(rho - c) <= h] == 1)
    assert np.all(phi[(rho <= c / 2) | (rho >= 2 * c)] == 0)
    inner = (rho > c / 2) & (rho < c)
    assert np.all(np.diff(phi[inner]) >= -1e-15)


def test_study_constant_medium_scale_free():
    rows, inst = dg.constant_study(1.0, 1.0, [6, 8, 10], [3], range(2))
    assert dg.scale_spread(rows) == 0.0
    assert all(math.isfinite(r.implied_C) and r.implied_C > 0 for r in rows)
    assert min(i.ratio for i in inst) >= 1 - 1e-9


def test_doubling_N_halves_excess():
    rows, _ = dg.constant_study(1.0, 4.0, [6], [2, 4], range(3))
    excess = {r.N: r.worst_ratio - 1 for r in rows}
    assert 0.3 <= excess[4] / excess[2] <= 0.8


def test_calibration_roundtrip(tmp_path):
    rows = [dg.StudyRow(6, 2, 1, 1.2, 0.2), dg.StudyRow(8, 3, 1, 1.15, 0.3)]
    C = dg.calibrate(rows)
    assert C == pytest.approx(dg.SAFETY_FACTOR * 0.3)
    path = dg.save_calibration(2.0, 3.0, C, rows, tmp_path / "c.json")
    assert dg.load_calibration(2.0, 3.0, path) == C
    with pytest.raises(KeyError):
        dg.load_calibration(1.0, 3.0, path)
    csv = dg.write_study_csv(rows, tmp_path / "t.csv").read_text().splitlines()
    assert csv[0] == "S,N,samples,worst_ratio,implied_C" and len(csv) == 3


def test_stored_calibration_present():
    for a, b in [(1.0, 1.0), (1.0, 4.0)]:
        assert dg.load_calibration(a, b) > 0
