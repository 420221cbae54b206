import math

import numpy as np
import pytest

from hetcap.homogenize import EffectiveTensor, cell_problem, periodic_weights, uniformity_probe


@pytest.fixture(scope="module")
def tensors():
    return {N: cell_problem(1.0, 4.0, N) for N in (16, 32, 64, 128)}


@pytest.mark.parametrize("N", [16, 32])
def test_constant_gives_identity(N):
    t = cell_problem(2.0, 2.0, N)
    np.testing.assert_allclose(t.matrix, 2.0 * np.eye(2), atol=1e-12)


def test_resolution_checks():
    with pytest.raises(ValueError):
        cell_problem(1, 4, 8)
    with pytest.raises(ValueError):
        cell_problem(1, 4, 33)
    with pytest.raises(ValueError):
        cell_problem(0, 4, 16)


def test_voigt_reuss_bracket(tensors):
    for t in tensors.values():
        ev = t.eigenvalues()
        assert np.all(ev >= 2 * 4 / 5 - 1e-12) and np.all(ev <= 2.5 + 1e-12)


def test_diagonal_symmetry(tensors):
    for t in tensors.values():
        assert abs(t.a11 - t.a22) <= 1e-6 * t.a11


def test_sqrt_det_matches_geometric_mean(tensors):
    errs = [abs(t.sqrt_det - 2.0) for _, t in sorted(tensors.items())]
    assert all(e < 1e-8 for e in errs)
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_off_diagonal_shrinks(tensors):
    # the half-open convention on interface edges leaves an O(1/N) coupling
    off = [abs(t.a12) for _, t in sorted(tensors.items())]
    assert all(b < a for a, b in zip(off, off[1:]))
    assert off[-1] <= 0.01


def test_duality(tensors):
    t = tensors[64]
    swapped = cell_problem(4.0, 1.0, 64)
    assert t.sqrt_det * swapped.sqrt_det == pytest.approx(4.0, rel=0.05)


def test_swapped_weights_are_complementary():
    wx, wy = periodic_weights(1.0, 4.0, 16)
    sx, sy = periodic_weights(4.0, 1.0, 16)
    assert np.array_equal(wx + sx, np.full_like(wx, 5.0))
    assert np.array_equal(wy + sy, np.full_like(wy, 5.0))


def test_tensor_container():
    t = EffectiveTensor(2.0, 0.5, 3.0, 16)
    assert t.sqrt_det == pytest.approx(math.sqrt(5.75))
    assert t.to_dict()["resolution"] == 16


def test_probe_constant_medium():
    target = 2 * math.pi / math.log(2)
    rows, worst = uniformity_probe(1.0, 1.0, [1 / 8], [(0, 0), (0.3, 0.6)])
    # a constant medium is tau-independent; only the discretization error remains
    assert rows[0].energy == rows[1].energy
    assert worst[1 / 8] < 0.02
    assert all(abs(r.energy - target) / target == r.deviation for r in rows)


def test_probe_converges_in_eta():
    taus = [(0.0, 0.0), (0.3, 0.7), (0.5, 0.5)]
    _, worst = uniformity_probe(1.0, 4.0, [1 / 8, 1 / 16, 1 / 32], taus, nodes_per_period=8)
    w = [worst[e] for e in (1 / 8, 1 / 16, 1 / 32)]
    assert all(b <= a * 1.1 for a, b in zip(w, w[1:]))


def test_probe_single_tau_value():
    rows, _ = uniformity_probe(1.0, 4.0, [1 / 32], [(0.0, 0.0)])
    assert rows[0].energy == pytest.approx(4 * math.pi / math.log(2), rel=0.10)


def test_probe_rejects_large_eta():
    with pytest.raises(ValueError):
        uniformity_probe(1.0, 4.0, [0.5], [(0, 0)])
