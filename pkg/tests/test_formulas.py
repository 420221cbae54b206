import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from hetcap.formulas import (
    TWO_PI,
    LimitInputs,
    annulus_capacity_exact,
    checkerboard_limit,
    dyadic_scale_count,
    gl_arithmetic_limit,
    harmonic_limit,
    optimal_boundary_value,
    two_term_energy,
)

pos = st.floats(0.05, 50.0)
lam01 = st.floats(0.0, 1.0)


def test_annulus_examples():
    assert annulus_capacity_exact(2, 1) == pytest.approx(9.064720283654388, rel=1e-12)
    assert annulus_capacity_exact(math.e * 0.3, 0.3) == pytest.approx(TWO_PI, rel=1e-12)
    # 6 pi/log 8 equals 2 pi/log 2
    assert annulus_capacity_exact(1, 1 / 8, 3) == pytest.approx(6 * math.pi / math.log(8), rel=1e-12)
    assert annulus_capacity_exact(1, 1 / 8, 3) == pytest.approx(annulus_capacity_exact(2, 1), rel=1e-12)


@pytest.mark.parametrize("R, r, c", [(1, 1, 1), (1, 2, 1), (0, -1, 1), (1, 0.5, 0), (1, 0.5, -2)])
def test_annulus_rejects(R, r, c):
    with pytest.raises(ValueError):
        annulus_capacity_exact(R, r, c)


@given(st.floats(1.01, 100), st.floats(0.01, 10), st.floats(0.01, 100))
def test_annulus_scale_invariant(ratio, r, t):
    a = annulus_capacity_exact(ratio * r, r)
    b = annulus_capacity_exact(t * ratio * r, t * r)
    assert a == pytest.approx(b, rel=1e-12)


def test_harmonic_examples():
    assert harmonic_limit(LimitInputs(1, 1, 0.37)) == pytest.approx(TWO_PI, rel=1e-15)
    assert harmonic_limit(LimitInputs(1.7, 3.0, 0.0)) == pytest.approx(TWO_PI * 1.7, rel=1e-15)
    assert harmonic_limit(LimitInputs(1, 2, 0.5)) == pytest.approx(8 * math.pi / 3, rel=1e-15)


def test_checkerboard_examples():
    assert checkerboard_limit(1, 4, 1) == pytest.approx(4 * math.pi, rel=1e-15)
    assert checkerboard_limit(1, 4, 0) == pytest.approx(TWO_PI, rel=1e-15)
    assert checkerboard_limit(1, 4, 0.5) == pytest.approx(8 * math.pi / 3, rel=1e-15)
    with pytest.raises(ValueError):
        checkerboard_limit(4, 1, 0.5)


def test_gl_examples():
    assert gl_arithmetic_limit(LimitInputs(1, 2, 0.5)) == pytest.approx(3 * math.pi, rel=1e-15)
    assert gl_arithmetic_limit(LimitInputs(2.5, 4, 0.0)) == pytest.approx(5 * math.pi, rel=1e-15)


def test_optimal_c_examples():
    assert optimal_boundary_value(1, 4, 1) == 1.0
    assert optimal_boundary_value(1, 4, 0) == 0.0
    assert optimal_boundary_value(1, 4, 0.5) == pytest.approx(1 / 3, rel=1e-15)


@pytest.mark.parametrize("a, b, lam", [(0, 1, 0.5), (-1, 1, 0.5), (2, 1, 0.5), (1, 2, -0.1), (1, 2, 1.1)])
def test_limit_inputs_invariants(a, b, lam):
    with pytest.raises(ValueError):
        LimitInputs(a, b, lam)


def test_dyadic_examples():
    assert dyadic_scale_count(2.0**-20, 0.5) == 10
    assert dyadic_scale_count(1e-6, 0.4, 2.0) == 8
    # eps**lambda1 == R gives 0
    assert dyadic_scale_count(0.25, 0.5, 0.5) == 0
    with pytest.raises(ValueError):
        dyadic_scale_count(0.5, 0.5, 0.25)
    with pytest.raises(ValueError):
        dyadic_scale_count(1.5, 0.5)


@given(st.floats(1e-12, 0.9), st.floats(0.01, 1.0), st.floats(1.0, 100.0))
def test_dyadic_is_max(eps, l1, R):
    n = dyadic_scale_count(eps, l1, R)
    assert eps**l1 * 2.0**n <= R * (1 + 1e-9)
    assert eps**l1 * 2.0 ** (n + 1) > R * (1 - 1e-9)


@given(pos, pos)
def test_harmonic_monotone_in_lambda(a, extra):
    b = a + extra
    lams = [i / 50 for i in range(51)]
    vals = [harmonic_limit(LimitInputs(a, b, l)) for l in lams]
    assert all(y > x for x, y in zip(vals, vals[1:]))


@given(pos, st.floats(0.0, 50.0))
def test_harmonic_endpoints(a, extra):
    b = a + extra
    assert harmonic_limit(LimitInputs(a, b, 0.0)) == pytest.approx(TWO_PI * a, rel=1e-12)
    assert harmonic_limit(LimitInputs(a, b, 1.0)) == pytest.approx(TWO_PI * b, rel=1e-12)


@given(pos, st.floats(0.0, 50.0), lam01)
def test_am_hm(a, extra, lam):
    b = a + extra
    inp = LimitInputs(a, b, lam)
    h, g = harmonic_limit(inp), gl_arithmetic_limit(inp)
    assert h <= g * (1 + 1e-12)
    if extra > 1e-6 and 1e-6 < lam < 1 - 1e-6:
        assert h < g


@given(pos, lam01)
def test_checkerboard_constant_case(a, lam):
    assert checkerboard_limit(a, a, lam) == pytest.approx(TWO_PI * a, rel=1e-12)


@given(pos, st.floats(0.0, 50.0), st.floats(0.001, 0.999))
def test_optimal_c_reproduces_limit(a, extra, lam):
    b = a + extra
    c = optimal_boundary_value(a, b, lam)
    assert two_term_energy(a, b, lam, c) == pytest.approx(checkerboard_limit(a, b, lam), rel=1e-12)


@given(pos, st.floats(0.0, 50.0), st.floats(0.01, 0.99), st.floats(0.0, 1.0))
def test_optimal_c_minimizes(a, extra, lam, c):
    b = a + extra
    best = two_term_energy(a, b, lam, optimal_boundary_value(a, b, lam))
    assert best <= two_term_energy(a, b, lam, c) * (1 + 1e-12)


def test_two_term_endpoints():
    assert two_term_energy(1, 4, 0.0, 0.0) == pytest.approx(TWO_PI, rel=1e-15)
    assert two_term_energy(1, 4, 1.0, 1.0) == pytest.approx(4 * math.pi, rel=1e-15)
    assert two_term_energy(1, 4, 0.0, 0.3) == math.inf
    assert two_term_energy(1, 4, 1.0, 0.3) == math.inf
