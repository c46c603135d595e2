import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypcode.charts import (
    DoubleChart, chart_inverse_map, chart_return_map, check_decomp, coordinate_change,
    coordinate_change_norm, edge_report, edge_test, exp_value, gpo2_bounds, inclusion_check,
    log_cap, log_distance, log_fraction, overlap_test, ratio_bound_holds,
    transition_time,
)
from hypcode.coarse_graining import build_alphabet, encode_orbit
from hypcode.errors import DomainExceeded
from hypcode.model_flow import PointM


@pytest.fixture(scope="module")
def encoded(world):
    x = world.disc_point(37)
    alpha = build_alphabet(world.atlas, [x])
    return world, alpha, encode_orbit(world.atlas, alpha, x, 8)


def test_log_fraction_matches_float():
    for v in (Fraction(3, 7), Fraction(1, 10 ** 40), Fraction(5)):
        assert log_fraction(v) == pytest.approx(math.log(float(v)), rel=1e-12)
    # far below the float range
    assert log_fraction(Fraction(1, 10 ** 400)) == pytest.approx(-400 * math.log(10), rel=1e-12)
    assert log_fraction(Fraction(0)) == -math.inf


def test_log_distance_wraps(const_world):
    x = const_world.fixed
    y = PointM(Fraction(999, 1000), Fraction(0), x.s)
    assert log_distance(x, y) == pytest.approx(math.log(1e-3))


def test_chart_is_contracting(world):
    for k in (0, 37, 200):
        c = world.atlas.chart(world.disc_point(k))
        assert c.lipschitz_ratio() <= np.linalg.norm(c.C, 2) + 1e-12
        assert np.linalg.norm(c.C, 2) <= 1


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_apply_invert_round_trip(a, b):
    from conftest import world_for
    w = world_for("const")
    c = w.atlas.chart(w.disc_point(37))
    v = np.array([a, b]) * 1e-3
    assert np.allclose(c.invert(c.apply(v)), v, atol=1e-12)
    back = c.invert(c.apply(v, exact=True))
    assert np.allclose(back, v, atol=1e-15)


def test_apply_outside_domain(const_world):
    c = const_world.atlas.chart(const_world.fixed)
    with pytest.raises(DomainExceeded):
        c.apply([0.5, 0.0])


def test_return_map_bounds(world):
    at = world.atlas
    for k in (0, 37, 101, 250):
        rep = check_decomp(chart_return_map(at, world.disc_point(k)), at)
        assert rep["H0"] == 0.0
        assert rep["c1_size"] < at.eps


def test_return_map_is_affine_and_invertible(world):
    at = world.atlas
    x = world.disc_point(37)
    fwd = chart_return_map(at, x)
    inv = chart_inverse_map(at, at.f(x))
    W = np.random.default_rng(0).uniform(-1, 1, (20, 2)) * fwd.radius
    assert np.allclose(fwd(W), fwd.exact(W), atol=1e-12 * fwd.radius)
    assert np.allclose(inv.exact(fwd.exact(W)), W, atol=1e-12 * fwd.radius)


def test_return_map_hyperbolic_along_orbit(world):
    at = world.atlas
    x = world.fixed
    for _ in range(world.period):
        d = chart_return_map(at, x)
        r = d.info["return_time"]
        assert abs(d.A) < math.exp(-at.nuh.chi * r) and abs(d.B) > math.exp(at.nuh.chi * r)
        x = at.f(x)


def test_overlap_and_coordinate_change(world):
    at = world.atlas
    c1 = at.chart(world.disc_point(37))
    c2 = at.chart(world.disc_point(38))
    off, lin = coordinate_change(c1, c1)
    assert np.all(off == 0) and np.allclose(lin, 0)
    assert coordinate_change_norm(c1, c1) < 1e-12
    assert overlap_test(c1, 1e-16, c1, 1e-16, at.eps)
    assert not overlap_test(c1, 1e-16, c2, 1e-16, at.eps)
    # window sizes differing by more than e^eps never overlap
    assert not overlap_test(c1, 1e-16, c1, 1e-16 * math.exp(2 * at.eps), at.eps)


def test_transition_time_is_return_time(encoded):
    world, _, g = encoded
    at = world.atlas
    for n in range(-3, 3):
        T = transition_time(at, g[n], g[n + 1])
        assert float(T.value) == pytest.approx(float(at.return_time(g[n].base)), abs=1e-12)


def test_encoded_edges(encoded):
    world, _, g = encoded
    at = world.atlas
    for n in range(-8, 8):
        v, w = g[n], g[n + 1]
        assert edge_test(at, v, w)
        assert ratio_bound_holds(v, w, at.eps)
        assert inclusion_check(at, v, w)
        rep = edge_report(at, v, w)
        lo, val, hi = rep.gpo2_s
        assert lo <= val <= hi


def test_edge_rejected_off_orbit(encoded):
    world, _, g = encoded
    assert not edge_test(world.atlas, g[0], g[2])
    assert not edge_test(world.atlas, g[1], g[0])


def test_edge_rejected_on_oversized_window(encoded):
    world, _, g = encoded
    v, w = g[0], g[1]
    big = DoubleChart(v.chart, v.log_ps + 1, v.log_pu, v.tag)
    assert not edge_test(world.atlas, big, w)


def test_window_sizes_are_capped(encoded):
    world, _, g = encoded
    for n in range(-8, 9):
        assert g[n].valid(world.atlas.eps)
        assert max(g[n].log_ps, g[n].log_pu) <= log_cap(g[n].chart, world.atlas.eps)


@settings(max_examples=50)
@given(st.floats(0.001, 0.5), st.floats(-40, -30), st.floats(-40, -30), st.floats(-32, -28))
def test_gpo2_bounds_ordered(T, lp, lq, lQ):
    eps = 0.02
    lo, hi = gpo2_bounds(eps, Fraction(T), Fraction(lp), Fraction(lq), lQ)
    assert lo <= hi


def test_exp_value_exact():
    assert exp_value(Fraction(0)) == 1
    assert float(exp_value(Fraction(-36))) == math.exp(-36)
