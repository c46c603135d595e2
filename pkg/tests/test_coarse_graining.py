import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypcode.charts import DoubleChart, edge_test, point_key
from hypcode.coarse_graining import (
    NetIndex, _greedy, _surgery, build_alphabet, check_encoding, encode_orbit,
    encode_periodic, exact_orbit, extend_alphabet, growth_factor_log, ladder_floor,
    ladder_step, net_distance, on_ladder, orbit_log_Q, prune_relevant, robustness,
)
from hypcode.errors import ConfigError, NetOverflow, SurgeryFailure
from hypcode.model_flow import PointM
from hypcode.nuh_params import NUH


def section_point(world, u1, u2):
    col = world.lam.cells_containing(u1, u2)[0]
    return PointM(u1, u2, world.lam.columns[col][0].height)


@pytest.fixture(scope="module")
def encoded(world):
    x = world.disc_point(37)
    alpha = build_alphabet(world.atlas, [x])
    return world, alpha, encode_orbit(world.atlas, alpha, x, 12)


def test_robustness_constant():
    assert robustness(0.02, 0.2, 1.0) == pytest.approx(0.02 * 0.2 + 50)
    assert robustness(0.02, 0.2, 0.5) == pytest.approx(0.004 + 100)


def test_growth_factor(world):
    at = world.atlas
    lg = growth_factor_log(at)
    assert float(lg) == pytest.approx(min(at.eps ** 1.5, at.eps * at.r_inf / 2))
    # a capped greedy value is always below one growth step of the next cap
    assert 0 < lg < Fraction(at.eps) * Fraction(at.r_inf)


@settings(max_examples=100)
@given(st.fractions(min_value=-80, max_value=0), st.integers(1, 10 ** 6))
def test_ladder_floor(log_v, denom):
    step = Fraction(1, denom)
    f = ladder_floor(log_v, step)
    assert on_ladder(f, step)
    assert f <= log_v < f + step


def test_ladder_step_value():
    assert ladder_step(0.02, 0.5) == Fraction(0.02) ** 2 * Fraction(0.5)
    assert not on_ladder(Fraction(1), Fraction(1, 3))


def test_greedy_recursion():
    E = Fraction(1, 50)
    caps = [Fraction(-1), Fraction(-3), Fraction(-2), Fraction(-1)]
    gaps = [Fraction(10), Fraction(10), Fraction(10)]
    out = _greedy(caps, gaps, E)
    assert out[-1] == caps[-1]
    for k in range(3):
        assert out[k] == min(E * gaps[k] + out[k + 1], caps[k])


def test_surgery_fails_on_coarse_ladder():
    E = Fraction(1, 50)
    logP = [Fraction(-2), Fraction(-1)]
    # growing index whose ladder spacing is far coarser than the induction interval
    with pytest.raises(SurgeryFailure):
        _surgery(logP, [True, False], {0: Fraction(10)}, E, 0, 1)
    ok = _surgery(logP, [True, False], {0: Fraction(1, 10 ** 6)}, E, 0, 1)
    assert on_ladder(ok[0], Fraction(1, 10 ** 6))


def test_net_index(world):
    at = world.atlas
    x = world.disc_point(37)
    idx = NetIndex.of(at, x)
    assert idx.holds(at, x)
    assert idx.m == math.floor(-at.params(x).log_Q)


def test_orbit_log_Q_matches_direct(world):
    at = world.atlas
    orb = exact_orbit(at, world.disc_point(37), 4, 4, pad_time=Fraction(5))
    lq = orbit_log_Q(at, orb)
    for k in range(orb.origin - 4, orb.origin + 5):
        assert lq[k] == pytest.approx(at.params(orb.points[k]).log_Q, abs=1e-6)


def test_exact_orbit_links(world):
    at = world.atlas
    orb = exact_orbit(at, world.disc_point(37), 5, 5)
    assert len(orb) == 11 and orb.origin == 5
    for a, b, g in zip(orb.points, orb.points[1:], orb.gaps):
        assert point_key(at.f(a)) == point_key(b)
        assert g == at.return_time(a)


def test_encoding_checks(encoded):
    world, alpha, g = encoded
    chk = check_encoding(world.atlas, alpha, g)
    assert chk.ok, chk
    assert chk.failing_edges == []


def test_encoding_ratios(encoded):
    world, _, g = encoded
    tr = g.info["trace"]
    E = Fraction(world.atlas.eps)
    for a, b in zip(tr.log_ps + tr.log_pu, tr.log_Ps + tr.log_Pu):
        assert -E < a - b <= 0
    d = tr.to_dict()
    assert len(d["log_a_s"]) == len(tr.indices)
    assert set(d["tag_s"]) <= {"growing", "maximal"}


def test_encoded_charts_in_alphabet(encoded):
    world, alpha, g = encoded
    for n in range(-12, 13):
        rep = alpha.cg_report(g[n])
        assert rep["CG1"] and rep["CG2"] and rep["CG3"]
        assert g[n] in alpha.charts


def test_add_rejects_off_ladder(encoded):
    world, alpha, g = encoded
    v = g[0]
    bad = DoubleChart(v.chart, v.log_ps - Fraction(1, 10 ** 30), v.log_pu, v.tag)
    assert not alpha.contains(bad)
    with pytest.raises(ValueError):
        alpha.add(bad)


def test_connect_recovers_orbit_edges(encoded):
    world, alpha, g = encoded
    alpha.connect()
    for n in range(-12, 12):
        assert alpha.graph.has_edge(g[n], g[n + 1])
    for v in alpha.charts:
        for w in alpha.graph.successors(v):
            assert edge_test(world.atlas, v, w)


def test_pair_counts(encoded):
    _, alpha, _ = encoded
    assert alpha.count_pairs(0.0, cg3=False) == math.inf
    ts = [1e-17, 1e-16, 1e-15, 1e-14]
    filtered = [alpha.count_pairs(t, cg3=True) for t in ts]
    unfiltered = [alpha.count_pairs(t, cg3=False) for t in ts]
    assert all(a <= b for a, b in zip(filtered, unfiltered))
    assert all(a >= b for a, b in zip(unfiltered, unfiltered[1:]))
    assert all(a >= b for a, b in zip(filtered, filtered[1:]))
    assert alpha.count_pairs(0.0, cg3=True) < math.inf


def test_cg3_filter_enlarges_alphabet_when_dropped(world):
    at = world.atlas
    x = world.disc_point(37)
    a1 = build_alphabet(at, [x], cg3=True)
    a2 = build_alphabet(at, [x], cg3=False)
    assert a2.count_pairs(1e-20) >= a1.count_pairs(1e-20)


def test_fixed_point_encoding(world):
    alpha = build_alphabet(world.atlas, [world.fixed])
    g = encode_periodic(world.atlas, alpha, world.fixed, world.period)
    assert g[0].base == world.fixed
    assert g[0] == g[world.period] == g[-world.period]


def test_period_two_encoding(world):
    x = section_point(world, Fraction(1, 5), Fraction(2, 5))
    y, n = world.atlas.f(x), 1
    while point_key(y) != point_key(x):
        y, n = world.atlas.f(y), n + 1
    alpha = build_alphabet(world.atlas, [x])
    g = encode_periodic(world.atlas, alpha, x, n)
    assert g[0] == g[n]
    assert check_encoding(world.atlas, alpha, encode_orbit(world.atlas, alpha, x, n)).ok
    with pytest.raises(ValueError):
        encode_periodic(world.atlas, alpha, x, n - 1)


def test_prune_relevant(encoded):
    world, alpha, g = encoded
    alpha.connect()
    other = world.disc_point(101)
    extra = encode_orbit(world.atlas, alpha, other, 2)
    assert extra[0] in alpha.charts
    pruned = prune_relevant(alpha, [g])
    assert extra[0] not in pruned.charts
    assert pruned.charts == {g[n] for n in range(-12, 13)}
    again = prune_relevant(pruned, [g])
    assert again.charts == pruned.charts
    for n in range(-12, 12):
        assert pruned.graph.has_edge(g[n], g[n + 1])


def test_net_overflow(const_world):
    at = const_world.atlas
    pts = [const_world.disc_point(k) for k in range(6)]
    with pytest.raises(NetOverflow) as exc:
        build_alphabet(at, pts, cap=3)
    assert exc.value.witness["size"] >= 1


def test_beta_constraint(const_world):
    nuh = NUH(const_world.model, beta=2.0)
    at = type(const_world.atlas)(const_world.model, nuh, const_world.lam, const_world.hat)
    with pytest.raises(ConfigError):
        build_alphabet(at, [const_world.fixed])


def test_extend_and_distance(encoded):
    world, alpha, g = encoded
    before = alpha.net_size
    y = world.disc_point(202)
    extend_alphabet(alpha, [y, y])
    assert alpha.net_size == before + 1
    p = alpha.net_point(y)
    assert net_distance(world.atlas, y, p) == -math.inf
    assert np.isfinite(net_distance(world.atlas, world.disc_point(37), p))
