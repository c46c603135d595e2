import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypcode.symbolic_core import (
    MarkovGraph, RoofFunction, SuspensionPoint, SymbolPath, birkhoff_roof,
    bowen_walters_distance, first_difference, format_suspension_point,
    irreducible_components, parse_path, parse_suspension_point, path_distance,
    regular_test, shift, suspension_flow,
)

ALPHA = "abc"
words = st.lists(st.sampled_from(ALPHA), min_size=0, max_size=6).map(tuple)
cycles = st.lists(st.sampled_from(ALPHA), min_size=1, max_size=3).map(tuple)
paths = st.builds(SymbolPath, words, cycles, cycles, st.integers(-5, 8))


def symbol_roof():
    table = {"a": 0.7, "b": 1.3, "c": 1.0}
    return RoofFunction(lambda p: table[p.symbol(0)] + 0.05 * (p.symbol(1) == "a"),
                        (0.7, 1.35), radius=1)


def test_canonical_form_absorbs_cycles():
    p = SymbolPath(("a", "b", "x", "b", "a"), ("a", "b"), ("b", "a"), 0)
    assert p.core == ("x",)
    for n in range(-10, 10):
        ref = "abxba"[n] if 0 <= n < 5 else ("ab"[n % 2] if n < 0 else "ba"[(n - 5) % 2])
        assert p.symbol(n) == ref


def test_shift_examples():
    p = SymbolPath(("x", "y"), ("a",), ("a", "b"), 0)
    assert shift(p, 0) == p
    assert shift(shift(p, 3), -3) == p
    n = 4
    assert shift(p, 1).symbol(n) == p.symbol(n + 1)
    assert p.symbol(2) == "a" and shift(p, 1).symbol(2) == "b"


@given(paths, st.integers(-20, 20), st.integers(-30, 30))
def test_shift_law(p, k, n):
    assert shift(p, k).symbol(n) == p.symbol(n + k)


def test_path_distance_examples():
    base = SymbolPath.periodic("ab")
    assert path_distance(base, base) == 0.0
    word = [base.symbol(n) for n in range(-5, 6)]
    word[10] = "c"
    q = SymbolPath(tuple(word), ("ab"[1:] + "a"), ("ab"), 5)
    assert path_distance(base, q) == pytest.approx(math.exp(-5))
    word0 = [base.symbol(n) for n in range(-5, 6)]
    word0[5] = "c"
    r = SymbolPath(tuple(word0), ("b", "a"), ("a", "b"), 5)
    assert path_distance(base, r) == 1.0


def brute_difference(p, q, span=80):
    for m in range(span):
        for n in {m, -m}:
            if p.symbol(n) != q.symbol(n):
                return m
    return None


@given(paths, paths)
def test_first_difference_matches_brute_force(p, q):
    assert first_difference(p, q) == brute_difference(p, q)


@given(paths, paths, paths)
def test_path_distance_metric(p, q, r):
    d = path_distance
    assert d(p, q) == d(q, p) >= 0
    assert (d(p, q) == 0) == (p == q)
    assert d(p, r) <= d(p, q) + d(q, r) + 1e-15
    assert d(p, r) <= max(d(p, q), d(q, r)) + 1e-15


@given(paths, st.integers(-12, 12), st.integers(-12, 12))
def test_birkhoff_cocycle(p, m, n):
    roof = symbol_roof()
    lhs = birkhoff_roof(p, m + n, roof)
    rhs = birkhoff_roof(p, m, roof) + birkhoff_roof(shift(p, m), n, roof)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_birkhoff_examples():
    p = SymbolPath.periodic("ab")
    one = RoofFunction.constant(1.0)
    assert birkhoff_roof(p, 0, one) == 0
    assert birkhoff_roof(p, 7, one) == 7
    roof = symbol_roof()
    for n in range(1, 9):
        fwd = sum(roof(shift(shift(p, -n), k)) for k in range(n))
        assert birkhoff_roof(p, -n, roof) == pytest.approx(-fwd, rel=1e-12)


def test_suspension_examples():
    one = RoofFunction.constant(1.0)
    p = SymbolPath(("x",), ("a", "b"), ("b", "a"))
    z = SuspensionPoint(p, 0.25)
    assert suspension_flow(z, 0.0, one) == z
    w = suspension_flow(z, 2.5, one)
    assert w.path == shift(p, 2) and w.height == pytest.approx(0.75)


@settings(max_examples=60)
@given(paths, st.floats(0, 0.999), st.floats(-8, 8), st.floats(-8, 8))
def test_flow_law(p, frac, a, b):
    roof = symbol_roof()
    z = SuspensionPoint(p, frac * roof(p))
    lhs = suspension_flow(suspension_flow(z, a, roof), b, roof)
    rhs = suspension_flow(z, a + b, roof)
    if lhs.path != rhs.path:
        # both representations of a point on the roof boundary
        assert min(lhs.height, rhs.height) < 1e-9 or \
            abs(lhs.height - roof(lhs.path)) < 1e-9 or abs(rhs.height - roof(rhs.path)) < 1e-9
    else:
        assert lhs.height == pytest.approx(rhs.height, abs=1e-12)
    assert lhs.check(roof)


susp = st.builds(lambda p, f: (p, f), paths, st.floats(0, 0.999))


def to_point(pf, roof):
    p, f = pf
    return SuspensionPoint(p, f * roof(p))


@settings(max_examples=60, deadline=None)
@given(susp, susp, susp)
def test_bowen_walters_metric_axioms(x, y, z):
    roof = symbol_roof()
    x, y, z = (to_point(v, roof) for v in (x, y, z))
    d = lambda u, v: bowen_walters_distance(u, v, roof)
    assert d(x, x) == 0.0
    assert d(x, y) == pytest.approx(d(y, x), abs=1e-14)
    assert d(x, z) <= d(x, y) + d(y, z) + 1e-12


def test_bowen_walters_separates_points():
    roof = symbol_roof()
    p = SymbolPath.periodic("ab")
    q = SymbolPath(("c",), ("a", "b"), ("a", "b"), 30)
    assert bowen_walters_distance(SuspensionPoint(p, 0.1), SuspensionPoint(p, 0.1001), roof) > 0
    assert bowen_walters_distance(SuspensionPoint(p, 0.1), SuspensionPoint(q, 0.1), roof) > 0


def test_bowen_walters_continuous_across_roof():
    roof = symbol_roof()
    p = SymbolPath(("c", "a"), ("a", "b"), ("b",), 0)
    r0 = roof(p)
    d = bowen_walters_distance(SuspensionPoint(p, r0 * (1 - 1e-6)),
                               SuspensionPoint(shift(p, 1), 0.0), roof)
    assert d < 1e-5


def test_bowen_walters_flow_holder():
    # fitted constants: d(flow z, flow z') <= C d(z, z')^kappa for |t| <= 1
    roof = symbol_roof()
    rng = random.Random(3)
    ratios = []
    for _ in range(40):
        word = tuple(rng.choice(ALPHA) for _ in range(12))
        p = SymbolPath(word, ("a", "b"), ("c", "a"), 6)
        k = rng.randint(2, 5)
        w2 = list(word)
        w2[6 + k] = "b" if w2[6 + k] != "b" else "c"
        q = SymbolPath(tuple(w2), ("a", "b"), ("c", "a"), 6)
        z = SuspensionPoint(p, 0.3 * roof(p))
        zq = SuspensionPoint(q, 0.3 * roof(q) + 1e-3)
        d0 = bowen_walters_distance(z, zq, roof)
        t = rng.uniform(-1, 1)
        d1 = bowen_walters_distance(suspension_flow(z, t, roof), suspension_flow(zq, t, roof), roof)
        ratios.append(d1 / d0)
    assert max(ratios) < 30


def test_regular_test_examples():
    assert regular_test(SymbolPath(("x", "y"), ("a",), ("b",)))
    r = regular_test(SymbolPath.window("abc", origin=0))
    assert not r.regular and r.undetermined
    assert regular_test(SymbolPath.window("abaaba", origin=3)).regular


def test_components_examples():
    g = MarkovGraph(edges=[("a", "b"), ("b", "a")])
    assert irreducible_components(g) == [{"a", "b"}]
    assert irreducible_components(MarkovGraph(edges=[("a", "b")])) == []
    assert irreducible_components(MarkovGraph(edges=[("a", "a")])) == [{"a"}]


def reachability_oracle(n, edges):
    r = np.zeros((n, n), dtype=bool)
    for a, b in edges:
        r[a, b] = True
    for k in range(n):
        r |= r[:, k:k + 1] & r[k:k + 1, :]
    classes = {}
    for v in range(n):
        if r[v, v]:
            key = frozenset(w for w in range(n) if r[v, w] and r[w, v])
            classes[key] = True
    return set(classes)


@pytest.mark.parametrize("seed", range(8))
def test_components_match_reachability_oracle(seed):
    rng = np.random.default_rng(seed)
    n = 50
    edges = [(int(a), int(b)) for a in range(n) for b in range(n) if rng.random() < 0.03]
    g = MarkovGraph(range(n), edges)
    comps = irreducible_components(g)
    assert {frozenset(c) for c in comps} == reachability_oracle(n, edges)
    seen = set()
    for c in comps:
        assert not (seen & c)
        seen |= c


def test_components_deep_chain():
    n = 20000
    g = MarkovGraph(edges=[(i, i + 1) for i in range(n)] + [(n, 0)])
    assert [len(c) for c in irreducible_components(g)] == [n + 1]


def test_graph_io_round_trip():
    g = MarkovGraph(["iso"], [("a", "b"), ("b", "c"), ("c", "a")])
    h = MarkovGraph.from_dot(g.to_dot())
    assert set(h.edges) == set(g.edges) and set(h.vertices) == set(g.vertices)
    k = MarkovGraph.from_edge_lines(g.to_edge_lines())
    assert set(k.edges) == set(g.edges) and set(k.vertices) == set(g.vertices)
    with pytest.raises(ValueError):
        MarkovGraph.from_edge_lines("edge a")


@given(paths, st.floats(0, 5, allow_nan=False))
def test_point_serialization_round_trip(p, h):
    z = SuspensionPoint(p, h)
    w = parse_suspension_point(format_suspension_point(z))
    assert w.path == p and w.height == h
    assert parse_path("past=a,b;core=@0;future=a,b") == SymbolPath.periodic("ab")


def test_admissibility():
    g = MarkovGraph(edges=[("a", "b"), ("b", "a"), ("a", "a")])
    assert SymbolPath(("a", "a"), ("a", "b"), ("a",)).check_admissible(g)
    assert not SymbolPath(("b", "b"), ("a", "b"), ("a",)).check_admissible(g)


def test_roof_bounds_enforced():
    roof = RoofFunction(lambda p: 5.0, (1.0, 2.0))
    with pytest.raises(ValueError):
        roof(SymbolPath.periodic("a"))
