import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypcode.model_flow import ModelFlow, PointM, parse_point

unit = st.floats(0, 1, exclude_max=True)
times = st.floats(-6, 6)


@pytest.fixture(scope="module", params=["const", "cos"])
def model(request):
    return ModelFlow(roof=request.param)


def close_points(m, x, y, tol=1e-9):
    du = np.asarray(x.u) - np.asarray(y.u)
    du -= np.round(du)
    return np.all(np.abs(du) < tol) and abs(float(x.s) - float(y.s)) < tol


def test_flow_examples():
    m = ModelFlow()
    x = PointM(0.3, 0.7, 0.0)
    assert m.flow(x, 0) == x
    y = m.flow(x, 1.0)
    assert close_points(m, y, PointM(*((m.A @ [0.3, 0.7]) % 1), 0.0))
    z = m.flow(PointM(0.3, 0.7, 0.25), 2.5)
    ref = np.linalg.matrix_power(m.A, 2) @ [0.3, 0.7] % 1
    assert close_points(m, z, PointM(ref[0], ref[1], 0.75))


def test_exact_fractions_constant_roof():
    m = ModelFlow()
    x = PointM(Fraction(1, 5), Fraction(2, 5), Fraction(0))
    y = m.flow(x, 2)
    # A^2 = [[5,3],[3,2]]
    assert (y.u1, y.u2, y.s) == ((Fraction(5, 5) + Fraction(6, 5)) % 1, (Fraction(3, 5) + Fraction(4, 5)) % 1, 0)
    assert isinstance(y.u1, Fraction)
    back = m.flow(y, -2)
    assert (back.u1, back.u2, back.s) == (x.u1, x.u2, x.s)


@settings(max_examples=80)
@given(unit, unit, unit, times, times)
def test_flow_group_law(u1, u2, h, a, b):
    for roof in ("const", "cos"):
        m = ModelFlow(roof=roof)
        x = PointM(u1, u2, h * m.roof(u1, u2) * 0.999)
        lhs = m.flow(m.flow(x, a), b)
        rhs = m.flow(x, a + b)
        # both sides agree as points of the torus up to roundoff growth lambda^|a|
        tol = 1e-12 * m.lam ** (abs(a) + abs(b) + 2)
        if not close_points(m, lhs, rhs, tol):
            # a point on the identification may come out on either side
            alt = m.flow(lhs, 1e-9)
            assert close_points(m, alt, m.flow(rhs, 1e-9), max(tol, 1e-7))


def test_dflow_examples():
    m = ModelFlow()
    x = PointM(0.1, 0.2, 0.0)
    assert np.allclose(m.dflow(x, 0), np.eye(3))
    d = m.dflow(x, 1.0)
    assert np.allclose(d[:2, :2], m.A)
    assert np.linalg.det(d[:2, :2]) == pytest.approx(1.0)


@settings(max_examples=40)
@given(unit, unit, unit, times, times)
def test_dflow_chain_rule(u1, u2, h, a, b):
    m = ModelFlow(roof="cos")
    x = PointM(u1, u2, h * 0.9)
    lhs = m.dflow(x, a + b)
    rhs = m.dflow(m.flow(x, a), b) @ m.dflow(x, a)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * np.abs(lhs).max())


def test_dflow_matches_finite_differences():
    m = ModelFlow(roof="cos")
    x = PointM(0.13, 0.71, 0.4)
    t = 2.3
    d = m.dflow(x, t)
    y0 = m.flow(x, t)
    h = 1e-7
    for j in range(3):
        v = [0.0, 0.0, 0.0]
        v[j] = h
        y = m.flow(PointM(x.u1 + v[0], x.u2 + v[1], x.s + v[2]), t)
        du = (np.asarray(y.u) - np.asarray(y0.u) + 0.5) % 1 - 0.5
        col = np.array([du[0], du[1], float(y.s) - float(y0.s)]) / h
        assert np.allclose(col, d[:, j], rtol=1e-4, atol=1e-4)


def test_flat_model_norm_bound():
    m = ModelFlow()
    x = PointM(0.2, 0.3, 0.5)
    for t in np.linspace(-4, 4, 33):
        assert np.linalg.norm(m.dflow(x, t), 2) <= math.exp(abs(t)) * m.lam + 1e-12
        k = math.floor(0.5 + t)
        assert np.linalg.norm(m.dflow(x, t), 2) == pytest.approx(m.lam ** abs(k))
    assert m.log_lam < 1


def test_one_form_projection():
    m = ModelFlow()
    x = PointM(0.2, 0.3, 0.5)
    X = m.vector_field(x)
    assert np.allclose(m.one_form_project(x, X), 0)
    w = np.array([0.3, -0.2, 0.0])
    assert np.allclose(m.one_form_project(x, w), w)
    assert np.allclose(m.one_form_project(x, X + w), w)
    v = np.array([0.4, 0.1, 2.0])
    p = m.one_form_project(x, v)
    assert np.array_equal(m.one_form_project(x, p), p)
    assert m.one_form(x) @ X == 1.0
    f = m.normal_frame(x)
    assert f.e1 @ f.e2 == 0 and m.one_form(x) @ f.e1 == 0


def test_induced_phi_examples_and_cocycle(model):
    m = model
    x = PointM(0.1, 0.6, 0.0)
    assert np.allclose(m.induced_phi(x, 0), np.eye(2))
    if m.roof_kind == "const":
        assert np.allclose(m.induced_phi(x, 1.0), m.A)
    y = PointM(0.37, 0.21, 0.33)
    lhs = m.induced_phi(y, 1.3)
    rhs = m.induced_phi(m.flow(y, 0.5), 0.8) @ m.induced_phi(y, 0.5)
    assert np.allclose(lhs, rhs, atol=1e-10)
    d = m.dflow(y, 1.3)
    assert np.allclose(d[:2, :2], lhs)


def test_splitting_examples():
    m = ModelFlow()
    n_s, n_u = m.splitting_directions()
    g = (math.sqrt(5) - 1) / 2
    ref_u = np.array([1, g]) / math.hypot(1, g)
    ref_s = np.array([1, -(math.sqrt(5) + 1) / 2]) / math.hypot(1, (math.sqrt(5) + 1) / 2)
    assert np.allclose(n_u, ref_u, atol=1e-12)
    assert np.allclose(n_s, ref_s, atol=1e-12)
    assert 0 < m.alpha <= math.pi / 2
    assert m.alpha == pytest.approx(math.pi / 2)
    assert m.lam == pytest.approx((3 + math.sqrt(5)) / 2)


def test_splitting_oracle_eig():
    for mat in ([[2, 1], [1, 1]], [[3, 1], [2, 1]], [[1, 1], [1, 2]]):
        m = ModelFlow(matrix=mat)
        w, v = np.linalg.eig(np.array(mat, dtype=float))
        i = int(np.argmax(np.abs(w)))
        n_s, n_u = m.splitting_directions()
        assert abs(abs(v[:, i] @ n_u) - 1) < 1e-12
        assert abs(abs(v[:, 1 - i] @ n_s) - 1) < 1e-12
        assert 0 < m.alpha <= math.pi / 2 + 1e-15


def test_splitting_invariance(model):
    m = model
    n_s, n_u = m.splitting_directions()
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = PointM(*rng.random(2), 0.5 * rng.random())
        t = rng.uniform(-3, 3)
        P = m.induced_phi(x, t)
        for n in (n_s, n_u):
            img = P @ n
            img /= np.linalg.norm(img)
            assert abs(abs(img @ n) - 1) < 1e-9


def test_crossing_times_constant_roof():
    m = ModelFlow()
    x = PointM(0.1, 0.2, 0.25)
    assert m.crossing_times(x, 0, 3) == pytest.approx([0.75, 1.75, 2.75])


def test_point_parse_round_trip():
    x = PointM(0.125, 0.5, 0.75)
    assert parse_point(str(x)) == x


def test_bad_matrix_rejected():
    with pytest.raises(ValueError):
        ModelFlow(matrix=[[1, 1], [0, 1]])
    with pytest.raises(ValueError):
        ModelFlow(roof="wave")
