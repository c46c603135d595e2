import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypcode.errors import DivergentIntegral, HorizonTooShort, SpacingViolation
from hypcode.model_flow import ModelFlow, PointM
from hypcode.nuh_params import (
    NUH, brute_force_p, constant_roof_integrals, orbit_log_q, section_orbit,
)
from hypcode.sections import build_sections


@pytest.fixture(scope="module")
def const():
    m = ModelFlow()
    return m, NUH(m)


@pytest.fixture(scope="module")
def cos():
    m = ModelFlow(roof="cos")
    return m, NUH(m)


def test_closed_form_at_height_zero(const):
    m, nuh = const
    chi, lam = nuh.chi, m.lam
    ref = ((math.exp(2 * chi) - 1) / (2 * chi)) / (1 - math.exp(2 * chi) / lam ** 2)
    x = PointM(0.3, 0.1, 0.0)
    assert nuh.integral_s(x) == pytest.approx(ref, rel=1e-9)
    s, u = nuh.compute_su(x)
    assert s == pytest.approx(2 * math.exp(2 * nuh.rho) * math.sqrt(ref), rel=1e-9)


def test_closed_form_at_section_points(const):
    m, nuh = const
    lam_sec, _ = build_sections(m)
    for d in lam_sec.discs[::7]:
        x = PointM(d._fc[0], d._fc[1], d.hf)
        Is, Iu = constant_roof_integrals(nuh, d.hf)
        assert nuh.integral_s(x) == pytest.approx(Is, rel=1e-9)
        assert nuh.integral_u(x) == pytest.approx(Iu, rel=1e-9)


@settings(max_examples=50)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True), st.floats(0, 0.99))
def test_su_lower_bound(u1, u2, h):
    for roof in ("const", "cos"):
        m = ModelFlow(roof=roof)
        nuh = NUH(m)
        x = PointM(u1, u2, h * m.roof(u1, u2))
        s, u = nuh.compute_su(x)
        assert s >= math.sqrt(2) and u >= math.sqrt(2)


def test_divergent_integral():
    m = ModelFlow()
    nuh = NUH(m, chi=m.log_lam + 0.1)
    with pytest.raises(DivergentIntegral):
        nuh.compute_su(PointM(0.1, 0.2, 0.3))


def sample_points(m, count, seed):
    rng = np.random.default_rng(seed)
    return [PointM(a, b, c * m.roof(a, b)) for a, b, c in rng.random((count, 3))]


@pytest.mark.parametrize("roof", ["const", "cos"])
def test_reduction_bounds(roof):
    m = ModelFlow(roof=roof)
    nuh = NUH(m)
    rho, chi = nuh.rho, nuh.chi
    rng = np.random.default_rng(1)
    for x in sample_points(m, 60, 2):
        t = rng.uniform(1e-3, 2 * rho)
        A, B, off = nuh.oseledets_pesin_reduce(x, t)
        assert off <= 1e-8
        assert math.exp(-4 * rho) < abs(A) < math.exp(-chi * t)
        assert math.exp(chi * t) < abs(B) < math.exp(4 * rho)


def test_reduction_identity(const):
    m, nuh = const
    A, B, off = nuh.oseledets_pesin_reduce(PointM(0.2, 0.4, 0.5), 0.0)
    assert A == pytest.approx(1) and B == pytest.approx(1) and off < 1e-15


@pytest.mark.parametrize("roof", ["const", "cos"])
def test_ratio_bounds(roof):
    m = ModelFlow(roof=roof)
    nuh = NUH(m)
    rho = nuh.rho
    rng = np.random.default_rng(3)
    for x in sample_points(m, 40, 4):
        p = nuh.params(x)
        t = rng.uniform(-2 * rho, 2 * rho)
        q = nuh.params(m.flow(x, t))
        assert abs(math.log(q.s_val / p.s_val)) <= 10 * rho
        assert abs(math.log(q.u_val / p.u_val)) <= 10 * rho
        assert abs(math.log(q.C_inv_frob / p.C_inv_frob)) <= 18 * rho
        assert abs(q.log_Q - p.log_Q) <= 250 * rho / nuh.beta


def test_c_matrix_properties(cos):
    m, nuh = cos
    for x in sample_points(m, 20, 5):
        p = nuh.params(x)
        assert np.linalg.norm(p.C, 2) <= np.linalg.norm(p.C, "fro") <= 1
        assert np.linalg.norm(np.linalg.inv(p.C), "fro") == pytest.approx(p.C_inv_frob, rel=1e-12)
        assert 0 < p.Q <= nuh.eps ** (3 / nuh.beta)
        assert p.log_Q >= nuh.log_q_min


def test_reduced_cocycle_eigenvectors(cos):
    m, nuh = cos
    for x in sample_points(m, 10, 6):
        t = 0.3
        px, py = nuh.params(x), nuh.params(m.flow(x, t))
        M = np.linalg.solve(py.C, m.induced_phi(x, t) @ px.C)
        A, B, _ = nuh.oseledets_pesin_reduce(x, t)
        assert np.allclose(M @ [1, 0], [A, 0], atol=1e-8)
        assert np.allclose(M @ [0, 1], [0, B], atol=1e-8)


@pytest.mark.parametrize("roof", ["const", "cos"])
def test_orbit_profile_matches_direct(roof):
    m = ModelFlow(roof=roof)
    nuh = NUH(m)
    x = PointM(0.21, 0.37, 0.3)
    prof = nuh.orbit_profile(x, -15, 15)
    for t in np.linspace(-14.9, 14.9, 23):
        assert prof.log_Q(t) == pytest.approx(nuh.params(m.flow(x, t)).log_Q, abs=1e-8)


def dense_q(m, nuh, x, horizon, step=2e-3, fine=2e-6):
    prof = nuh.orbit_profile(x, -horizon, horizon)
    # a dense grid plus points just before each crossing, where log Q jumps
    cross = np.array(m.crossing_times(x, -horizon, horizon))
    ts = np.concatenate([np.arange(-horizon, horizon, step), cross - 1e-11])

    def scan(sign):
        pts = [t for t in ts if sign * t >= 0]
        vals = np.array([sign * nuh.eps * t + prof.log_Q(t) for t in pts])
        best = vals.min()
        # refine on a fine grid around the best coarse points
        for i in np.argsort(vals)[:8]:
            c = pts[i]
            for t in np.arange(c - step, c + step, fine):
                if sign * t >= 0:
                    best = min(best, sign * nuh.eps * t + prof.log_Q(t))
        return math.log(nuh.eps) + best

    return scan(1), scan(-1)


@pytest.mark.parametrize("roof", ["const", "cos"])
def test_compute_q_matches_dense_oracle(roof):
    m = ModelFlow(roof=roof)
    nuh = NUH(m)
    for x in sample_points(m, 3, 7):
        lq = nuh.compute_q(x)
        H = lq.horizon
        ds, du = dense_q(m, nuh, x, 2 * H)
        # the dense grid can only overestimate the infimum
        assert math.log(lq.q_s) <= ds + 1e-12 and ds - math.log(lq.q_s) < 1e-4
        assert math.log(lq.q_u) <= du + 1e-12 and du - math.log(lq.q_u) < 1e-4
        assert lq.q == min(lq.q_s, lq.q_u) <= nuh.eps * nuh.params(x).Q


def test_q_lipschitz_along_flow(cos):
    m, nuh = cos
    x = PointM(0.4, 0.6, 0.2)
    q0 = nuh.compute_q(x).q
    for t in (0.05, 0.3, 1.7, -0.9):
        q1 = nuh.compute_q(m.flow(x, t)).q
        assert abs(math.log(q1 / q0)) <= nuh.eps * abs(t) + 1e-9


def test_horizon_too_short(cos):
    m, nuh = cos
    x = PointM(0.4, 0.6, 0.2)
    with pytest.raises(HorizonTooShort) as exc:
        nuh.compute_q(x, horizon=0.5)
    assert exc.value.required > 0.5


def orbit_data(m, nuh, x, before, after):
    lam, _ = build_sections(m)
    times, pts = section_orbit(lam, x, before, after)
    return times, orbit_log_q(nuh, x, times)


@pytest.mark.parametrize("roof", ["const", "cos"])
def test_greedy_matches_brute_force_exactly(roof):
    m = ModelFlow(roof=roof)
    nuh = NUH(m)
    lam, _ = build_sections(m)
    d = lam.discs[40]
    x = PointM(d._fc[0], d._fc[1], d.hf)
    pad = 1000
    while True:
        times, logq = orbit_data(m, nuh, x, pad, pad + 60)
        lo, hi = pad, pad + 60
        if nuh.certify_window(times, logq, lo, hi):
            break
        pad *= 2
    z = nuh.z_indexed_p(times, logq, lo=lo, hi=hi)
    bs, bu = brute_force_p(nuh, times, logq, lo, hi)
    assert z.log_ps == bs and z.log_pu == bu
    for k in range(len(z.ps) - 1):
        gap = z.times[k + 1] - z.times[k]
        assert z.ps[k] <= math.exp(nuh.eps * gap) * z.ps[k + 1] * (1 + 1e-12)
        assert z.ps[k] <= nuh.eps * math.exp(logq[lo + k]) * (1 + 1e-12)
        assert z.ps[k + 1] >= math.exp(-nuh.eps * gap) * z.ps[k] * (1 - 1e-12)


def test_greedy_constant_q():
    m = ModelFlow()
    nuh = NUH(m)
    times = [0.07 * k for k in range(50)]
    z = nuh.z_indexed_p(times, [-30.0] * 50)
    assert all(p == pytest.approx(nuh.eps * math.exp(-30.0), rel=1e-15) for p in z.ps + z.pu)
    assert all(z.maximal_s) and all(z.maximal_u)


def test_greedy_maximality_window(cos):
    m, nuh = cos
    lam, _ = build_sections(m)
    d = lam.discs[100]
    x = PointM(d._fc[0], d._fc[1], d.hf)
    times, logq = orbit_data(m, nuh, x, 0, 800)
    z = nuh.z_indexed_p(times, logq)
    spread = max(logq) - min(logq)
    window = math.ceil(spread / (nuh.eps * lam.min_return())) + 1
    flags = z.maximal_s[: len(times) - window]
    for k in range(0, len(flags) - window, window // 2):
        assert any(z.maximal_s[k:k + window])


def test_spacing_violation(const):
    m, nuh = const
    with pytest.raises(SpacingViolation):
        nuh.z_indexed_p([0.0, 0.05, 0.9], [-30.0] * 3, spacing=(0.02, 0.2))
