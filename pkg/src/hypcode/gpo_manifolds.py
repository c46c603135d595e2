"""Admissible curves, graph transforms, shadowing, the first roof and center lifts.

A generalized pseudo-orbit is a path of double charts. Its stable curve at v_0
is the limit of pulling back an admissible seed curve from v_depth through the
chart return maps; its unstable curve is pushed forward from v_{-depth}. The
shadow point is the intersection of the two.

Curves are sampled at 65 nodes on [-p, p] and interpolated by cubic splines in
the normalized variable t / p, since p is of order 1e-15.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .charts import Atlas, DoubleChart, edge_test, fiber_delta
from .errors import GraphReparamFailure, NoIntersection
from .model_flow import PointM
from .sections import wrap
from .symbolic_core import SymbolPath, shift

SAMPLES = 65
SHADOW_TOL = 1e-10


# -- curves -----------------------------------------------------------------

@dataclass(eq=False)
class AdmissibleCurve:
    """Graph of F over [-p, p] in the chart of owner.

    An s-curve is {(t, F(t))} with p = p^s, a u-curve is {(F(t), t)} with p = p^u.
    """

    owner: DoubleChart
    kind: str
    values: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("s", "u"):
            raise ValueError("kind must be 's' or 'u'")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (SAMPLES,):
            raise ValueError(f"expected {SAMPLES} samples")
        self._spline = CubicSpline(_UNIT, self.values)

    @property
    def p(self) -> float:
        return self.owner.ps if self.kind == "s" else self.owner.pu

    @property
    def eta(self) -> float:
        return self.owner.eta

    @property
    def nodes(self) -> np.ndarray:
        return self.p * _UNIT

    def __call__(self, t):
        return self._spline(np.asarray(t, dtype=float) / self.p)

    def deriv(self, t=None):
        if t is None:
            t = self.nodes
        return self._spline(np.asarray(t, dtype=float) / self.p, 1) / self.p

    def points(self, t=None) -> np.ndarray:
        """Chart coordinates of the curve at parameters t (default: the nodes)."""
        t = self.nodes if t is None else np.asarray(t, dtype=float)
        f = self(t)
        return np.stack([t, f], axis=-1) if self.kind == "s" else np.stack([f, t], axis=-1)

    def estimates(self, beta: float) -> dict:
        """|F(0)|, |F'(0)|, sup |F'| and the Holder quotient of F' at the nodes."""
        t = self.nodes
        d = self.deriv(t)
        gam = beta / 3
        dt = np.abs(t[:, None] - t[None, :])
        dd = np.abs(d[:, None] - d[None, :])
        mask = dt > 0
        hol = float(np.max(dd[mask] / dt[mask] ** gam))
        return {"F0": float(abs(self(0.0))), "dF0": float(abs(self.deriv(0.0))),
                "dF_sup": float(np.max(np.abs(d))), "holder": hol}

    def admissibility(self, beta: float) -> dict:
        e = self.estimates(beta)
        eta = self.eta
        return {"AM1": e["F0"] <= 1e-3 * eta,
                "AM2": e["dF0"] <= 0.5 * eta ** (beta / 3),
                "AM3": e["dF_sup"] + e["holder"] <= 0.5,
                **e}

    def is_admissible(self, beta: float) -> bool:
        a = self.admissibility(beta)
        return a["AM1"] and a["AM2"] and a["AM3"]

    def distance_c0(self, other: "AdmissibleCurve") -> float:
        return float(np.max(np.abs(self.values - other(self.nodes))))

    def distance_c1(self, other: "AdmissibleCurve") -> float:
        t = self.nodes
        return max(self.distance_c0(other),
                   float(np.max(np.abs(self.deriv(t) - other.deriv(t)))))

    def rows(self) -> list[tuple]:
        """Curve dump rows: t, F(t)."""
        return [(float(a), float(b)) for a, b in zip(self.nodes, self.values)]


_UNIT = np.linspace(-1.0, 1.0, SAMPLES)


def zero_curve(owner: DoubleChart, kind: str) -> AdmissibleCurve:
    return AdmissibleCurve(owner, kind, np.zeros(SAMPLES))


def random_admissible(owner: DoubleChart, kind: str, rng: np.random.Generator,
                      beta: float = 1.0) -> AdmissibleCurve:
    """Random quadratic graph well inside the admissibility bounds."""
    p = owner.ps if kind == "s" else owner.pu
    eta = owner.eta
    gam = beta / 3
    a0, a1, a2 = rng.uniform(-1, 1, 3)
    t = p * _UNIT
    vals = 0.5e-3 * eta * a0 + 0.25 * eta ** gam * a1 * t + 0.02 * p ** gam * a2 * t * t / p
    return AdmissibleCurve(owner, kind, vals)


# -- generalized pseudo-orbits --------------------------------------------------

@dataclass(frozen=True, eq=False)
class GpoPath:
    """A path of double charts indexed by the integers."""

    path: SymbolPath
    info: dict = field(default_factory=dict, compare=False)

    def __getitem__(self, n: int) -> DoubleChart:
        v = self.path.symbol(n)
        if v is None:
            raise IndexError(f"gpo undefined at index {n}")
        return v

    def has(self, n: int) -> bool:
        return self.path.symbol(n) is not None

    def shifted(self, k: int) -> "GpoPath":
        return GpoPath(shift(self.path, k), self.info)

    @classmethod
    def periodic(cls, cycle) -> "GpoPath":
        return cls(SymbolPath.periodic(tuple(cycle)))

    @classmethod
    def window(cls, charts, origin: int = 0) -> "GpoPath":
        return cls(SymbolPath.window(tuple(charts), origin))

    def span(self) -> tuple[float, float]:
        """Defined index range [lo, hi) (infinite on periodic sides)."""
        lo, hi = self.path.core_span
        return (-math.inf if self.path.past_cycle else lo,
                math.inf if self.path.future_cycle else hi)

    def failing_edges(self, atlas: Atlas, lo: int, hi: int) -> list[int]:
        """Indices n in [lo, hi) whose edge v_n -> v_{n+1} fails edge_test."""
        return [n for n in range(lo, hi) if not edge_test(atlas, self[n], self[n + 1])]


def _edge_maps(atlas: Atlas, gpo: GpoPath, lo: int, hi: int) -> list:
    return [atlas.edge_map(gpo[n].base, gpo[n + 1].base) for n in range(lo, hi)]


# -- graph transforms -------------------------------------------------------

def _fixed_point(step, x0, tol, iters=60):
    x = x0
    for _ in range(iters):
        nx = step(x)
        if np.max(np.abs(nx - x)) <= tol:
            return nx, True
        x = nx
    return x, False


def graph_transform_s(edge_map, v: DoubleChart, curve: AdmissibleCurve) -> AdmissibleCurve:
    """Pull an s-curve at w back through f_{v,w}: the part of f^{-1}(curve) over [-p^s_v, p^s_v]."""
    f = edge_map.exact
    B = edge_map.B
    t = v.ps * _UNIT
    scale = max(curve.p, abs(edge_map.offset).max(), 1e-300)

    def step(F):
        img = f(np.stack([t, F], axis=-1))
        return F + (curve(img[:, 0]) - img[:, 1]) / B

    F, ok = _fixed_point(step, np.zeros_like(t), 1e-15 * scale)
    if not ok:
        F = _bracket_s(f, curve, t, v.pu)
    img = f(np.stack([t, F], axis=-1))
    x1 = img[:, 0]
    if np.any(np.diff(x1) <= 0):
        raise GraphReparamFailure("image first coordinate is not strictly increasing")
    if np.max(np.abs(x1)) > curve.p * (1 + 1e-9):
        raise GraphReparamFailure("preimage leaves the domain of the target curve")
    return AdmissibleCurve(v, "s", F)


def _bracket_s(f, curve, t, half):
    out = np.empty_like(t)
    for i, ti in enumerate(t):
        def g(F):
            a, b = f(np.array([ti, F]))
            return float(curve(a)) - b
        try:
            out[i] = brentq(g, -half, half, xtol=1e-12 * half)
        except ValueError as exc:
            raise GraphReparamFailure(f"no preimage over t = {ti:.3e}") from exc
    return out


def graph_transform_u(edge_map, w: DoubleChart, curve: AdmissibleCurve) -> AdmissibleCurve:
    """Push a u-curve at v forward through f_{v,w} and re-graph it over [-p^u_w, p^u_w]."""
    f = edge_map.exact
    B = edge_map.B
    target = w.pu * _UNIT
    scale = max(w.pu, 1e-300)

    def image(s):
        return f(np.stack([curve(s), s], axis=-1))

    def step(s):
        return s + (target - image(s)[:, 1]) / B

    s, ok = _fixed_point(step, target / B, 1e-15 * scale)
    if not ok:
        s = _bracket_u(image, target, curve.p)
    if np.any(np.diff(s) <= 0):
        raise GraphReparamFailure("image second coordinate is not strictly increasing")
    if np.max(np.abs(s)) > curve.p * (1 + 1e-9):
        raise GraphReparamFailure("image does not cover the unstable window")
    return AdmissibleCurve(w, "u", image(s)[:, 0])


def _bracket_u(image, target, half):
    out = np.empty_like(target)
    for i, y in enumerate(target):
        def g(s):
            return float(image(np.array([s]))[0, 1]) - y
        try:
            out[i] = brentq(g, -half, half, xtol=1e-12 * half)
        except ValueError as exc:
            raise GraphReparamFailure(f"no parameter reaches {y:.3e}") from exc
    return out


def diameter_bound(owner: DoubleChart, kind: str) -> float:
    """C^0 distance bound between any two admissible curves at owner."""
    p = owner.ps if kind == "s" else owner.pu
    return 2 * (1e-3 * owner.eta + 0.5 * p)


# -- stable and unstable curves ---------------------------------------------

def stable_curve(atlas: Atlas, gpo: GpoPath, depth: int, start: int = 0,
                 seed: AdmissibleCurve | None = None) -> AdmissibleCurve:
    """V^s of the forward ray from index start, truncated at start + depth."""
    maps = _edge_maps(atlas, gpo, start, start + depth)
    cur = seed if seed is not None else zero_curve(gpo[start + depth], "s")
    for n in range(depth - 1, -1, -1):
        cur = graph_transform_s(maps[n], gpo[start + n], cur)
    cur.info.update({"depth": depth, "start": start,
                     "certificate": atlas.contraction ** depth
                     * diameter_bound(gpo[start + depth], "s")})
    return cur


def unstable_curve(atlas: Atlas, gpo: GpoPath, depth: int, start: int = 0,
                   seed: AdmissibleCurve | None = None) -> AdmissibleCurve:
    """V^u of the backward ray ending at index start, truncated at start - depth."""
    maps = _edge_maps(atlas, gpo, start - depth, start)
    cur = seed if seed is not None else zero_curve(gpo[start - depth], "u")
    for n in range(depth):
        cur = graph_transform_u(maps[n], gpo[start - depth + n + 1], cur)
    cur.info.update({"depth": depth, "start": start,
                     "certificate": atlas.contraction ** depth
                     * diameter_bound(gpo[start - depth], "u")})
    return cur


def seed_independence(atlas: Atlas, gpo: GpoPath, depth: int, seeds: int = 2,
                      rng_seed: int = 0, kind: str = "s") -> float:
    """Largest C^0 distance between curves grown from different random seeds."""
    rng = np.random.default_rng(rng_seed)
    end = depth if kind == "s" else -depth
    curves = []
    for _ in range(seeds):
        s = random_admissible(gpo[end], kind, rng, atlas.nuh.beta)
        fn = stable_curve if kind == "s" else unstable_curve
        curves.append(fn(atlas, gpo, depth, seed=s))
    return max(curves[0].distance_c0(c) for c in curves[1:])


# -- shadowing ----------------------------------------------------------------

@dataclass
class ShadowResult:
    point: PointM
    vs: AdmissibleCurve
    vu: AdmissibleCurve
    residual: float
    w: np.ndarray
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"point": [float(self.point.u1), float(self.point.u2), float(self.point.s)],
                "chart_coordinates": [float(c) for c in self.w],
                "residual": self.residual, **self.info}


def intersect(vs: AdmissibleCurve, vu: AdmissibleCurve, tol: float = SHADOW_TOL) -> tuple[np.ndarray, float]:
    """The point (t, F(t)) with t = G(F(t)); tol is relative to the window."""
    eta = vs.eta

    def g(t):
        return t - float(vu(float(vs(t))))

    a, b = -vs.p, vs.p
    try:
        t = brentq(g, a, b, xtol=tol * eta, rtol=4 * np.finfo(float).eps)
    except ValueError as exc:
        raise NoIntersection("stable and unstable curves do not cross in the window") from exc
    w = np.array([t, float(vs(t))])
    return w, abs(g(t))


def chart_point(chart, w) -> PointM:
    """Psi_x(w) with exact fiber coordinates."""
    return chart.apply(w, exact=True)


def shadow(atlas: Atlas, gpo: GpoPath, depth: int, index: int = 0,
           tol: float = SHADOW_TOL, certify: bool = True) -> ShadowResult:
    v = gpo[index]
    vs = stable_curve(atlas, gpo, depth, index)
    vu = unstable_curve(atlas, gpo, depth, index)
    w, res = intersect(vs, vu, tol)
    if res > tol * v.eta:
        raise NoIntersection(f"root residual {res:.3e} above tolerance")
    pt = chart_point(v.chart, w)
    info = {"eta": v.eta, "normalized_residual": res / v.eta,
            "inner_window": float(np.max(np.abs(w)) / v.eta)}
    if certify:
        info.update(window_certificate(atlas, gpo, w, index, depth))
    return ShadowResult(pt, vs, vu, res, w, info)


def window_certificate(atlas: Atlas, gpo: GpoPath, w, index: int, depth: int) -> dict:
    """Track the chart coordinates of a point forward and backward along the gpo.

    Reports the largest |w_n| relative to 10 Q(x_n) and to the window
    eta_n; the point should stay inside both.
    """
    worst_q, worst_eta = 0.0, 0.0
    cur = np.asarray(w, dtype=float)
    for n in range(index, index + depth):
        cur = atlas.edge_map(gpo[n].base, gpo[n + 1].base).exact(cur)
        v = gpo[n + 1]
        worst_q = max(worst_q, float(np.max(np.abs(cur))) / (10 * v.chart.Q))
        worst_eta = max(worst_eta, float(np.max(np.abs(cur))) / v.eta)
    cur = np.asarray(w, dtype=float)
    for n in range(index, index - depth, -1):
        m = atlas.edge_map(gpo[n - 1].base, gpo[n].base)
        cur = np.linalg.solve(m.linear, cur - m.offset)
        v = gpo[n - 1]
        worst_q = max(worst_q, float(np.max(np.abs(cur))) / (10 * v.chart.Q))
        worst_eta = max(worst_eta, float(np.max(np.abs(cur))) / v.eta)
    return {"orbit_over_10Q": worst_q, "orbit_over_eta": worst_eta}


def angle_ratio(vs: AdmissibleCurve, vu: AdmissibleCurve, w, alpha: float) -> float:
    """log of sin(angle(V^s, V^u)) / sin(alpha) at the intersection point w."""
    C = vs.owner.chart.C
    ts = C @ np.array([1.0, float(vs.deriv(w[0]))])
    tu = C @ np.array([float(vu.deriv(w[1])), 1.0])
    cross = abs(ts[0] * tu[1] - ts[1] * tu[0])
    sin = cross / (np.linalg.norm(ts) * np.linalg.norm(tu))
    return math.log(sin / math.sin(alpha))


# -- closed-form affine route ------------------------------------------------

def affine_shadow(maps, index: int, iters: int = 6) -> np.ndarray:
    """Bounded orbit of a finite chain of affine chart maps by dichotomy series.

    maps[k] sends chart k to chart k+1. Stable coordinates are summed from
    the past (zero at the first chart), unstable ones from the future (zero
    at the last chart); off-diagonal terms are folded in by a few sweeps.
    Returns the chart coordinates of the orbit at every chart.
    """
    n = len(maps) + 1
    W = np.zeros((n, 2))
    for _ in range(iters):
        old = W.copy()
        for k, m in enumerate(maps):
            L, o = m.linear, m.offset
            W[k + 1, 0] = L[0, 0] * W[k, 0] + L[0, 1] * W[k, 1] + o[0]
        for k in range(n - 2, -1, -1):
            L, o = maps[k].linear, maps[k].offset
            W[k, 1] = (W[k + 1, 1] - L[1, 0] * W[k, 0] - o[1]) / L[1, 1]
        if np.array_equal(W, old):
            break
    return W


def affine_shadow_point(atlas: Atlas, gpo: GpoPath, depth: int, index: int = 0):
    """Shadow of the gpo at index from the series route: (point, chart coordinates)."""
    maps = _edge_maps(atlas, gpo, index - depth, index + depth)
    W = affine_shadow(maps, depth)
    w = W[depth]
    return chart_point(gpo[index].chart, w), w


# -- the first roof -----------------------------------------------------------

def transition_time_at(atlas: Atlas, x: PointM, y: PointM) -> Fraction:
    """Holonomy time from y (on the disc of x) to the disc of f(x), linearized at x."""
    r = Fraction(atlas.forward(x).time)
    g = atlas.grad_forward(x)
    if not g.any():
        return r
    return r + Fraction(float(g @ fiber_delta(y, x)))


@dataclass
class FirstRoof:
    value: Fraction
    error: float
    shadows: tuple


def first_roof(atlas: Atlas, gpo: GpoPath, depth: int, index: int = 0) -> FirstRoof:
    """r(v) for the gpo shifted to index, with the flow-match error."""
    s0 = shadow(atlas, gpo, depth, index, certify=False)
    s1 = shadow(atlas, gpo, depth, index + 1, certify=False)
    r = transition_time_at(atlas, gpo[index].base, s0.point)
    moved = atlas.model.flow(s0.point, r if atlas.model.roof_kind == "const" else float(r))
    return FirstRoof(r, flat_distance(moved, s1.point), (s0, s1))


def flat_distance(a: PointM, b: PointM) -> float:
    d1 = float(wrap(Fraction(a.u1) - Fraction(b.u1)))
    d2 = float(wrap(Fraction(a.u2) - Fraction(b.u2)))
    ds = float(Fraction(a.s) - Fraction(b.s))
    return math.sqrt(d1 * d1 + d2 * d2 + ds * ds)


def conjugacy_check(atlas: Atlas, gpo: GpoPath, depth: int, t: float = 0.3) -> dict:
    """Compare phi^t(pi(v)) with the suspension-flow image pi_r(sigma_r^t(v, 0))."""
    model = atlas.model
    exact = model.roof_kind == "const"
    tt = Fraction(t) if exact else t
    base = shadow(atlas, gpo, depth, 0, certify=False).point
    total, n = 0, 0
    while True:
        r = first_roof(atlas, gpo, depth, n).value
        step = r if exact else float(r)
        if total + step > tt:
            break
        total += step
        n += 1
    lhs = model.flow(base, tt)
    rhs = model.flow(shadow(atlas, gpo, depth, n, certify=False).point, tt - total)
    return {"returns": n, "distance": flat_distance(lhs, rhs)}


# -- center lifts ---------------------------------------------------------------

@dataclass
class CenterLift:
    curve: AdmissibleCurve
    delta: np.ndarray
    partial: np.ndarray
    base: PointM
    displacements: np.ndarray
    info: dict = field(default_factory=dict)

    def lifted_points(self, model) -> list[PointM]:
        """phi^{Delta(t)} of the curve points, as floats."""
        out = []
        for d, dv in zip(self.displacements, self.delta):
            p = PointM((float(self.base.u1) + d[0]) % 1, (float(self.base.u2) + d[1]) % 1,
                       float(self.base.s))
            out.append(model.flow(p, float(dv)))
        return out


def center_lift(atlas: Atlas, curve: AdmissibleCurve, gpo: GpoPath, depth: int) -> CenterLift:
    """Cumulative shear Delta_n(t) = tau_n(t) - tau_n(0) of the stable curve along the gpo.

    The transition-time differences are taken from the gradient of the
    holonomy time at x_k applied to the fiber displacement, which is exact up
    to a quadratic remainder far below the window scale.
    """
    W = curve.points()
    mid = SAMPLES // 2
    partial = np.zeros((depth + 1, SAMPLES))
    cur = W.copy()
    for k in range(depth):
        v = gpo[k]
        disp = (cur - cur[mid]) @ v.chart.C.T
        g = atlas.grad_forward(v.base)
        partial[k + 1] = partial[k] + disp @ g
        cur = atlas.edge_map(v.base, gpo[k + 1].base).exact(cur)
    base = chart_point(gpo[0].chart, W[mid])
    disp0 = (W - W[mid]) @ gpo[0].chart.C.T
    return CenterLift(curve, partial[-1].copy(), partial, base, disp0,
                      {"depth": depth})


def lift_truncation(lift: CenterLift) -> np.ndarray:
    """sup_t |Delta - Delta_n| for each n."""
    return np.max(np.abs(lift.partial - lift.delta[None, :]), axis=1)


def lift_contraction(atlas: Atlas, lift: CenterLift, times) -> dict:
    """Sampled distances between flowed lifted points against the exponential bound.

    Displacements are propagated by the flow derivative at the curve base,
    with the shear added in the flow direction.
    """
    model = atlas.model
    c = atlas.nuh.chi * atlas.r_inf / (2 * model.roof_bounds[1])
    x0 = PointM(float(lift.base.u1), float(lift.base.u2), float(lift.base.s))
    idx = np.arange(0, SAMPLES, 8)
    worst, worst_norm = -math.inf, -math.inf
    d0 = None
    for tau in times:
        D = model.dflow(x0, tau)
        vec = np.column_stack([lift.displacements, np.zeros(SAMPLES)]) @ D.T
        vec[:, 2] += lift.delta
        diffs = vec[idx][:, None, :] - vec[idx][None, :, :]
        d = float(np.max(np.linalg.norm(diffs, axis=-1)))
        if d0 is None:
            d0 = d
        bound = math.exp(-c * tau)
        worst = max(worst, d / bound)
        if d0 > 0:
            worst_norm = max(worst_norm, d / (d0 * bound))
    return {"rate": c, "max_ratio": worst, "max_normalized_ratio": worst_norm}


# -- properties along stable curves ------------------------------------------------

def invariance_error(atlas: Atlas, gpo: GpoPath, depth: int) -> float:
    """Image of V^s[v_0...] under f_{x_0,x_1} against V^s[v_1...], relative to eta_1."""
    c0 = stable_curve(atlas, gpo, depth, 0)
    c1 = stable_curve(atlas, gpo, depth - 1, 1)
    img = atlas.edge_map(gpo[0].base, gpo[1].base).exact(c0.points())
    return float(np.max(np.abs(c1(img[:, 0]) - img[:, 1]))) / gpo[1].eta


def hyperbolicity_ratios(atlas: Atlas, gpo: GpoPath, curve: AdmissibleCurve, steps: int) -> list[float]:
    """d(G^n y, G^n y') / (d(w, w') e^{-chi inf(r) n/2}) for the curve end points."""
    W = curve.points()[[0, -1]]
    d0 = float(np.linalg.norm(W[0] - W[1]))
    out = []
    cur = W
    for n in range(1, steps + 1):
        cur = atlas.edge_map(gpo[n - 1].base, gpo[n].base).exact(cur)
        disp = (cur[0] - cur[1]) @ gpo[n].chart.C.T
        out.append(float(np.linalg.norm(disp)) / (d0 * atlas.contraction ** n))
    return out


def distortion(atlas: Atlas, gpo: GpoPath, curve: AdmissibleCurve, steps: int) -> float:
    """Largest difference of log |dG^n| along the curve tangents over the nodes."""
    T = np.column_stack([np.ones(SAMPLES), curve.deriv()])
    T = T @ gpo[0].chart.C.T
    logs = np.log(np.linalg.norm(T, axis=1))
    P = np.eye(2)
    for n in range(steps):
        P = atlas.edge_map(gpo[n].base, gpo[n + 1].base).linear @ P
    img = np.column_stack([np.ones(SAMPLES), curve.deriv()]) @ P.T @ gpo[steps].chart.C.T
    d = np.log(np.linalg.norm(img, axis=1)) - logs
    return float(d.max() - d.min())


def holder_fit(Ns, dists) -> dict:
    """Least-squares fit d = K theta^N in log space, with R^2."""
    Ns = np.asarray(Ns, dtype=float)
    y = np.log(np.asarray(dists, dtype=float))
    slope, icpt = np.polyfit(Ns, y, 1)
    pred = slope * Ns + icpt
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"K": math.exp(icpt), "theta": math.exp(slope), "r2": r2}


def nested_or_disjoint(c1: AdmissibleCurve, c2: AdmissibleCurve, tol: float = 1e-6) -> str:
    """Classify two s-curves at the same base: 'nested', 'disjoint' or 'crossing'."""
    short, long_ = (c1, c2) if c1.p <= c2.p else (c2, c1)
    d = short.values - long_(short.nodes)
    scale = tol * short.eta
    if np.max(np.abs(d)) <= scale:
        return "nested"
    if np.all(d > scale) or np.all(d < -scale):
        return "disjoint"
    return "crossing"
