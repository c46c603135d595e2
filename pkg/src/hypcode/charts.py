"""Pesin charts, double charts, chart-coordinate return maps and the edge relation.

Charts live on the horizontal discs of the section: Psi_x(w) = x + C(x) w in
the fiber coordinates of the disc, an exact flat exponential map. Window
sizes are of order 1e-15, so all window arithmetic is done in chart
coordinates relative to the base point, and every comparison that involves
window sizes runs on exact rationals in log space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BoundViolation, DomainExceeded
from .model_flow import ModelFlow, PointM
from .nuh_params import NUH, HypParams
from .sections import Hit, ProperSection, wrap

RADIUS = 0.1
GRID = 33


_GRID_N = 2 ** 52


def _grid_index(u) -> int:
    return round(Fraction(u) * _GRID_N) % _GRID_N


def exact_point(x: PointM) -> PointM:
    """Same point with rational fiber coordinates (floats are read exactly)."""
    u1 = x.u1 if isinstance(x.u1, Fraction) else Fraction(x.u1)
    u2 = x.u2 if isinstance(x.u2, Fraction) else Fraction(x.u2)
    return PointM(u1, u2, x.s)


def point_key(x: PointM) -> tuple:
    return (Fraction(x.u1), Fraction(x.u2), Fraction(x.s))


def fiber_delta(a: PointM, b: PointM) -> np.ndarray:
    """Shortest fiber displacement a - b, computed exactly before rounding."""
    return np.array([float(wrap(Fraction(a.u1) - Fraction(b.u1))),
                     float(wrap(Fraction(a.u2) - Fraction(b.u2)))])


def log_fraction(v: Fraction) -> float:
    """Natural log of a positive rational without float underflow."""
    v = Fraction(v)
    if v <= 0:
        return -math.inf
    return math.log(v.numerator) - math.log(v.denominator)


def log_distance(a: PointM, b: PointM) -> float:
    """log of the flat distance between two points on the section."""
    d1 = wrap(Fraction(a.u1) - Fraction(b.u1))
    d2 = wrap(Fraction(a.u2) - Fraction(b.u2))
    ds = Fraction(a.s) - Fraction(b.s)
    return 0.5 * log_fraction(d1 * d1 + d2 * d2 + ds * ds)


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    return float(np.logaddexp(a, b))


@dataclass(frozen=True, eq=False)
class PesinChart:
    base: PointM
    params: HypParams
    q: float | None = None
    domain_radius: float = RADIUS

    @property
    def key(self) -> tuple:
        return point_key(self.base)

    def __eq__(self, other):
        return isinstance(other, PesinChart) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    @property
    def C(self) -> np.ndarray:
        return self.params.C

    @property
    def C_inv(self) -> np.ndarray:
        return np.linalg.inv(self.params.C)

    @property
    def Q(self) -> float:
        return self.params.Q

    @property
    def log_Q(self) -> float:
        return self.params.log_Q

    def displacement(self, w) -> np.ndarray:
        """Fiber displacement of Psi(w) from the base point."""
        w = np.asarray(w, dtype=float)
        if np.max(np.abs(w)) > self.domain_radius:
            raise DomainExceeded(f"|w| = {np.max(np.abs(w)):.3e} beyond the chart radius")
        return self.C @ w

    def apply(self, w, exact=False) -> PointM:
        d = self.displacement(w)
        if exact:
            return PointM((Fraction(self.base.u1) + Fraction(d[0])) % 1,
                          (Fraction(self.base.u2) + Fraction(d[1])) % 1, self.base.s)
        return PointM((float(self.base.u1) + d[0]) % 1, (float(self.base.u2) + d[1]) % 1,
                      self.base.s)

    def invert(self, y: PointM) -> np.ndarray:
        if Fraction(y.s) != Fraction(self.base.s):
            raise DomainExceeded("point is not on the disc of the chart")
        w = self.C_inv @ fiber_delta(y, self.base)
        if np.max(np.abs(w)) > 2 * self.domain_radius * np.linalg.norm(self.C_inv, 2):
            raise DomainExceeded("point outside the chart image")
        return w

    def lipschitz_ratio(self, samples: int = 200, seed: int = 0, scale: float = 1e-3) -> float:
        """Largest sampled |Psi(v) - Psi(w)| / |v - w|."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(samples):
            v, w = (rng.random((2, 2)) - 0.5) * 2 * scale
            a, b = self.displacement(v), self.displacement(w)
            worst = max(worst, float(np.linalg.norm(a - b) / np.linalg.norm(v - w)))
        return worst


@dataclass(frozen=True, eq=False)
class DoubleChart:
    """Pesin chart with stable/unstable window sizes, stored as exact logs."""

    chart: PesinChart
    log_ps: Fraction
    log_pu: Fraction
    tag: object = None

    @property
    def key(self) -> tuple:
        return (self.chart.key, self.log_ps, self.log_pu)

    def __eq__(self, other):
        return isinstance(other, DoubleChart) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        b = self.chart.base
        return (f"DoubleChart(({float(b.u1):.6f}, {float(b.u2):.6f}, {float(b.s):.6f}), "
                f"log ps={float(self.log_ps):.6f}, log pu={float(self.log_pu):.6f})")

    @property
    def base(self) -> PointM:
        return self.chart.base

    @property
    def ps(self) -> float:
        return math.exp(float(self.log_ps))

    @property
    def pu(self) -> float:
        return math.exp(float(self.log_pu))

    @property
    def log_eta(self) -> Fraction:
        return min(self.log_ps, self.log_pu)

    @property
    def eta(self) -> float:
        return math.exp(float(self.log_eta))

    def valid(self, eps: float) -> bool:
        cap = log_cap(self.chart, eps)
        return self.log_ps <= cap and self.log_pu <= cap


def log_cap(chart: PesinChart, eps: float) -> Fraction:
    """log(eps Q(x)) as the exact sum of the two float logs."""
    return Fraction(math.log(eps)) + Fraction(chart.log_Q)


def exp_value(log_v) -> Fraction:
    """The value e^v used inside exact comparisons (float exp, read exactly)."""
    return Fraction(math.exp(float(log_v)))


class Atlas:
    """Charts, returns and transition-time data for one model and section pair."""

    def __init__(self, model: ModelFlow, nuh: NUH, section: ProperSection, hat: ProperSection,
                 q_horizon: float | None = None):
        self.model = model
        self.nuh = nuh
        self.section = section
        self.hat = hat
        self.q_horizon = q_horizon
        self.eps = nuh.eps
        self._params: dict = {}
        self._q: dict = {}
        self._fwd: dict = {}
        self._bwd: dict = {}
        self._charts: dict = {}
        self._maps: dict = {}
        self._r_inf = None

    # Q and C depend on the height alone for the constant roof; otherwise
    # points on one cell of a 2^-52 grid share them, computed at the cell
    # corner (float evaluation cannot tell such points apart, and the
    # corner keeps small dyadic denominators under the cat map)
    def _pkey(self, x: PointM):
        if self.model.roof_kind == "const":
            return Fraction(x.s)
        return (_grid_index(x.u1), _grid_index(x.u2), Fraction(x.s))

    def _rep(self, x: PointM) -> PointM:
        if self.model.roof_kind == "const":
            return x
        k = self._pkey(x)
        return PointM(Fraction(k[0], _GRID_N), Fraction(k[1], _GRID_N), k[2])

    def params(self, x: PointM) -> HypParams:
        k = self._pkey(x)
        p = self._params.get(k)
        if p is None:
            p = self.nuh.params(self._rep(x))
            self._params[k] = p
        return p

    def set_params(self, x: PointM, p: HypParams):
        self._params.setdefault(self._pkey(x), p)

    def local_q(self, x: PointM):
        k = self._pkey(x)
        v = self._q.get(k)
        if v is None:
            v = self.nuh.compute_q(self._rep(x), self.q_horizon)
            self._q[k] = v
        return v

    def set_q(self, x: PointM, lq):
        self._q.setdefault(self._pkey(x), lq)

    def chart(self, x: PointM, with_q: bool = False) -> PesinChart:
        k = point_key(x)
        c = self._charts.get(k)
        if c is None or (with_q and c.q is None):
            q = self.local_q(x).q if with_q else None
            c = PesinChart(x, self.params(x), q)
            self._charts[k] = c
        return c

    def forward(self, x: PointM) -> Hit:
        k = point_key(x)
        h = self._fwd.get(k)
        if h is None:
            h = self.section.next_hit(x, strict=True)
            self._fwd[k] = h
        return h

    def backward(self, x: PointM) -> Hit:
        k = point_key(x)
        h = self._bwd.get(k)
        if h is None:
            h = self.section.prev_hit(x, strict=True)
            self._bwd[k] = h
        return h

    def f(self, x: PointM) -> PointM:
        return self.forward(x).point

    def f_inv(self, x: PointM) -> PointM:
        return self.backward(x).point

    def return_time(self, x: PointM) -> Fraction:
        return Fraction(self.forward(x).time)

    def grad_forward(self, x: PointM) -> np.ndarray:
        """Gradient of the forward transition time T^+ at x, in fiber coordinates."""
        m = self.model
        g = np.zeros(2)
        u1, u2 = x.u1, x.u2
        P = np.eye(2)
        for _ in range(self.forward(x).crossings):
            g += m.roof_grad(u1, u2) @ P
            P = m.A @ P
            u1, u2 = m.fiber_map(u1, u2, 1)
        return g

    def grad_backward(self, y: PointM) -> np.ndarray:
        """Gradient of -T^- at y (the backward transition time, made positive)."""
        m = self.model
        g = np.zeros(2)
        u1, u2 = y.u1, y.u2
        P = np.eye(2)
        for _ in range(-self.backward(y).crossings):
            P = m.A_inv @ P
            u1, u2 = m.fiber_map(u1, u2, -1)
            g += m.roof_grad(u1, u2) @ P
        return g

    def linear_part(self, x: PointM, y: PointM, k: int) -> np.ndarray:
        """C(y)^{-1} A^k C(x)."""
        return np.linalg.solve(self.params(y).C, self.model.matrix_power(k) @ self.params(x).C)

    def edge_map(self, x: PointM, y: PointM) -> "ChartMapDecomp":
        """f_{x,y}^+ in chart coordinates, cached."""
        k = (point_key(x), point_key(y))
        d = self._maps.get(k)
        if d is None:
            d = chart_return_map(self, x, self.chart(y))
            self._maps[k] = d
        return d

    @property
    def r_inf(self) -> float:
        """Least return time to the section (sampled)."""
        if self._r_inf is None:
            self._r_inf = self.section.min_return()
        return self._r_inf

    @property
    def contraction(self) -> float:
        """Per-step graph-transform contraction bound e^{-chi inf(r)/2}."""
        return math.exp(-self.nuh.chi * self.r_inf / 2)


# -- overlap ----------------------------------------------------------------

def overlap_log_gap(c1: PesinChart, log_eta1, c2: PesinChart, log_eta2) -> float:
    """log(d + |C1 - C2|) - 4 log(eta1 eta2); negative means the closeness condition holds."""
    ld = log_distance(c1.base, c2.base)
    dc = float(np.linalg.norm(c1.C - c2.C, 2))
    lhs = _logaddexp(ld, math.log(dc) if dc > 0 else -math.inf)
    return lhs - 4 * (float(log_eta1) + float(log_eta2))


def overlap_test(c1: PesinChart, eta1, c2: PesinChart, eta2, eps: float, log=False) -> bool:
    """Psi_{x1}^{eta1} eps-overlaps Psi_{x2}^{eta2}. Pass log=True to give log eta."""
    l1 = Fraction(eta1) if log else Fraction(math.log(eta1))
    l2 = Fraction(eta2) if log else Fraction(math.log(eta2))
    if abs(l1 - l2) > Fraction(eps):
        return False
    return overlap_log_gap(c1, l1, c2, l2) < 0


def coordinate_change(c1: PesinChart, c2: PesinChart):
    """Psi_{x1}^{-1} o Psi_{x2} - Id as (offset, linear part); it is affine."""
    off = c1.C_inv @ fiber_delta(c2.base, c1.base)
    lin = c1.C_inv @ c2.C - np.eye(2)
    return off, lin


def coordinate_change_norm(c1: PesinChart, c2: PesinChart, radius: float = RADIUS,
                           grid: int = 9) -> float:
    """Sampled C^2 size of Psi_{x1}^{-1} o Psi_{x2} - Id on R[radius]."""
    off, lin = coordinate_change(c1, c2)
    g = np.linspace(-radius, radius, grid)
    W = np.array([(a, b) for a in g for b in g])
    vals = off[None, :] + W @ lin.T
    c0 = float(np.max(np.linalg.norm(vals, axis=1)))
    # derivatives by finite differences over the grid
    h = g[1] - g[0]
    V = vals.reshape(grid, grid, 2)
    d1 = np.diff(V, axis=0) / h
    d2 = np.diff(V, axis=1) / h
    c1n = float(max(np.max(np.abs(d1)), np.max(np.abs(d2))))
    c2n = float(max(np.max(np.abs(np.diff(d1, axis=0))), np.max(np.abs(np.diff(d2, axis=1))))) / h
    return c0 + c1n + c2n


# -- chart-coordinate return maps --------------------------------------------

@dataclass
class ChartMapDecomp:
    """f = diag(A, B) + H, with H sampled on a grid over R[radius]."""

    A: float
    B: float
    linear: np.ndarray
    offset: np.ndarray
    radius: float
    grid: np.ndarray
    H: np.ndarray
    source: PointM = None
    target: PointM = None
    crossings: int = 0
    info: dict = field(default_factory=dict)

    def H_at(self, w) -> np.ndarray:
        """Bilinear evaluation of the sampled H; w has shape (..., 2)."""
        w = np.asarray(w, dtype=float)
        g = self.grid
        n = len(g) - 1
        h = g[1] - g[0]
        a = np.clip((w[..., 0] - g[0]) / h, 0, n - 1e-12)
        b = np.clip((w[..., 1] - g[0]) / h, 0, n - 1e-12)
        i, j = np.floor(a).astype(int), np.floor(b).astype(int)
        fa, fb = (a - i)[..., None], (b - j)[..., None]
        H = self.H
        return ((1 - fa) * (1 - fb) * H[i, j] + fa * (1 - fb) * H[i + 1, j]
                + (1 - fa) * fb * H[i, j + 1] + fa * fb * H[i + 1, j + 1])

    def __call__(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return np.stack([self.A * w[..., 0], self.B * w[..., 1]], axis=-1) + self.H_at(w)

    def exact(self, w) -> np.ndarray:
        """The affine map itself, without the sampling step."""
        w = np.asarray(w, dtype=float)
        return w @ self.linear.T + self.offset

    def jacobians(self) -> np.ndarray:
        h = self.grid[1] - self.grid[0]
        d1 = np.gradient(self.H, h, axis=0)
        d2 = np.gradient(self.H, h, axis=1)
        return np.stack([d1, d2], axis=-1)

    def estimates(self, exponent: float) -> dict:
        """Sampled |H(0)|, |dH_0|, sup |H|, sup |dH| and the Holder quotient of dH."""
        J = self.jacobians()
        n = len(self.grid)
        mid = n // 2
        pts = np.array([(a, b) for a in self.grid for b in self.grid])
        Jf = J.reshape(n * n, 4)
        # Holder quotient of dH on a thinned set of sample pairs
        idx = np.arange(0, n * n, max(1, (n * n) // 300))
        P, D = pts[idx], Jf[idx]
        dist = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
        dj = np.linalg.norm(D[:, None, :] - D[None, :, :], axis=-1)
        mask = dist > 0
        hol = float(np.max(dj[mask] / dist[mask] ** exponent)) if mask.any() else 0.0
        return {
            "H0": float(np.linalg.norm(self.H[mid, mid])),
            "dH0": float(np.linalg.norm(J[mid, mid], 2)),
            "H_sup": float(np.max(np.linalg.norm(self.H, axis=-1))),
            "dH_sup": float(np.max(np.linalg.norm(Jf, axis=1))),
            "holder": hol,
        }


def _decomp(L: np.ndarray, offset: np.ndarray, radius: float, grid: int, **kw) -> ChartMapDecomp:
    g = np.linspace(-radius, radius, grid)
    W = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
    A, B = float(L[0, 0]), float(L[1, 1])
    off_diag = L - np.diag([A, B])
    H = W @ off_diag.T + offset
    return ChartMapDecomp(A, B, L, np.asarray(offset, dtype=float), radius, g, H, **kw)


def chart_return_map(atlas: Atlas, x: PointM, target: PesinChart | None = None,
                     grid: int = GRID) -> ChartMapDecomp:
    """f_x^+ (target None) or f_{x,y}^+ in chart coordinates on R[10 Q(x)]."""
    hit = atlas.forward(x)
    fx = hit.point
    y = fx if target is None else target.base
    if Fraction(y.s) != Fraction(fx.s):
        raise DomainExceeded("target chart is not on the disc of f(x)")
    L = atlas.linear_part(x, y, hit.crossings)
    offset = np.linalg.solve(atlas.params(y).C, fiber_delta(fx, y))
    radius = 10 * atlas.params(x).Q
    return _decomp(L, offset, radius, grid, source=x, target=y, crossings=hit.crossings,
                   info={"return_time": float(hit.time), "direction": "+"})


def chart_inverse_map(atlas: Atlas, y: PointM, target: PesinChart | None = None,
                      grid: int = GRID) -> ChartMapDecomp:
    """f_y^- (target None) or f_{y,x}^- in chart coordinates on R[10 Q(y)]."""
    hit = atlas.backward(y)
    gy = hit.point
    x = gy if target is None else target.base
    if Fraction(x.s) != Fraction(gy.s):
        raise DomainExceeded("target chart is not on the disc of f^-1(y)")
    L = atlas.linear_part(y, x, hit.crossings)
    offset = np.linalg.solve(atlas.params(x).C, fiber_delta(gy, x))
    radius = 10 * atlas.params(y).Q
    return _decomp(L, offset, radius, grid, source=y, target=x, crossings=hit.crossings,
                   info={"return_time": -float(hit.time), "direction": "-"})


def check_decomp(decomp: ChartMapDecomp, atlas: Atlas, eta: float | None = None) -> dict:
    """Check the hyperbolicity and nonlinearity bounds; raise BoundViolation on failure.

    eta None checks the bounds of f_x^+ (H(0) = 0, dH_0 = 0, sampled C^{1+beta/2}
    size below eps); otherwise the relaxed bounds for f_{x,y}^+.
    """
    nuh = atlas.nuh
    chi, rho, eps, beta = nuh.chi, nuh.rho, nuh.eps, nuh.beta
    r = decomp.info["return_time"]
    a, b = abs(decomp.A), abs(decomp.B)
    rep = {"A": decomp.A, "B": decomp.B, "r": r}
    if not (math.exp(-4 * rho) < a < math.exp(-chi * r)):
        raise BoundViolation(f"|A| = {a} outside (e^-4rho, e^-chi r)", witness=rep)
    if not (math.exp(chi * r) < b < math.exp(4 * rho)):
        raise BoundViolation(f"|B| = {b} outside (e^chi r, e^4rho)", witness=rep)
    if decomp.A * decomp.B <= 0:
        raise BoundViolation("orientation reversed", witness=rep)
    if eta is None:
        est = decomp.estimates(beta / 2)
        rep.update(est)
        # H is measured against the window scale: sup|H| / radius
        size = est["H_sup"] / decomp.radius + est["dH_sup"] + est["holder"]
        rep["c1_size"] = size
        if est["H0"] > 1e-12 * decomp.radius or size >= eps:
            raise BoundViolation(f"sampled C^(1+beta/2) size {size:.3e} >= eps", witness=rep)
    else:
        est = decomp.estimates(beta / 3)
        rep.update(est)
        if est["H0"] >= eps * eta:
            raise BoundViolation(f"|H(0)| = {est['H0']:.3e} >= eps eta", witness=rep)
        if est["dH0"] >= eps * eta ** (beta / 3):
            raise BoundViolation(f"|dH_0| = {est['dH0']:.3e} too large", witness=rep)
        if est["holder"] >= eps:
            raise BoundViolation(f"Holder quotient {est['holder']:.3e} >= eps", witness=rep)
    return rep


# -- transition times and edges ------------------------------------------------

@dataclass(frozen=True)
class TransitionTime:
    value: Fraction
    plus: Fraction
    minus: Fraction
    lipschitz_error: float


def _window_min(g: np.ndarray, C: np.ndarray, half: float, grid: int) -> tuple[float, float]:
    """min over R[half] of the linear function w -> g.C w on a grid, and the grid step error."""
    coeff = g @ C
    ts = np.linspace(-half, half, grid)
    vals = [coeff[0] * a + coeff[1] * b for a in ts for b in ts]
    step = 2 * half / (grid - 1)
    return float(min(vals)), float(np.linalg.norm(g) * np.linalg.norm(C, 2) * step * math.sqrt(2))


def transition_time(atlas: Atlas, v: DoubleChart, w: DoubleChart, grid: int = 5) -> TransitionTime:
    """T(v, w): the least forward holonomy time over the two small windows.

    The transition-time functions are affine in chart coordinates up to a
    quadratic remainder far below the window scale, so the grid minimum
    (corners included) is the minimum.
    """
    x, y = v.base, w.base
    half_v = v.eta / 20
    half_w = w.eta / 20
    r_plus = Fraction(atlas.forward(x).time)
    m_plus, e_plus = _window_min(atlas.grad_forward(x), atlas.params(x).C, half_v, grid)
    r_minus = -Fraction(atlas.backward(y).time)
    m_minus, e_minus = _window_min(atlas.grad_backward(y), atlas.params(y).C, half_w, grid)
    plus = r_plus + Fraction(m_plus)
    minus = r_minus + Fraction(m_minus)
    return TransitionTime(min(plus, minus), plus, minus, max(e_plus, e_minus))


@dataclass
class EdgeReport:
    gpo1_forward: float
    gpo1_backward: float
    gpo2_s: tuple
    gpo2_u: tuple
    T: Fraction
    ok: bool


def gpo2_bounds(eps: float, T: Fraction, log_p, log_q_next, log_Q) -> tuple[Fraction, Fraction]:
    """Exact log bounds (lo, hi) of the GPO2 double inequality for one window size.

    For the stable size log_p is p^s, log_q_next is q^s and log_Q is Q(x);
    for the unstable size pass q^u, p^u and Q(y).
    """
    E = Fraction(eps)
    le = Fraction(math.log(eps))
    grown = E * T + log_q_next
    hi = min(grown, le + Fraction(log_Q))
    lo = -E * exp_value(log_p) + min(grown, -E + le + Fraction(log_Q))
    return lo, hi


def edge_report(atlas: Atlas, v: DoubleChart, w: DoubleChart) -> EdgeReport:
    eps = atlas.eps
    x, y = v.base, w.base
    fx = atlas.f(x)
    gy = atlas.f_inv(y)
    if Fraction(fx.s) != Fraction(y.s) or Fraction(gy.s) != Fraction(x.s):
        return EdgeReport(math.inf, math.inf, (), (), Fraction(0), False)
    g1 = overlap_log_gap(atlas.chart(fx), w.log_eta, atlas.chart(y), w.log_eta)
    g2 = overlap_log_gap(atlas.chart(gy), v.log_eta, atlas.chart(x), v.log_eta)
    T = transition_time(atlas, v, w).value
    lo_s, hi_s = gpo2_bounds(eps, T, v.log_ps, w.log_ps, atlas.params(x).log_Q)
    lo_u, hi_u = gpo2_bounds(eps, T, w.log_pu, v.log_pu, atlas.params(y).log_Q)
    ok = (g1 < 0 and g2 < 0 and lo_s <= v.log_ps <= hi_s and lo_u <= w.log_pu <= hi_u)
    return EdgeReport(g1, g2, (lo_s, v.log_ps, hi_s), (lo_u, w.log_pu, hi_u), T, ok)


def edge_test(atlas: Atlas, v: DoubleChart, w: DoubleChart) -> bool:
    """v -> w: both overlap conditions and both greedy double inequalities."""
    return edge_report(atlas, v, w).ok


def ratio_bound_holds(v: DoubleChart, w: DoubleChart, eps: float) -> bool:
    """(p^s ^ p^u) / (q^s ^ q^u) = e^{+-2 eps} for an accepted edge."""
    return abs(v.log_eta - w.log_eta) <= 2 * Fraction(eps)


def inclusion_check(atlas: Atlas, v: DoubleChart, w: DoubleChart, grid: int = 7) -> bool:
    """g_y^- maps Psi_y(R[eta_w / 20]) into Psi_x(R[eta_v / 15]) on a sample grid."""
    inv = chart_inverse_map(atlas, w.base, v.chart)
    ts = np.linspace(-w.eta / 20, w.eta / 20, grid)
    W = np.array([(a, b) for a in ts for b in ts])
    img = inv.exact(W)
    return bool(np.max(np.abs(img)) <= v.eta / 15)


def chart_rows(charts) -> list[tuple]:
    """Chart dump rows: x, C entries, Q, ps, pu."""
    rows = []
    for v in charts:
        c = v.chart
        rows.append((str(c.base), *[float(e) for e in c.C.ravel()], c.Q, v.ps, v.pu))
    return rows
