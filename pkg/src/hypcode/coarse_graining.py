"""The alphabet of double charts and the encoder from true orbits to gpo's.

The net is lazy: net points are the supplied orbit points themselves, so the
closeness conditions between a sample and its net point hold with zero error.
The window ladder {e^{-eps^2 q k}} has ~1e19 rungs between the admissible
bounds, so the alphabet is a membership predicate plus analytic counts; only
charts that occur in encodings are materialized.

All window sizes are exact rational logs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .charts import (Atlas, DoubleChart, edge_report, edge_test, exact_point, exp_value,
                     log_cap, log_distance, point_key)
from .errors import ConfigError, NetOverflow, SurgeryFailure
from .gpo_manifolds import GpoPath
from .model_flow import PointM
from .symbolic_core import MarkovGraph, SymbolPath


def robustness(eps: float, rho: float, beta: float) -> float:
    """The robustness constant eps rho + 250 rho / beta."""
    return eps * rho + 250 * rho / beta


def growth_factor_log(atlas: Atlas) -> Fraction:
    """log of the growing-index threshold: min(eps^1.5, eps inf(r) / 2)."""
    eps = atlas.eps
    return Fraction(min(eps ** 1.5, eps * atlas.r_inf / 2))


# -- ladder -------------------------------------------------------------------

def ladder_step(eps: float, q: float) -> Fraction:
    return Fraction(eps) ** 2 * Fraction(q)


def ladder_floor(log_v: Fraction, step: Fraction) -> Fraction:
    """Largest rung log value -k step (k >= 0) not above log_v."""
    k = math.ceil(-log_v / step)
    return -max(k, 0) * step


def on_ladder(log_p: Fraction, step: Fraction) -> bool:
    k = -log_p / step
    return k >= 0 and k.denominator == 1


# -- net indices and the alphabet ---------------------------------------------

@dataclass(frozen=True)
class NetIndex:
    ell: tuple
    m: int
    j: int

    @classmethod
    def of(cls, atlas: Atlas, x: PointM) -> "NetIndex":
        ell = []
        for y in (atlas.f_inv(x), x, atlas.f(x)):
            c_inv = np.linalg.norm(np.linalg.inv(atlas.params(y).C), 2)
            ell.append(math.floor(math.log(c_inv)))
        m = math.floor(-atlas.params(x).log_Q)
        j = math.floor(-math.log(atlas.local_q(x).q))
        return cls(tuple(ell), m, j)

    def holds(self, atlas: Atlas, x: PointM) -> bool:
        return NetIndex.of(atlas, x) == self


@dataclass
class NetPoint:
    point: PointM
    index: NetIndex
    q: float
    log_Q: float


@dataclass
class Alphabet:
    atlas: Atlas
    nets: dict
    hfrak: float
    charts: set = field(default_factory=set)
    graph: MarkovGraph = field(default_factory=MarkovGraph)
    cg3: bool = True

    def __post_init__(self):
        self._by_key = {}
        for pts in self.nets.values():
            for p in pts:
                self._by_key[point_key(p.point)] = p

    @property
    def net_size(self) -> int:
        return len(self._by_key)

    def net_point(self, x: PointM) -> NetPoint | None:
        return self._by_key.get(point_key(x))

    def cg_report(self, v: DoubleChart) -> dict:
        eps = self.atlas.eps
        npnt = self.net_point(v.base)
        rep = {"CG1": npnt is not None}
        if npnt is None:
            rep.update(CG2=False, CG3=False)
            return rep
        step = ladder_step(eps, npnt.q)
        cap = log_cap(v.chart, eps)
        rep["CG2"] = (v.log_ps <= cap and v.log_pu <= cap
                      and on_ladder(v.log_ps, step) and on_ladder(v.log_pu, step))
        ratio = float(v.log_eta) - math.log(npnt.q)
        rep["log_ratio"] = ratio
        rep["CG3"] = (not self.cg3) or (-self.hfrak - 1 <= ratio <= self.hfrak + 1)
        return rep

    def contains(self, v: DoubleChart) -> bool:
        r = self.cg_report(v)
        return r["CG1"] and r["CG2"] and r["CG3"]

    def add(self, v: DoubleChart) -> DoubleChart:
        if not self.contains(v):
            raise ValueError(f"{v!r} fails the alphabet conditions")
        if v not in self.charts:
            self.charts.add(v)
            self.graph.add_vertex(v)
        return v

    def connect(self) -> int:
        """Add all edges between materialized charts; returns the edge count."""
        atlas = self.atlas
        by_disc: dict = {}
        for v in self.charts:
            by_disc.setdefault(_disc_key(atlas, v.base), []).append(v)
        count = 0
        for v in self.charts:
            fx = atlas.f(v.base)
            for w in by_disc.get(_disc_key(atlas, fx), ()):
                if not self.graph.has_edge(v, w) and edge_test(atlas, v, w):
                    self.graph.add_edge(v, w)
            count += len(self.graph.successors(v))
        return count

    def count_pairs(self, t: float = 0.0, cg3: bool | None = None) -> int | float:
        """Number of (p^s, p^u) ladder pairs with both sizes above t, over all net points."""
        cg3 = self.cg3 if cg3 is None else cg3
        total = 0
        for p in self._by_key.values():
            total += _pair_count(self.atlas.eps, p, t, self.hfrak if cg3 else None)
        return total

    def bucket_sizes(self) -> dict:
        return {k: len(v) for k, v in self.nets.items()}


def _disc_key(atlas: Atlas, x: PointM):
    d = atlas.section.disc_at(x, tol=0) or atlas.section.disc_at(x)
    return None if d is None else d.index


def _pair_count(eps: float, p: NetPoint, t: float, hfrak) -> int | float:
    """Pairs of rungs k_s, k_u in [k0, k1) with max(k_s, k_u) in the CG3 range."""
    step = ladder_step(eps, p.q)
    cap = Fraction(math.log(eps)) + Fraction(p.log_Q)
    k0 = max(math.ceil(-cap / step), 0)
    k1 = math.inf if t <= 0 else math.ceil(-Fraction(math.log(t)) / step)
    lo, hi = k0, k1 - 1
    if hfrak is not None:
        lq = Fraction(math.log(p.q))
        # min(p^s, p^u) = e^{-step max(k)} within e^{+-(h+1)} of q
        lo = max(lo, math.ceil((-lq - Fraction(hfrak + 1)) / step))
        hi = min(hi, math.floor((-lq + Fraction(hfrak + 1)) / step))
    if hi == math.inf:
        return math.inf
    if hi < lo:
        return 0
    # sum over M in [lo, hi] of 2 (M - k0) + 1
    n = hi - lo + 1
    return n * (2 * (lo - k0) + 1) + n * (n - 1)


def build_alphabet(atlas: Atlas, orbit_samples, cap: int | None = None,
                   cg3: bool = True) -> Alphabet:
    """Lazy-net alphabet over the given section points."""
    nuh = atlas.nuh
    if nuh.beta >= 2:
        raise ConfigError("beta must be below 2 for the coarse-graining bounds")
    nets: dict = {}
    seen = set()
    for x in orbit_samples:
        x = exact_point(x)
        k = point_key(x)
        if k in seen:
            continue
        seen.add(k)
        idx = NetIndex.of(atlas, x)
        nets.setdefault(idx, []).append(
            NetPoint(x, idx, atlas.local_q(x).q, atlas.params(x).log_Q))
        if cap is not None and len(seen) > cap:
            dense = max(nets, key=lambda b: len(nets[b]))
            raise NetOverflow(f"net exceeds {cap} points", witness={"bucket": dense,
                                                                    "size": len(nets[dense])})
    return Alphabet(atlas, nets, robustness(nuh.eps, nuh.rho, nuh.beta), cg3=cg3)


def extend_alphabet(alpha: Alphabet, points) -> Alphabet:
    """Add net points in place (used when new orbits are encoded)."""
    atlas = alpha.atlas
    for x in points:
        x = exact_point(x)
        k = point_key(x)
        if k in alpha._by_key:
            continue
        idx = NetIndex.of(atlas, x)
        p = NetPoint(x, idx, atlas.local_q(x).q, atlas.params(x).log_Q)
        alpha.nets.setdefault(idx, []).append(p)
        alpha._by_key[k] = p
    return alpha


# -- exact orbits and log Q along them ------------------------------------------

@dataclass
class ExactOrbit:
    points: list
    gaps: list
    crossings: list
    origin: int

    def __len__(self):
        return len(self.points)


def _walk(atlas: Atlas, x: PointM, forward: bool, count: int | None = None,
          until: Fraction | None = None):
    """Successive hits from x in one direction: (points, gaps, crossings)."""
    pts, gaps, cr = [], [], []
    y, total = x, Fraction(0)
    while (count is not None and len(pts) < count) or (until is not None and total < until):
        h = atlas.forward(y) if forward else atlas.backward(y)
        g = Fraction(h.time) if forward else -Fraction(h.time)
        total += g
        gaps.append(g)
        cr.append(h.crossings if forward else -h.crossings)
        y = h.point
        pts.append(y)
    return pts, gaps, cr


def exact_orbit(atlas: Atlas, x: PointM, before: int, after: int,
                pad_time: Fraction | None = None) -> ExactOrbit:
    """Section hits around x with exact rational fibers and exact gaps.

    With pad_time, each side is extended until it spans at least that
    much flow time beyond the requested hits.
    """
    x = exact_point(x)
    fp, fg, fc = _walk(atlas, x, True, count=after)
    bp, bg, bc = _walk(atlas, x, False, count=before)
    if pad_time is not None:
        ep, eg, ec = _walk(atlas, fp[-1] if fp else x, True, until=pad_time)
        fp, fg, fc = fp + ep, fg + eg, fc + ec
        ep, eg, ec = _walk(atlas, bp[-1] if bp else x, False, until=pad_time)
        bp, bg, bc = bp + ep, bg + eg, bc + ec
    pts = bp[::-1] + [x] + fp
    return ExactOrbit(pts, bg[::-1] + fg, bc[::-1] + fc, len(bp))


def _panel_times(model, x: PointM, gap: float, k: int) -> list[float]:
    """Crossing times in (0, gap) of the flow from x."""
    out = []
    u1, u2 = x.u1, x.u2
    t = float(model.roof(u1, u2)) - float(x.s)
    for _ in range(k):
        out.append(t)
        u1, u2 = model.fiber_map(u1, u2, 1)
        t += float(model.roof(u1, u2))
    return out


def orbit_log_Q(atlas: Atlas, orb: ExactOrbit) -> list[float]:
    """log Q along an exact orbit by panel recursions.

    I_s is carried backward from the last point and I_u forward from the
    first, the directions in which errors contract.
    """
    nuh = atlas.nuh
    chi, lam2 = nuh.chi, nuh.model.lam ** 2
    n = len(orb)
    c2 = 1 / (2 * chi)

    def seg(a, b):
        return (math.exp(2 * chi * b) - math.exp(2 * chi * a)) * c2

    pieces = []
    for i in range(n - 1):
        g = float(orb.gaps[i])
        cr = _panel_times(nuh.model, orb.points[i], g, orb.crossings[i])
        pieces.append((g, cr))
    Is = [0.0] * n
    Is[-1] = nuh.integral_s(orb.points[-1])
    for i in range(n - 2, -1, -1):
        g, cr = pieces[i]
        edges = [0.0] + cr + [g]
        f = sum(seg(edges[j], edges[j + 1]) / lam2 ** j for j in range(len(edges) - 1))
        Is[i] = f + math.exp(2 * chi * g) / lam2 ** len(cr) * Is[i + 1]
    Iu = [0.0] * n
    Iu[0] = nuh.integral_u(orb.points[0])
    for i in range(1, n):
        g, cr = pieces[i - 1]
        back = [0.0] + [g - c for c in reversed(cr)] + [g]
        f = sum(seg(back[j], back[j + 1]) / lam2 ** j for j in range(len(back) - 1))
        Iu[i] = f + math.exp(2 * chi * g) / lam2 ** len(cr) * Iu[i - 1]
    return [nuh.log_q_from_integrals(a, b) for a, b in zip(Is, Iu)]


# -- the encoder ----------------------------------------------------------------

@dataclass
class EncodingTrace:
    indices: list
    log_Ps: list
    log_Pu: list
    log_ps: list
    log_pu: list
    growing_s: list
    growing_u: list
    tail_sums_s: list
    tail_sums_u: list
    maximal_s: list
    maximal_u: list
    horizon_limited: bool
    padding: tuple

    def to_dict(self) -> dict:
        def f(v):
            return [float(a) for a in v]
        return {"indices": self.indices,
                "log_Ps": f(self.log_Ps), "log_Pu": f(self.log_Pu),
                "log_a_s": [float(a - b) for a, b in zip(self.log_ps, self.log_Ps)],
                "log_a_u": [float(a - b) for a, b in zip(self.log_pu, self.log_Pu)],
                "tag_s": ["growing" if g else "maximal" for g in self.growing_s],
                "tag_u": ["growing" if g else "maximal" for g in self.growing_u],
                "tail_sums_s": self.tail_sums_s, "tail_sums_u": self.tail_sums_u,
                "horizon_limited": self.horizon_limited, "padding": list(self.padding)}


def _greedy(caps: list, gaps: list, E: Fraction) -> list:
    """log P^s_n = min(E gap_n + log P^s_{n+1}, cap_n), capped at the last index."""
    n = len(caps)
    out = [Fraction(0)] * n
    out[-1] = caps[-1]
    for k in range(n - 2, -1, -1):
        out[k] = min(E * gaps[k] + out[k + 1], caps[k])
    return out


def _surgery(logP: list, growing: list, steps: dict, E: Fraction, lo: int, start: int):
    """Ladder-valued log p on [lo, start) by backward induction.

    The chain starts at index start with a = 1 (start is maximal or the
    reach limit; it is not emitted, so it need not be on a ladder) and
    restarts at every maximal index below it. steps maps an index to its
    ladder step. Returns a dict index -> log p.
    """
    out = {start: logP[start]}
    for k in range(start - 1, lo - 1, -1):
        if not growing[k]:
            out[k] = ladder_floor(logP[k], steps[k])
            continue
        la_next = out[k + 1] - logP[k + 1]
        Pk = exp_value(logP[k])
        top = la_next - E * Pk / 4
        bottom = la_next - E * Pk / 2
        lp = ladder_floor(logP[k] + top, steps[k])
        if lp - logP[k] < bottom:
            raise SurgeryFailure(f"no ladder value satisfies the induction at index {k}",
                                 witness={"index": k, "top": float(top), "bottom": float(bottom)})
        out[k] = lp
    return out


def _tail_sums(logP: list, growing: list, lo: int, hi: int) -> list[float]:
    """sum_{k=n+1}^{m} P_k over consecutive maximal n < m inside [lo, hi)."""
    maxi = [k for k in range(lo, hi) if not growing[k]]
    sums = []
    for a, b in zip(maxi, maxi[1:]):
        sums.append(float(sum(exp_value(logP[k]) for k in range(a + 1, b + 1))))
    return sums


def encode_orbit(atlas: Atlas, alphabet: Alphabet, x: PointM, window: int,
                 extend: bool = True, reach: int = 30) -> GpoPath:
    """Encode the section orbit of x on indices [-window, window] as a gpo.

    Greedy sizes P^s, P^u come from a padded orbit long enough that points
    beyond it cannot change them; the surgery then moves each size onto its
    ladder while keeping both edge inequalities.
    """
    nuh = atlas.nuh
    eps = atlas.eps
    E = Fraction(eps)
    lam_log = growth_factor_log(atlas)
    core = exact_orbit(atlas, x, window, window)
    core_caps = [Fraction(math.log(eps)) + Fraction(atlas.params(p).log_Q) for p in core.points]
    floor = Fraction(math.log(eps)) + Fraction(nuh.log_q_min)
    need = (max(core_caps) - floor) / E + 1
    orb = exact_orbit(atlas, x, window, window, pad_time=need)
    lo = orb.origin - window
    hi = lo + 2 * window + 1
    lq = orbit_log_Q(atlas, orb)
    caps = [Fraction(math.log(eps)) + Fraction(v) for v in lq]
    for i, c in zip(range(lo, hi), core_caps):
        caps[i] = c
    T = orb.gaps
    Ps = _greedy(caps, T, E)
    Pu = _greedy(caps[::-1], T[::-1], E)[::-1]
    t_cum = [Fraction(0)]
    for g in T:
        t_cum.append(t_cum[-1] + g)
    for k in range(lo, hi):
        if (E * (t_cum[-1] - t_cum[k]) + floor < Ps[k]
                or E * (t_cum[k] - t_cum[0]) + floor < Pu[k]):
            raise SurgeryFailure("padding too short to fix the greedy sizes", witness={"index": k})
    n = len(orb)
    grow_s = [k < n - 1 and Ps[k] >= lam_log + Ps[k + 1] for k in range(n)]
    grow_u = [k > 0 and Pu[k] >= lam_log + Pu[k - 1] for k in range(n)]

    # chains start at the first maximal index past the window, within reach
    s_end = next((m for m in range(hi, min(hi + reach, n - 1)) if not grow_s[m]),
                 min(hi + reach, n - 1))
    u_start = next((m for m in range(lo - 1, max(lo - 1 - reach, 0), -1) if not grow_u[m]),
                   max(lo - 1 - reach, 0))
    # emitted indices use their own ladder; outside the window any rung
    # spacing finer than the induction interval eps P / 4 will do
    steps = {k: ladder_step(eps, atlas.local_q(orb.points[k]).q) for k in range(lo, hi)}
    for k in range(u_start + 1, s_end):
        if k not in steps:
            steps[k] = E * exp_value(min(Ps[k], Pu[k])) / 8
    ls = _surgery(Ps, grow_s, steps, E, lo, s_end)
    rev_steps = {n - 1 - k: v for k, v in steps.items()}
    lu_rev = _surgery(Pu[::-1], grow_u[::-1], rev_steps, E, n - hi, n - 1 - u_start)
    lu = {n - 1 - k: v for k, v in lu_rev.items()}

    if extend:
        extend_alphabet(alphabet, orb.points[lo:hi])
    charts = []
    for k in range(lo, hi):
        p = orb.points[k]
        np_ = alphabet.net_point(p)
        tag = np_.index if np_ is not None else None
        v = DoubleChart(atlas.chart(p, with_q=True), ls[k], lu[k], tag)
        alphabet.add(v)
        charts.append(v)
    count_s = sum(1 for k in range(lo, hi) if not grow_s[k])
    count_u = sum(1 for k in range(lo, hi) if not grow_u[k])
    mid = lo + window
    limited = (sum(1 for k in range(mid, hi) if not grow_s[k]) < 2
               or sum(1 for k in range(lo, mid + 1) if not grow_s[k]) < 2
               or sum(1 for k in range(mid, hi) if not grow_u[k]) < 2
               or sum(1 for k in range(lo, mid + 1) if not grow_u[k]) < 2)
    trace = EncodingTrace(
        list(range(-window, window + 1)),
        Ps[lo:hi], Pu[lo:hi], [ls[k] for k in range(lo, hi)], [lu[k] for k in range(lo, hi)],
        grow_s[lo:hi], grow_u[lo:hi],
        _tail_sums(Ps, grow_s, lo, s_end + 1), _tail_sums(Pu[::-1], grow_u[::-1], n - hi, n - u_start),
        count_s, count_u, limited, (lo, len(orb) - hi))
    return GpoPath(SymbolPath.window(tuple(charts), window),
                   {"trace": trace, "source": exact_point(x), "times": T[lo:hi - 1]})


@dataclass
class EncodingCheck:
    edges_ok: bool
    failing_edges: list
    cg_ok: bool
    tail_ok: bool
    a_ok: bool
    gpo2_maximal_ok: bool
    gpo2_growing_ok: bool

    @property
    def ok(self) -> bool:
        return (self.edges_ok and self.cg_ok and self.tail_ok and self.a_ok
                and self.gpo2_maximal_ok and self.gpo2_growing_ok)


def check_encoding(atlas: Atlas, alphabet: Alphabet, gpo: GpoPath) -> EncodingCheck:
    """Recheck the overlap and chart-fit conditions plus the tail and a_n bounds on an encoding."""
    tr: EncodingTrace = gpo.info["trace"]
    eps = atlas.eps
    beta = atlas.nuh.beta
    idx = tr.indices
    bad, max_ok, grow_ok = [], True, True
    for i, n in enumerate(idx[:-1]):
        rep = edge_report(atlas, gpo[n], gpo[n + 1])
        if not rep.ok:
            bad.append(n)
        if not rep.gpo2_s:
            max_ok = grow_ok = False
            continue
        # p^s_n is tagged at n, p^u_{n+1} at n + 1
        for (lo, val, hi), growing in ((rep.gpo2_s, tr.growing_s[i]),
                                       (rep.gpo2_u, tr.growing_u[i + 1])):
            ok = lo <= val <= hi
            if growing:
                grow_ok &= ok
            else:
                max_ok &= ok
    cg_ok = all(alphabet.contains(gpo[n]) for n in idx)
    bound = eps ** (3 / beta - 1)
    tail_ok = all(s < bound for s in tr.tail_sums_s + tr.tail_sums_u)
    le = -Fraction(eps)
    a_ok = all(le < a - b <= 0 for a, b in zip(tr.log_ps, tr.log_Ps)) and \
        all(le < a - b <= 0 for a, b in zip(tr.log_pu, tr.log_Pu))
    return EncodingCheck(not bad, bad, cg_ok, tail_ok, a_ok, max_ok, grow_ok)


def encode_periodic(atlas: Atlas, alphabet: Alphabet, x: PointM, period: int,
                    window: int | None = None) -> GpoPath:
    """Encoding of a periodic section orbit as a periodic gpo."""
    x = exact_point(x)
    y = x
    for _ in range(period):
        y = atlas.f(y)
    if point_key(y) != point_key(x):
        raise ValueError("x is not periodic with the given period")
    w = window or max(period, 2)
    enc = encode_orbit(atlas, alphabet, x, w)
    cycle = [enc[k] for k in range(period)]
    for k in range(-w, w + 1 - period):
        if enc[k] != enc[k + period]:
            raise SurgeryFailure("encoding is not periodic", witness={"index": k})
    return GpoPath(GpoPath.periodic(cycle).path, dict(enc.info))


def prune_relevant(alpha: Alphabet, witnesses) -> Alphabet:
    """Keep charts that occur in some witness gpo; edges among kept charts survive."""
    keep = set()
    for g in witnesses:
        lo, hi = g.span()
        if math.isinf(lo) or math.isinf(hi):
            p = g.path
            keep.update(p.core)
            keep.update(p.past_cycle)
            keep.update(p.future_cycle)
        else:
            keep.update(g[n] for n in range(int(lo), int(hi)))
    keep &= alpha.charts
    out = Alphabet(alpha.atlas, alpha.nets, alpha.hfrak, set(keep),
                   alpha.graph.subgraph(keep), alpha.cg3)
    out._by_key = alpha._by_key
    return out


def net_distance(atlas: Atlas, x: PointM, net: NetPoint) -> float:
    """log of d + |C - C| between a sample and a net point (-inf when equal)."""
    ld = log_distance(x, net.point)
    dc = float(np.linalg.norm(atlas.params(x).C - atlas.params(net.point).C, 2))
    if dc == 0:
        return ld
    return float(np.logaddexp(ld, math.log(dc)))
