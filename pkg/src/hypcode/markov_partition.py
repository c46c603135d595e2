"""Markov cover, its refinement into a partition, and the second coding.

Everything runs on a skeleton: encoded periodic orbits (cycles) joined by
encoded connecting orbits (chains). A chain ends in a twin zone where its
base points lie within the chart overlap scale of the cycle, so junction
edges between cycle and chain charts pass the edge test there.

Sample points are orbits of the skeleton, written as the cycle they start
in plus a tuple of trips (chain, index of the chain at time 0). The trip
list fixes the physical orbit; different vertex paths that realize the
same trips shadow the same point. Rectangles, fibres and the refinement
are computed from this symbolic data; chart coordinates from affine lines
along one realization are used for every geometric check.
"""
from __future__ import annotations

import bisect
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt

import numpy as np

from .charts import Atlas, edge_test, fiber_delta, log_distance, point_key
from .coarse_graining import Alphabet, encode_orbit, encode_periodic
from .errors import (BoundViolated, BracketFailure, CheckFailure, CoverageFailure,
                     CylinderEmpty, EmptyRectangle, NotTransitive)
from .gpo_manifolds import holder_fit
from .model_flow import PointM
from .symbolic_core import MarkovGraph, RoofFunction, SymbolPath, irreducible_components

DIGITS = 420


# -- connecting points -----------------------------------------------------------

def eigen_directions(matrix, digits: int = DIGITS):
    """Unstable and stable eigenvectors of an integer hyperbolic matrix, as rationals.

    For [[a, b], [c, d]] the eigenvector of lam is (b, lam - a); sqrt of the
    discriminant is taken to `digits` decimals.
    """
    (a, b), (c, d) = matrix
    tr, det = a + d, a * d - b * c
    disc = tr * tr - 4 * det
    scale = 10 ** digits
    root = Fraction(isqrt(disc * scale * scale), scale)
    lu, ls = (tr + root) / 2, (tr - root) / 2
    return (Fraction(b), lu - a), (Fraction(b), ls - a)


def connecting_point(matrix, p, q, digits: int = DIGITS, box: int = 2):
    """A point of W^u(p) meeting W^s(q) on the torus, nearest to p.

    Solves p + t e_u = q + m + s e_s over integer m in a box, keeping the
    solution with the smallest max(|t|, |s|); m = 0 is skipped when p = q.
    Returns (u1, u2) in [0, 1).
    """
    eu, es = eigen_directions(matrix, digits)
    p = tuple(Fraction(v) for v in p)
    q = tuple(Fraction(v) for v in q)
    det = es[0] * eu[1] - eu[0] * es[1]
    best = None
    for m1 in range(-box, box + 1):
        for m2 in range(-box, box + 1):
            r0, r1 = q[0] + m1 - p[0], q[1] + m2 - p[1]
            t = (es[0] * r1 - es[1] * r0) / det
            s = (eu[0] * r1 - eu[1] * r0) / det
            if t == 0 and s == 0:
                continue
            size = max(abs(t), abs(s))
            if best is None or size < best[0]:
                best = (size, t)
    t = best[1]
    return ((p[0] + t * eu[0]) % 1, (p[1] + t * eu[1]) % 1)


def section_point(atlas: Atlas, u1, u2) -> PointM:
    """The point over (u1, u2) on the lowest disc of its column."""
    col = atlas.section.cells_containing(u1, u2)[0]
    return PointM(Fraction(u1), Fraction(u2), atlas.section.columns[col][0].height)


def periodic_orbit(atlas: Atlas, x: PointM, cap: int = 10_000) -> list:
    """Section orbit of a periodic point, starting at x."""
    pts, y = [x], atlas.f(x)
    while point_key(y) != point_key(x):
        pts.append(y)
        y = atlas.f(y)
        if len(pts) > cap:
            raise ValueError("point is not periodic within the cap")
    return pts


def _disc_key(atlas: Atlas, x: PointM) -> tuple:
    return (Fraction(x.s),) + tuple(atlas.section.cell_of(x.u1, x.u2))


# -- skeleton ------------------------------------------------------------------

@dataclass
class Cycle:
    name: str
    charts: list
    discs: dict

    def __len__(self):
        return len(self.charts)


@dataclass
class Chain:
    """Encoded connecting orbit; entry[i]/exit[i] junctions at chain indices."""

    name: str
    src: str
    dst: str
    charts: list
    mid: int
    entry: list
    exit: list
    entry_offset: int
    exit_offset: int

    def __len__(self):
        return len(self.charts)

    def src_pos(self, i: int, n: int) -> int:
        return (i + self.entry_offset) % n

    def dst_pos(self, i: int, n: int) -> int:
        return (i + self.exit_offset) % n


@dataclass
class Skeleton:
    atlas: Atlas
    alphabet: Alphabet
    cycles: dict
    chains: dict
    graph: MarkovGraph
    vertices: list
    vid: dict
    info: dict = field(default_factory=dict)

    def cycle_vid(self, name: str, pos: int) -> int:
        c = self.cycles[name]
        return self.vid[c.charts[pos % len(c)]]

    def chain_vid(self, name: str, i: int) -> int:
        return self.vid[self.chains[name].charts[i]]


def _walk_to_cycle(atlas: Atlas, x: PointM, cycle_pts: dict, forward: bool,
                   threshold: float, cap: int = 200_000) -> int:
    """Steps until the orbit of x is within exp(threshold) of the cycle on one disc."""
    y, n = x, 0
    step = atlas.f if forward else atlas.f_inv
    while n < cap:
        y = step(y)
        n += 1
        p = cycle_pts.get(_disc_key(atlas, y))
        if p is not None and log_distance(y, p) < threshold:
            return n
    raise CoverageFailure("connecting orbit does not reach the cycle", witness={"steps": n})


def _junctions(atlas: Atlas, chain_charts: list, cycle: Cycle, indices, threshold: float,
               entering: bool):
    """Chain indices with a passing junction edge, and the index-to-position offset."""
    n = len(cycle)
    found, offsets = [], set()
    for i in indices:
        v = chain_charts[i]
        j = cycle.discs.get(_disc_key(atlas, v.base))
        if j is None or log_distance(v.base, cycle.charts[j].base) >= threshold:
            continue
        if entering:
            ok = edge_test(atlas, cycle.charts[(j - 1) % n], v)
        else:
            ok = edge_test(atlas, v, cycle.charts[(j + 1) % n])
        if ok:
            found.append(i)
            offsets.add((j - i) % n)
    if not found:
        raise CoverageFailure("no junction edge passes", witness={"entering": entering})
    if len(offsets) != 1:
        raise CoverageFailure("junction positions are not aligned", witness=sorted(offsets))
    return sorted(found), offsets.pop()


def build_skeleton(atlas: Atlas, alphabet: Alphabet, cycles: dict, links, depth: int = 320,
                   digits: int = DIGITS) -> Skeleton:
    """Cycles through the given fibers and chains for the given (src, dst) links.

    cycles maps a name to the fiber (u1, u2) of a periodic point. Each chain
    is encoded on a symmetric window reaching `depth` hits past the point
    where it first comes within the overlap scale of both cycles.
    """
    cyc = {}
    for name, (u1, u2) in cycles.items():
        x = section_point(atlas, Fraction(u1), Fraction(u2))
        pts = periodic_orbit(atlas, x)
        g = encode_periodic(atlas, alphabet, x, len(pts))
        charts = [g[k] for k in range(len(pts))]
        discs = {_disc_key(atlas, p): j for j, p in enumerate(pts)}
        if len(discs) != len(pts):
            raise CoverageFailure("cycle visits a disc twice", witness=name)
        cyc[name] = Cycle(name, charts, discs)
    chains = {}
    for src, dst in links:
        a, b = cyc[src], cyc[dst]
        log_eta = min(float(v.log_eta) for v in a.charts + b.charts)
        threshold = 8 * log_eta
        z = connecting_point(atlas.model.matrix, cycles[src], cycles[dst], digits)
        x = section_point(atlas, *z)
        pa = {k: a.charts[j].base for k, j in a.discs.items()}
        pb = {k: b.charts[j].base for k, j in b.discs.items()}
        nb = _walk_to_cycle(atlas, x, pa, False, threshold)
        nf = _walk_to_cycle(atlas, x, pb, True, threshold)
        W = max(nb, nf) + depth
        g = encode_orbit(atlas, alphabet, x, W)
        charts = [g[k] for k in range(-W, W + 1)]
        entry, e_off = _junctions(atlas, charts, a, range(0, W), threshold, True)
        exit_, x_off = _junctions(atlas, charts, b, range(W + 1, 2 * W + 1), threshold, False)
        # charts outside the junction span are unreachable from the cycles
        lo, hi = entry[0], exit_[-1]
        name = f"{src}>{dst}"
        chains[name] = Chain(name, src, dst, charts[lo:hi + 1], W - lo,
                             [i - lo for i in entry], [i - lo for i in exit_],
                             (e_off + lo) % len(a), (x_off + lo) % len(b))
    graph = MarkovGraph()
    vertices, vid = [], {}

    def add(v):
        if v not in vid:
            vid[v] = len(vertices)
            vertices.append(v)
            graph.add_vertex(v)

    for c in cyc.values():
        for v in c.charts:
            add(v)
        for j in range(len(c)):
            graph.add_edge(c.charts[j], c.charts[(j + 1) % len(c)])
    for ch in chains.values():
        for v in ch.charts:
            add(v)
        for v, w in zip(ch.charts, ch.charts[1:]):
            graph.add_edge(v, w)
        a, b = cyc[ch.src], cyc[ch.dst]
        for i in ch.entry:
            graph.add_edge(a.charts[(ch.src_pos(i, len(a)) - 1) % len(a)], ch.charts[i])
        for i in ch.exit:
            graph.add_edge(ch.charts[i], b.charts[(ch.dst_pos(i, len(b)) + 1) % len(b)])
    return Skeleton(atlas, alphabet, cyc, chains, graph, vertices, vid,
                    {"depth": depth, "digits": digits})


# -- symbolic orbits -------------------------------------------------------------

class OrbitSpace:
    """Skeleton orbits at time 0, as tuples (cycle, position, trips).

    trips lists (chain name, chain index at time 0) in time order. The
    orbit comes from `cycle` (the source of the first trip) and ends on the
    target of the last trip. Pure cycle orbits have no trips and use
    `position`. A realization enters each chain at an entry index and
    leaves at an exit index, spending at least one step on the cycle in
    between; the canonical one enters as late and leaves as early as
    possible.
    """

    def __init__(self, sk: Skeleton, reach: int = 4):
        self.sk = sk
        self.reach = reach
        self.n = {k: len(c) for k, c in sk.cycles.items()}
        self.cyc_vid = {k: [sk.vid[v] for v in c.charts] for k, c in sk.cycles.items()}
        self.chain_vid = {k: [sk.vid[v] for v in c.charts] for k, c in sk.chains.items()}
        ch = sk.chains
        self.E = {k: c.entry for k, c in ch.items()}
        self.X = {k: c.exit for k, c in ch.items()}
        self.minE = {k: c.entry[0] for k, c in ch.items()}
        self.maxE = {k: c.entry[-1] for k, c in ch.items()}
        self.minX = {k: c.exit[0] for k, c in ch.items()}
        self.maxX = {k: c.exit[-1] for k, c in ch.items()}
        self.L = {k: len(c) for k, c in ch.items()}
        self.mid = {k: c.mid for k, c in ch.items()}
        self.e_off = {k: c.entry_offset for k, c in ch.items()}
        self.x_off = {k: c.exit_offset for k, c in ch.items()}
        self.src = {k: c.src for k, c in ch.items()}
        self.dst = {k: c.dst for k, c in ch.items()}
        self.where = {}
        for k, vs in self.cyc_vid.items():
            for j, v in enumerate(vs):
                self.where[v] = ("cycle", k, j)
        for k, vs in self.chain_vid.items():
            for i, v in enumerate(vs):
                self.where[v] = ("chain", k, i)

    # orbit algebra

    def pure(self, cycle: str, pos: int = 0) -> tuple:
        return (cycle, pos % self.n[cycle], ())

    def trip_orbit(self, trips) -> tuple:
        trips = tuple(trips)
        return (self.src[trips[0][0]], 0, trips)

    def shift(self, o: tuple, k: int) -> tuple:
        cyc, pos, trips = o
        if trips:
            return (cyc, 0, tuple((a, c + k) for a, c in trips))
        return (cyc, (pos + k) % self.n[cyc], ())

    def valid(self, o: tuple) -> bool:
        cyc, pos, trips = o
        if not trips:
            return cyc in self.n
        if self.src[trips[0][0]] != cyc:
            return False
        for (a, c), (b, d) in zip(trips, trips[1:]):
            if self.dst[a] != self.src[b]:
                return False
            if (c + self.x_off[a] - d - self.e_off[b]) % self.n[self.dst[a]]:
                return False
            if self.maxE[b] - d < self.minX[a] - c + 2:
                return False
        return True

    def initial(self, o: tuple) -> tuple:
        """Source cycle and its position at time 0 (had the orbit stayed there)."""
        cyc, pos, trips = o
        if not trips:
            return cyc, pos
        a, c = trips[0]
        return cyc, (c + self.e_off[a]) % self.n[cyc]

    def terminal(self, o: tuple) -> tuple:
        cyc, pos, trips = o
        if not trips:
            return cyc, pos
        a, c = trips[-1]
        d = self.dst[a]
        return d, (c + self.x_off[a]) % self.n[d]

    def members(self, o: tuple) -> tuple:
        """Vertex ids v with the orbit in Z(v) at time 0."""
        cyc, pos, trips = o
        if not trips:
            return (self.cyc_vid[cyc][pos],)
        out = []
        m = len(trips)
        for k, (a, c) in enumerate(trips):
            if not 0 <= c < self.L[a]:
                continue
            if k > 0:
                p, cp = trips[k - 1]
                lo = self.minX[p] - cp + c + 2
            else:
                lo = -math.inf
            if k < m - 1:
                q, cq = trips[k + 1]
                hi = self.maxE[q] - cq + c - 2
            else:
                hi = math.inf
            E = self.E[a]
            i = bisect.bisect_right(E, c)
            if i == 0 or E[i - 1] < lo:
                continue
            X = self.X[a]
            j = bisect.bisect_left(X, c)
            if j == len(X) or X[j] > hi:
                continue
            out.append(self.chain_vid[a][c])
        a, c = trips[0]
        if self.maxE[a] > c:
            out.append(self.cyc_vid[cyc][(c + self.e_off[a]) % self.n[cyc]])
        for (a, c), (b, d) in zip(trips, trips[1:]):
            if self.minX[a] < c and self.maxE[b] > d:
                t = self.dst[a]
                out.append(self.cyc_vid[t][(c + self.x_off[a]) % self.n[t]])
        a, c = trips[-1]
        if self.minX[a] < c:
            t = self.dst[a]
            out.append(self.cyc_vid[t][(c + self.x_off[a]) % self.n[t]])
        return tuple(sorted(out))

    def canonical(self, o: tuple) -> int:
        """Vertex id of the canonical realization at time 0."""
        cyc, pos, trips = o
        if not trips:
            return self.cyc_vid[cyc][pos]
        for a, c in trips:
            if self.maxE[a] <= c <= self.minX[a]:
                return self.chain_vid[a][c]
        a, c = trips[0]
        if c < self.maxE[a]:
            return self.cyc_vid[cyc][(c + self.e_off[a]) % self.n[cyc]]
        for (a, c), (b, d) in zip(trips, trips[1:]):
            if c > self.minX[a] and d < self.maxE[b]:
                t = self.dst[a]
                return self.cyc_vid[t][(c + self.x_off[a]) % self.n[t]]
        d, p = self.terminal(o)
        return self.cyc_vid[d][p]

    def keys(self, o: tuple) -> tuple:
        """(future trips, past trips): trips split at their chain midpoints."""
        trips = o[2]
        fut = tuple(t for t in trips if t[1] <= self.mid[t[0]])
        past = tuple(t for t in trips if t[1] > self.mid[t[0]])
        return fut, past

    def local_keys(self, o: tuple) -> tuple:
        """keys() restricted to trips with a junction or chain step within reach."""
        r = 2 * self.reach
        fut, past = [], []
        for a, c in o[2]:
            if self.minE[a] - r <= c <= self.maxX[a] + r:
                (fut if c <= self.mid[a] else past).append((a, c))
        return tuple(fut), tuple(past)

    def splice(self, x: tuple, y: tuple) -> tuple:
        """The orbit with the future of x and the past of y."""
        fut = self.keys(x)[0]
        past = self.keys(y)[1]
        trips = past + fut
        if trips:
            return self.trip_orbit(trips)
        return self.pure(*self.terminal(x))

    def path(self, o: tuple, t0: int, t1: int) -> list:
        """Canonical vertex ids at times t0..t1."""
        return [self.canonical(self.shift(o, t)) for t in range(t0, t1 + 1)]

    def span(self, o: tuple) -> tuple:
        """Times of the first canonical entry and the last canonical exit."""
        trips = o[2]
        if not trips:
            return 0, 0
        a, c = trips[0]
        b, d = trips[-1]
        return self.maxE[a] - c, self.minX[b] - d


def sample_family(space: OrbitSpace, margin: int, dwells: int = 2) -> list:
    """Orbits with their sampled time windows (orbit, t_lo, t_hi).

    Pure cycles over one period, every chain once over its junction zones
    with `margin` steps of cycle on each side, and every chain-to-chain
    pair with the `dwells` shortest admissible stays on the middle cycle,
    sampled around the stay.
    """
    fam = []
    for name, n in space.n.items():
        fam.append((space.pure(name), 0, n - 1))
    names = list(space.sk.chains)
    for a in names:
        fam.append((space.trip_orbit([(a, 0)]), space.minE[a] - margin, space.maxX[a] + margin))
    for a in names:
        for b in names:
            if space.src[b] != space.dst[a]:
                continue
            n = space.n[space.dst[a]]
            top = space.maxE[b] - space.minX[a] - 2
            r = (space.x_off[a] - space.e_off[b]) % n
            d0 = top - ((top - r) % n)
            for i in range(dwells):
                d = d0 - i * n
                o = space.trip_orbit([(a, 0), (b, d)])
                assert space.valid(o)
                lo = min(space.minX[a], space.minE[b] - d) - margin
                hi = max(space.maxX[a], space.maxE[b] - d) + margin
                fam.append((o, lo, hi))
    return fam


# -- chart coordinates ------------------------------------------------------------

@dataclass(frozen=True)
class AffineMap:
    """Exact chart map between consecutive vertices: w -> linear w + offset."""

    linear: np.ndarray
    offset: np.ndarray


class LineCalculus:
    """Affine chart maps along skeleton edges and the lines they transport.

    Stable lines are u = a + b s and unstable lines are s = c + d u, in the
    (s, u) coordinates of the chart at their time.
    """

    def __init__(self, sk: Skeleton, space: OrbitSpace):
        self.sk = sk
        self.space = space
        self.atlas = sk.atlas
        self._maps = {}
        self._transfer = {}
        self._fixed = {}
        self.C = [np.asarray(sk.atlas.params(v.base).C, dtype=float) for v in sk.vertices]
        self.window = [(float(v.ps), float(v.pu)) for v in sk.vertices]

    def map(self, v: int, w: int) -> tuple:
        """(L00, L01, L10, L11, o0, o1) of the chart map from vertex v to vertex w."""
        key = (v, w)
        m = self._maps.get(key)
        if m is None:
            at = self.atlas
            x, y = self.sk.vertices[v].base, self.sk.vertices[w].base
            hit = at.forward(x)
            L = at.linear_part(x, y, hit.crossings)
            o = np.linalg.solve(self.C[w], fiber_delta(hit.point, y))
            m = (float(L[0, 0]), float(L[0, 1]), float(L[1, 0]), float(L[1, 1]),
                 float(o[0]), float(o[1]))
            self._maps[key] = m
        return m

    def affine(self, v: int, w: int) -> AffineMap:
        L00, L01, L10, L11, o0, o1 = self.map(v, w)
        return AffineMap(np.array([[L00, L01], [L10, L11]]), np.array([o0, o1]))

    @staticmethod
    def push(m, c, d):
        L00, L01, L10, L11, o0, o1 = m
        den = L10 * d + L11
        dn = (L00 * d + L01) / den
        return L00 * c + o0 - (L00 * d + L01) * (L10 * c + o1) / den, dn

    @staticmethod
    def pull(m, a, b):
        L00, L01, L10, L11, o0, o1 = m
        den = L11 - b * L01
        return (a + b * o0 - o1) / den, (b * L00 - L10) / den

    def fixed_lines(self, cycle: str) -> list:
        """Invariant (a, b, c, d) at each position of a cycle."""
        got = self._fixed.get(cycle)
        if got is not None:
            return got
        vs = self.space.cyc_vid[cycle]
        n = len(vs)
        maps = [self.map(vs[j], vs[(j + 1) % n]) for j in range(n)]
        c = d = 0.0
        for _ in range(400):
            old = (c, d)
            for j in range(n):
                c, d = self.push(maps[j], c, d)
            if (c, d) == old:
                break
        U = [None] * n
        for j in range(n):
            U[j] = (c, d)
            c, d = self.push(maps[j], c, d)
        a = b = 0.0
        for _ in range(400):
            old = (a, b)
            for j in range(n - 1, -1, -1):
                a, b = self.pull(maps[j], a, b)
            if (a, b) == old:
                break
        S = [None] * n
        for j in range(n - 1, -1, -1):
            a, b = self.pull(maps[j], a, b)
            S[j] = (a, b)
        out = [S[j] + U[j] for j in range(n)]
        self._fixed[cycle] = out
        return out

    def orbit_lines(self, o: tuple, t0: int, t1: int):
        """Canonical path and lines over times t0..t1 (extended to the cycles)."""
        sp = self.space
        first, last = sp.span(o)
        ta, tb = min(t0, first - 2), max(t1, last + 2)
        path = sp.path(o, ta, tb)
        cyc, pos = sp.initial(sp.shift(o, ta))
        c, d = self.fixed_lines(cyc)[pos][2:]
        U = [(c, d)]
        for k in range(len(path) - 1):
            c, d = self.push(self.map(path[k], path[k + 1]), c, d)
            U.append((c, d))
        cyc, pos = sp.terminal(sp.shift(o, tb))
        a, b = self.fixed_lines(cyc)[pos][:2]
        S = [(a, b)]
        for k in range(len(path) - 2, -1, -1):
            a, b = self.pull(self.map(path[k], path[k + 1]), a, b)
            S.append((a, b))
        S.reverse()
        i0 = t0 - ta
        return path[i0:i0 + t1 - t0 + 1], S[i0:i0 + t1 - t0 + 1], U[i0:i0 + t1 - t0 + 1]

    @staticmethod
    def meet(a, b, c, d):
        """Intersection of u = a + b s with s = c + d u."""
        s = (c + d * a) / (1.0 - d * b)
        return s, a + b * s

    def transfer(self, r: int, v: int):
        """(M, delta) with w_v = M w_r + delta for one point in both charts."""
        key = (r, v)
        t = self._transfer.get(key)
        if t is None:
            if r == v:
                t = (np.eye(2), np.zeros(2))
            else:
                Ci = np.linalg.inv(self.C[v])
                delta = fiber_delta(self.sk.vertices[r].base, self.sk.vertices[v].base)
                t = (Ci @ self.C[r], Ci @ delta)
            self._transfer[key] = t
        return t

    def cylinder_box(self, path: list, center: int, depth: int) -> float:
        """Fiber diameter of the points staying in the path windows for |k| <= depth.

        path[center] is time 0; the window edges u = +-p^u at +depth and
        s = +-p^s at -depth are carried to time 0 and the parallelogram
        they bound is measured with the chart matrix.
        """
        lines_s = []
        for sgn in (1.0, -1.0):
            a, b = sgn * self.window[path[center + depth]][1], 0.0
            for k in range(center + depth - 1, center - 1, -1):
                a, b = self.pull(self.map(path[k], path[k + 1]), a, b)
            lines_s.append((a, b))
        lines_u = []
        for sgn in (1.0, -1.0):
            c, d = sgn * self.window[path[center - depth]][0], 0.0
            for k in range(center - depth, center):
                c, d = self.push(self.map(path[k], path[k + 1]), c, d)
            lines_u.append((c, d))
        pts = np.array([self.meet(a, b, c, d) for a, b in lines_s for c, d in lines_u])
        X = pts @ self.C[path[center]].T
        diff = X[:, None, :] - X[None, :, :]
        return float(np.sqrt((diff ** 2).sum(-1)).max())


# -- the Markov cover --------------------------------------------------------------

@dataclass
class Rectangle:
    """A cover rectangle Z(v) (parent: vertex id) or a partition element (parent: signature)."""

    id: object
    parent: object
    samples: list


class Timeline:
    """Symbolic data of one family orbit at times lo..hi."""

    def __init__(self, space: OrbitSpace, rt: list, o: tuple, lo: int, hi: int):
        self.orbit, self.lo, self.hi = o, lo, hi
        self.members, self.canon, self.lkeys = [], [], []
        for t in range(lo, hi + 1):
            x = space.shift(o, t)
            self.members.append(space.members(x))
            self.canon.append(space.canonical(x))
            self.lkeys.append(space.local_keys(x))
        r = np.array([rt[v] for v in self.canon])
        self.clock = np.concatenate([[0.0], np.cumsum(r)])

    def at(self, t: int) -> int:
        return t - self.lo

    def elapsed(self, t: int, j: int) -> float:
        """|flow time| from H^0 to H^j at time t."""
        i = t - self.lo
        return abs(self.clock[i + j] - self.clock[i])


class MarkovCover:
    """Rectangles Z(v) over a sample cloud of skeleton orbits.

    Per sample: family orbit, time, canonical vertex and the stable and
    unstable lines through it in that chart. Fibres are the sets of
    samples in Z sharing the future (stable) or past (unstable) trips.
    """

    def __init__(self, sk: Skeleton, N: int | None = None, margin: int | None = None,
                 dwells: int = 2):
        at = sk.atlas
        self.sk = sk
        self.rho = float(at.nuh.rho)
        self.rt = [float(at.return_time(v.base)) for v in sk.vertices]
        r_min = min(self.rt)
        self.N = N if N is not None else math.ceil(self.rho / r_min) + 1
        self.reach = int(2 * self.rho / r_min) + 1
        self.space = OrbitSpace(sk, self.reach)
        self.margin = margin if margin is not None else self.N + 2 * self.reach + 4
        self.lines = LineCalculus(sk, self.space)
        self.family = sample_family(self.space, self.margin, dwells)
        self.tol = [1e-6 * min(ps, pu) for ps, pu in self.lines.window]
        self._horizon = None
        self.timelines = []
        self.geometry = []
        sf, st = [], []
        for f, (o, lo, hi) in enumerate(self.family):
            path, S, U = self.lines.orbit_lines(o, lo - 2, hi + 2)
            self.geometry.append((lo - 2, path, S, U))
            for t in range(lo, hi + 1):
                sf.append(f)
                st.append(t)
        self.sample_family = np.array(sf)
        self.sample_time = np.array(st)
        self._build_timelines(self.N)
        self.rectangles = {}
        for i in range(len(sf)):
            tl = self.timelines[sf[i]]
            for v in tl.members[tl.at(st[i])]:
                self.rectangles.setdefault(v, Rectangle(v, sk.vertices[v], [])).samples.append(i)
        self._overlaps()

    def _build_timelines(self, N: int):
        H = N + self.reach + 2
        if self._horizon is not None and self._horizon >= H:
            return
        self._horizon = H
        self.timelines = [Timeline(self.space, self.rt, o, lo - H, hi + H)
                          for o, lo, hi in self.family]

    def __len__(self):
        return len(self.sample_family)

    # sample access

    def orbit(self, i: int) -> tuple:
        return self.space.shift(self.family[self.sample_family[i]][0], int(self.sample_time[i]))

    def timeline(self, i: int) -> tuple:
        return self.timelines[self.sample_family[i]], int(self.sample_time[i])

    def members(self, i: int) -> tuple:
        tl, t = self.timeline(i)
        return tl.members[tl.at(t)]

    def keys(self, i: int) -> tuple:
        return self.space.keys(self.orbit(i))

    def frame(self, f: int, t: int) -> tuple:
        """(canonical vertex, (a, b), (c, d), (s, u)) of family orbit f at time t."""
        t0, path, S, U = self.geometry[f]
        k = t - t0
        a, b = S[k]
        c, d = U[k]
        return path[k], (a, b), (c, d), self.lines.meet(a, b, c, d)

    def coords(self, i: int, v: int | None = None) -> np.ndarray:
        """Chart coordinates of sample i in the chart of vertex v (default canonical)."""
        r, _, _, w = self.frame(self.sample_family[i], int(self.sample_time[i]))
        w = np.array(w)
        if v is None or v == r:
            return w
        M, delta = self.lines.transfer(r, v)
        return M @ w + delta

    def point(self, i: int) -> PointM:
        r, _, _, w = self.frame(self.sample_family[i], int(self.sample_time[i]))
        return self.sk.atlas.chart(self.sk.vertices[r].base).apply(np.array(w), exact=True)

    def fibre_lines(self, f: int, t: int, v: int):
        """Stable and unstable lines of family orbit f at time t as (point, direction) in chart v."""
        r, (a, b), (c, d), w = self.frame(f, t)
        w = np.array(w)
        ds, du = np.array([1.0, b]), np.array([d, 1.0])
        if v != r:
            M, delta = self.lines.transfer(r, v)
            w, ds, du = M @ w + delta, M @ ds, M @ du
        return w, ds, du

    # overlaps and the four-way partition

    def _overlaps(self):
        I = defaultdict(set)
        Fs, Fu = defaultdict(set), defaultdict(set)
        R = self.reach
        for f, tl in enumerate(self.timelines):
            o, lo, hi = self.family[f]
            for t in range(lo, hi + 1):
                k = tl.at(t)
                here = tl.members[k]
                lf, lp = tl.lkeys[k]
                near, far = set(), set()
                for j in range(-R, R + 1):
                    dt = tl.elapsed(t, j)
                    if dt <= 2 * self.rho:
                        far.update(tl.members[k + j])
                        if dt <= self.rho:
                            near.update(tl.members[k + j])
                for z in here:
                    I[z].update(near)
                    for z2 in near:
                        I[z2].add(z)
                    for z2 in far:
                        Fs[(z, z2)].add(lf)
                        Fu[(z, z2)].add(lp)
        self.I = {z: tuple(sorted(s)) for z, s in I.items()}
        self.Fs, self.Fu = dict(Fs), dict(Fu)
        self._esig = {}

    def esig(self, z: int, lkeys: tuple) -> tuple:
        """Element of the four-way refinement of Z(z) for a point with these local keys."""
        key = (z, lkeys)
        e = self._esig.get(key)
        if e is None:
            lf, lp = lkeys
            e = tuple((lf in self.Fs.get((z, z2), ()), lp in self.Fu.get((z, z2), ()))
                      for z2 in self.I.get(z, ()))
            self._esig[key] = e
        return e


def build_cover(sk: Skeleton, **kw) -> MarkovCover:
    """Markov cover of the skeleton; raises EmptyRectangle for unwitnessed vertices."""
    cover = MarkovCover(sk, **kw)
    empty = [v for v in range(len(sk.vertices)) if v not in cover.rectangles]
    if empty:
        raise EmptyRectangle("vertices without sample witnesses",
                             witness=[repr(sk.vertices[v]) for v in empty[:5]])
    return cover


def overlap_sets(cover: MarkovCover, z: int) -> tuple:
    """I_Z: rectangles meeting the flow of Z(z) within rho (z included)."""
    return cover.I.get(z, (z,))


def partition_E(cover: MarkovCover, z: int) -> dict:
    """Samples of Z(z) grouped by their element of the four-way refinement."""
    out = defaultdict(list)
    for i in cover.rectangles[z].samples:
        tl, t = cover.timeline(i)
        out[cover.esig(z, tl.lkeys[tl.at(t)])].append(i)
    return dict(out)


def smale_bracket(cover: MarkovCover, z: int, i: int, j: int):
    """[x, y] in Z(z) for samples i, j: the orbit with the future of x and the past of y.

    Returns (orbit, chart coordinates in the chart of z). The coordinates
    are the meeting point of the stable line of x and the unstable line of
    y; BracketFailure is raised when the spliced orbit is not admissible or
    leaves Z(z).
    """
    sp = cover.space
    x, y = cover.orbit(i), cover.orbit(j)
    if z not in cover.members(i) or z not in cover.members(j):
        raise BracketFailure("points are not in the rectangle", witness=(i, j, z))
    o = sp.splice(x, y)
    if not sp.valid(o) or z not in sp.members(o):
        raise BracketFailure("spliced orbit leaves the rectangle", witness=(x, y, o))
    px, ds, _ = cover.fibre_lines(cover.sample_family[i], int(cover.sample_time[i]), z)
    py, _, du = cover.fibre_lines(cover.sample_family[j], int(cover.sample_time[j]), z)
    A = np.column_stack([ds, -du])
    try:
        al, _ = np.linalg.solve(A, py - px)
    except np.linalg.LinAlgError as exc:
        raise BracketFailure("fibres are parallel", witness=(i, j, z)) from exc
    return o, px + al * ds


def orbit_coords(cover: MarkovCover, o: tuple, v: int | None = None) -> np.ndarray:
    """Chart coordinates at time 0 of any skeleton orbit, from its own lines."""
    path, S, U = cover.lines.orbit_lines(o, 0, 0)
    (a, b), (c, d) = S[0], U[0]
    w = np.array(cover.lines.meet(a, b, c, d))
    if v is None or v == path[0]:
        return w
    M, delta = cover.lines.transfer(path[0], v)
    return M @ w + delta


# -- refinement --------------------------------------------------------------------

class Partition:
    """The ~N classes of the cover samples, with H the time shift.

    A local signature is the member set at one time together with the
    four-way element in each member; a class is the tuple of local
    signatures at times -N..N.
    """

    def __init__(self, cover: MarkovCover, N: int):
        self.cover, self.N = cover, N
        cover._build_timelines(N)
        self._lsig = {}
        self.lsig_members = []
        self._cls = {}
        self.class_sig = []
        self.sampled = set()
        self.fam_classes = []
        for f, tl in enumerate(cover.timelines):
            o, lo, hi = cover.family[f]
            loc = [self._local(tl.members[k], tl.lkeys[k]) for k in range(len(tl.members))]
            cls = []
            for t in range(lo - 1, hi + 2):
                k = tl.at(t)
                cls.append(self._class(tuple(loc[k - N:k + N + 1])))
            self.fam_classes.append((lo - 1, cls))
        self.sample_class = np.array([self.class_at(cover.sample_family[i], int(cover.sample_time[i]))
                                      for i in range(len(cover))])
        self.rectangles = {}
        for i, c in enumerate(self.sample_class):
            c = int(c)
            self.sampled.add(c)
            r = self.rectangles.get(c)
            if r is None:
                r = self.rectangles[c] = Rectangle(c, self.class_sig[c], [])
            r.samples.append(i)

    def _local(self, members: tuple, lkeys: tuple) -> int:
        key = (members, tuple(self.cover.esig(z, lkeys) for z in members))
        k = self._lsig.get(key)
        if k is None:
            k = self._lsig[key] = len(self.lsig_members)
            self.lsig_members.append(members)
        return k

    def _class(self, sig: tuple) -> int:
        c = self._cls.get(sig)
        if c is None:
            c = self._cls[sig] = len(self.class_sig)
            self.class_sig.append(sig)
        return c

    def class_at(self, f: int, t: int) -> int:
        lo, cls = self.fam_classes[f]
        return cls[t - lo]

    def parents(self, c: int) -> tuple:
        """Cover rectangles containing the class."""
        return self.lsig_members[self.class_sig[c][self.N]]

    def itinerary(self, o: tuple, lo: int, hi: int) -> list:
        """Classes of H^t(o) for t in lo..hi, computed from the symbols."""
        sp, N = self.cover.space, self.N
        loc = []
        for t in range(lo - N, hi + N + 1):
            x = sp.shift(o, t)
            loc.append(self._local(sp.members(x), sp.local_keys(x)))
        return [self._class(tuple(loc[k:k + 2 * N + 1])) for k in range(hi - lo + 1)]

    def classify(self, o: tuple) -> int:
        return self.itinerary(o, 0, 0)[0]

    def __len__(self):
        return len(self.rectangles)


def refine_simN(cover: MarkovCover, N: int | None = None) -> Partition:
    """The ~N refinement of the cover (N defaults to ceil(rho / inf r) + 1)."""
    return Partition(cover, cover.N if N is None else N)


def markov_check(part: Partition, max_witnesses: int = 20) -> dict:
    """Geometric Markov property on samples, forwards on s-fibres and backwards on u-fibres.

    For samples x, y of one class sharing their future, H(y) must lie in the
    class of H(x) and on its stable line (to 1e-6 of the window, in the
    chart of the canonical vertex of H(x)); dually for pasts and H^-1.
    """
    cov = part.cover
    report = {"checked": 0, "violations": 0, "flagged": 0, "max_ratio": 0.0,
              "witnesses": [], "samples": len(cov), "classes": len(part)}
    for step, side in ((1, 0), (-1, 1)):
        groups = defaultdict(list)
        for i in range(len(cov)):
            groups[(int(part.sample_class[i]), cov.keys(i)[side])].append(i)
        for (c, _), idx in groups.items():
            i0 = idx[0]
            f0, t0 = int(cov.sample_family[i0]), int(cov.sample_time[i0])
            c1 = part.class_at(f0, t0 + step)
            v, _, _, _ = cov.frame(f0, t0 + step)
            p0, ds, du = cov.fibre_lines(f0, t0 + step, v)
            direc = ds if step == 1 else du
            normal = np.array([-direc[1], direc[0]]) / np.hypot(*direc)
            for i in idx[1:]:
                f, t = int(cov.sample_family[i]), int(cov.sample_time[i])
                report["checked"] += 1
                ci = part.class_at(f, t + step)
                _, _, _, w = cov.frame(f, t + step)
                r = cov.frame(f, t + step)[0]
                M, delta = cov.lines.transfer(r, v)
                gap = abs(float(normal @ (M @ np.array(w) + delta - p0)))
                ratio = gap / cov.tol[v]
                report["max_ratio"] = max(report["max_ratio"], ratio)
                bad = ci != c1
                if bad or ratio > 1.0:
                    if bad:
                        report["violations"] += 1
                    else:
                        report["flagged"] += 1
                    if len(report["witnesses"]) < max_witnesses:
                        report["witnesses"].append({"x": int(i0), "y": int(i), "step": step,
                                                    "class_x": int(c1), "class_y": int(ci),
                                                    "ratio": ratio})
    report["flag_rate"] = report["flagged"] / max(report["checked"], 1)
    report["ok"] = report["violations"] == 0 and report["flagged"] == 0
    return report


# -- the second coding -------------------------------------------------------------

@dataclass
class SecondCoding:
    """Graph on the partition classes, roof r_hat and the coding map pi_hat."""

    part: Partition
    graph: MarkovGraph
    roof_hat: RoofFunction
    r_hat: dict
    edge_witness: dict
    depth: int = 12
    info: dict = field(default_factory=dict)

    @property
    def cover(self) -> MarkovCover:
        return self.part.cover

    def word(self, i: int, lo: int, hi: int) -> list:
        """Classes of H^k(x_i) for k in lo..hi."""
        cov, part = self.cover, self.part
        f, t = int(cov.sample_family[i]), int(cov.sample_time[i])
        flo, cls = part.fam_classes[f]
        if flo <= t + lo and t + hi < flo + len(cls):
            return cls[t + lo - flo:t + hi - flo + 1]
        return part.itinerary(cov.orbit(i), lo, hi)

    def coding(self, i: int) -> SymbolPath:
        """Eventually periodic class itinerary of sample i."""
        cov, part, sp = self.cover, self.part, self.cover.space
        f, t = int(cov.sample_family[i]), int(cov.sample_time[i])
        flo, cls = part.fam_classes[f]
        o = cov.orbit(i)
        c0, p0 = sp.initial(sp.shift(o, flo - t))
        c1, p1 = sp.terminal(sp.shift(o, flo + len(cls) - t))
        past = [self.pure_class(c0, p0 + k) for k in range(sp.n[c0])]
        fut = [self.pure_class(c1, p1 + k) for k in range(sp.n[c1])]
        return SymbolPath(tuple(cls), tuple(past), tuple(fut), t - flo)

    def pure_class(self, cycle: str, pos: int) -> int:
        return self.part.classify(self.cover.space.pure(cycle, pos))

    def pi_hat(self, path: SymbolPath, depth: int | None = None):
        """(point, orbit, certified diameter) for the cylinder of path at depth."""
        n = self.depth if depth is None else depth
        word = [path[k] for k in range(-n, n + 1)]
        o = cylinder_point(self, word)
        cov = self.cover
        vpath = cov.space.path(o, -n, n)
        diam = cov.lines.cylinder_box(vpath, n, n)
        w = orbit_coords(cov, o)
        pt = cov.sk.atlas.chart(cov.sk.vertices[vpath[n]].base).apply(w, exact=True)
        return pt, o, diam


def cylinder_point(sc: SecondCoding, word: list) -> tuple:
    """An orbit whose classes at times -n..n are word[0..2n], built by brackets.

    Each step keeps the past of the current orbit and takes the future of
    an edge witness, which is sound when the partition is Markov; a
    mismatch raises CylinderEmpty.
    """
    part, sp, cov = sc.part, sc.cover.space, sc.cover
    n = (len(word) - 1) // 2
    for a, b in zip(word, word[1:]):
        if (a, b) not in sc.edge_witness:
            raise CylinderEmpty("word is not admissible", witness=word)
    p = cov.orbit(sc.edge_witness[(word[0], word[1])])
    for k in range(1, len(word)):
        cur = sp.shift(p, k)
        if k + 1 < len(word):
            q = cov.orbit(sc.edge_witness[(word[k], word[k + 1])])
        else:
            q = cov.orbit(part.rectangles[word[k]].samples[0])
        z = sp.splice(q, cur)
        if not sp.valid(z):
            raise CylinderEmpty("spliced orbit is not admissible", witness={"word": word, "step": k})
        p = sp.shift(z, -k)
    got = part.itinerary(p, 0, len(word) - 1)
    if got != list(word):
        raise CylinderEmpty("cylinder is empty along the word",
                            witness={"word": list(word), "got": got})
    return sp.shift(p, n)


def second_coding(part: Partition, depth: int = 12) -> SecondCoding:
    """Graph of H on the partition, the induced roof and the coding map."""
    cov = part.cover
    g = MarkovGraph()
    for c in part.rectangles:
        g.add_vertex(c)
    witness, escapes = {}, 0
    for i in range(len(cov)):
        f, t = int(cov.sample_family[i]), int(cov.sample_time[i])
        a, b = int(part.sample_class[i]), part.class_at(f, t + 1)
        if b not in part.rectangles:
            escapes += 1
            continue
        if (a, b) not in witness:
            witness[(a, b)] = i
            g.add_edge(a, b)
    r_hat, spread = {}, 0.0
    for c, rect in part.rectangles.items():
        vals = [cov.rt[cov.frame(int(cov.sample_family[i]), int(cov.sample_time[i]))[0]]
                for i in rect.samples]
        r_hat[c] = float(np.mean(vals))
        spread = max(spread, max(vals) - min(vals))
    lo, hi = min(r_hat.values()), max(r_hat.values())
    if not (0 < lo and hi < cov.rho):
        raise CheckFailure(f"roof values [{lo}, {hi}] outside (0, rho)")
    roof = RoofFunction(lambda p: r_hat[p[0]], (lo, hi), 0)
    deg = max(max(len(g.successors(v)), len(g.predecessors(v))) for v in g.vertices)
    info = {"vertices": len(part.rectangles), "edges": len(witness), "escapes": escapes,
            "r_hat_range": (lo, hi), "r_hat_spread": spread, "max_degree": deg}
    return SecondCoding(part, g, roof, r_hat, witness, depth, info)


def random_words(sc: SecondCoding, count: int, depth: int, seed: int = 0) -> list:
    """Admissible words of length 2 depth + 1 centred near branching classes."""
    rng = np.random.default_rng(seed)
    g = sc.graph
    branch = sorted(v for v in g.vertices
                    if len(g.successors(v)) > 1 or len(g.predecessors(v)) > 1)
    pool = branch or sorted(g.vertices)
    words = []
    for _ in range(count):
        c = pool[int(rng.integers(len(pool)))]
        back, fwd = [c], []
        for _ in range(depth):
            pr = sorted(g.predecessors(back[-1]))
            back.append(pr[int(rng.integers(len(pr)))])
        cur = c
        for _ in range(depth):
            nx = sorted(g.successors(cur))
            cur = nx[int(rng.integers(len(nx)))]
            fwd.append(cur)
        words.append(back[::-1] + fwd)
    return words


def cylinder_check(sc: SecondCoding, count: int = 100, depths=range(4, 13), seed: int = 0) -> dict:
    """Nonempty cylinders along random admissible words and their diameter decay."""
    dmax = max(depths)
    words = random_words(sc, count, dmax, seed)
    cov = sc.cover
    diams = np.zeros((len(words), len(depths)))
    for w_i, word in enumerate(words):
        o = cylinder_point(sc, word)
        vpath = cov.space.path(o, -dmax, dmax)
        for j, n in enumerate(depths):
            diams[w_i, j] = cov.lines.cylinder_box(vpath, dmax, n)
    worst = diams.max(axis=0)
    fit = holder_fit(list(depths), worst)
    per_word = [holder_fit(list(depths), row) for row in diams]
    return {"words": len(words), "nonempty": len(words), "depths": list(depths),
            "max_diameter": worst.tolist(), "fit": fit,
            "theta_max": max(f["theta"] for f in per_word),
            "r2_min": min(f["r2"] for f in per_word)}


# -- affiliation ---------------------------------------------------------------------

@dataclass
class AffiliationGraph:
    """R ~ S when some Z containing R has a flow neighbour containing S."""

    related: dict
    A: dict
    N: dict


def affiliation(part: Partition) -> AffiliationGraph:
    cov = part.cover
    by_parent = defaultdict(set)
    for c in part.rectangles:
        for z in part.parents(c):
            by_parent[z].add(c)
    related, A, N = {}, {}, {}
    for c in part.rectangles:
        reach = set()
        for z in part.parents(c):
            reach.update(cov.I.get(z, (z,)))
        rel = set()
        for z2 in reach:
            rel.update(by_parent[z2])
        related[c] = rel
        A[c] = {(s, z) for s in rel for z in part.parents(s)}
        N[c] = len(A[c])
    return AffiliationGraph(related, A, N)


def _disc_index(cov: MarkovCover) -> dict:
    at = cov.sk.atlas
    disc_of = [_disc_key(at, v.base) for v in cov.sk.vertices]
    out = defaultdict(list)
    for i in range(len(cov)):
        v = cov.frame(int(cov.sample_family[i]), int(cov.sample_time[i]))[0]
        out[disc_of[v]].append(i)
    return disc_of, out


def coincident(cov: MarkovCover, i: int, pool) -> list:
    """Samples in pool whose points agree with sample i to 1e-6 of its window."""
    v = cov.frame(int(cov.sample_family[i]), int(cov.sample_time[i]))[0]
    w = cov.coords(i)
    return [j for j in pool if np.max(np.abs(cov.coords(j, v) - w)) <= cov.tol[v]]


def preimage_bound_check(sc: SecondCoding, aff: AffiliationGraph, points: int = 20,
                         seed: int = 0, window: int | None = None) -> dict:
    """Distinct codings of sampled points against N(R) N(S); raises BoundViolated.

    Every sample on the disc of x is a candidate. Preimages are the
    candidates whose exact projection equals x; their codings over the
    window are counted and their zeroth symbols must be affiliated with
    that of x for every containing pair of cover rectangles. Candidates
    that only agree to 1e-6 of the window are counted separately, since
    points in the twin zones differ by far less than any float tolerance.
    R and S are the classes recurring in the future and in the past of x.
    """
    cov, part, sp = sc.cover, sc.part, sc.cover.space
    n = sc.depth if window is None else window
    disc_of, discs = _disc_index(cov)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(cov), size=min(points, len(cov)), replace=False)
    rows, bowen_i, strong = [], 0, 0
    for i in map(int, chosen):
        v = cov.frame(int(cov.sample_family[i]), int(cov.sample_time[i]))[0]
        near = coincident(cov, i, discs[disc_of[v]])
        key = point_key(cov.point(i))
        same = [j for j in near if point_key(cov.point(j)) == key]
        c0 = int(part.sample_class[i])
        codings = {tuple(sc.word(j, -n, n)) for j in same}
        resolved = {tuple(sc.word(j, -n, n)) for j in near}
        for j in same:
            cj = int(part.sample_class[j])
            if cj not in aff.related[c0]:
                bowen_i += 1
            for z in part.parents(c0):
                if any(z2 not in cov.I.get(z, ()) for z2 in part.parents(cj)):
                    strong += 1
        o = cov.orbit(i)
        R = sc.pure_class(*sp.terminal(o))
        S = sc.pure_class(*sp.initial(o))
        bound = aff.N[R] * aff.N[S]
        rows.append({"sample": i, "preimages": len(codings), "within_tolerance": len(near),
                     "tolerance_codings": len(resolved), "N_R": aff.N[R], "N_S": aff.N[S],
                     "bound": bound})
        if len(codings) > bound:
            raise BoundViolated("more codings than N(R)N(S)",
                                witness={"sample": i, "codings": sorted(codings)})
    return {"points": rows, "max_preimages": max(r["preimages"] for r in rows),
            "max_tolerance_codings": max(r["tolerance_codings"] for r in rows),
            "tolerance_within_bound": all(r["tolerance_codings"] <= r["bound"] for r in rows),
            "bowen_i_violations": bowen_i, "strong_affiliation_violations": strong,
            "ok": bowen_i == 0 and strong == 0}


def bowen_relation_check(sc: SecondCoding, aff: AffiliationGraph, pairs: int = 200,
                         seed: int = 0) -> dict:
    """Everywhere-affiliated pairs of codings lie on one orbit within 3 rho of flow time.

    Pairs (x, y) are drawn from one family orbit and from affiliated
    classes; codings are compared over their whole eventually periodic
    span. The time shift comes from matching y to H^j x symbolically.
    """
    cov, part, sp = sc.cover, sc.part, sc.cover.space
    rho = cov.rho
    J = int(6 * rho / min(cov.rt)) + 1
    rng = np.random.default_rng(seed)
    found, worst, unmatched, tested = 0, 0.0, 0, 0
    shifts = []
    for _ in range(pairs):
        i = int(rng.integers(len(cov)))
        f, t = int(cov.sample_family[i]), int(cov.sample_time[i])
        o, lo, hi = cov.family[f]
        j = int(rng.integers(-J, J + 1))
        if not lo <= t + j <= hi or j == 0:
            c = int(part.sample_class[i])
            pool = part.rectangles[int(rng.choice(sorted(aff.related[c])))].samples
            k = pool[int(rng.integers(len(pool)))]
        else:
            k = i + j
        tested += 1
        px, py = sc.coding(i), sc.coding(k)
        lo_k = min(px.core_span[0], py.core_span[0]) - 2 * max(sp.n.values())
        hi_k = max(px.core_span[1], py.core_span[1]) + 2 * max(sp.n.values())
        if any(py[m] not in aff.related[px[m]] for m in range(lo_k, hi_k)):
            continue
        found += 1
        ox, oy = cov.orbit(i), cov.orbit(k)
        match = next((m for m in range(-4 * J, 4 * J + 1) if sp.shift(ox, m) == oy), None)
        if match is None:
            unmatched += 1
            continue
        path = sp.path(ox, min(0, match), max(0, match))
        dt = sum(cov.rt[v] for v in path[:-1])
        shifts.append(dt)
        worst = max(worst, dt)
    return {"tested": tested, "affiliated_pairs": found, "unmatched": unmatched,
            "max_shift": worst, "bound": 3 * rho,
            "ok": unmatched == 0 and worst < 3 * rho}


def lift_hyperbolic_set(sc: SecondCoding, cycles) -> set:
    """Strongly connected vertex set of the graph carrying the lifts of the given cycles."""
    sp = sc.cover.space
    lifts = {name: {sc.pure_class(name, p) for p in range(sp.n[name])} for name in cycles}
    comps = irreducible_components(sc.graph)
    where = {}
    for k, comp in enumerate(comps):
        for name, cls in lifts.items():
            if cls & comp:
                where.setdefault(name, set()).add(k)
    ks = set().union(*where.values()) if where else set()
    if len(ks) != 1 or set(where) != set(lifts):
        raise NotTransitive("lifts split across components",
                            witness={n: sorted(k) for n, k in where.items()})
    comp = comps[ks.pop()]
    missing = [c for cls in lifts.values() for c in cls if c not in comp]
    if missing:
        raise NotTransitive("cycle lift leaves the component", witness=missing)
    return comp


def lift_coverage(sc: SecondCoding, cycles) -> dict:
    """Project the periodic lifts of each cycle and compare with the cycle points.

    The lift of a cycle is its periodic class word; pi_hat of each shift of
    it must land on the corresponding cycle point.
    """
    sp = sc.cover.space
    out = {}
    for name in cycles:
        n = sp.n[name]
        word = tuple(sc.pure_class(name, p) for p in range(n))
        cyc = sc.cover.sk.cycles[name]
        hit = 0
        for p in range(n):
            path = SymbolPath.periodic(word[p:] + word[:p])
            pt, o, _ = sc.pi_hat(path)
            if point_key(pt) == point_key(cyc.charts[p].base):
                hit += 1
        out[name] = {"points": n, "covered": hit}
    return out


def conjugacy_spot_check(sc: SecondCoding, count: int = 50, seed: int = 0) -> dict:
    """f(x) against the point of the shifted sample, relative to the window.

    Points come from float chart coordinates, so agreement is measured in
    units of the 1e-6 window tolerance.
    """
    cov = sc.cover
    at = cov.sk.atlas
    rng = np.random.default_rng(seed)
    worst, tested = 0.0, 0
    while tested < count:
        i = int(rng.integers(len(cov)))
        f, t = int(cov.sample_family[i]), int(cov.sample_time[i])
        _, lo, hi = cov.family[f]
        if t + 1 > hi:
            continue
        j = i + 1
        v = cov.frame(f, t + 1)[0]
        gap = float(np.max(np.abs(fiber_delta(at.f(cov.point(i)), cov.point(j)))))
        worst = max(worst, gap / cov.tol[v])
        tested += 1
    return {"tested": tested, "max_ratio": worst, "ok": worst <= 1.0}
