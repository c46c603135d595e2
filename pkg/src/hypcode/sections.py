"""Proper sections made of horizontal square discs, with return maps and holonomies.

Each disc is a square footprint in the torus at a fixed height. Footprints
tile the torus on an n x n grid; every grid cell carries a column of
levels. Columns of neighbouring cells are staggered by a label-dependent
offset so that enlarged footprints never meet at equal heights.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CoverageFailure, NoReturnWithinRho, OutOfBox
from .model_flow import ModelFlow, PointM

LAMBDA = "L"
LAMBDA_HAT = "Lhat"


def wrap(d):
    """Representative of d mod 1 in [-1/2, 1/2)."""
    return d - math.floor(d + Fraction(1, 2)) if isinstance(d, Fraction) else d - math.floor(d + 0.5)


@dataclass(frozen=True)
class Disc:
    index: int
    center: tuple
    height: object
    radius: object
    cell: tuple
    kind: str

    def __post_init__(self):
        object.__setattr__(self, "hf", float(self.height))
        object.__setattr__(self, "_fc", (float(self.center[0]), float(self.center[1]), float(self.radius)))

    def contains_u(self, u1, u2) -> bool:
        if isinstance(u1, Fraction):
            c1, c2, r = self.center[0], self.center[1], self.radius
        else:
            c1, c2, r = self._fc
        d1 = wrap(u1 - c1)
        d2 = wrap(u2 - c2)
        if self.kind == LAMBDA:
            return -r <= d1 < r and -r <= d2 < r
        return -r < d1 < r and -r < d2 < r

    def offset(self, u1, u2) -> tuple:
        """Fiber displacement of u from the disc center."""
        return wrap(u1 - self.center[0]), wrap(u2 - self.center[1])


@dataclass
class Hit:
    time: object
    disc: Disc
    point: PointM
    crossings: int


class ProperSection:
    """Union of staggered square discs; answers flow-hitting queries."""

    def __init__(self, model: ModelFlow, n: int, grid_offset, columns: dict,
                 half_side, kind: str, size: float):
        self.model = model
        self.n = n
        self.grid_offset = grid_offset
        self.kind = kind
        self.size = size
        self.half_side = half_side
        self._goff = (float(grid_offset[0]), float(grid_offset[1]))
        self.discs: list[Disc] = []
        self.columns: dict = {}
        for (i, j), heights in sorted(columns.items()):
            c = (grid_offset[0] + Fraction(2 * i + 1, 2 * n)) % 1, \
                (grid_offset[1] + Fraction(2 * j + 1, 2 * n)) % 1
            if not isinstance(grid_offset[0], Fraction):
                c = float(c[0]), float(c[1])
            col = []
            for h in heights:
                d = Disc(len(self.discs), c, h, half_side, (i, j), kind)
                self.discs.append(d)
                col.append(d)
            self.columns[(i, j)] = col
        self._heights = {k: [float(d.height) for d in v] for k, v in self.columns.items()}

    def __len__(self):
        return len(self.discs)

    # -- geometry queries ---------------------------------------------------
    def cell_of(self, u1, u2) -> tuple:
        n = self.n
        g1, g2 = self.grid_offset if isinstance(u1, Fraction) else self._goff
        i = math.floor((u1 - g1) % 1 * n)
        j = math.floor((u2 - g2) % 1 * n)
        return i % n, j % n

    def cells_containing(self, u1, u2) -> list:
        i, j = self.cell_of(u1, u2)
        if self.kind == LAMBDA:
            return [(i, j)] if (i, j) in self.columns else []
        out = []
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                c = ((i + di) % self.n, (j + dj) % self.n)
                col = self.columns.get(c)
                if col and col[0].contains_u(u1, u2):
                    out.append(c)
        return out

    def disc_at(self, x: PointM, tol=1e-12):
        """Disc containing x, or None."""
        for c in self.cells_containing(x.u1, x.u2):
            for d in self.columns[c]:
                if abs(float(d.height) - float(x.s)) <= tol:
                    if tol == 0 and d.height != x.s:
                        continue
                    return d
        return None

    def _first_above(self, u1, u2, s, strict: bool):
        exact = isinstance(s, (Fraction, int))
        best = None
        for c in self.cells_containing(u1, u2):
            col = self.columns[c]
            hs = self._heights[c]
            k = bisect.bisect_right(hs, s) if strict else bisect.bisect_left(hs, s)
            if exact:
                # float keys only locate the candidate; settle it exactly
                k = max(k - 1, 0)
                while k < len(col) and not (col[k].height > s or (not strict and col[k].height == s)):
                    k += 1
            if k < len(col):
                d = col[k]
                if best is None or d.height < best.height:
                    best = d
        return best

    def _first_below(self, u1, u2, s, strict: bool):
        exact = isinstance(s, (Fraction, int))
        best = None
        for c in self.cells_containing(u1, u2):
            col = self.columns[c]
            hs = self._heights[c]
            k = (bisect.bisect_left(hs, s) if strict else bisect.bisect_right(hs, s)) - 1
            if exact:
                k = min(k + 1, len(col) - 1)
                while k >= 0 and not (col[k].height < s or (not strict and col[k].height == s)):
                    k -= 1
            if k >= 0:
                d = col[k]
                if best is None or d.height > best.height:
                    best = d
        return best

    def _height_of(self, d: Disc, like):
        return d.height if isinstance(like, (Fraction, int)) else d.hf

    def next_hit(self, x: PointM, strict=True, max_time=None) -> Hit:
        """First t > 0 (t >= 0 if not strict) with flow(x, t) on the section."""
        m = self.model
        u1, u2, s = x.u1, x.u2, x.s
        t = 0
        k = 0
        limit = max_time if max_time is not None else 4 * float(m.roof_bounds[1]) + 1
        while True:
            d = self._first_above(u1, u2, s, strict)
            if d is not None:
                h = self._height_of(d, x.s)
                t = t + (h - s)
                return Hit(t, d, PointM(u1, u2, h), k)
            t = t + (m.roof(u1, u2) - s)
            u1, u2 = m.fiber_map(u1, u2, 1)
            s = 0
            k += 1
            strict = False
            if float(t) > limit:
                raise NoReturnWithinRho("no section hit", witness=x)

    def prev_hit(self, x: PointM, strict=True, max_time=None) -> Hit:
        """Largest t < 0 with flow(x, t) on the section."""
        m = self.model
        u1, u2, s = x.u1, x.u2, x.s
        t = 0
        k = 0
        limit = max_time if max_time is not None else 4 * float(m.roof_bounds[1]) + 1
        while True:
            d = self._first_below(u1, u2, s, strict)
            if d is not None:
                h = self._height_of(d, x.s)
                t = t - (s - h)
                return Hit(t, d, PointM(u1, u2, h), k)
            t = t - s
            u1, u2 = m.fiber_map(u1, u2, -1)
            s = m.roof(u1, u2)
            k -= 1
            strict = True
            if -float(t) > limit:
                raise NoReturnWithinRho("no backward section hit", witness=x)

    def return_map(self, x: PointM) -> tuple[PointM, object]:
        h = self.next_hit(x, strict=True)
        if float(h.time) >= self.size:
            raise NoReturnWithinRho(f"return time {float(h.time)} >= {self.size}", witness=x)
        return h.point, h.time

    def inverse_return(self, x: PointM) -> tuple[PointM, object]:
        h = self.prev_hit(x, strict=True)
        return h.point, -h.time

    # -- checks -------------------------------------------------------------
    def sample_points(self, count: int, seed: int = 0) -> list[PointM]:
        rng = np.random.default_rng(seed)
        out = []
        for u1, u2, a in rng.random((count, 3)):
            out.append(PointM(float(u1), float(u2), float(a) * float(self.model.roof(u1, u2))))
        return out

    def check_cover(self, samples: int = 10_000, seed: int = 0) -> float:
        """Largest sampled hitting time; raises if some orbit misses for size."""
        worst = 0.0
        for x in self.sample_points(samples, seed):
            h = self.next_hit(x, strict=False)
            t = float(h.time)
            worst = max(worst, t)
            if t >= self.size:
                seg = [x, h.point]
                raise CoverageFailure(
                    f"orbit from {x} needs {t:.4f} >= {self.size} to reach the section",
                    witness=seg)
        return worst

    def check_partial_order(self) -> list:
        """Disc pairs that reach each other within 4 x size (must be empty).

        Reaching within one roof block needs overlapping footprints and a
        height gap in [0, T]. Reaching across the roof takes at least
        inf(roof) - h_i + h_j. Both directions at once then force equal
        heights on overlapping footprints unless T >= inf(roof) / 2.
        """
        horizon = 4 * self.size
        rmin = float(self.model.roof_bounds[0])
        if 2 * horizon >= rmin:
            raise ValueError("section size too large for the block argument")
        bad = []
        for (i, j), col in self.columns.items():
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    other = ((i + di) % self.n, (j + dj) % self.n)
                    if other < (i, j) or other not in self.columns:
                        continue
                    reach = float(col[0].radius) * 2 > float(self.half_side) * 2 * max(abs(di), abs(dj)) \
                        if self.kind == LAMBDA_HAT else (di, dj) == (0, 0)
                    if not reach:
                        continue
                    hs = {d.height: d.index for d in self.columns[other]}
                    for d in col:
                        e = hs.get(d.height)
                        if e is not None and e != d.index:
                            bad.append((d.index, e))
        return bad

    def check_partial_order_sampled(self, per_disc: int = 5) -> int:
        """Sampled version of check_partial_order (slow; used as an oracle)."""
        horizon = 4 * self.size
        reach: dict = {}
        for d in self.discs:
            hits = set()
            r = float(d.radius) * 0.9
            probes = [(0, 0), (-r, -r), (-r, r), (r, -r), (r, r)][:per_disc]
            for a, b in probes:
                x = PointM((float(d.center[0]) + a) % 1, (float(d.center[1]) + b) % 1, d.hf)
                t = 0.0
                while True:
                    h = self.next_hit(x, strict=True)
                    t += h.time
                    if t > horizon:
                        break
                    hits.add(h.disc.index)
                    x = h.point
            reach[d.index] = hits
        bad = 0
        for i, hits in reach.items():
            for j in hits:
                if j > i and i in reach[j]:
                    bad += 1
        return bad

    def min_return(self, samples: int = 2000, seed: int = 1) -> float:
        """Sampled infimum of the return time on the section."""
        rng = np.random.default_rng(seed)
        best = math.inf
        for k in rng.integers(0, len(self.discs), samples):
            d = self.discs[int(k)]
            a, b = (rng.random(2) - 0.5) * 1.98 * float(d.radius)
            x = PointM((float(d.center[0]) + a) % 1, (float(d.center[1]) + b) % 1, float(d.height))
            best = min(best, float(self.next_hit(x).time))
        return best

    def to_csv_rows(self) -> list[tuple]:
        kind = "Λ" if self.kind == LAMBDA else "Λ̂"
        return [(d.index, float(d.center[0]), float(d.center[1]), float(d.height),
                 float(d.radius), kind) for d in self.discs]


# -- construction -----------------------------------------------------------

CONST_LAYOUT = {"n": 6, "levels": 14}
VARIABLE_LAYOUT = {"n": 16, "spacing": 0.025, "margin": 0.005, "label_step": 0.0025}


def _footprint_min_roof(model: ModelFlow, center, half, grid=25) -> float:
    g = np.linspace(-half, half, grid)
    vals = [model.roof(center[0] + a, center[1] + b) for a in g for b in g]
    slope = 2 * math.pi * model.delta if model.roof_kind == "cos" else \
        model.delta / (model.stretch_width * math.sqrt(math.e))
    return min(vals) - slope * (2 * half / (grid - 1))


def build_sections(model: ModelFlow, rho: float | None = None, n: int | None = None,
                   drop_level: int | None = None, grid_offset=None,
                   check: bool = False, samples: int = 10_000):
    """Nested proper sections (Λ, Λ̂) of size rho/2.

    Λ̂ discs are concentric with the Λ discs and 1.5 times wider.
    drop_level removes one level from every column (used to exercise the
    cover check).
    """
    rho = model.rho if rho is None else rho
    size = rho / 2
    if model.roof_kind == "const":
        n = n or CONST_LAYOUT["n"]
        levels = CONST_LAYOUT["levels"]
        if Fraction(1, levels) * Fraction(11, 8) >= Fraction(size).limit_denominator(10**6):
            raise ValueError("rho too small for the constant-roof layout")
        h0 = Fraction(1, levels)
        off = grid_offset or (Fraction(31, 1000), Fraction(17, 1000))
        half = Fraction(1, 2 * n)
        columns = {}
        for i in range(n):
            for j in range(n):
                label = (i % 2) + 2 * (j % 2)
                base = label * h0 / 8
                hs = [base + k * h0 for k in range(levels) if k != drop_level]
                columns[(i, j)] = hs
    else:
        lay = VARIABLE_LAYOUT
        n = n or lay["n"]
        h = lay["spacing"]
        off = grid_offset or (0.031, 0.017)
        half = 1.0 / (2 * n)
        columns = {}
        for i in range(n):
            for j in range(n):
                label = (i % 2) + 2 * (j % 2)
                base = label * lay["label_step"]
                c = (off[0] + (i + 0.5) / n, off[1] + (j + 0.5) / n)
                top = _footprint_min_roof(model, c, 1.5 * half) - lay["margin"]
                count = math.ceil((top - base) / h)
                hs = [base + k * h for k in range(count) if k != drop_level]
                columns[(i, j)] = hs
    if n % 2:
        raise ValueError("grid size must be even so staggering wraps consistently")
    lam = ProperSection(model, n, off, columns, half, LAMBDA, size)
    hat_half = half * 3 / 2 if isinstance(half, Fraction) else 1.5 * half
    lam_hat = ProperSection(model, n, off, columns, hat_half, LAMBDA_HAT, size)
    if check:
        lam.check_cover(samples)
        lam_hat.check_cover(samples)
    return lam, lam_hat


# -- flow-box projections and holonomies ------------------------------------

def _box_candidates(model: ModelFlow, D: Disc, x: PointM):
    u1, u2, s = x.u1, x.u2, x.s
    if D.contains_u(u1, u2):
        yield D.height - s, PointM(u1, u2, D.height), 0
    v1, v2 = model.fiber_map(u1, u2, 1)
    if D.contains_u(v1, v2):
        yield model.roof(u1, u2) - s + D.height, PointM(v1, v2, D.height), 1
    w1, w2 = model.fiber_map(u1, u2, -1)
    if D.contains_u(w1, w2):
        yield -(s + model.roof(w1, w2) - D.height), PointM(w1, w2, D.height), -1


def project(model: ModelFlow, D: Disc, x: PointM, box: float | None = None):
    """Flow-box projection: (point on D, time, crossings) with least |time|."""
    box = 4 * model.rho if box is None else box
    best = None
    for t, y, k in _box_candidates(model, D, x):
        if abs(float(t)) <= box and (best is None or abs(float(t)) < abs(float(best[1]))):
            best = (y, t, k)
    if best is None:
        raise OutOfBox(f"{x} is outside the flow box of disc {D.index}")
    return best


def project_q(model: ModelFlow, D: Disc, x: PointM) -> PointM:
    return project(model, D, x)[0]


def project_t(model: ModelFlow, D: Disc, x: PointM):
    return project(model, D, x)[1]


@dataclass
class HolonomyMap:
    """Local flow projection from the disc of x to the disc of its return."""

    model: ModelFlow
    source: PointM
    source_disc: Disc
    target: Disc
    crossings: int
    time_at_source: object

    @property
    def matrix(self) -> np.ndarray:
        return self.model.matrix_power(self.crossings)

    def __call__(self, y: PointM) -> PointM:
        return project(self.model, self.target, y)[0]

    def transition_time(self, y: PointM):
        return project(self.model, self.target, y)[1]

    def apply_rel(self, delta) -> np.ndarray:
        """Image of a fiber displacement from the source point."""
        return self.matrix @ np.asarray(delta, dtype=float)


def holonomy(section: ProperSection, hat: ProperSection, x: PointM, direction: str = "+") -> HolonomyMap:
    """g_x^+ (or g_x^-): projection onto the Λ̂ disc holding f(x) (or f^{-1}(x))."""
    src = hat.disc_at(x, tol=0) or hat.disc_at(x)
    if direction == "+":
        h = section.next_hit(x, strict=True)
    elif direction == "-":
        h = section.prev_hit(x, strict=True)
    else:
        raise ValueError("direction must be '+' or '-'")
    target = hat.discs[h.disc.index]
    return HolonomyMap(section.model, x, src, target, h.crossings, h.time)


def figure_one_witness(section: ProperSection, hat: ProperSection, samples: int = 4000,
                       seed: int = 5, radius: float | None = None):
    """Find x in Λ and y near x with g_x^+(y) different from the first return of y to Λ̂."""
    rng = np.random.default_rng(seed)
    rad = radius if radius is not None else float(section.half_side) * 0.4
    for _ in range(samples):
        d = section.discs[int(rng.integers(len(section.discs)))]
        a, b = (rng.random(2) - 0.5) * 1.9 * float(d.radius)
        x = PointM((float(d.center[0]) + a) % 1, (float(d.center[1]) + b) % 1, float(d.height))
        g = holonomy(section, hat, x, "+")
        da, db = (rng.random(2) - 0.5) * 2 * rad
        y = PointM((x.u1 + da) % 1, (x.u2 + db) % 1, x.s)
        if hat.disc_at(y) is None:
            continue
        try:
            gy = g(y)
        except OutOfBox:
            continue
        fy = hat.next_hit(y).point
        if abs(float(gy.s) - float(fy.s)) > 1e-12 or max(abs(wrap(gy.u1 - fy.u1)), abs(wrap(gy.u2 - fy.u2))) > 1e-12:
            return x, y, gy, fy
    return None
