"""Topological Markov shifts and flows over finite directed graphs.

Bi-infinite paths are stored as eventually periodic words
(past cycle, core, future cycle) so that equality, shifting and
regularity are decidable. Finite windows (no cycles) are allowed and
report "undetermined" where the answer depends on unseen symbols.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable


class MarkovGraph:
    """Finite directed graph with per-vertex payloads."""

    def __init__(self, vertices: Iterable = (), edges: Iterable = (), payload=None):
        self._succ: dict = {}
        self._pred: dict = {}
        self.payload: dict = dict(payload or {})
        for v in vertices:
            self.add_vertex(v)
        for a, b in edges:
            self.add_edge(a, b)

    def add_vertex(self, v: Hashable, data=None):
        if v not in self._succ:
            self._succ[v] = {}
            self._pred[v] = {}
        if data is not None:
            self.payload[v] = data

    def add_edge(self, a: Hashable, b: Hashable):
        self.add_vertex(a)
        self.add_vertex(b)
        self._succ[a][b] = None
        self._pred[b][a] = None

    def remove_vertex(self, v):
        for w in list(self._succ[v]):
            del self._pred[w][v]
        for w in list(self._pred[v]):
            del self._succ[w][v]
        del self._succ[v], self._pred[v]
        self.payload.pop(v, None)

    @property
    def vertices(self) -> list:
        return list(self._succ)

    @property
    def edges(self) -> list:
        return [(a, b) for a, s in self._succ.items() for b in s]

    def __contains__(self, v):
        return v in self._succ

    def __len__(self):
        return len(self._succ)

    def successors(self, v) -> list:
        return list(self._succ[v])

    def predecessors(self, v) -> list:
        return list(self._pred[v])

    def has_edge(self, a, b) -> bool:
        return a in self._succ and b in self._succ[a]

    def degree_bound(self) -> int:
        """Largest in- or out-degree (local compactness witness)."""
        if not self._succ:
            return 0
        return max(max(len(s) for s in self._succ.values()),
                   max(len(p) for p in self._pred.values()))

    def subgraph(self, keep: Iterable) -> "MarkovGraph":
        keep = set(keep)
        g = MarkovGraph()
        for v in self._succ:
            if v in keep:
                g.add_vertex(v, self.payload.get(v))
        for a, b in self.edges:
            if a in keep and b in keep:
                g.add_edge(a, b)
        return g

    def is_admissible(self, word, cyclic=False) -> bool:
        word = list(word)
        pairs = list(zip(word, word[1:]))
        if cyclic and word:
            pairs.append((word[-1], word[0]))
        return all(self.has_edge(a, b) for a, b in pairs)

    # -- text formats ------------------------------------------------------
    def to_dot(self, name="G") -> str:
        lines = [f"digraph {name} {{"]
        for v in self._succ:
            lines.append(f'  "{v}";')
        for a, b in self.edges:
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dot(cls, text: str) -> "MarkovGraph":
        g = cls()
        tok = r'"([^"]*)"|([A-Za-z0-9_.:+\-]+)'
        edge_re = re.compile(rf"^\s*(?:{tok})\s*->\s*(?:{tok})\s*;?\s*$")
        node_re = re.compile(rf"^\s*(?:{tok})\s*;?\s*$")
        for line in text.splitlines():
            m = edge_re.match(line)
            if m:
                a = m.group(1) if m.group(1) is not None else m.group(2)
                b = m.group(3) if m.group(3) is not None else m.group(4)
                g.add_edge(a, b)
                continue
            m = node_re.match(line)
            if m and not line.strip().startswith(("digraph", "}")):
                g.add_vertex(m.group(1) if m.group(1) is not None else m.group(2))
        return g

    def to_edge_lines(self) -> str:
        out = [f"vertex {v}" for v in self._succ
               if not self._succ[v] and not self._pred[v]]
        out += [f"edge {a} {b}" for a, b in self.edges]
        return "\n".join(out) + ("\n" if out else "")

    @classmethod
    def from_edge_lines(cls, text: str) -> "MarkovGraph":
        g = cls()
        for raw in text.splitlines():
            parts = raw.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "edge" and len(parts) == 3:
                g.add_edge(parts[1], parts[2])
            elif parts[0] == "vertex" and len(parts) == 2:
                g.add_vertex(parts[1])
            else:
                raise ValueError(f"bad edge line: {raw!r}")
        return g


def _primitive(word: tuple) -> tuple:
    n = len(word)
    for d in range(1, n + 1):
        if n % d == 0 and word[:d] * (n // d) == word:
            return word[:d]
    return word


@dataclass(frozen=True, eq=False)
class SymbolPath:
    """Eventually periodic bi-infinite word.

    The symbol at index n is ``core[origin + n]`` when that index falls
    in the core, otherwise it is read off the cycles. An empty cycle
    means the word is unknown on that side.
    """

    core: tuple
    past_cycle: tuple = ()
    future_cycle: tuple = ()
    origin: int = 0

    def __post_init__(self):
        core = tuple(self.core)
        past = _primitive(tuple(self.past_cycle)) if self.past_cycle else ()
        fut = _primitive(tuple(self.future_cycle)) if self.future_cycle else ()
        origin = int(self.origin)
        # absorb core symbols that continue a cycle
        while core and past and core[0] == past[0]:
            past = past[1:] + past[:1]
            core = core[1:]
            origin -= 1
        while core and fut and core[-1] == fut[-1]:
            fut = fut[-1:] + fut[:-1]
            core = core[:-1]
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "past_cycle", past)
        object.__setattr__(self, "future_cycle", fut)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def periodic(cls, cycle, origin=0) -> "SymbolPath":
        cycle = tuple(cycle)
        k = origin % len(cycle)
        rot = cycle[k:] + cycle[:k]
        return cls((), rot, rot, 0)

    @classmethod
    def window(cls, word, origin=0) -> "SymbolPath":
        return cls(tuple(word), (), (), origin)

    @property
    def is_finite_window(self) -> bool:
        return not (self.past_cycle and self.future_cycle)

    @property
    def core_span(self) -> tuple[int, int]:
        """Index range [lo, hi) occupied by the core."""
        return -self.origin, len(self.core) - self.origin

    def symbol(self, n: int):
        i = self.origin + n
        nc = len(self.core)
        if 0 <= i < nc:
            return self.core[i]
        if i >= nc:
            f = self.future_cycle
            return f[(i - nc) % len(f)] if f else None
        p = self.past_cycle
        return p[i % len(p)] if p else None

    def __getitem__(self, n):
        if isinstance(n, slice):
            return [self.symbol(k) for k in range(n.start, n.stop, n.step or 1)]
        return self.symbol(n)

    def check_admissible(self, graph: MarkovGraph) -> bool:
        word = list(self.past_cycle[-1:]) + list(self.core) + list(self.future_cycle[:1])
        if not graph.is_admissible(word):
            return False
        if self.past_cycle and not graph.is_admissible(self.past_cycle, cyclic=True):
            return False
        if self.future_cycle and not graph.is_admissible(self.future_cycle, cyclic=True):
            return False
        if self.past_cycle and not self.core and self.future_cycle:
            return graph.has_edge(self.past_cycle[-1], self.future_cycle[0])
        return True

    def _compare_range(self, other: "SymbolPath") -> tuple[int, int]:
        lo1, hi1 = self.core_span
        lo2, hi2 = other.core_span
        lp = math.lcm(max(len(self.past_cycle), 1), max(len(other.past_cycle), 1))
        lf = math.lcm(max(len(self.future_cycle), 1), max(len(other.future_cycle), 1))
        return min(lo1, lo2) - lp, max(hi1, hi2) + lf

    def __eq__(self, other):
        if not isinstance(other, SymbolPath):
            return NotImplemented
        return first_difference(self, other) is None and \
            self.is_finite_window == other.is_finite_window

    def __hash__(self):
        return hash(tuple(self.symbol(n) for n in range(-4, 5)))

    def __repr__(self):
        return f"SymbolPath({format_path(self)})"


def first_difference(p: SymbolPath, q: SymbolPath):
    """Smallest |n| at which the (defined) symbols differ, or None."""
    lo, hi = p._compare_range(q)
    bound = max(abs(lo), abs(hi)) + 1
    for m in range(bound + 1):
        for n in ((m,) if m == 0 else (m, -m)):
            a, b = p.symbol(n), q.symbol(n)
            if a is None or b is None:
                continue
            if a != b:
                return m
    return None


def shift(p: SymbolPath, k: int) -> SymbolPath:
    return SymbolPath(p.core, p.past_cycle, p.future_cycle, p.origin + k)


def path_distance(p: SymbolPath, q: SymbolPath) -> float:
    n = first_difference(p, q)
    return 0.0 if n is None else math.exp(-n)


@dataclass(frozen=True)
class RoofFunction:
    """Positive bounded roof with a declared dependence radius."""

    evaluator: Callable[[SymbolPath], float]
    bounds: tuple[float, float]
    radius: int = 0

    def __post_init__(self):
        lo, hi = self.bounds
        if not 0 < lo <= hi < math.inf:
            raise ValueError("roof bounds must satisfy 0 < inf <= sup < inf")

    def __call__(self, p: SymbolPath) -> float:
        v = float(self.evaluator(p))
        lo, hi = self.bounds
        if not lo - 1e-12 <= v <= hi + 1e-12:
            raise ValueError(f"roof value {v} outside declared bounds {self.bounds}")
        return v

    @classmethod
    def constant(cls, c=1.0) -> "RoofFunction":
        return cls(lambda p: c, (c, c), 0)


def birkhoff_roof(p: SymbolPath, n: int, roof: RoofFunction) -> float:
    """r_n(p); for n < 0 the cocycle extension -r_{|n|}(shift(p, n))."""
    if n >= 0:
        return math.fsum(roof(shift(p, k)) for k in range(n))
    return -math.fsum(roof(shift(p, k)) for k in range(n, 0))


@dataclass(frozen=True)
class SuspensionPoint:
    path: SymbolPath
    height: float

    def check(self, roof: RoofFunction) -> bool:
        return 0.0 <= self.height < roof(self.path)


def suspension_flow(z: SuspensionPoint, t: float, roof: RoofFunction) -> SuspensionPoint:
    p, h = z.path, z.height + t
    r = roof(p)
    while h >= r:
        h -= r
        p = shift(p, 1)
        r = roof(p)
    while h < 0:
        p = shift(p, -1)
        r = roof(p)
        h += r
        if h >= r:
            # rounding landed on the roof
            h = 0.0
            p = shift(p, 1)
    return SuspensionPoint(p, h)


def _weight_mass(t0: float, t1: float) -> float:
    # integral of exp(-2|tau|) over [t0, t1]
    def cdf(t):
        return 0.5 * math.exp(2 * t) if t < 0 else 1.0 - 0.5 * math.exp(-2 * t)
    return cdf(t1) - cdf(t0)


def bowen_walters_distance(z1: SuspensionPoint, z2: SuspensionPoint,
                           roof: RoofFunction, horizon: float = 18.0) -> float:
    """Suspension metric averaged over flow-time offsets.

    Each point is viewed at offset tau as (path shifted to its current
    roof cell, normalized height). Views are compared by path_distance
    plus the circular distance of normalized heights, weighted by
    exp(-2|tau|). The result is a metric on the suspension space, and the
    flow is e^{2|t|}-Lipschitz in it (normalized time).
    """
    a = z1.height / roof(z1.path)
    b = z2.height / roof(z2.path)
    phase = abs((a - b) - round(a - b))
    cuts = {-horizon, horizon}
    for c in (a, b):
        for k in range(math.ceil(c - horizon), math.floor(c + horizon) + 1):
            cuts.add(k - c)
    cuts = sorted(t for t in cuts if -horizon <= t <= horizon)
    cache: dict = {}
    total = 0.0
    for t0, t1 in zip(cuts, cuts[1:]):
        if t1 <= t0:
            continue
        mid = 0.5 * (t0 + t1)
        k1, k2 = math.floor(a + mid), math.floor(b + mid)
        key = (k1, k2)
        if key not in cache:
            cache[key] = path_distance(shift(z1.path, k1), shift(z2.path, k2))
        total += _weight_mass(t0, t1) * (cache[key] + phase)
    # views beyond the horizon would add at most 1.5 * exp(-2 horizon)
    return total


@dataclass(frozen=True)
class Regularity:
    regular: bool
    undetermined: bool = False

    def __bool__(self):
        return self.regular


def regular_test(p: SymbolPath) -> Regularity:
    """Recurrence of some symbol in each direction."""
    if p.past_cycle and p.future_cycle:
        return Regularity(True)
    lo, hi = p.core_span
    if p.future_cycle:
        fut_ok = True
    else:
        fut = [p.symbol(n) for n in range(0, hi)]
        fut_ok = len(set(fut)) < len(fut)
    if p.past_cycle:
        past_ok = True
    else:
        past = [p.symbol(n) for n in range(lo, 1)]
        past_ok = len(set(past)) < len(past)
    ok = fut_ok and past_ok
    return Regularity(ok, undetermined=not ok)


def irreducible_components(g: MarkovGraph) -> list[set]:
    """Strongly connected components that carry at least one edge."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    out: list[set] = []
    counter = 0
    for root in g.vertices:
        if root in index:
            continue
        work = [(root, iter(g.successors(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(g.successors(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                if len(comp) > 1 or g.has_edge(v, v):
                    out.append(comp)
    return out


# -- path and point serialization -----------------------------------------

def _fmt_word(word) -> str:
    return ",".join(str(s) for s in word)


def format_path(p: SymbolPath) -> str:
    return (f"past={_fmt_word(p.past_cycle)};core={_fmt_word(p.core)}@{p.origin};"
            f"future={_fmt_word(p.future_cycle)}")


def parse_path(spec: str, convert=str) -> SymbolPath:
    m = re.fullmatch(r"\s*past=([^;]*);core=([^;@]*)@(-?\d+);future=([^;]*)\s*", spec)
    if not m:
        raise ValueError(f"bad path spec: {spec!r}")

    def word(s):
        return tuple(convert(t) for t in s.split(",")) if s else ()
    return SymbolPath(word(m.group(2)), word(m.group(1)), word(m.group(4)),
                      int(m.group(3)))


def format_suspension_point(z: SuspensionPoint) -> str:
    return f"({format_path(z.path)}, {z.height!r})"


def parse_suspension_point(text: str, convert=str) -> SuspensionPoint:
    m = re.fullmatch(r"\s*\((.*),\s*([-+0-9.eEinf]+)\)\s*", text)
    if not m:
        raise ValueError(f"bad suspension point: {text!r}")
    return SuspensionPoint(parse_path(m.group(1), convert), float(m.group(2)))
