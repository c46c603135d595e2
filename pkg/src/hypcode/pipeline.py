"""End-to-end pipeline: staged builds, acceptance criteria and artifacts."""

import csv
import io
import json
import math
import time
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

from .charts import Atlas, chart_rows, fiber_delta, point_key
from .coarse_graining import build_alphabet, check_encoding, encode_orbit, encode_periodic
from .config import STAGES, PipelineConfig
from .errors import CylinderEmpty, HypcodeError, NotTransitive
from .gpo_manifolds import (
    conjugacy_check, graph_transform_s, graph_transform_u, random_admissible, shadow,
    stable_curve,
)
from .markov_partition import (
    affiliation, bowen_relation_check, build_cover, build_skeleton, conjugacy_spot_check,
    cylinder_check, lift_coverage, lift_hyperbolic_set, markov_check, periodic_orbit,
    preimage_bound_check, refine_simN, second_coding, section_point,
)
from .model_flow import ModelFlow, PointM
from .nuh_params import NUH, brute_force_p, constant_roof_integrals, orbit_log_q, params_rows, section_orbit
from .sections import build_sections
from .symbolic_core import RoofFunction, SymbolPath, birkhoff_roof, shift

CRITERIA = {
    1: "cocycle laws",
    2: "closed-form s, u",
    3: "diagonalization bounds",
    4: "greedy recursion equivalence",
    5: "graph-transform contraction",
    6: "shadowing round-trip",
    7: "Markov property",
    8: "second coding soundness",
    9: "finite-to-one",
    10: "irreducible lifting",
}

# last stage each criterion needs
CRITERION_STAGE = {1: "sections", 2: "nuh", 3: "nuh", 4: "nuh", 5: "gpo", 6: "gpo",
                   7: "markov", 8: "second", 9: "second", 10: "second"}


class Context:
    """Lazily built objects for one configuration."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg

    @cached_property
    def model(self) -> ModelFlow:
        m, c = self.cfg.model, self.cfg.constants
        return ModelFlow(m.matrix, m.roof, m.delta, c.chi, c.beta, c.rho, c.eps)

    @cached_property
    def nuh(self) -> NUH:
        return NUH(self.model)

    @cached_property
    def sections(self):
        return build_sections(self.model)

    @cached_property
    def atlas(self) -> Atlas:
        lam, hat = self.sections
        return Atlas(self.model, self.nuh, lam, hat)

    @cached_property
    def fixed(self) -> PointM:
        return section_point(self.atlas, Fraction(0), Fraction(0))

    @cached_property
    def alphabet(self):
        return build_alphabet(self.atlas, [self.fixed])

    @cached_property
    def periodic_gpo(self):
        n = len(periodic_orbit(self.atlas, self.fixed))
        return encode_periodic(self.atlas, self.alphabet, self.fixed, n)

    @cached_property
    def skeleton(self):
        return build_skeleton(self.atlas, self.alphabet, self.cfg.cycle_fibers(), self.cfg.links(),
                              depth=self.cfg.horizons.skeleton_depth)

    @cached_property
    def cover(self):
        return build_cover(self.skeleton, dwells=self.cfg.sampling.dwells)

    @cached_property
    def partition(self):
        return refine_simN(self.cover)

    @cached_property
    def second(self):
        return second_coding(self.partition, depth=self.cfg.horizons.coding_depth)

    @cached_property
    def affiliation(self):
        return affiliation(self.partition)

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.cfg.seed, salt])

    def disc_points(self, count: int, salt: int) -> list:
        """Exact points inside randomly chosen section discs."""
        rng = self.rng(salt)
        lam = self.sections[0]
        out = []
        for k in rng.integers(0, len(lam.discs), count):
            d = lam.discs[int(k)]
            a, b = (Fraction(int(v), 1000) for v in rng.integers(-800, 801, 2))
            r = Fraction(d.radius)
            out.append(PointM(Fraction(d.center[0]) + a * r, Fraction(d.center[1]) + b * r, d.height))
        return out


def _result(n: int, passed: bool, **metrics) -> dict:
    return {"criterion": n, "title": CRITERIA[n], "status": "pass" if passed else "fail", **metrics}


def _skip(n: int, reason: str) -> dict:
    return {"criterion": n, "title": CRITERIA[n], "status": "n/a", "reason": reason}


# -- criteria --------------------------------------------------------------------

def criterion_cocycle(ctx: Context, samples: int | None = None) -> dict:
    """Flow and induced-cocycle group laws and the Birkhoff cocycle identity."""
    m = ctx.model
    n = samples or ctx.cfg.sampling.cocycle
    rng = ctx.rng(1)
    start = time.perf_counter()
    flow_err = phi_err = 0.0
    for u1, u2, h, a, b in rng.random((n, 5)):
        x = PointM(u1, u2, h * m.roof(u1, u2))
        a, b = 4 * a - 2, 4 * b - 2
        lhs, rhs = m.flow(m.flow(x, a), b), m.flow(x, a + b)
        du = np.asarray(lhs.u) - np.asarray(rhs.u)
        du -= np.round(du)
        flow_err = max(flow_err, float(np.max(np.abs(du))), abs(float(lhs.s) - float(rhs.s)))
        P = m.induced_phi(m.flow(x, a), b) @ m.induced_phi(x, a)
        phi_err = max(phi_err, float(np.max(np.abs(P - m.induced_phi(x, a + b)))))
    table = rng.uniform(0.5, 1.5, 5)
    roof = RoofFunction(lambda p: table[p.symbol(0)] + 0.1 * table[p.symbol(1)], (0.55, 1.65), 1)
    birk_err = 0.0
    for _ in range(n):
        core = tuple(int(v) for v in rng.integers(0, 5, int(rng.integers(1, 6))))
        past = tuple(int(v) for v in rng.integers(0, 5, int(rng.integers(1, 3))))
        fut = tuple(int(v) for v in rng.integers(0, 5, int(rng.integers(1, 3))))
        p = SymbolPath(core, past, fut, int(rng.integers(-3, 4)))
        j, k = (int(v) for v in rng.integers(-12, 13, 2))
        lhs = birkhoff_roof(p, j + k, roof)
        rhs = birkhoff_roof(p, j, roof) + birkhoff_roof(shift(p, j), k, roof)
        birk_err = max(birk_err, abs(lhs - rhs))
    elapsed = time.perf_counter() - start
    ok = flow_err <= 1e-10 and phi_err <= 1e-10 and birk_err <= 1e-10 and elapsed < 5
    return _result(1, ok, samples=n, flow_error=flow_err, phi_error=phi_err,
                   birkhoff_error=birk_err, under_5s=elapsed < 5)


def criterion_closed_form(ctx: Context, samples: int = 200) -> dict:
    """compute_su at section points against the geometric-series closed form."""
    if ctx.model.roof_kind != "const":
        return _skip(2, "closed form exists for the constant roof only")
    nuh, lam = ctx.nuh, ctx.sections[0]
    c = 2 * math.exp(2 * nuh.rho)
    worst, low = 0.0, math.inf
    for d in lam.discs:
        x = PointM(d._fc[0], d._fc[1], d.hf)
        s, u = nuh.compute_su(x)
        Is, Iu = constant_roof_integrals(nuh, d.hf)
        worst = max(worst, abs(s / (c * math.sqrt(Is)) - 1), abs(u / (c * math.sqrt(Iu)) - 1))
        low = min(low, s, u)
    rng = ctx.rng(2)
    for a, b, h in rng.random((samples, 3)):
        s, u = nuh.compute_su(PointM(a, b, h))
        low = min(low, s, u)
    ok = worst <= 1e-6 and low >= math.sqrt(2)
    return _result(2, ok, points=len(lam.discs) + samples, max_rel_error=worst, min_su=low)


def criterion_diagonalization(ctx: Context, samples: int | None = None) -> dict:
    """Off-diagonal size, diagonal bounds and parameter ratio bounds along the flow."""
    m, nuh = ctx.model, ctx.nuh
    rho, chi = nuh.rho, nuh.chi
    n = samples or ctx.cfg.sampling.diagonalization
    rng = ctx.rng(3)
    off_max, bad_bounds, su_ratio, c_ratio = 0.0, 0, 0.0, 0.0
    for u1, u2, h, tt, ss in rng.random((n, 5)):
        x = PointM(u1, u2, h * m.roof(u1, u2))
        t = 2 * rho * (1 - tt)
        A, B, off = nuh.oseledets_pesin_reduce(x, t)
        off_max = max(off_max, off)
        if not (math.exp(-4 * rho) < abs(A) < math.exp(-chi * t)
                and math.exp(chi * t) < abs(B) < math.exp(4 * rho)):
            bad_bounds += 1
        p, q = nuh.params(x), nuh.params(m.flow(x, 2 * rho * (2 * ss - 1)))
        su_ratio = max(su_ratio, abs(math.log(q.s_val / p.s_val)), abs(math.log(q.u_val / p.u_val)))
        c_ratio = max(c_ratio, abs(math.log(q.C_inv_frob / p.C_inv_frob)))
    ok = off_max <= 1e-8 and bad_bounds == 0 and su_ratio <= 10 * rho and c_ratio <= 8 * rho
    return _result(3, ok, samples=n, max_off_diagonal=off_max, bound_failures=bad_bounds,
                   max_log_su_ratio_over_rho=su_ratio / rho, max_log_cinv_ratio_over_rho=c_ratio / rho)


def _greedy_window(ctx: Context, x: PointM, width: int):
    nuh, lam = ctx.nuh, ctx.sections[0]
    pad = ctx.cfg.horizons.greedy_pad
    while True:
        times, pts = section_orbit(lam, x, pad, pad + width)
        logq = orbit_log_q(nuh, x, times)
        if nuh.certify_window(times, logq, pad, pad + width):
            return times, logq, pad
        pad *= 2


def criterion_greedy(ctx: Context, orbits: int | None = None, indices: int | None = None) -> dict:
    """Greedy recursion against the brute-force infimum, plus robustness against q."""
    nuh, m = ctx.nuh, ctx.model
    n = orbits or ctx.cfg.sampling.greedy_orbits
    width = indices or ctx.cfg.sampling.greedy_indices
    hfrak = nuh.eps * nuh.rho + 250 * nuh.rho / nuh.beta
    mismatches, robust_worst = 0, 0.0
    rng = ctx.rng(4)
    for k, x in enumerate(ctx.disc_points(n, 4)):
        times, logq, lo = _greedy_window(ctx, x, width)
        z = nuh.z_indexed_p(times, logq, lo=lo, hi=lo + width)
        bs, bu = brute_force_p(nuh, times, logq, lo, lo + width)
        if z.log_ps != bs or z.log_pu != bu:
            mismatches += 1
        if k < ctx.cfg.sampling.robustness_orbits:
            for j in rng.integers(0, width - 1, 3):
                j = int(j)
                t0, t1 = times[lo + j] - times[lo], times[lo + j + 1] - times[lo]
                t = t0 + (t1 - t0) * float(rng.random())
                lq = nuh.compute_q(m.flow(x, times[lo] + t))
                robust_worst = max(robust_worst, abs(math.log(z.ps[j] / lq.q_s)),
                                   abs(math.log(z.pu[j] / lq.q_u)))
    ok = mismatches == 0 and robust_worst <= hfrak
    return _result(4, ok, orbits=n, indices=width, mismatches=mismatches,
                   max_log_robustness=robust_worst, hfrak=hfrak)


def criterion_contraction(ctx: Context, trials: int | None = None) -> dict:
    """Per-step graph-transform contraction and double-seed agreement at depth."""
    at, beta = ctx.atlas, ctx.nuh.beta
    n = trials or ctx.cfg.sampling.contraction_trials
    bound = at.contraction
    rng = ctx.rng(5)
    W = ctx.cfg.horizons.encode_window
    x = ctx.disc_points(1, 5)[0]
    g = encode_orbit(at, build_alphabet(at, [x]), x, W)
    worst, inadmissible = 0.0, 0
    for _ in range(n):
        k = int(rng.integers(-W, W))
        v, w = g[k], g[k + 1]
        em = at.edge_map(v.base, w.base)
        if rng.random() < 0.5:
            c1, c2 = random_admissible(w, "s", rng), random_admissible(w, "s", rng)
            o1, o2 = graph_transform_s(em, v, c1), graph_transform_s(em, v, c2)
        else:
            c1, c2 = random_admissible(v, "u", rng), random_admissible(v, "u", rng)
            o1, o2 = graph_transform_u(em, w, c1), graph_transform_u(em, w, c2)
        inadmissible += not (o1.is_admissible(beta) and o2.is_admissible(beta))
        worst = max(worst, o1.distance_c0(o2) / c1.distance_c0(c2))
    depth = ctx.cfg.horizons.stable_depth
    gp = ctx.periodic_gpo
    s1 = stable_curve(at, gp, depth, seed=random_admissible(gp[depth], "s", rng))
    s2 = stable_curve(at, gp, depth, seed=random_admissible(gp[depth], "s", rng))
    seed_gap = s1.distance_c0(s2) / s1.p
    ok = worst <= bound and inadmissible == 0 and seed_gap <= 1e-8
    return _result(5, ok, trials=n, max_ratio=worst, bound=bound, inadmissible=inadmissible,
                   depth=depth, double_seed_gap_over_window=seed_gap,
                   contraction_passed=worst <= bound and inadmissible == 0,
                   double_seed_passed=seed_gap <= 1e-8)


def criterion_shadowing(ctx: Context, orbits: int | None = None) -> dict:
    """Encode a true orbit, shadow the encoding and compare with the source point."""
    at = ctx.atlas
    n = orbits or ctx.cfg.sampling.shadow_orbits
    tol = 1e-6 if ctx.model.roof_kind == "const" else 1e-4
    W, depth = ctx.cfg.horizons.encode_window, ctx.cfg.horizons.shadow_depth
    worst, failed = 0.0, 0
    for x in ctx.disc_points(n, 6):
        alpha = build_alphabet(at, [x])
        g = encode_orbit(at, alpha, x, W)
        res = shadow(at, g, depth)
        err = float(np.max(np.abs(fiber_delta(res.point, x)))) / g[0].eta
        worst = max(worst, err)
        chk = check_encoding(at, alpha, g)
        failed += not (chk.ok and chk.tail_ok and chk.a_ok and chk.cg_ok)
    ok = worst <= tol and failed == 0
    return _result(6, ok, orbits=n, max_error_over_window=worst, tolerance=tol,
                   failed_rechecks=failed)


def criterion_markov(ctx: Context) -> dict:
    rep = markov_check(ctx.partition)
    if ctx.model.roof_kind == "const":
        ok = rep["violations"] == 0 and rep["flagged"] == 0
    else:
        ok = rep["violations"] == 0 and rep["flag_rate"] <= 1e-3 and rep["max_ratio"] < 2
    keep = ("checked", "violations", "flagged", "flag_rate", "max_ratio", "samples", "classes")
    return _result(7, ok, **{k: rep[k] for k in keep})


def criterion_second(ctx: Context, words: int | None = None) -> dict:
    sc = ctx.second
    lo, hi = ctx.cfg.horizons.cylinder_depths
    n = words or ctx.cfg.sampling.cylinder_words
    try:
        rep = cylinder_check(sc, n, range(lo, hi + 1), seed=ctx.cfg.seed)
    except CylinderEmpty as exc:
        return _result(8, False, error=str(exc))
    rlo, rhi = sc.info["r_hat_range"]
    fit = rep["fit"]
    ok = (rep["nonempty"] == rep["words"] and fit["theta"] < 1 and fit["r2"] > 0.99
          and 0 < rlo and rhi < ctx.nuh.rho)
    return _result(8, ok, words=rep["words"], nonempty=rep["nonempty"], theta=fit["theta"],
                   r2=fit["r2"], theta_max_per_word=rep["theta_max"], r2_min_per_word=rep["r2_min"],
                   r_hat_range=[rlo, rhi], escapes=sc.info["escapes"])


def criterion_finite_to_one(ctx: Context) -> dict:
    sc, aff, s = ctx.second, ctx.affiliation, ctx.cfg.sampling
    pre = preimage_bound_check(sc, aff, points=s.preimage_points, seed=ctx.cfg.seed)
    bow = bowen_relation_check(sc, aff, pairs=s.bowen_pairs, seed=ctx.cfg.seed)
    ok = pre["ok"] and bow["ok"] and bow["affiliated_pairs"] > 0
    return _result(9, ok, points=len(pre["points"]), max_preimages=pre["max_preimages"],
                   min_bound=min(r["bound"] for r in pre["points"]),
                   max_tolerance_codings=pre["max_tolerance_codings"],
                   tolerance_within_bound=pre["tolerance_within_bound"],
                   bowen_i_violations=pre["bowen_i_violations"],
                   affiliated_pairs=bow["affiliated_pairs"], max_shift=bow["max_shift"],
                   shift_bound=bow["bound"])


def criterion_lifting(ctx: Context) -> dict:
    cycles = list(ctx.cfg.skeleton.cycles)
    if len(cycles) < 2:
        return _skip(10, "needs two periodic orbits")
    sc = ctx.second
    try:
        comp = lift_hyperbolic_set(sc, cycles)
    except NotTransitive as exc:
        return _result(10, False, error=str(exc))
    cov = lift_coverage(sc, cycles)
    ok = all(v["covered"] == v["points"] for v in cov.values())
    return _result(10, ok, component_size=len(comp), vertices=len(sc.graph.vertices),
                   coverage=cov)


CRITERION_FUNCS = {1: criterion_cocycle, 2: criterion_closed_form, 3: criterion_diagonalization,
                   4: criterion_greedy, 5: criterion_contraction, 6: criterion_shadowing,
                   7: criterion_markov, 8: criterion_second, 9: criterion_finite_to_one,
                   10: criterion_lifting}


# -- artifacts ---------------------------------------------------------------------

def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (Fraction, PointM)):
        return str(v)
    if isinstance(v, (set, frozenset, tuple)):
        return list(v)
    return repr(v)


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_plain) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


class Writer:
    def __init__(self, out: Path):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []

    def text(self, name: str, text: str):
        (self.out / name).write_text(text, encoding="utf-8")
        self.files.append(name)

    def json(self, name: str, obj):
        self.text(name, dumps(obj))


# -- stages ------------------------------------------------------------------------

def stage_sections(ctx: Context, w: Writer) -> dict:
    lam, hat = ctx.sections
    g = ctx.cfg.sections
    rows = lam.to_csv_rows() + hat.to_csv_rows()
    w.text("sections.csv", csv_text(["disc_id", "center_u1", "center_u2", "height", "radius", "kind"], rows))
    worst = lam.check_cover(samples=g.cover_samples, seed=ctx.cfg.seed)
    order = lam.check_partial_order() + hat.check_partial_order()
    rep = {"discs": len(lam.discs), "hat_discs": len(hat.discs), "max_hitting_time": worst,
           "size": lam.size, "order_violations": order, "min_return": lam.min_return(),
           "ok": worst < lam.size and not order}
    w.json("sections.json", rep)
    return rep


def stage_nuh(ctx: Context, w: Writer) -> dict:
    pts = ctx.disc_points(ctx.cfg.sampling.param_points, 7)
    rows = params_rows(ctx.nuh, pts)
    w.text("params.csv", csv_text(["point", "s", "u", "alpha", "Q", "q", "qs", "qu", "horizon"], rows))
    rep = {"points": len(rows), "min_q": min(r[5] for r in rows), "max_q": max(r[5] for r in rows),
           "ok": all(r[5] > 0 for r in rows)}
    w.json("nuh.json", rep)
    return rep


def stage_charts(ctx: Context, w: Writer) -> dict:
    at, g = ctx.atlas, ctx.periodic_gpo
    n = len(periodic_orbit(at, ctx.fixed))
    charts = [g[k] for k in range(n)]
    w.text("charts.csv", csv_text(["x", "C11", "C12", "C21", "C22", "Q", "ps", "pu"], chart_rows(charts)))
    failing = g.failing_edges(at, 0, n)
    rep = {"cycle_length": n, "failing_edges": failing, "contraction": at.contraction,
           "ok": not failing}
    w.json("charts.json", rep)
    return rep


def stage_gpo(ctx: Context, w: Writer) -> dict:
    at = ctx.atlas
    x = ctx.disc_points(1, 8)[0]
    g = encode_orbit(at, build_alphabet(at, [x]), x, 2 * ctx.cfg.horizons.encode_window)
    res = shadow(at, g, ctx.cfg.horizons.shadow_depth)
    conj = conjugacy_check(at, g, ctx.cfg.horizons.shadow_depth)
    w.text("stable_curve.csv", csv_text(["t", "F"], res.vs.rows()))
    rep = {"shadow": res.to_dict(), "conjugacy": conj,
           "ok": point_key(res.point) == point_key(x) and conj["distance"] <= 1e-10}
    w.json("gpo.json", rep)
    return rep


def stage_coarse(ctx: Context, w: Writer) -> dict:
    alpha = ctx.alphabet
    g = ctx.periodic_gpo
    chk = check_encoding(ctx.atlas, alpha, encode_orbit(ctx.atlas, alpha, ctx.fixed,
                                                        ctx.cfg.horizons.encode_window))
    alpha.connect()
    ids = {v: k for k, v in enumerate(sorted(alpha.charts, key=repr))}
    w.text("alphabet.csv", csv_text(["id", "x", "C11", "C12", "C21", "C22", "Q", "ps", "pu"],
                                    [(ids[v], *row) for v, row in
                                     zip(sorted(alpha.charts, key=repr),
                                         chart_rows(sorted(alpha.charts, key=repr)))]))
    lines = ["digraph alphabet {"]
    lines += [f"  {ids[v]};" for v in sorted(alpha.charts, key=repr)]
    lines += sorted(f"  {ids[a]} -> {ids[b]};" for a, b in alpha.graph.edges)
    w.text("alphabet.dot", "\n".join(lines + ["}"]) + "\n")
    rep = {"charts": len(alpha.charts), "edges": len(alpha.graph.edges), "net_size": alpha.net_size,
           "period": len(periodic_orbit(ctx.atlas, ctx.fixed)), "cycle_chart": repr(g[0]),
           "encoding_ok": chk.ok, "tail_ok": chk.tail_ok, "a_ok": chk.a_ok,
           "ok": chk.ok and chk.tail_ok and chk.a_ok}
    w.json("coarse.json", rep)
    return rep


def stage_markov(ctx: Context, w: Writer) -> dict:
    sk, cov, part = ctx.skeleton, ctx.cover, ctx.partition
    edges = sorted((sk.vid[a], sk.vid[b]) for a, b in sk.graph.edges)
    w.text("first_coding.dot", "digraph first_coding {\n"
           + "".join(f"  {a} -> {b};\n" for a, b in edges) + "}\n")
    rows = []
    for c in sorted(part.rectangles):
        r = part.rectangles[c]
        rows.append((c, " ".join(map(str, part.parents(c))), len(r.samples)))
    w.text("rectangles.csv", csv_text(["class", "cover_rectangles", "samples"], rows))
    lines = ["digraph partition {"]
    for c in sorted(part.rectangles):
        lines += [f"  Z{z} -> R{c};" for z in part.parents(c)]
    w.text("partition.dot", "\n".join(lines + ["}"]) + "\n")
    rep = markov_check(part)
    rep.update({"N": cov.N, "reach": cov.reach, "margin": cov.margin,
                "cover_rectangles": len(cov.rectangles), "vertices": len(sk.vertices)})
    w.json("markov.json", rep)
    return rep


def stage_second(ctx: Context, w: Writer) -> dict:
    sc = ctx.second
    edges = sorted(sc.graph.edges)
    w.text("g_hat.dot", "digraph g_hat {\n" + "".join(f"  {a} -> {b};\n" for a, b in edges) + "}\n")
    w.text("roof_hat.csv", csv_text(["class", "r_hat"], sorted(sc.r_hat.items())))
    conj = conjugacy_spot_check(sc, ctx.cfg.sampling.conjugacy, seed=ctx.cfg.seed)
    rep = {"info": sc.info, "conjugacy": conj, "ok": conj["ok"]}
    w.json("second.json", rep)
    return rep


STAGE_FUNCS = {"sections": stage_sections, "nuh": stage_nuh, "charts": stage_charts,
               "gpo": stage_gpo, "coarse": stage_coarse, "markov": stage_markov,
               "second": stage_second}


def run_pipeline(cfg: PipelineConfig, stage: str | None = None, out=None,
                 ctx: Context | None = None, log=print) -> tuple[int, dict]:
    """Run stages through `stage` (all by default); returns (exit status, summary).

    Hard failures stop the run with status 1 and are recorded in the
    summary; criteria whose stage was not reached are reported as not run.
    """
    last = STAGES.index(stage) if stage else len(STAGES) - 1
    ctx = ctx or Context(cfg)
    w = Writer(out or cfg.output)
    w.json("config.json", cfg.to_dict())
    summary = {"stages": {}, "criteria": {}, "error": None}
    timings = []
    try:
        for name in STAGES[:last + 1]:
            t0 = time.perf_counter()
            rep = STAGE_FUNCS[name](ctx, w)
            summary["stages"][name] = "pass" if rep.get("ok", True) else "fail"
            for n, st in CRITERION_STAGE.items():
                if st == name:
                    t1 = time.perf_counter()
                    res = CRITERION_FUNCS[n](ctx)
                    summary["criteria"][str(n)] = res
                    timings.append(f"criterion {n}: {time.perf_counter() - t1:.1f}s")
                    log(f"criterion {n:2d} {res['title']}: {res['status']}")
            timings.append(f"stage {name}: {time.perf_counter() - t0:.1f}s")
            log(f"stage {name}: {summary['stages'][name]}")
    except HypcodeError as exc:
        summary["error"] = {"type": type(exc).__name__, "message": str(exc),
                            "witness": getattr(exc, "witness", None)}
        log(f"hard failure: {type(exc).__name__}: {exc}")
    for n in CRITERIA:
        summary["criteria"].setdefault(str(n), {"criterion": n, "title": CRITERIA[n],
                                                "status": "not run"})
    failed = [k for k, v in summary["criteria"].items() if v["status"] == "fail"]
    failed_stages = [k for k, v in summary["stages"].items() if v == "fail"]
    summary["passed"] = summary["error"] is None and not failed and not failed_stages
    w.json("summary.json", summary)
    (w.out / "timings.txt").write_text("\n".join(timings) + "\n")
    return (0 if summary["passed"] else 1), summary


def report(out) -> tuple[int, str]:
    path = Path(out) / "summary.json"
    if not path.exists():
        raise FileNotFoundError(path)
    s = json.loads(path.read_text())
    lines = []
    for name, st in s["stages"].items():
        lines.append(f"stage {name:9s} {st}")
    for k in sorted(s["criteria"], key=int):
        c = s["criteria"][k]
        lines.append(f"criterion {int(k):2d} {c['status']:7s} {c['title']}")
    if s.get("error"):
        lines.append(f"error: {s['error']['type']}: {s['error']['message']}")
    lines.append("overall " + ("pass" if s["passed"] else "fail"))
    return (0 if s["passed"] else 1), "\n".join(lines)
