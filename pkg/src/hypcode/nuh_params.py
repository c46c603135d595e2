"""Hyperbolicity parameters of the model flow.

In the flat model the linear Poincare flow is A^k with k the number of roof
crossings, so along an orbit n^s and n^u are eigenvectors and the weighted
integrals defining s(x), u(x) are sums over roof-to-roof panels. Within a
panel both integrals follow explicit exponentials in t, which gives Q along
the orbit in closed form between crossings.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (DiagonalizationResidual, DivergentIntegral, HorizonTooShort,
                     SpacingViolation)
from .model_flow import ModelFlow, PointM

GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)
REL_TOL = 1e-10


@dataclass(frozen=True)
class HypParams:
    base: PointM
    n_s: np.ndarray
    n_u: np.ndarray
    s_val: float
    u_val: float
    alpha: float
    C: np.ndarray
    C_inv_frob: float
    Q: float
    log_Q: float
    I_s: float
    I_u: float


@dataclass(frozen=True)
class LocalQ:
    q: float
    q_s: float
    q_u: float
    horizon: float
    certificate: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ZIndexedP:
    times: list
    ps: list
    pu: list
    log_ps: list
    log_pu: list
    maximal_s: list
    maximal_u: list


def _panel_integral(a: float, b: float, chi: float) -> float:
    """Gauss-Legendre value of the integral of exp(2 chi t) over [a, b]."""
    if b <= a:
        return 0.0
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * float(GAUSS_WEIGHTS @ np.exp(2 * chi * (mid + half * GAUSS_NODES)))


class NUH:
    """Computes s, u, C, Q, q and the greedy window sizes for a model flow."""

    def __init__(self, model: ModelFlow, chi=None, rho=None, eps=None, beta=None):
        self.model = model
        self.chi = model.chi if chi is None else float(chi)
        self.rho = model.rho if rho is None else float(rho)
        self.eps = model.eps if eps is None else float(eps)
        self.beta = model.beta if beta is None else float(beta)
        self.r_max = float(model.roof_bounds[1])
        self.r_min = float(model.roof_bounds[0])
        self.ratio = math.exp(2 * self.chi * self.r_max) / model.lam ** 2
        self.n_s, self.n_u = model.splitting_directions()
        self.sin_alpha = abs(math.sin(model.alpha))

    def _check_convergence(self):
        if self.ratio >= 1:
            raise DivergentIntegral(
                f"exp(chi * max roof) = {math.exp(self.chi * self.r_max):.4f} >= lambda = {self.model.lam:.4f}")

    @property
    def integral_bound(self) -> float:
        """Upper bound for either weighted integral at any point."""
        self._check_convergence()
        first = (math.exp(2 * self.chi * self.r_max) - 1) / (2 * self.chi)
        return first / (1 - self.ratio)

    # -- weighted integrals -------------------------------------------------
    def _gaps_forward(self, x: PointM):
        """Lengths of successive forward panels starting at x."""
        m = self.model
        u1, u2 = x.u1, x.u2
        first = float(m.roof(u1, u2)) - float(x.s)
        yield first
        while True:
            u1, u2 = m.fiber_map(u1, u2, 1)
            yield float(m.roof(u1, u2))

    def _gaps_backward(self, x: PointM):
        m = self.model
        u1, u2 = x.u1, x.u2
        yield float(x.s)
        while True:
            u1, u2 = m.fiber_map(u1, u2, -1)
            yield float(m.roof(u1, u2))

    def _weighted_integral(self, gaps) -> float:
        self._check_convergence()
        chi, lam2 = self.chi, self.model.lam ** 2
        tail_unit = self.integral_bound
        total, t, weight = 0.0, 0.0, 1.0
        for k, g in enumerate(gaps):
            total += weight * _panel_integral(t, t + g, chi)
            t += g
            weight /= lam2
            tail = weight * math.exp(2 * chi * t) * tail_unit
            if tail <= REL_TOL * total or k > 10_000:
                return total
        return total

    def integral_s(self, x: PointM) -> float:
        return self._weighted_integral(self._gaps_forward(x))

    def integral_u(self, x: PointM) -> float:
        return self._weighted_integral(self._gaps_backward(x))

    def compute_su(self, x: PointM) -> tuple[float, float]:
        c = 2 * math.exp(2 * self.rho)
        return c * math.sqrt(self.integral_s(x)), c * math.sqrt(self.integral_u(x))

    # -- C(x) and Q(x) ------------------------------------------------------
    def c_matrix(self, s_val: float, u_val: float) -> np.ndarray:
        return np.column_stack([self.n_s / s_val, self.n_u / u_val])

    def log_q_from_integrals(self, I_s: float, I_u: float) -> float:
        frob2 = 4 * math.exp(4 * self.rho) * (I_s + I_u) / self.sin_alpha ** 2
        return (3 / self.beta) * math.log(self.eps) - (6 / self.beta) * math.log(frob2)

    def params_from_integrals(self, x: PointM, I_s: float, I_u: float) -> HypParams:
        c = 2 * math.exp(2 * self.rho)
        s_val, u_val = c * math.sqrt(I_s), c * math.sqrt(I_u)
        C = self.c_matrix(s_val, u_val)
        frob = math.sqrt(s_val ** 2 + u_val ** 2) / self.sin_alpha
        log_q = self.log_q_from_integrals(I_s, I_u)
        return HypParams(x, self.n_s, self.n_u, s_val, u_val, self.model.alpha, C, frob,
                         math.exp(log_q), log_q, I_s, I_u)

    def params(self, x: PointM) -> HypParams:
        return self.params_from_integrals(x, self.integral_s(x), self.integral_u(x))

    @property
    def log_q_min(self) -> float:
        """Lower bound for log Q over the whole manifold."""
        bound = self.integral_bound * (1 + 1 / self.model.lam ** 2)
        return self.log_q_from_integrals(bound, 0.0)

    # -- Oseledets-Pesin reduction -----------------------------------------
    def oseledets_pesin_reduce(self, x: PointM, t: float, tol: float = 1e-8):
        """Diagonal entries of C(flow(x, t))^{-1} Phi^t C(x)."""
        px = self.params(x)
        py = self.params(self.model.flow(x, t))
        M = np.linalg.solve(py.C, self.model.induced_phi(x, t) @ px.C)
        off = max(abs(M[0, 1]), abs(M[1, 0]))
        if off > tol * max(1.0, abs(M[0, 0]), abs(M[1, 1])):
            raise DiagonalizationResidual(f"off-diagonal {off:.3e}", witness=(x, t, M))
        return float(M[0, 0]), float(M[1, 1]), off

    # -- orbit profiles -----------------------------------------------------
    def orbit_profile(self, x: PointM, t0: float, t1: float) -> "OrbitProfile":
        return OrbitProfile(self, x, t0, t1)

    def compute_q(self, x: PointM, horizon: float | None = None) -> LocalQ:
        """q^s, q^u, q from exact panel-wise infima over [-horizon, horizon]."""
        if horizon is None:
            horizon = self.required_horizon(x)
        prof = self.orbit_profile(x, -horizon, horizon)
        ls, ts = prof.min_weighted(0.0, horizon, +1)
        lu, tu = prof.min_weighted(-horizon, 0.0, -1)
        log_eps = math.log(self.eps)
        need = max(ls, lu) - self.log_q_min
        required = need / self.eps
        if horizon < required:
            raise HorizonTooShort(f"horizon {horizon:.2f} < required {required:.2f}", required)
        cert = {"log_q_min": self.log_q_min, "argmin_s": ts, "argmin_u": tu,
                "required_horizon": required, "panels": len(prof.starts)}
        q_s, q_u = math.exp(log_eps + ls), math.exp(log_eps + lu)
        return LocalQ(min(q_s, q_u), q_s, q_u, horizon, cert)

    def required_horizon(self, x: PointM) -> float:
        lq = self.params(x).log_Q
        return max(0.0, (lq - self.log_q_min) / self.eps) + 1.0

    # -- greedy window sizes -----------------------------------------------
    def z_indexed_p(self, times, log_Q, spacing=None, lo: int | None = None,
                    hi: int | None = None) -> ZIndexedP:
        """Greedy p^s (backward recursion) and p^u (forward recursion).

        Every float input is read as the dyadic rational it represents and
        the recursion runs in exact integer arithmetic in log space, so it
        agrees exactly with the direct infimum over the window. Indices in
        [lo, hi) are returned; certify_window tells whether the padding
        around them is long enough.
        """
        n = len(times)
        if spacing is not None:
            a, b = spacing
            for k in range(n - 1):
                gap = times[k + 1] - times[k]
                if not a <= gap <= b:
                    raise SpacingViolation(f"gap {gap} at index {k} outside [{a}, {b}]",
                                           witness=(k, gap))
        E, T, cap = _exact_inputs(self.eps, times, log_Q)
        ls = [0] * n
        ls[n - 1] = cap[n - 1]
        for k in range(n - 2, -1, -1):
            ls[k] = min(E * (T[k + 1] - T[k]) + ls[k + 1], cap[k])
        lu = [0] * n
        lu[0] = cap[0]
        for k in range(1, n):
            lu[k] = min(E * (T[k] - T[k - 1]) + lu[k - 1], cap[k])
        lo = 0 if lo is None else lo
        hi = n if hi is None else hi
        fs = [_to_float(v) for v in ls[lo:hi]]
        fu = [_to_float(v) for v in lu[lo:hi]]
        return ZIndexedP(list(times[lo:hi]), [math.exp(v) for v in fs], [math.exp(v) for v in fu],
                         fs, fu,
                         [ls[k] == cap[k] for k in range(lo, hi)],
                         [lu[k] == cap[k] for k in range(lo, hi)])

    def certify_window(self, times, log_Q, lo: int, hi: int) -> bool:
        """True if orbit points outside the arrays cannot change p on [lo, hi).

        Beyond the arrays every log Q is at least log_q_min, so the padding
        suffices once eps * distance + log_q_min reaches the cap.
        """
        E, T, _ = _exact_inputs(self.eps, times, log_Q)
        floor = _fixed(self.log_q_min, 2 * _SHIFT)
        for k in range(lo, hi):
            c = _fixed(log_Q[k], 2 * _SHIFT)
            if E * (T[-1] - T[k]) + floor < c or E * (T[k] - T[0]) + floor < c:
                return False
        return True


# exact dyadic arithmetic: x -> integer x * 2**shift
_SHIFT = 1100


def _fixed(x: float, shift: int) -> int:
    num, den = float(x).as_integer_ratio()
    return num << (shift - den.bit_length() + 1)


def _to_float(v: int) -> float:
    return v / (1 << (2 * _SHIFT))


def _exact_inputs(eps, times, log_Q):
    """eps and times scaled by 2**SHIFT; log eps + log Q scaled by 2**(2 SHIFT)."""
    E = _fixed(eps, _SHIFT)
    T = [_fixed(t, _SHIFT) for t in times]
    le = _fixed(math.log(eps), 2 * _SHIFT)
    cap = [le + _fixed(v, 2 * _SHIFT) for v in log_Q]
    return E, T, cap


def brute_force_p(nuh: NUH, times, log_Q, lo: int = 0, hi: int | None = None):
    """Direct infimum definition of log p^s and log p^u, truncated by a growth bound.

    For index k the scan over m stops once eps * |t_m - t_k| + log_q_min
    exceeds the best value found, since no later m can do better.
    """
    E, T, cap = _exact_inputs(nuh.eps, times, log_Q)
    floor = _fixed(math.log(nuh.eps), 2 * _SHIFT) + _fixed(nuh.log_q_min, 2 * _SHIFT)
    n = len(T)
    hi = n if hi is None else hi
    ls, lu = [], []
    for k in range(lo, hi):
        best = cap[k]
        for m in range(k + 1, n):
            d = E * (T[m] - T[k])
            if d + floor >= best:
                break
            best = min(best, d + cap[m])
        ls.append(_to_float(best))
        best = cap[k]
        for m in range(k - 1, -1, -1):
            d = E * (T[k] - T[m])
            if d + floor >= best:
                break
            best = min(best, d + cap[m])
        lu.append(_to_float(best))
    return ls, lu


class OrbitProfile:
    """Closed-form I_s, I_u and log Q along flow(x, t) for t in [t0, t1].

    I_s is propagated backward and I_u forward, the stable directions of
    the two recursions.
    """

    def __init__(self, nuh: NUH, x: PointM, t0: float, t1: float):
        self.nuh = nuh
        m = nuh.model
        chi, lam2 = nuh.chi, m.lam ** 2
        start = m.flow(x, t0)
        cross = [c for c in m.crossing_times(x, t0, t1) if t0 < c < t1]
        self.t0, self.t1 = t0, t1
        self.starts = [t0] + cross
        self.ends = self.starts[1:] + [t1]
        k = len(self.starts)
        c2 = 1 / (2 * chi)
        # I_s at panel starts: from far end backward
        end_point = m.flow(x, t1)
        Is_end = nuh.integral_s(end_point)
        Is = [0.0] * k
        nxt = Is_end
        for i in range(k - 1, -1, -1):
            d = self.ends[i] - self.starts[i]
            if i == k - 1:
                # value at panel start from the value at t1 (no crossing between)
                Is[i] = math.exp(2 * chi * d) * (nxt + c2) - c2
            else:
                # just before the crossing the unit stable vector is lambda times shorter
                left = nxt / lam2
                Is[i] = math.exp(2 * chi * d) * (left + c2) - c2
            nxt = Is[i]
        Iu = [0.0] * k
        Iu[0] = nuh.integral_u(start)
        for i in range(1, k):
            d = self.ends[i - 1] - self.starts[i - 1]
            left = math.exp(2 * chi * d) * (Iu[i - 1] + c2) - c2
            Iu[i] = left / lam2
        self.I_s, self.I_u = Is, Iu

    def _panel(self, t: float) -> int:
        i = bisect.bisect_right(self.starts, t) - 1
        return min(max(i, 0), len(self.starts) - 1)

    def integrals(self, t: float, panel: int | None = None) -> tuple[float, float]:
        i = self._panel(t) if panel is None else panel
        chi = self.nuh.chi
        c2 = 1 / (2 * chi)
        d = t - self.starts[i]
        return (math.exp(-2 * chi * d) * (self.I_s[i] + c2) - c2,
                math.exp(2 * chi * d) * (self.I_u[i] + c2) - c2)

    def log_Q(self, t: float, panel: int | None = None) -> float:
        return self.nuh.log_q_from_integrals(*self.integrals(t, panel))

    def min_weighted(self, a: float, b: float, sign: int) -> tuple[float, float]:
        """min of eps*|t| + log Q(t) over [a, b] (sign +1: t >= 0, -1: t <= 0)."""
        eps = self.nuh.eps
        best, arg = math.inf, None
        for i, (s0, s1) in enumerate(zip(self.starts, self.ends)):
            lo, hi = max(s0, a), min(s1, b)
            if hi < lo:
                continue

            def g(t, i=i):
                return sign * eps * t + self.log_Q(t, i)

            def dg(t, i=i, h=1e-7):
                return (g(min(t + h, s1), i) - g(max(t - h, s0), i)) / (min(t + h, s1) - max(t - h, s0))

            cands = [lo, hi]
            if hi - lo > 1e-9:
                grid = np.linspace(lo, hi, 17)
                vals = [dg(t) for t in grid]
                for (ta, va), (tb, vb) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
                    if va < 0 < vb:
                        cands.append(brentq(dg, ta, tb, xtol=1e-13))
            for t in cands:
                v = g(t)
                if v < best:
                    best, arg = v, t
        return best, arg


def section_orbit(section, x: PointM, before: int, after: int):
    """Successive hits of the section around x: (times, points)."""
    times, pts = [0.0], [x]
    y, t = x, 0.0
    for _ in range(after):
        h = section.next_hit(y)
        t += float(h.time)
        y = h.point
        times.append(t)
        pts.append(y)
    y, t = x, 0.0
    bt, bp = [], []
    for _ in range(before):
        h = section.prev_hit(y)
        t += float(h.time)
        y = h.point
        bt.append(t)
        bp.append(y)
    return bt[::-1] + times, bp[::-1] + pts


def orbit_log_q(nuh: NUH, x: PointM, times) -> list[float]:
    """log Q at flow(x, t) for each t, from one orbit profile."""
    prof = nuh.orbit_profile(x, min(times) - 1e-9, max(times) + 1e-9)
    return [prof.log_Q(t) for t in times]


def constant_roof_integrals(nuh: NUH, h: float) -> tuple[float, float]:
    """Closed forms of I_s and I_u at height h for the constant roof."""
    chi, lam = nuh.chi, nuh.model.lam
    i0 = ((math.exp(2 * chi) - 1) / (2 * chi)) / (1 - math.exp(2 * chi) / lam ** 2)

    def at(hh):
        return (math.exp(2 * chi * (1 - hh)) - 1) / (2 * chi) + math.exp(2 * chi * (1 - hh)) / lam ** 2 * i0
    return at(h), at(1 - h)


def params_rows(nuh: NUH, points, horizon=None) -> list[tuple]:
    rows = []
    for x in points:
        p = nuh.params(x)
        lq = nuh.compute_q(x, horizon)
        rows.append((str(x), p.s_val, p.u_val, p.alpha, p.Q, lq.q, lq.q_s, lq.q_u, lq.horizon))
    return rows
