"""Mapping tori of hyperbolic toral automorphisms.

The phase space is T^2 x [0, r(u)) with (u, r(u)) glued to (A u, 0). The
vector field is d/ds, the 1-form is ds and the metric is the flat product
metric in (u1, u2, s). Fiber coordinates may be floats or Fractions; with
the constant roof every operation stays exact on Fractions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure

ROOF_KINDS = ("const", "cos", "stretch")


@dataclass(frozen=True)
class PointM:
    u1: object
    u2: object
    s: object

    @property
    def u(self) -> np.ndarray:
        return np.array([float(self.u1), float(self.u2)])

    def as_floats(self) -> tuple[float, float, float]:
        return float(self.u1), float(self.u2), float(self.s)

    def __str__(self):
        return f"({float(self.u1)!r}, {float(self.u2)!r}, {float(self.s)!r})"


def parse_point(text: str) -> PointM:
    parts = text.strip().strip("()").split(",")
    if len(parts) != 3:
        raise ValueError(f"bad point: {text!r}")
    return PointM(*(float(p) for p in parts))


def torus_delta(a, b) -> np.ndarray:
    """Shortest representative of a - b on the 2-torus."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return d - np.round(d)


@dataclass(frozen=True)
class NormalFrame:
    base: PointM
    e1: np.ndarray
    e2: np.ndarray


class ModelFlow:
    """Suspension of a hyperbolic toral automorphism under a smooth roof."""

    def __init__(self, matrix=((2, 1), (1, 1)), roof="const", delta=0.1,
                 chi=0.5, beta=1.0, rho=0.2, eps=0.02,
                 stretch_center=(0.5, 0.5), stretch_width=0.08):
        m = [[int(v) for v in row] for row in matrix]
        if len(m) != 2 or any(len(r) != 2 for r in m):
            raise ValueError("matrix must be 2x2")
        det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
        tr = m[0][0] + m[1][1]
        if det != 1 or abs(tr) <= 2:
            raise ValueError("matrix must have determinant 1 and |trace| > 2")
        if roof not in ROOF_KINDS:
            raise ValueError(f"roof kind must be one of {ROOF_KINDS}")
        self.matrix = m
        self.A = np.array(m, dtype=float)
        self.A_inv = np.array([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]], dtype=float)
        self.roof_kind = roof
        self.delta = float(delta) if roof != "const" else 0.0
        self.chi, self.beta, self.rho, self.eps = float(chi), float(beta), float(rho), float(eps)
        self.stretch_center = np.asarray(stretch_center, dtype=float)
        self.stretch_width = float(stretch_width)
        self.lam, self.n_u, self.n_s = _eigen_split(self.A)
        self.log_lam = math.log(self.lam)
        if roof == "const":
            self.roof_bounds = (1.0, 1.0)
        elif roof == "cos":
            self.roof_bounds = (1.0 - self.delta, 1.0 + self.delta)
        else:
            self.roof_bounds = (1.0, 1.0 + self.delta)

    # -- roof ---------------------------------------------------------------
    def roof(self, u1, u2=None):
        if self.roof_kind == "const":
            return 1
        if u2 is None:
            u1, u2 = u1
        u1, u2 = float(u1), float(u2)
        if self.roof_kind == "cos":
            return 1.0 + self.delta * math.cos(2 * math.pi * u1)
        d = torus_delta((u1, u2), self.stretch_center)
        return 1.0 + self.delta * math.exp(-float(d @ d) / (2 * self.stretch_width ** 2))

    def roof_grad(self, u1, u2=None) -> np.ndarray:
        if self.roof_kind == "const":
            return np.zeros(2)
        if u2 is None:
            u1, u2 = u1
        u1, u2 = float(u1), float(u2)
        if self.roof_kind == "cos":
            return np.array([-2 * math.pi * self.delta * math.sin(2 * math.pi * u1), 0.0])
        d = torus_delta((u1, u2), self.stretch_center)
        w2 = self.stretch_width ** 2
        return -self.delta * math.exp(-float(d @ d) / (2 * w2)) * d / w2

    # -- fiber map ----------------------------------------------------------
    def fiber_map(self, u1, u2, power=1):
        (a, b), (c, d) = self.matrix
        if power < 0:
            a, b, c, d = d, -b, -c, a
        for _ in range(abs(power)):
            u1, u2 = (a * u1 + b * u2) % 1, (c * u1 + d * u2) % 1
        return u1, u2

    def matrix_power(self, k: int) -> np.ndarray:
        return np.linalg.matrix_power(self.A if k >= 0 else self.A_inv, abs(k))

    # -- flow ---------------------------------------------------------------
    def normalize(self, x: PointM) -> PointM:
        return self.flow(PointM(x.u1 % 1, x.u2 % 1, x.s), 0)

    def flow_with_count(self, x: PointM, t) -> tuple[PointM, int]:
        """Flow for time t; also return the net number of roof crossings."""
        u1, u2, s = x.u1, x.u2, x.s + t
        k = 0
        r = self.roof(u1, u2)
        while s >= r:
            s -= r
            u1, u2 = self.fiber_map(u1, u2, 1)
            r = self.roof(u1, u2)
            k += 1
        while s < 0:
            u1, u2 = self.fiber_map(u1, u2, -1)
            r = self.roof(u1, u2)
            s += r
            k -= 1
            if s >= r:
                s = s - r
                u1, u2 = self.fiber_map(u1, u2, 1)
                k += 1
        return PointM(u1, u2, s), k

    def flow(self, x: PointM, t) -> PointM:
        return self.flow_with_count(x, t)[0]

    def crossing_times(self, x: PointM, t0: float, t1: float) -> list[float]:
        """Times in (t0, t1] at which the orbit of x sits at height 0.

        Forward and backward parts are both iterated from x itself, so
        fiber roundoff is never pushed through the expanding direction
        more than |t| allows.
        """
        out = []
        u1, u2 = x.u1, x.u2
        tau = -float(x.s)
        while tau > t0:
            if tau <= t1:
                out.append(tau)
            u1, u2 = self.fiber_map(u1, u2, -1)
            tau -= float(self.roof(u1, u2))
        out.reverse()
        u1, u2 = x.u1, x.u2
        tau = float(self.roof(u1, u2)) - float(x.s)
        while tau <= t1:
            if tau > t0:
                out.append(tau)
            u1, u2 = self.fiber_map(u1, u2, 1)
            tau += float(self.roof(u1, u2))
        return out

    def dflow(self, x: PointM, t: float) -> np.ndarray:
        """Derivative in (du1, du2, ds) coordinates; X = d/ds."""
        d = np.eye(3)
        u1, u2, s = x.u1, x.u2, x.s + t
        r = self.roof(u1, u2)
        while s >= r:
            jump = np.eye(3)
            jump[:2, :2] = self.A
            jump[2, :2] = -self.roof_grad(u1, u2)
            d = jump @ d
            s -= r
            u1, u2 = self.fiber_map(u1, u2, 1)
            r = self.roof(u1, u2)
        while s < 0:
            u1, u2 = self.fiber_map(u1, u2, -1)
            r = self.roof(u1, u2)
            jump = np.eye(3)
            jump[:2, :2] = self.A
            jump[2, :2] = -self.roof_grad(u1, u2)
            d = np.linalg.solve(jump, d)
            s += r
        return d

    # -- 1-form, projection, linear Poincare flow ---------------------------
    @staticmethod
    def vector_field(x: PointM) -> np.ndarray:
        return np.array([0.0, 0.0, 1.0])

    @staticmethod
    def one_form(x: PointM) -> np.ndarray:
        return np.array([0.0, 0.0, 1.0])

    def one_form_project(self, x: PointM, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return v - float(self.one_form(x) @ v) * self.vector_field(x)

    def normal_frame(self, x: PointM) -> NormalFrame:
        return NormalFrame(x, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))

    def induced_phi(self, x: PointM, t: float) -> np.ndarray:
        """Linear Poincare flow in the (e1, e2) frames; equals A^k."""
        _, k = self.flow_with_count(x, t)
        return self.matrix_power(k)

    def splitting_directions(self, x: PointM | None = None) -> tuple[np.ndarray, np.ndarray]:
        return self.n_s.copy(), self.n_u.copy()

    @property
    def alpha(self) -> float:
        c = abs(float(self.n_s @ self.n_u))
        return math.acos(min(1.0, c))

    def config(self) -> dict:
        return {"matrix": self.matrix, "roof": self.roof_kind, "delta": self.delta,
                "chi": self.chi, "beta": self.beta, "rho": self.rho, "eps": self.eps}


def _eigen_split(A: np.ndarray, iters: int = 200, tol: float = 1e-15):
    """Expanding eigenvalue and unit eigen-directions by power iteration."""
    v = np.array([1.0, 0.5])
    w = np.array([1.0, -0.5])
    A_inv = np.linalg.inv(A)
    for _ in range(iters):
        v2 = A @ v
        v2 /= np.linalg.norm(v2)
        w2 = A_inv @ w
        w2 /= np.linalg.norm(w2)
        done = min(np.linalg.norm(v2 - v), np.linalg.norm(v2 + v)) < tol and \
            min(np.linalg.norm(w2 - w), np.linalg.norm(w2 + w)) < tol
        v, w = v2, w2
        if done:
            break
    else:
        raise ConvergenceFailure("power iteration for the splitting did not converge")
    # first coordinate positive, angle at most pi/2
    if v[0] < 0:
        v = -v
    if w[0] < 0:
        w = -w
    if v @ w < -1e-12:
        w = -w
    lam = float(np.linalg.norm(A @ v))
    return lam, v, w


def make_model(cfg: dict | None = None) -> ModelFlow:
    cfg = dict(cfg or {})
    return ModelFlow(matrix=cfg.get("matrix", ((2, 1), (1, 1))), roof=cfg.get("roof", "const"),
                     delta=cfg.get("delta", 0.1), chi=cfg.get("chi", 0.5),
                     beta=cfg.get("beta", 1.0), rho=cfg.get("rho", 0.2), eps=cfg.get("eps", 0.02))
