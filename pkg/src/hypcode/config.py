"""Pipeline configuration: a YAML file mapped onto nested dataclasses."""

import math
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError

STAGES = ("sections", "nuh", "charts", "gpo", "coarse", "markov", "second")


@dataclass
class ModelBlock:
    matrix: list = field(default_factory=lambda: [[2, 1], [1, 1]])
    roof: str = "const"
    delta: float = 0.1


@dataclass
class Constants:
    chi: float = 0.5
    beta: float = 1.0
    rho: float = 0.2
    eps: float = 0.02


@dataclass
class SectionGrid:
    cover_samples: int = 10_000


@dataclass
class Sampling:
    cocycle: int = 1000
    diagonalization: int = 200
    greedy_orbits: int = 50
    greedy_indices: int = 100
    robustness_orbits: int = 5
    contraction_trials: int = 100
    shadow_orbits: int = 30
    param_points: int = 40
    cylinder_words: int = 100
    preimage_points: int = 20
    bowen_pairs: int = 200
    conjugacy: int = 50
    dwells: int = 2


@dataclass
class Horizons:
    skeleton_depth: int = 320
    coding_depth: int = 12
    cylinder_depths: list = field(default_factory=lambda: [4, 12])
    encode_window: int = 12
    shadow_depth: int = 10
    stable_depth: int = 40
    greedy_pad: int = 1000


@dataclass
class SkeletonBlock:
    cycles: dict = field(default_factory=lambda: {"P1": [0, 0], "P2": ["1/5", "2/5"]})
    links: list = field(default_factory=lambda: [["P1", "P2"], ["P2", "P1"]])


@dataclass
class PipelineConfig:
    model: ModelBlock = field(default_factory=ModelBlock)
    constants: Constants = field(default_factory=Constants)
    sections: SectionGrid = field(default_factory=SectionGrid)
    sampling: Sampling = field(default_factory=Sampling)
    horizons: Horizons = field(default_factory=Horizons)
    skeleton: SkeletonBlock = field(default_factory=SkeletonBlock)
    seed: int = 0
    output: str = "hypcode-out"

    @classmethod
    def from_dict(cls, data: dict | None) -> "PipelineConfig":
        cfg = _build(cls, data or {}, "")
        try:
            cfg.validate()
        except TypeError as exc:
            raise ConfigError(f"wrong value type: {exc}") from exc
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def cycle_fibers(self) -> dict:
        return {k: (Fraction(str(a)), Fraction(str(b))) for k, (a, b) in self.skeleton.cycles.items()}

    def links(self) -> list:
        return [tuple(x) for x in self.skeleton.links]

    def validate(self):
        m, c = self.model, self.constants
        if m.roof not in ("const", "cos", "stretch"):
            raise ConfigError(f"unknown roof {m.roof!r}")
        A = np.array(m.matrix, dtype=float)
        if A.shape != (2, 2) or round(np.linalg.det(A)) != 1 or abs(np.trace(A)) <= 2:
            raise ConfigError("matrix must be a hyperbolic element of SL(2, Z)")
        lam = max(abs(np.linalg.eigvals(A)))
        r_min = 1.0 if m.roof == "const" else (1.0 - m.delta if m.roof == "cos" else 1.0)
        if m.roof != "const" and not 0 <= m.delta < 1:
            raise ConfigError("delta must lie in [0, 1)")
        if not 0 < c.chi < math.log(lam):
            raise ConfigError(f"chi = {c.chi} must lie in (0, log lambda = {math.log(lam):.4f})")
        if not 0 < c.eps < c.rho:
            raise ConfigError(f"eps = {c.eps} must lie in (0, rho = {c.rho})")
        if not 0 < c.beta < 2:
            raise ConfigError(f"beta = {c.beta} must lie in (0, 2)")
        if not 0 < c.rho < r_min:
            raise ConfigError(f"rho = {c.rho} must lie below the minimum roof {r_min}")
        d = self.horizons.cylinder_depths
        if len(d) != 2 or not 1 <= d[0] < d[1] <= self.horizons.coding_depth:
            raise ConfigError("cylinder_depths must be [lo, hi] with hi <= coding_depth")
        if self.horizons.shadow_depth > self.horizons.encode_window:
            raise ConfigError("shadow_depth must not exceed encode_window")
        names = set(self.skeleton.cycles)
        for link in self.skeleton.links:
            if len(link) != 2 or not set(link) <= names:
                raise ConfigError(f"link {link} must name two configured cycles")
        try:
            self.cycle_fibers()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad cycle fiber: {exc}") from exc
        for f in fields(self.sampling):
            if getattr(self.sampling, f.name) < 1:
                raise ConfigError(f"sampling.{f.name} must be positive")


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    extra = set(data) - set(known)
    if extra:
        raise ConfigError(f"unknown keys in {where or 'config'}: {sorted(extra)}")
    kw = {}
    for name, val in data.items():
        f = known[name]
        proto = f.default_factory() if callable(f.default_factory) else None
        if proto is not None and hasattr(proto, "__dataclass_fields__"):
            kw[name] = _build(type(proto), val, f"{where}{name}.")
        else:
            kw[name] = val
    return cls(**kw)


def load_config(path) -> PipelineConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {p}: {exc}") from exc
    return PipelineConfig.from_dict(data)
