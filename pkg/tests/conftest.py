from fractions import Fraction
from pathlib import Path

import pytest

from hypcode.charts import Atlas, point_key
from hypcode.config import load_config
from hypcode.model_flow import ModelFlow, PointM
from hypcode.nuh_params import NUH
from hypcode.pipeline import Context
from hypcode.sections import build_sections


class World:
    """Model, section pair and atlas for one roof, plus the fixed-point orbit."""

    def __init__(self, roof):
        self.model = ModelFlow(roof=roof)
        self.nuh = NUH(self.model)
        self.lam, self.hat = build_sections(self.model)
        self.atlas = Atlas(self.model, self.nuh, self.lam, self.hat)
        col = self.lam.cells_containing(Fraction(0), Fraction(0))[0]
        self.fixed = PointM(Fraction(0), Fraction(0), self.lam.columns[col][0].height)
        y, n = self.atlas.f(self.fixed), 1
        while point_key(y) != point_key(self.fixed):
            y, n = self.atlas.f(y), n + 1
        self.period = n

    def disc_point(self, index, du=Fraction(1, 97), dv=Fraction(-1, 89)):
        d = self.lam.discs[index]
        c = d.center
        return PointM(Fraction(c[0]) + du, Fraction(c[1]) + dv, d.height)


_WORLDS = {}


def world_for(roof):
    if roof not in _WORLDS:
        _WORLDS[roof] = World(roof)
    return _WORLDS[roof]


@pytest.fixture(scope="session", params=["const", "cos"])
def world(request):
    return world_for(request.param)


@pytest.fixture(scope="session")
def const_world():
    return world_for("const")


@pytest.fixture(scope="session")
def cos_world():
    return world_for("cos")


CONFIGS = Path(__file__).resolve().parent.parent / "configs"
_CONTEXTS = {}


def context_for(roof):
    """Pipeline context for the shipped config of one roof, built once per session."""
    if roof not in _CONTEXTS:
        _CONTEXTS[roof] = Context(load_config(CONFIGS / f"{roof}.yaml"))
    return _CONTEXTS[roof]


@pytest.fixture(scope="session")
def const_ctx():
    return context_for("const")


@pytest.fixture(scope="session")
def cos_ctx():
    return context_for("cos")


@pytest.fixture(scope="session", params=["const", "cos"])
def ctx(request):
    return context_for(request.param)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[1]), s)):
            terminalreporter.write_line(line)
