import json
import random
import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from charges.setcore import GroundSet, MeasureStructure, SetRing, AdditiveSetFunction, point_mass_structure

INSTANCES_DIR = Path(__file__).resolve().parents[1] / "instances"


@pytest.fixture
def rng():
    return random.Random(20240917)


@pytest.fixture
def ground3():
    return GroundSet(["1", "2", "3"])


@pytest.fixture
def uniform3(ground3):
    third = Fraction(1, 3)
    return point_mass_structure(ground3, {"1": third, "2": third, "3": third})


@pytest.fixture
def coarse():
    """Ring with atoms {a,b} (mass 1/2) and {c} (mass 1/2); d is outside the union."""
    ground = GroundSet(["a", "b", "c", "d"])
    ab, c = ground.subset(["a", "b"]), ground.subset(["c"])
    ring = SetRing(ground, [ab, c])
    return MeasureStructure(ring, AdditiveSetFunction(ring, {ab: Fraction(1, 2), c: Fraction(1, 2)}))


@pytest.fixture
def write_instance(tmp_path):
    "Writes an instance envelope to tmp_path and returns its path."
    def _write(name, kind, payload, **extra):
        path = tmp_path / f"{name}.json"
        body = {"id": name, "kind": kind, "payload": payload}
        body.update(extra)
        path.write_text(json.dumps(body))
        return path
    return _write
