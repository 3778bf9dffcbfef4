import csv
import json
from fractions import Fraction

import pytest

from charges.convexdec import PiecewiseLinearConvex, SampledConvex
from charges.errors import SchemaError
from charges.instances import (
    VerdictStore,
    decode_rational,
    encode,
    instance_from_json,
    load_instance,
    parse_companion,
    parse_conglomerability,
    parse_convex,
    parse_disintegration,
    parse_integral,
    parse_measure,
    parse_skorohod,
    serialize_verdict,
)
from charges.setcore import INFINITY, GroundSet

from conftest import INSTANCES_DIR


@pytest.mark.parametrize("name, kind", [
    ("check_no_representation", "conglomerability"),
    ("measure_coarse", "measure"),
    ("integral_uniform", "integral"),
    ("companion_extend", "companion"),
    ("companion_nulls", "companion_nulls"),
    ("disintegration_takeout", "disintegration"),
    ("convex_hinge", "convex"),
    ("convex_square_sampled", "convex"),
    ("skorohod_three_points", "skorohod"),
])
def test_bundled_instances_load(name, kind):
    instance = load_instance(INSTANCES_DIR / f"{name}.json")
    assert instance.id == name
    assert instance.kind == kind


def test_parse_measure_keeps_atom_order():
    ms, queries = parse_measure(load_instance(INSTANCES_DIR / "measure_coarse.json"))
    g = ms.ground
    assert ms.lam(g.subset(["a", "b"])) == Fraction(1, 2)
    assert ms.ring.union == g.subset(["a", "b", "c"])
    assert queries[-1] == g.subset(["c", "d"])


def test_parse_integral():
    ms, X = parse_integral(load_instance(INSTANCES_DIR / "integral_uniform.json"))
    assert X("3") == 3
    assert ms.lam.total == 1


def test_parse_conglomerability():
    inst = parse_conglomerability(load_instance(INSTANCES_DIR / "check_mixture.json"))
    assert inst.basis_labels == ("h1", "h2")
    assert inst.phi == (Fraction(3, 2), Fraction(1, 2))


def test_parse_companion_with_nulls():
    p = parse_companion(load_instance(INSTANCES_DIR / "companion_nulls.json"))
    assert p.labels == ("h1", "h2")
    assert p.neg is not None
    assert p.neg.union == p.omega_prime.subset(["3"])
    assert not p.probability


def test_parse_disintegration_with_takeout():
    inst, takeout = parse_disintegration(load_instance(INSTANCES_DIR / "disintegration_takeout.json"))
    assert inst.thetas == ("A", "B")
    assert takeout.G == {"A": "A", "B": "B"}
    assert takeout.states == GroundSet(["A", "B", "C"])


def test_parse_disintegration_reads_values_in_file_order(write_instance):
    path = write_instance("order", "disintegration", {
        "omega": ["a", "b", "c"],
        "algebra": [["c"], ["a", "b"]],
        "m": [1, 0],
        "Q": {"t": [1, 0]},
    })
    inst, _ = parse_disintegration(load_instance(path))
    g = inst.algebra.ground
    assert inst.m(g.subset(["c"])) == 1
    assert inst.m(g.subset(["a", "b"])) == 0


def test_parse_convex_variants():
    hinge = parse_convex(load_instance(INSTANCES_DIR / "convex_hinge.json"))
    assert isinstance(hinge.phi, PiecewiseLinearConvex)
    assert hinge.thresholds == (-2, 0, 2)
    sampled = parse_convex(load_instance(INSTANCES_DIR / "convex_square_sampled.json"))
    assert isinstance(sampled.phi, SampledConvex)
    assert sampled.phi.end == 2
    assert sampled.x0 is None


def test_parse_skorohod():
    p = parse_skorohod(load_instance(INSTANCES_DIR / "skorohod_three_points.json"))
    assert len(p.enum) == 5
    assert p.samples == 20000
    assert p.tests[1] == {"s4": -1, "s5": 7}


@pytest.mark.parametrize("payload, location", [
    ({"basis": ["h1"], "omega": ["a"], "T": [[1]]}, "$.payload"),
    ({"basis": ["h1"], "omega": ["a"], "T": [["x"]], "phi": [0]}, "$.payload.T[0][0]"),
    ({"basis": ["h1"], "omega": ["a", "b"], "T": [[1]], "phi": [0]}, "$.payload.T[0]"),
    ({"basis": ["h1"], "omega": ["a"], "T": [[1]], "phi": [True]}, "$.payload.phi[0]"),
    ({"basis": ["h1", "h1"], "omega": ["a"], "T": [[1], [1]], "phi": [0, 0]}, "$.payload.basis"),
])
def test_schema_errors_carry_locations(payload, location):
    instance = instance_from_json({"id": "bad", "kind": "conglomerability", "payload": payload})
    with pytest.raises(SchemaError) as info:
        parse_conglomerability(instance)
    assert info.value.location == location


def test_envelope_errors(tmp_path):
    with pytest.raises(SchemaError) as info:
        instance_from_json({"kind": "nonsense", "payload": {}})
    assert info.value.location == "$.kind"
    with pytest.raises(SchemaError):
        instance_from_json({"kind": "measure", "payload": []})
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(SchemaError) as info:
        load_instance(broken)
    assert info.value.location == "$"


def test_instance_id_defaults_to_file_stem(write_instance):
    path = write_instance("stem_only", "skorohod", {"labels": ["a"], "m": {"a": 1}})
    data = json.loads(path.read_text())
    del data["id"]
    path.write_text(json.dumps(data))
    assert load_instance(path).id == "stem_only"


def test_structure_limit(write_instance):
    path = write_instance("big", "measure", {"omega": [str(i) for i in range(5)], "ring": "power",
                                             "lambda": [0] * 5})
    with pytest.raises(SchemaError) as info:
        parse_measure(load_instance(path), max_atoms=4)
    assert info.value.location == "$.payload.omega"


def test_encode_rationals():
    assert encode({"x": Fraction(1, 2), "y": [Fraction(3), INFINITY], "z": None}) == \
        {"x": "1/2", "y": ["3/1", "inf"], "z": None}
    assert decode_rational("inf") == INFINITY
    assert decode_rational("-5/10") == Fraction(-1, 2)
    assert serialize_verdict({"b": 1, "a": Fraction(1, 3)}) == '{\n  "a": "1/3",\n  "b": 1\n}\n'


def test_verdict_store_writes_and_summarizes(tmp_path):
    store = VerdictStore()
    instance = tmp_path / "one.json"
    target = store.write(instance, {"id": "one", "kind": "measure", "command": "integrate", "outcome": "value"}, 0)
    assert target.name == "one.verdict.json"
    assert json.loads(target.read_text())["outcome"] == "value"
    assert store.is_verdict(target) and not store.is_verdict(instance)
    summary = tmp_path / "summary.csv"
    assert store.export_summary_csv(summary)
    with open(summary, newline="") as f:
        rows = list(csv.reader(f))
    assert rows == [["id", "kind", "command", "outcome", "exit_code"], ["one", "measure", "integrate", "value", "0"]]
