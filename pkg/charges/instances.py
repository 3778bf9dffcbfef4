# charges/instances.py
# Reading instance files and writing verdict files. Instances are JSON
# documents {"id", "kind", "payload"} with every rational written as an
# integer or a "p/q" string; parse errors carry the JSON location of the
# offending value. VerdictStore owns all output: atomic verdict writes and
# the CSV summary of a batch.

import csv
import json
import logging
import math
import os
import tempfile
import threading
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .conglomerate import ConglomerabilityInstance, DisintegrationInstance, IdealOfSets
from .convexdec import ConvexInput, PiecewiseLinearConvex, SampledConvex
from .errors import ChargeError, SchemaError
from .integrate import RandomQuantity
from .setcore import (
    INFINITY,
    AdditiveSetFunction,
    GroundSet,
    MeasureStructure,
    SetRing,
    Subset,
    as_fraction,
    format_fraction,
    power_set_ring,
)
from .skorohod import Enumeration

logger = logging.getLogger(__name__)

KINDS = ("measure", "integral", "conglomerability", "companion", "companion_nulls",
         "disintegration", "convex", "skorohod")


@dataclass(frozen=True)
class Instance:
    "A parsed instance file; the payload stays raw until a command reads it."

    id: str
    kind: str
    payload: Mapping[str, Any]
    source: Optional[Path] = None


class _Reader:
    """A JSON value together with its location, for location-bearing diagnostics."""

    def __init__(self, data: Any, location: str = "$"):
        self.data = data
        self.location = location

    def fail(self, message: str) -> SchemaError:
        return SchemaError(self.location, message)

    def has(self, key: str) -> bool:
        return isinstance(self.data, dict) and key in self.data

    def field(self, key: str) -> "_Reader":
        if not isinstance(self.data, dict):
            raise self.fail("expected an object")
        if key not in self.data:
            raise self.fail(f"missing field '{key}'")
        return _Reader(self.data[key], f"{self.location}.{key}")

    def optional(self, key: str) -> Optional["_Reader"]:
        return self.field(key) if self.has(key) else None

    def items(self) -> List["_Reader"]:
        if not isinstance(self.data, list):
            raise self.fail("expected a list")
        return [_Reader(v, f"{self.location}[{i}]") for i, v in enumerate(self.data)]

    def entries(self) -> List[Tuple[str, "_Reader"]]:
        if not isinstance(self.data, dict):
            raise self.fail("expected an object")
        return [(str(k), _Reader(v, f"{self.location}.{k}")) for k, v in self.data.items()]

    def rational(self) -> Fraction:
        if isinstance(self.data, bool) or not isinstance(self.data, (int, str)):
            raise self.fail(f"expected an integer or a \"p/q\" string, got {json.dumps(self.data)}")
        try:
            return as_fraction(self.data)
        except ValueError as e:
            raise self.fail(str(e)) from None

    def string(self) -> str:
        if not isinstance(self.data, (str, int)) or isinstance(self.data, bool):
            raise self.fail("expected a label")
        return str(self.data)

    def integer(self) -> int:
        if not isinstance(self.data, int) or isinstance(self.data, bool):
            raise self.fail("expected an integer")
        return self.data

    def boolean(self) -> bool:
        if not isinstance(self.data, bool):
            raise self.fail("expected true or false")
        return self.data

    def labels(self) -> List[str]:
        labels = [r.string() for r in self.items()]
        if len(set(labels)) != len(labels):
            raise self.fail("labels must be distinct")
        return labels

    def subset(self, ground: GroundSet) -> Subset:
        members = []
        for r in self.items():
            label = r.string()
            if label not in ground.index:
                raise r.fail(f"unknown label '{label}'")
            members.append(label)
        return Subset(ground, members)

    def label_in(self, ground: GroundSet) -> str:
        label = self.string()
        if label not in ground.index:
            raise self.fail(f"unknown label '{label}'")
        return label


# --- Loading ---
def load_instance(path: Path) -> Instance:
    """Reads one instance file.

    Raises:
        SchemaError: If the file is not JSON or lacks a valid id, kind or payload.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError("$", f"not valid JSON: {e.msg} (line {e.lineno}, column {e.colno})") from None
    except OSError as e:
        raise SchemaError("$", f"cannot read {path}: {e}") from None
    return instance_from_json(data, path)


def instance_from_json(data: Any, source: Optional[Path] = None) -> Instance:
    root = _Reader(data)
    kind = root.field("kind").string()
    if kind not in KINDS:
        raise root.field("kind").fail(f"unknown kind '{kind}', expected one of {', '.join(KINDS)}")
    instance_id = root.field("id").string() if root.has("id") else (source.stem if source else "instance")
    payload = root.field("payload")
    if not isinstance(payload.data, dict):
        raise payload.fail("expected an object")
    return Instance(instance_id, kind, payload.data, source)


def _payload(instance: Instance) -> _Reader:
    return _Reader(instance.payload, "$.payload")


# --- Kind-specific parsers ---
def _read_structure(r: _Reader, max_atoms: Optional[int] = None) -> MeasureStructure:
    """{"omega": [...], "ring": "power" | [[...], ...], "lambda": [...]} with one value per ring atom."""
    omega_r = r.field("omega")
    labels = omega_r.labels()
    if not labels:
        raise omega_r.fail("the ground set must be nonempty")
    if max_atoms is not None and len(labels) > max_atoms:
        raise omega_r.fail(f"{len(labels)} atoms exceed the configured limit of {max_atoms}")
    ground = GroundSet(labels)
    ring_r = r.field("ring")
    if ring_r.data == "power":
        ring = power_set_ring(ground)
        atoms = list(ring.atoms)
    else:
        atoms = [a.subset(ground) for a in ring_r.items()]
        try:
            ring = SetRing(ground, atoms)
        except ChargeError as e:
            raise ring_r.fail(str(e)) from None
    lam_r = r.field("lambda")
    values = lam_r.items()
    if len(values) != len(atoms):
        raise lam_r.fail(f"{len(values)} values for {len(atoms)} ring atoms")
    atom_values = {}
    for atom, v in zip(atoms, values):
        value = v.rational()
        if value < 0:
            raise v.fail("measure values must be nonnegative")
        atom_values[atom] = value
    return MeasureStructure(ring, AdditiveSetFunction(ring, atom_values))


def _read_quantity(r: _Reader, ground: GroundSet) -> RandomQuantity:
    values = {}
    for label, v in r.entries():
        if label not in ground.index:
            raise v.fail(f"unknown label '{label}'")
        values[label] = v.rational()
    for label in ground.atoms:
        if label not in values:
            raise r.fail(f"no value for '{label}'")
    return RandomQuantity(ground, values)


def _read_map(r: _Reader, domain: GroundSet, codomain: GroundSet) -> Dict[str, str]:
    mapping = {}
    for label, v in r.entries():
        if label not in domain.index:
            raise v.fail(f"unknown label '{label}'")
        mapping[label] = v.label_in(codomain)
    for label in domain.atoms:
        if label not in mapping:
            raise r.fail(f"'{label}' is not mapped")
    return mapping


def parse_measure(instance: Instance, max_atoms: Optional[int] = None) -> Tuple[MeasureStructure, List[Subset]]:
    r = _payload(instance)
    ms = _read_structure(r, max_atoms)
    queries_r = r.optional("queries")
    queries = [q.subset(ms.ground) for q in queries_r.items()] if queries_r else []
    return ms, queries


def parse_integral(instance: Instance, max_atoms: Optional[int] = None) -> Tuple[MeasureStructure, RandomQuantity]:
    r = _payload(instance)
    ms = _read_structure(r, max_atoms)
    return ms, _read_quantity(r.field("X"), ms.ground)


def parse_conglomerability(instance: Instance) -> ConglomerabilityInstance:
    r = _payload(instance)
    basis = r.field("basis").labels()
    omega = GroundSet(r.field("omega").labels())
    T_r = r.field("T")
    rows = T_r.items()
    if len(rows) != len(basis):
        raise T_r.fail(f"{len(rows)} rows for {len(basis)} basis functions")
    T = []
    for row in rows:
        entries = row.items()
        if len(entries) != len(omega):
            raise row.fail(f"{len(entries)} entries for {len(omega)} columns")
        T.append(tuple(e.rational() for e in entries))
    phi_r = r.field("phi")
    phi = phi_r.items()
    if len(phi) != len(basis):
        raise phi_r.fail(f"{len(phi)} values for {len(basis)} basis functions")
    return ConglomerabilityInstance(tuple(basis), omega, tuple(T), tuple(p.rational() for p in phi))


@dataclass(frozen=True)
class CompanionProblem:
    m_struct: MeasureStructure
    X: Dict[str, str]
    H: Tuple[RandomQuantity, ...]
    labels: Tuple[str, ...]
    Xprime: Dict[str, str]
    omega_prime: GroundSet
    probability: bool = False
    neg: Optional[IdealOfSets] = None


def parse_companion(instance: Instance, max_atoms: Optional[int] = None) -> CompanionProblem:
    r = _payload(instance)
    ms = _read_structure(r.field("structure"), max_atoms)
    states = GroundSet(r.field("states").labels())
    X = _read_map(r.field("X"), ms.ground, states)
    H_r = r.field("H")
    labels, H = [], []
    for label, h in H_r.entries():
        labels.append(label)
        H.append(_read_quantity(h, states))
    if not H:
        raise H_r.fail("at least one test function is needed")
    omega_prime = GroundSet(r.field("omega_prime").labels())
    Xprime = _read_map(r.field("X_prime"), omega_prime, states)
    probability = r.field("probability").boolean() if r.has("probability") else False
    neg = None
    if instance.kind == "companion_nulls":
        neg = IdealOfSets(omega_prime, tuple(g.subset(omega_prime) for g in r.field("null_generators").items()))
    return CompanionProblem(ms, X, tuple(H), tuple(labels), Xprime, omega_prime, probability, neg)


@dataclass(frozen=True)
class TakeoutSpec:
    states: GroundSet
    X: Dict[str, str]
    G: Dict[str, str]


def parse_disintegration(instance: Instance) -> Tuple[DisintegrationInstance, Optional[TakeoutSpec]]:
    r = _payload(instance)
    ground = GroundSet(r.field("omega").labels())
    algebra_r = r.field("algebra")
    if algebra_r.data == "power":
        algebra = power_set_ring(ground)
        atoms = list(algebra.atoms)
    else:
        atoms = [a.subset(ground) for a in algebra_r.items()]
        try:
            algebra = SetRing(ground, atoms)
        except ChargeError as e:
            raise algebra_r.fail(str(e)) from None

    def per_atom(v: _Reader) -> AdditiveSetFunction:
        values = v.items()
        if len(values) != len(atoms):
            raise v.fail(f"{len(values)} values for {len(atoms)} algebra atoms")
        atom_values = {a: x.rational() for a, x in zip(atoms, values)}
        try:
            return AdditiveSetFunction(algebra, atom_values)
        except ChargeError as e:
            raise v.fail(str(e)) from None

    m = per_atom(r.field("m"))
    Q_r = r.field("Q")
    Q = {theta: per_atom(v) for theta, v in Q_r.entries()}
    try:
        inst = DisintegrationInstance(algebra, m, tuple(Q), Q)
    except ChargeError as e:
        raise r.fail(str(e)) from None
    takeout = None
    t = r.optional("takeout")
    if t is not None:
        states = GroundSet(t.field("states").labels())
        X = _read_map(t.field("X"), ground, states)
        G = _read_map(t.field("G"), GroundSet(inst.thetas), states)
        takeout = TakeoutSpec(states, X, G)
    return inst, takeout


@dataclass(frozen=True)
class ConvexProblem:
    phi: ConvexInput
    x0: Optional[Fraction] = None
    thresholds: Tuple[Fraction, ...] = ()
    checks: Tuple[Fraction, ...] = ()


def parse_convex(instance: Instance) -> ConvexProblem:
    r = _payload(instance)
    if r.has("piecewise_linear"):
        p = r.field("piecewise_linear")
        anchor_r = p.optional("anchor")
        anchor = (0, 0)
        if anchor_r is not None:
            pair = anchor_r.items()
            if len(pair) != 2:
                raise anchor_r.fail("expected [x_ref, value]")
            anchor = (pair[0].rational(), pair[1].rational())
        try:
            phi: ConvexInput = PiecewiseLinearConvex([b.rational() for b in p.field("breakpoints").items()],
                                                     [s.rational() for s in p.field("slopes").items()], anchor)
        except ValueError as e:
            raise p.fail(str(e)) from None
    elif r.has("sampled"):
        s = r.field("sampled")
        try:
            phi = SampledConvex(s.field("origin").rational(), s.field("step").rational(),
                                [v.rational() for v in s.field("values").items()])
        except ValueError as e:
            raise s.fail(str(e)) from None
    else:
        raise r.fail("expected a 'piecewise_linear' or a 'sampled' function")
    x0 = r.field("x0").rational() if r.has("x0") else None
    thresholds = tuple(t.rational() for t in r.field("thresholds").items()) if r.has("thresholds") else ()
    checks = tuple(c.rational() for c in r.field("checks").items()) if r.has("checks") else ()
    return ConvexProblem(phi, x0, thresholds, checks)


@dataclass(frozen=True)
class SkorohodProblem:
    enum: Enumeration
    m: Dict[str, Fraction]
    tests: Tuple[Dict[str, Fraction], ...]
    samples: Optional[int] = None


def parse_skorohod(instance: Instance) -> SkorohodProblem:
    r = _payload(instance)
    enum = Enumeration(tuple(r.field("labels").labels()))
    ground = GroundSet(enum.labels)
    m = {}
    for label, v in r.field("m").entries():
        if label not in ground.index:
            raise v.fail(f"unknown label '{label}'")
        m[label] = v.rational()
    tests = []
    for t in (r.field("tests").items() if r.has("tests") else []):
        h = {}
        for label, v in t.entries():
            if label not in ground.index:
                raise v.fail(f"unknown label '{label}'")
            h[label] = v.rational()
        tests.append(h)
    samples = r.field("samples").integer() if r.has("samples") else None
    return SkorohodProblem(enum, m, tuple(tests), samples)


# --- Verdict encoding ---
def encode(value: Any) -> Any:
    "Fractions become \"p/q\", infinity becomes \"inf\", tuples become lists."
    if isinstance(value, bool) or value is None or isinstance(value, (str, int)):
        return value
    if isinstance(value, Fraction):
        return format_fraction(value)
    if isinstance(value, float):
        return "inf" if value == INFINITY else value
    if isinstance(value, Subset):
        return list(value)
    if isinstance(value, Mapping):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    raise TypeError(f"cannot encode {type(value).__name__} in a verdict")


def decode_rational(value: Any) -> Any:
    if value == "inf":
        return math.inf
    return as_fraction(value)


def serialize_verdict(verdict: Mapping[str, Any]) -> str:
    return json.dumps(encode(verdict), sort_keys=True, indent=2) + "\n"


class VerdictStore:
    """Writes verdict files next to their instances and keeps the batch summary."""

    def __init__(self, suffix: str = ".verdict.json"):
        """
        Args:
            suffix: Appended to an instance's stem to name its verdict file.
        """
        self.suffix = suffix
        self.lock = threading.Lock()
        self.rows: List[Tuple[Path, Tuple[str, str, str, str, int]]] = []

    def verdict_path(self, instance_path: Path) -> Path:
        return instance_path.with_name(instance_path.stem + self.suffix)

    def is_verdict(self, path: Path) -> bool:
        return path.name.endswith(self.suffix)

    def write(self, instance_path: Path, verdict: Mapping[str, Any], exit_code: int) -> Path:
        """Writes the verdict atomically: a temporary file in the same directory, then a rename."""
        target = self.verdict_path(instance_path)
        text = serialize_verdict(verdict)
        fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(text)
            os.replace(tmp, target)
        except OSError:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        with self.lock:
            self.rows.append((instance_path, (str(verdict.get("id", "")), str(verdict.get("kind", "")),
                              str(verdict.get("command", "")), str(verdict.get("outcome", "")), exit_code)))
        logger.debug(f"Verdict written to {target}")
        return target

    def export_summary_csv(self, output_path: Path, order: Optional[Sequence[Path]] = None) -> bool:
        """Exports (id, kind, command, outcome, exit_code) for every verdict written so far.

        Args:
            output_path: The CSV file to write.
            order: Instance paths in batch order; rows follow it instead of completion order.
        """
        logger.info(f"Exporting batch summary to {output_path}...")
        with self.lock:
            rows = list(self.rows)
        if order is not None:
            rank = {path: k for k, path in enumerate(order)}
            rows.sort(key=lambda row: rank.get(row[0], len(rank)))
        try:
            with open(output_path, "w", newline="", encoding="utf-8") as csvfile:
                writer = csv.writer(csvfile)
                writer.writerow(["id", "kind", "command", "outcome", "exit_code"])
                for _, row in rows:
                    writer.writerow(row)
            logger.info(f"Successfully exported {len(rows)} rows.")
            return True
        except IOError as e:
            logger.error(f"Failed to write summary CSV: {e}")
            return False
