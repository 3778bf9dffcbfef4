# charges/setcore.py
# Finite ground sets, rings of subsets, additive set functions and the
# outer/inner measures they induce. Every other module builds on these types.
#
# A finite ring is fully described by its atoms (its minimal nonempty members),
# which partition the union of the ring. Members are exactly the unions of
# atoms, so the ring keeps the atoms and enumerates its member list on demand.

import itertools
import logging
import math
from fractions import Fraction
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple, Union

from .errors import AdditivityError, ChargeError, GroundSetMismatchError, RingError

logger = logging.getLogger(__name__)

# --- Extended rationals ---
# inf over an empty family is +infinity; math.inf compares exactly against
# Fraction, so it is the only float that ever enters the exact code paths.
INFINITY = math.inf
ExtendedRational = Union[Fraction, float]

Rational = Union[Fraction, int, str]


def as_fraction(value: Rational) -> Fraction:
    """Converts an int, a Fraction or a "p/q" string into an exact Fraction.

    Floats are refused: a binary float is almost never the rational the
    caller had in mind.
    """
    if isinstance(value, bool):
        raise ValueError(f"boolean {value!r} is not a rational")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"cannot read {value!r} as a rational: {e}") from None
    raise ValueError(f"{type(value).__name__} {value!r} is not an exact rational")


def format_fraction(value: ExtendedRational) -> str:
    """Writes a rational as "p/q" (always with a denominator) or "inf"."""
    if value == INFINITY:
        return "inf"
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


# --- Ground sets and subsets ---
class GroundSet:
    """An ordered, finite, nonempty set of atom labels."""

    def __init__(self, atoms: Iterable[str]):
        labels = tuple(str(a) for a in atoms)
        if not labels:
            raise ChargeError("a ground set needs at least one atom")
        if len(set(labels)) != len(labels):
            raise ChargeError(f"duplicate atom labels in {list(labels)}")
        self.atoms: Tuple[str, ...] = labels
        self.index: Dict[str, int] = {a: i for i, a in enumerate(labels)}
        self._hash = hash(labels)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GroundSet) and self.atoms == other.atoms

    def __hash__(self) -> int:
        return self._hash

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self) -> Iterator[str]:
        return iter(self.atoms)

    def __repr__(self) -> str:
        return f"GroundSet({list(self.atoms)})"

    def subset(self, members: Iterable[str]) -> "Subset":
        return Subset(self, members)

    @cached_property
    def empty(self) -> "Subset":
        return Subset(self, ())

    @cached_property
    def full(self) -> "Subset":
        return Subset(self, self.atoms)


class Subset:
    """A subset of a ground set. Immutable and hashable."""

    __slots__ = ("ground", "members", "_key")

    def __init__(self, ground: GroundSet, members: Iterable[str]):
        members = frozenset(str(m) for m in members)
        unknown = members.difference(ground.index)
        if unknown:
            raise ChargeError(f"{sorted(unknown)} are not atoms of {ground!r}")
        self.ground = ground
        self.members: FrozenSet[str] = members
        self._key: Tuple[int, ...] = tuple(sorted(ground.index[m] for m in members))

    @property
    def key(self) -> Tuple[int, ...]:
        "Canonical sort key: lexicographic on sorted atom indices."
        return self._key

    def _same_ground(self, other: "Subset") -> None:
        if self.ground != other.ground:
            raise GroundSetMismatchError(f"{self} and {other} live on different ground sets")

    def __or__(self, other: "Subset") -> "Subset":
        self._same_ground(other)
        return Subset(self.ground, self.members | other.members)

    def __and__(self, other: "Subset") -> "Subset":
        self._same_ground(other)
        return Subset(self.ground, self.members & other.members)

    def __sub__(self, other: "Subset") -> "Subset":
        self._same_ground(other)
        return Subset(self.ground, self.members - other.members)

    def __le__(self, other: "Subset") -> bool:
        self._same_ground(other)
        return self.members <= other.members

    def isdisjoint(self, other: "Subset") -> bool:
        self._same_ground(other)
        return self.members.isdisjoint(other.members)

    def complement(self) -> "Subset":
        return Subset(self.ground, set(self.ground.atoms) - self.members)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Subset) and self.ground == other.ground and self.members == other.members

    def __hash__(self) -> int:
        return hash(self._key)

    def __len__(self) -> int:
        return len(self.members)

    def __bool__(self) -> bool:
        return bool(self.members)

    def __iter__(self) -> Iterator[str]:
        return (self.ground.atoms[i] for i in self._key)

    def __contains__(self, atom: str) -> bool:
        return atom in self.members

    def __repr__(self) -> str:
        return "{" + ",".join(self) + "}"


def canonical_order(sets: Iterable[Subset]) -> List[Subset]:
    return sorted(set(sets), key=lambda s: s.key)


def all_subsets(ground: GroundSet) -> Iterator[Subset]:
    "Every subset of the ground set, in canonical order. Exponential; desk scale only."
    for r in range(len(ground) + 1):
        yield from (Subset(ground, c) for c in itertools.combinations(ground.atoms, r))


# --- Rings ---
class SetRing:
    """A finite ring of subsets, stored through its atoms.

    Args:
        ground: The ground set the ring lives on.
        atoms: Pairwise disjoint nonempty subsets; the ring is every union of them.
    """

    def __init__(self, ground: GroundSet, atoms: Iterable[Subset] = ()):
        atoms = canonical_order(atoms)
        seen: set = set()
        for a in atoms:
            if a.ground != ground:
                raise GroundSetMismatchError(f"ring atom {a} is not on {ground!r}")
            if not a:
                raise RingError("ring atoms must be nonempty")
            if seen & a.members:
                raise RingError(f"ring atom {a} overlaps another atom")
            seen |= a.members
        self.ground = ground
        self.atoms: Tuple[Subset, ...] = tuple(atoms)
        self.union = Subset(ground, seen)
        self._owner: Dict[str, Subset] = {m: a for a in self.atoms for m in a.members}

    @classmethod
    def from_atoms(cls, ground: GroundSet, atoms: Iterable[Iterable[str]]) -> "SetRing":
        "The ring whose atoms are the given label groups."
        return cls(ground, (Subset(ground, labels) for labels in atoms))

    @classmethod
    def from_sets(cls, ground: GroundSet, sets: Iterable[Subset]) -> "SetRing":
        """Builds a ring from an explicit member list, checking every closure condition.

        Raises:
            RingError: If the list misses the empty set or is not closed under
                pairwise union and set difference.
        """
        members = set(sets)
        for s in members:
            if s.ground != ground:
                raise GroundSetMismatchError(f"set {s} is not on {ground!r}")
        if ground.empty not in members:
            raise RingError("a ring must contain the empty set")
        for a, b in itertools.combinations_with_replacement(canonical_order(members), 2):
            for derived, op in ((a | b, "∪"), (a - b, "\\"), (b - a, "\\")):
                if derived not in members:
                    raise RingError(f"not closed: {a} {op} {b} = {derived} is missing")
        nonempty = [s for s in members if s]
        atoms = [s for s in nonempty if not any(t != s and t <= s for t in nonempty)]
        return cls(ground, atoms)

    @cached_property
    def sets(self) -> Tuple[Subset, ...]:
        "Every member of the ring in canonical order (2**len(atoms) of them)."
        members = []
        for r in range(len(self.atoms) + 1):
            for combo in itertools.combinations(self.atoms, r):
                members.append(Subset(self.ground, itertools.chain.from_iterable(a.members for a in combo)))
        return tuple(canonical_order(members))

    @property
    def size(self) -> int:
        return 2 ** len(self.atoms)

    def contains(self, subset: Subset) -> bool:
        if subset.ground != self.ground:
            raise GroundSetMismatchError(f"{subset} is not on {self.ground!r}")
        if not subset.members <= self.union.members:
            return False
        return all(self._owner[m].members <= subset.members for m in subset.members)

    def __contains__(self, subset: Subset) -> bool:
        return self.contains(subset)

    def decompose(self, subset: Subset) -> List[Subset]:
        "The atoms whose union is the given member."
        if not self.contains(subset):
            raise RingError(f"{subset} is not a member of the ring")
        return [a for a in self.atoms if a.members <= subset.members]

    def atoms_meeting(self, subset: Subset) -> List[Subset]:
        return [a for a in self.atoms if not a.members.isdisjoint(subset.members)]

    def atoms_inside(self, subset: Subset) -> List[Subset]:
        return [a for a in self.atoms if a.members <= subset.members]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SetRing) and self.ground == other.ground and self.atoms == other.atoms

    def __hash__(self) -> int:
        return hash((self.ground, self.atoms))

    def __repr__(self) -> str:
        return f"SetRing(atoms={list(self.atoms)})"


def generate_ring(ground: GroundSet, generators: Iterable[Subset]) -> SetRing:
    """The smallest ring containing every generator.

    Points of the generators' union are grouped by which generators contain
    them; each nonempty group is an intersection of generators minus a union
    of generators, hence a member, and these groups are the atoms.
    """
    generators = canonical_order(generators)
    for g in generators:
        if g.ground != ground:
            raise GroundSetMismatchError(f"generator {g} is not on {ground!r}")
    classes: Dict[Tuple[bool, ...], List[str]] = {}
    for atom in ground.atoms:
        signature = tuple(atom in g for g in generators)
        if any(signature):
            classes.setdefault(signature, []).append(atom)
    ring = SetRing(ground, (Subset(ground, members) for members in classes.values()))
    logger.debug(f"Generated ring from {len(generators)} generators: {len(ring.atoms)} atoms")
    return ring


def power_set_ring(ground: GroundSet) -> SetRing:
    return SetRing.from_atoms(ground, ([a] for a in ground.atoms))


def ring_atoms(ring: SetRing) -> List[Subset]:
    "Minimal nonempty members of the ring; they partition its union."
    return list(ring.atoms)


# --- Additive set functions ---
class AdditiveSetFunction:
    """A nonnegative additive set function on a finite ring.

    Args:
        ring: The ring it is defined on.
        atom_values: Nonnegative value of every ring atom.
    """

    def __init__(self, ring: SetRing, atom_values: Mapping[Subset, Rational]):
        values: Dict[Subset, Fraction] = {}
        for atom in ring.atoms:
            if atom not in atom_values:
                raise AdditivityError(f"no value given for ring atom {atom}")
            v = as_fraction(atom_values[atom])
            if v < 0:
                raise AdditivityError(f"negative value {v} on {atom}")
            values[atom] = v
        extra = [s for s in atom_values if s not in values]
        if extra:
            raise AdditivityError(f"{extra} are not atoms of the ring")
        self.ring = ring
        self.atom_values: Dict[Subset, Fraction] = values

    @classmethod
    def from_values(cls, ring: SetRing, values: Mapping[Subset, Rational]) -> "AdditiveSetFunction":
        """Builds the function from values on ring members, checking additivity.

        Every atom must be valued; any other member given must equal the sum of
        its atoms (equivalently, modularity holds), and the empty set must map to 0.
        """
        values = {s: as_fraction(v) for s, v in values.items()}
        for s in values:
            if not ring.contains(s):
                raise AdditivityError(f"{s} is not a member of the ring")
        if values.get(ring.ground.empty, Fraction(0)) != 0:
            raise AdditivityError("the empty set must have value 0")
        missing = [a for a in ring.atoms if a not in values]
        if missing:
            raise AdditivityError(f"no value given for ring atoms {missing}")
        lam = cls(ring, {a: values[a] for a in ring.atoms})
        for s, v in values.items():
            if lam(s) != v:
                raise AdditivityError(f"value {v} on {s} differs from the sum {lam(s)} over its atoms")
        return lam

    def __call__(self, subset: Subset) -> Fraction:
        return sum((self.atom_values[a] for a in self.ring.decompose(subset)), Fraction(0))

    @cached_property
    def values(self) -> Dict[Subset, Fraction]:
        "Value of every ring member, in canonical order."
        return {s: self(s) for s in self.ring.sets}

    @property
    def total(self) -> Fraction:
        return sum(self.atom_values.values(), Fraction(0))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AdditiveSetFunction) and self.ring == other.ring and self.atom_values == other.atom_values

    def __hash__(self) -> int:
        return hash((self.ring, tuple(self.atom_values[a] for a in self.ring.atoms)))

    def __repr__(self) -> str:
        parts = ", ".join(f"{a}: {v}" for a, v in self.atom_values.items())
        return f"AdditiveSetFunction({parts})"


def is_modular(lam: AdditiveSetFunction) -> bool:
    "Exhaustive pairwise modularity check over every ring member."
    members = lam.ring.sets
    return all(lam(a) + lam(b) == lam(a | b) + lam(a & b) for a, b in itertools.combinations_with_replacement(members, 2))


# --- Measure structures ---
class MeasureStructure:
    """A ring paired with a nonnegative additive set function on it."""

    def __init__(self, ring: SetRing, lam: AdditiveSetFunction):
        if lam.ring != ring:
            raise AdditivityError("the set function is defined on a different ring")
        self.ring = ring
        self.lam = lam

    @property
    def ground(self) -> GroundSet:
        return self.ring.ground

    @cached_property
    def carrier(self) -> "MeasureStructure":
        return carrier_ring(self)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MeasureStructure) and self.lam == other.lam

    def __hash__(self) -> int:
        return hash(self.lam)

    def __repr__(self) -> str:
        return f"MeasureStructure({self.lam.atom_values})"


def structure_from_atoms(ground: GroundSet, atom_values: Mapping[Subset, Rational]) -> MeasureStructure:
    ring = SetRing(ground, atom_values.keys())
    return MeasureStructure(ring, AdditiveSetFunction(ring, atom_values))


def point_mass_structure(ground: GroundSet, weights: Mapping[str, Rational]) -> MeasureStructure:
    "The power-set structure giving each atom its weight (missing atoms weigh 0)."
    ring = power_set_ring(ground)
    values = {Subset(ground, [a]): as_fraction(weights.get(a, 0)) for a in ground.atoms}
    return MeasureStructure(ring, AdditiveSetFunction(ring, values))


def _check_ground(ms: MeasureStructure, subset: Subset) -> None:
    if subset.ground != ms.ground:
        raise GroundSetMismatchError(f"{subset} is not on the structure's ground set")


def outer_measure(ms: MeasureStructure, subset: Subset) -> ExtendedRational:
    """inf{λ(A) : A in the ring, E ⊆ A}, or INFINITY when no member covers E.

    The smallest cover is the union of the atoms meeting E.
    """
    _check_ground(ms, subset)
    if not subset.members <= ms.ring.union.members:
        return INFINITY
    return sum((ms.lam.atom_values[a] for a in ms.ring.atoms_meeting(subset)), Fraction(0))


def inner_measure(ms: MeasureStructure, subset: Subset) -> Fraction:
    "sup{λ(B) : B in the ring, B ⊆ E}; the largest such B is the union of the atoms inside E."
    _check_ground(ms, subset)
    return sum((ms.lam.atom_values[a] for a in ms.ring.atoms_inside(subset)), Fraction(0))


def extension_value(ms: MeasureStructure, subset: Subset) -> Optional[Fraction]:
    "Value of the unique extension of λ at E, or None when E is not carried."
    outer = outer_measure(ms, subset)
    inner = inner_measure(ms, subset)
    if outer == INFINITY or outer != inner:
        return None
    return inner


def carrier_ring(ms: MeasureStructure) -> MeasureStructure:
    """The structure (A(λ), extension of λ) where A(λ) = {E : λ*(E) = λ_*(E) < ∞}.

    E is carried iff it lies in the ring's union and cuts no atom of positive
    mass, so A(λ) is the ring whose atoms are the positive atoms together with
    the singletons of every null atom.
    """
    atom_values: Dict[Subset, Fraction] = {}
    for atom, value in ms.lam.atom_values.items():
        if value > 0:
            atom_values[atom] = value
        else:
            for member in atom:
                atom_values[Subset(ms.ground, [member])] = Fraction(0)
    return structure_from_atoms(ms.ground, atom_values)


def restrict(ms: MeasureStructure, ring: SetRing) -> MeasureStructure:
    """Restriction of the carried extension of λ to a ring of carried sets.

    Raises:
        RingError: If some member of the ring is not carried by the structure.
    """
    if ring.ground != ms.ground:
        raise GroundSetMismatchError("the ring and the structure live on different ground sets")
    values = {}
    for atom in ring.atoms:
        value = extension_value(ms, atom)
        if value is None:
            raise RingError(f"{atom} is not carried by the structure")
        values[atom] = value
    return MeasureStructure(ring, AdditiveSetFunction(ring, values))


def is_extension(small: MeasureStructure, big: MeasureStructure) -> bool:
    """Decides small ⪯ big: every member of small's ring is carried by big with the same value.

    Checking the atoms of the small ring suffices, since disjoint unions of
    carried sets are carried and the extension is additive.
    """
    if small.ground != big.ground:
        raise GroundSetMismatchError("structures compared by the extension order must share a ground set")
    for atom, value in small.lam.atom_values.items():
        if extension_value(big, atom) != value:
            return False
    return True
