# charges/integrate.py
# Random quantities on a finite ground set, their measurability with respect to
# a measure structure, the staircase approximation, the layer-cake integral,
# density measures and the minimal structure reproducing a family of integrals.
#
# On a finite ground set t -> λ_*(X>t) is a step function that can only move at
# values of X. Every level set {X>t} with t strictly between two consecutive
# values of X (0 included) is the same set, so the density condition on
# carried thresholds reduces to one check per gap between values, and each
# layer integral is a finite sum of gap widths times inner or outer masses.

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence, Tuple, Union

from .errors import ChargeError, GroundSetMismatchError, NotIntegrableError, NotMeasurableError, RingError
from .setcore import (
    INFINITY,
    ExtendedRational,
    GroundSet,
    MeasureStructure,
    Rational,
    SetRing,
    Subset,
    as_fraction,
    extension_value,
    generate_ring,
    inner_measure,
    outer_measure,
    restrict,
    structure_from_atoms,
)

logger = logging.getLogger(__name__)


class RandomQuantity:
    """An exact rational value on every atom of a ground set.

    Args:
        ground: The ground set.
        values: Value of each atom; every atom must be present.
    """

    def __init__(self, ground: GroundSet, values: Mapping[str, Rational]):
        missing = [a for a in ground.atoms if a not in values]
        if missing:
            raise ChargeError(f"random quantity has no value on atoms {missing}")
        extra = [a for a in values if a not in ground.index]
        if extra:
            raise ChargeError(f"random quantity has values on unknown atoms {extra}")
        self.ground = ground
        self.values: Dict[str, Fraction] = {a: as_fraction(values[a]) for a in ground.atoms}

    @classmethod
    def constant(cls, ground: GroundSet, c: Rational) -> "RandomQuantity":
        return cls(ground, {a: c for a in ground.atoms})

    @classmethod
    def indicator(cls, subset: Subset, c: Rational = 1) -> "RandomQuantity":
        c = as_fraction(c)
        return cls(subset.ground, {a: (c if a in subset else Fraction(0)) for a in subset.ground.atoms})

    def __call__(self, atom: str) -> Fraction:
        return self.values[atom]

    def _combine(self, other: Union["RandomQuantity", Rational], op) -> "RandomQuantity":
        if isinstance(other, RandomQuantity):
            if other.ground != self.ground:
                raise GroundSetMismatchError("random quantities live on different ground sets")
            return RandomQuantity(self.ground, {a: op(v, other.values[a]) for a, v in self.values.items()})
        c = as_fraction(other)
        return RandomQuantity(self.ground, {a: op(v, c) for a, v in self.values.items()})

    def __add__(self, other):
        return self._combine(other, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda x, y: x - y)

    def __mul__(self, other):
        return self._combine(other, lambda x, y: x * y)

    __rmul__ = __mul__

    def __neg__(self) -> "RandomQuantity":
        return self * -1

    def positive_part(self) -> "RandomQuantity":
        return RandomQuantity(self.ground, {a: max(v, Fraction(0)) for a, v in self.values.items()})

    def negative_part(self) -> "RandomQuantity":
        return RandomQuantity(self.ground, {a: max(-v, Fraction(0)) for a, v in self.values.items()})

    def is_nonnegative(self) -> bool:
        return all(v >= 0 for v in self.values.values())

    def level_set(self, t: Rational, strict: bool = True) -> Subset:
        "{X > t}, or {X >= t} when strict is False."
        t = as_fraction(t)
        if strict:
            return Subset(self.ground, (a for a, v in self.values.items() if v > t))
        return Subset(self.ground, (a for a, v in self.values.items() if v >= t))

    def distinct_values(self) -> List[Fraction]:
        return sorted(set(self.values.values()))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RandomQuantity) and self.ground == other.ground and self.values == other.values

    def __hash__(self) -> int:
        return hash((self.ground, tuple(self.values.values())))

    def __repr__(self) -> str:
        return "RandomQuantity(" + ", ".join(f"{a}={v}" for a, v in self.values.items()) + ")"


@dataclass(frozen=True)
class SimpleFunction:
    """A finite combination of indicators of ring members."""

    ring: SetRing
    terms: Tuple[Tuple[Fraction, Subset], ...]

    def __post_init__(self):
        for coefficient, subset in self.terms:
            if not self.ring.contains(subset):
                raise RingError(f"simple function term on {subset}, which is not in its ring")

    def evaluate(self, atom: str) -> Fraction:
        return sum((c for c, s in self.terms if atom in s), Fraction(0))

    def as_random_quantity(self) -> RandomQuantity:
        return RandomQuantity(self.ring.ground, {a: self.evaluate(a) for a in self.ring.ground.atoms})

    def integral(self, ms: MeasureStructure) -> Fraction:
        "Σ coefficient·λ(set), using the carried extension of λ for every set."
        total = Fraction(0)
        for coefficient, subset in self.terms:
            value = extension_value(ms, subset)
            if value is None:
                raise NotMeasurableError(f"{subset} is not carried by the structure")
            total += coefficient * value
        return total


@dataclass(frozen=True)
class JumpReport:
    """The finitely many t > 0 where t -> λ_*(X>t) jumps.

    D(X,λ) is (0, ∞) minus these points.
    """

    discontinuities: Tuple[Fraction, ...]

    def in_continuity_set(self, t: Rational) -> bool:
        t = as_fraction(t)
        return t > 0 and t not in self.discontinuities


@dataclass(frozen=True)
class LayerIntegrals:
    """Lower (λ_*) and upper (λ*) layer integrals of both tails of a random quantity."""

    lower_positive: Fraction
    upper_positive: ExtendedRational
    lower_negative: Fraction
    upper_negative: ExtendedRational

    @property
    def integrable(self) -> bool:
        return self.lower_positive == self.upper_positive and self.lower_negative == self.upper_negative

    @property
    def value(self) -> Fraction:
        return self.lower_positive - self.lower_negative


def _check_ground(X: RandomQuantity, ms: MeasureStructure) -> None:
    if X.ground != ms.ground:
        raise GroundSetMismatchError("the random quantity and the structure live on different ground sets")


def _layer_points(Y: RandomQuantity) -> List[Fraction]:
    "0 followed by the distinct positive values of Y, increasing."
    return [Fraction(0)] + [v for v in Y.distinct_values() if v > 0]


def _tail_levels(Y: RandomQuantity) -> List[Tuple[Fraction, Subset]]:
    "(gap width, level set) for every gap between consecutive layer points of Y ≥ 0."
    points = _layer_points(Y)
    return [(points[i + 1] - points[i], Y.level_set(points[i])) for i in range(len(points) - 1)]


def _tail_integrals(Y: RandomQuantity, ms: MeasureStructure) -> Tuple[Fraction, ExtendedRational]:
    lower = Fraction(0)
    upper: ExtendedRational = Fraction(0)
    for width, level in _tail_levels(Y):
        lower += width * inner_measure(ms, level)
        outer = outer_measure(ms, level)
        upper = INFINITY if outer == INFINITY or upper == INFINITY else upper + width * outer
    return lower, upper


def jump_set(X: RandomQuantity, ms: MeasureStructure) -> JumpReport:
    """Points t > 0 where λ_*(X > t−) differs from λ_*(X > t+).

    Only positive values c of X can be jumps; there the left limit is
    λ_*(X ≥ c) and the right limit is λ_*(X > c).
    """
    _check_ground(X, ms)
    jumps = []
    for c in X.distinct_values():
        if c <= 0:
            continue
        if inner_measure(ms, X.level_set(c, strict=False)) != inner_measure(ms, X.level_set(c)):
            jumps.append(c)
    return JumpReport(tuple(jumps))


def is_measurable(X: RandomQuantity, ms: MeasureStructure) -> bool:
    """True iff every level set {X⁺>t} and {X⁻>t}, t > 0, between values is carried."""
    _check_ground(X, ms)
    for tail in (X.positive_part(), X.negative_part()):
        for _, level in _tail_levels(tail):
            if extension_value(ms, level) is None:
                return False
    return True


def layer_integrals(X: RandomQuantity, ms: MeasureStructure) -> LayerIntegrals:
    _check_ground(X, ms)
    lower_pos, upper_pos = _tail_integrals(X.positive_part(), ms)
    lower_neg, upper_neg = _tail_integrals(X.negative_part(), ms)
    return LayerIntegrals(lower_pos, upper_pos, lower_neg, upper_neg)


def integral(X: RandomQuantity, ms: MeasureStructure) -> Fraction:
    """∫X dλ = ∫₀^∞ λ_*(X⁺>t)dt − ∫₀^∞ λ_*(X⁻>t)dt.

    Raises:
        NotIntegrableError: If for either tail the lower and upper layer
            integrals differ; the failing tail's pair is attached.
    """
    layers = layer_integrals(X, ms)
    if layers.lower_positive != layers.upper_positive:
        raise NotIntegrableError(f"positive part of {X} is not integrable: lower layer integral "
                                 f"{layers.lower_positive}, upper {layers.upper_positive}",
                                 lower=layers.lower_positive, upper=layers.upper_positive)
    if layers.lower_negative != layers.upper_negative:
        raise NotIntegrableError(f"negative part of {X} is not integrable: lower layer integral "
                                 f"{layers.lower_negative}, upper {layers.upper_negative}",
                                 lower=layers.lower_negative, upper=layers.upper_negative)
    return layers.value


def staircase(X: RandomQuantity, ms: MeasureStructure, n: int) -> SimpleFunction:
    """The n-th staircase approximation of X ≥ 0 over the carrier ring.

    The threshold grid is k·2^-(n+1) up to 2^n. Each atom gets the largest grid
    point strictly below its value, or 0 when the value exceeds 2^n. Every grid
    point is a carried threshold because X is measurable.

    Raises:
        NotMeasurableError: If X is negative somewhere or not measurable.
    """
    if n < 1:
        raise ValueError(f"staircase index must be positive, got {n}")
    if not X.is_nonnegative():
        raise NotMeasurableError("staircase needs a nonnegative random quantity")
    if not is_measurable(X, ms):
        raise NotMeasurableError(f"{X} is not measurable with respect to the structure")
    mesh = Fraction(1, 2 ** (n + 1))
    top = Fraction(2 ** n)
    groups: Dict[Fraction, List[str]] = {}
    for atom, x in X.values.items():
        if x <= 0 or x > top:
            continue
        t = (-(-x // mesh) - 1) * mesh
        if t > 0:
            groups.setdefault(t, []).append(atom)
    carrier = ms.carrier.ring
    terms = tuple((t, Subset(X.ground, atoms)) for t, atoms in sorted(groups.items()))
    return SimpleFunction(carrier, terms)


def staircase_defect(X: RandomQuantity, approximation: SimpleFunction, n: int) -> Subset:
    "{|X − X_n| ≥ 2^-n}; it lies inside {X > 2^(n−1)}."
    bound = Fraction(1, 2 ** n)
    gap = X - approximation.as_random_quantity()
    return Subset(X.ground, (a for a in X.ground.atoms if abs(gap(a)) >= bound))


def tchebycheff_bounds(A: Subset, f: RandomQuantity, B: Subset, ms: MeasureStructure) -> Tuple[bool, str]:
    """Checks λ*(A) ≤ ∫f dλ ≤ λ_*(B) for 1_A ≤ f ≤ 1_B."""
    for atom in f.ground.atoms:
        low = Fraction(1) if atom in A else Fraction(0)
        high = Fraction(1) if atom in B else Fraction(0)
        if not low <= f(atom) <= high:
            return False, f"1_A ≤ f ≤ 1_B fails at atom {atom}"
    value = integral(f, ms)
    outer = outer_measure(ms, A)
    inner = inner_measure(ms, B)
    if not (outer <= value <= inner):
        return False, f"bound violated: outer(A)={outer}, integral={value}, inner(B)={inner}"
    return True, f"{outer} <= {value} <= {inner}"


def density_measure(ms: MeasureStructure, g: RandomQuantity) -> MeasureStructure:
    """The structure (A(λ), λ_g) with λ_g(A) = ∫ 1_A·g dλ.

    Raises:
        NotMeasurableError: If g is negative somewhere or not measurable.
    """
    _check_ground(g, ms)
    if not g.is_nonnegative():
        raise NotMeasurableError("a density must be nonnegative")
    if not is_measurable(g, ms):
        raise NotMeasurableError(f"density {g} is not measurable with respect to the structure")
    carrier = ms.carrier
    values = {atom: integral(RandomQuantity.indicator(atom) * g, carrier) for atom in carrier.ring.atoms}
    return structure_from_atoms(ms.ground, values)


def minimal_structure(family: Sequence[RandomQuantity], ms: MeasureStructure) -> MeasureStructure:
    """The minimal structure (R_φ, λ_φ) reproducing the integrals of a family.

    R_φ is generated by the level sets {h>t} (and {−h>t} for signed members)
    at one continuity threshold per gap between values of h; λ_φ is the
    carried extension of λ restricted to it.

    Raises:
        NotIntegrableError: If some member of the family is not integrable.
    """
    generators: List[Subset] = []
    for h in family:
        _check_ground(h, ms)
        integral(h, ms)
        for tail in (h.positive_part(), h.negative_part()):
            generators.extend(level for _, level in _tail_levels(tail))
    ring = generate_ring(ms.ground, generators)
    logger.debug(f"Minimal structure for {len(family)} functions has {len(ring.atoms)} atoms")
    return restrict(ms, ring)
