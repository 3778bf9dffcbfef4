from fractions import Fraction

import pytest

from charges.errors import AdditivityError, ChargeError, GroundSetMismatchError, RingError
from charges.selftest import random_coarse_structure, random_power_structure
from charges.setcore import (
    INFINITY,
    AdditiveSetFunction,
    GroundSet,
    MeasureStructure,
    SetRing,
    all_subsets,
    carrier_ring,
    extension_value,
    format_fraction,
    generate_ring,
    inner_measure,
    is_extension,
    is_modular,
    outer_measure,
    point_mass_structure,
    power_set_ring,
    ring_atoms,
    restrict,
    structure_from_atoms,
)


def test_ground_set_rejects_duplicates_and_empty():
    with pytest.raises(ChargeError):
        GroundSet(["a", "a"])
    with pytest.raises(ChargeError):
        GroundSet([])


def test_subset_rejects_unknown_labels(ground3):
    with pytest.raises(ChargeError):
        ground3.subset(["4"])


def test_ring_from_sets_finds_atoms():
    g = GroundSet(["a", "b", "c"])
    members = [g.empty, g.subset(["a"]), g.subset(["b", "c"]), g.full]
    ring = SetRing.from_sets(g, members)
    assert ring.atoms == (g.subset(["a"]), g.subset(["b", "c"]))
    assert set(ring.sets) == set(members)


def test_ring_from_sets_requires_closure():
    g = GroundSet(["a", "b", "c"])
    with pytest.raises(RingError):
        SetRing.from_sets(g, [g.empty, g.subset(["a", "b"]), g.subset(["b", "c"])])
    with pytest.raises(RingError):
        SetRing.from_sets(g, [g.subset(["a"])])


def test_ring_atoms_must_be_disjoint():
    g = GroundSet(["a", "b"])
    with pytest.raises(RingError):
        SetRing(g, [g.subset(["a"]), g.subset(["a", "b"])])


def test_ring_membership():
    g = GroundSet(["a", "b", "c", "d"])
    ring = SetRing(g, [g.subset(["a", "b"]), g.subset(["c"])])
    assert ring.contains(g.subset(["a", "b", "c"]))
    assert not ring.contains(g.subset(["a"]))
    assert not ring.contains(g.subset(["d"]))
    assert ring.contains(g.empty)
    assert ring.size == 4


def test_generate_ring_splits_by_signature():
    g = GroundSet(["1", "2", "3", "4"])
    ring = generate_ring(g, [g.subset(["1", "2"]), g.subset(["2", "3"])])
    assert set(ring.atoms) == {g.subset(["1"]), g.subset(["2"]), g.subset(["3"])}
    assert ring.union == g.subset(["1", "2", "3"])


def test_additive_from_values_checks_consistency():
    g = GroundSet(["a", "b"])
    ring = power_set_ring(g)
    a, b = g.subset(["a"]), g.subset(["b"])
    lam = AdditiveSetFunction.from_values(ring, {a: 1, b: 2, g.full: 3, g.empty: 0})
    assert lam(g.full) == 3
    assert is_modular(lam)
    with pytest.raises(AdditivityError):
        AdditiveSetFunction.from_values(ring, {a: 1, b: 2, g.full: 4})
    with pytest.raises(AdditivityError):
        AdditiveSetFunction(ring, {a: -1, b: 2})


def test_structure_requires_same_ring():
    g = GroundSet(["a", "b"])
    lam = AdditiveSetFunction(power_set_ring(g), {g.subset(["a"]): 1, g.subset(["b"]): 0})
    with pytest.raises(AdditivityError):
        MeasureStructure(SetRing(g, [g.full]), lam)


def test_outer_and_inner_measure(coarse):
    g = coarse.ground
    assert outer_measure(coarse, g.subset(["a"])) == Fraction(1, 2)
    assert inner_measure(coarse, g.subset(["a"])) == 0
    assert outer_measure(coarse, g.subset(["a", "b"])) == Fraction(1, 2)
    assert inner_measure(coarse, g.subset(["a", "b", "c"])) == 1
    assert outer_measure(coarse, g.subset(["c", "d"])) == INFINITY
    assert inner_measure(coarse, g.subset(["c", "d"])) == Fraction(1, 2)
    assert outer_measure(coarse, g.empty) == 0


def test_outer_measure_rejects_foreign_sets(coarse, ground3):
    with pytest.raises(GroundSetMismatchError):
        outer_measure(coarse, ground3.full)


def test_extension_value(coarse):
    g = coarse.ground
    assert extension_value(coarse, g.subset(["a", "b"])) == Fraction(1, 2)
    assert extension_value(coarse, g.subset(["a"])) is None
    assert extension_value(coarse, g.subset(["d"])) is None


def test_carrier_splits_null_atoms():
    g = GroundSet(["a", "b", "c", "d"])
    ms = structure_from_atoms(g, {g.subset(["a", "b"]): 1, g.subset(["c", "d"]): 0})
    carrier = carrier_ring(ms)
    assert set(carrier.ring.atoms) == {g.subset(["a", "b"]), g.subset(["c"]), g.subset(["d"])}
    assert extension_value(ms, g.subset(["a", "b", "c"])) == 1
    assert is_extension(ms, carrier)
    assert is_extension(carrier, ms)


def test_carried_sets_match_carrier():
    g = GroundSet(["a", "b", "c", "d"])
    ms = structure_from_atoms(g, {g.subset(["a", "b"]): Fraction(2, 3), g.subset(["c"]): 0})
    carrier = ms.carrier
    for E in all_subsets(g):
        assert (extension_value(ms, E) is not None) == carrier.ring.contains(E)


def test_restrict_and_extension_order(uniform3):
    g = uniform3.ground
    ring = SetRing(g, [g.subset(["1", "2"]), g.subset(["3"])])
    small = restrict(uniform3, ring)
    assert small.lam(g.subset(["1", "2"])) == Fraction(2, 3)
    assert is_extension(small, uniform3)
    assert not is_extension(uniform3, small)


def test_restrict_rejects_uncarried_sets(coarse):
    g = coarse.ground
    with pytest.raises(RingError):
        restrict(coarse, SetRing(g, [g.subset(["a"])]))


def test_point_mass_structure_defaults_to_zero(ground3):
    ms = point_mass_structure(ground3, {"1": 1})
    assert ms.lam.total == 1
    assert ms.lam(ground3.subset(["2", "3"])) == 0


@pytest.mark.parametrize("value, text", [
    (Fraction(2), "2/1"),
    (Fraction(-3, 4), "-3/4"),
    (INFINITY, "inf"),
])
def test_format_fraction(value, text):
    assert format_fraction(value) == text


def test_ring_from_atoms_matches_from_sets():
    g = GroundSet(["a", "b", "c", "d"])
    ring = SetRing.from_atoms(g, [["c"], ["a", "b"]])
    assert ring_atoms(ring) == [g.subset(["a", "b"]), g.subset(["c"])]
    assert ring == SetRing.from_sets(g, ring.sets)
    assert g.subset(["d"]) not in ring


def test_outer_and_inner_measure_are_monotone(rng):
    for _ in range(60):
        ms = random_coarse_structure(rng, rng.randint(1, 5))
        subsets = list(all_subsets(ms.ground))
        for _ in range(20):
            E, F = rng.choice(subsets), rng.choice(subsets)
            small, big = E & F, E | F
            assert inner_measure(ms, small) <= inner_measure(ms, big)
            assert outer_measure(ms, small) <= outer_measure(ms, big)
            assert inner_measure(ms, small) <= outer_measure(ms, small)


def test_extension_order_is_transitive(rng):
    grid = [Fraction(k, 2) for k in range(4)]
    for _ in range(50):
        big = random_power_structure(rng, rng.randint(1, 6), grid)
        subsets = list(all_subsets(big.ground))
        mid = restrict(big, generate_ring(big.ground, rng.sample(subsets, rng.randint(0, 2))))
        groups = {}
        for atom in mid.ring.atoms:
            groups.setdefault(rng.randrange(3), []).extend(atom)
        small = restrict(mid, SetRing.from_atoms(big.ground, groups.values()))
        assert is_extension(small, mid) and is_extension(mid, big)
        assert is_extension(small, big)
    for _ in range(300):
        n = rng.randint(1, 3)
        a, b, c = (random_coarse_structure(rng, n) for _ in range(3))
        if is_extension(a, b) and is_extension(b, c):
            assert is_extension(a, c)


def test_carrier_is_a_ring_with_modular_extension(rng):
    for _ in range(60):
        ms = random_coarse_structure(rng, rng.randint(1, 5))
        carrier = carrier_ring(ms)
        assert SetRing.from_sets(ms.ground, carrier.ring.sets) == carrier.ring
        assert is_modular(carrier.lam)
        assert is_extension(ms, carrier) and is_extension(carrier, ms)
