from fractions import Fraction

import pytest

from charges.errors import NotIntegrableError, NotMeasurableError
from charges.integrate import (
    RandomQuantity,
    density_measure,
    integral,
    is_measurable,
    jump_set,
    layer_integrals,
    minimal_structure,
    staircase,
    staircase_defect,
    tchebycheff_bounds,
)
from charges.selftest import expected_integral, random_coarse_structure, random_power_structure
from charges.setcore import INFINITY, GroundSet, is_extension, point_mass_structure, structure_from_atoms


def test_uniform_integral(uniform3, ground3):
    X = RandomQuantity(ground3, {"1": 1, "2": 2, "3": 3})
    assert integral(X, uniform3) == 2


def test_signed_integral(uniform3, ground3):
    X = RandomQuantity(ground3, {"1": -3, "2": 0, "3": 6})
    layers = layer_integrals(X, uniform3)
    assert layers.lower_positive == 2
    assert layers.lower_negative == 1
    assert integral(X, uniform3) == 1


def test_constant_needs_the_whole_ground_set(coarse):
    one = RandomQuantity.constant(coarse.ground, 1)
    assert not is_measurable(one, coarse)
    with pytest.raises(NotIntegrableError) as info:
        integral(one, coarse)
    assert info.value.lower == 1
    assert info.value.upper == INFINITY


def test_constant_on_a_coarse_atom_is_integrable(coarse):
    g = coarse.ground
    X = RandomQuantity(g, {"a": 4, "b": 4, "c": -2, "d": 0})
    assert is_measurable(X, coarse)
    assert integral(X, coarse) == 1


def test_cutting_a_positive_atom_is_not_integrable(coarse):
    g = coarse.ground
    X = RandomQuantity(g, {"a": 1, "b": 0, "c": 0, "d": 0})
    layers = layer_integrals(X, coarse)
    assert (layers.lower_positive, layers.upper_positive) == (0, Fraction(1, 2))
    assert not layers.integrable


def test_cutting_a_null_atom_is_integrable():
    g = GroundSet(["a", "b", "c"])
    ms = structure_from_atoms(g, {g.subset(["a", "b"]): 0, g.subset(["c"]): 2})
    X = RandomQuantity(g, {"a": 5, "b": 1, "c": 3})
    assert integral(X, ms) == 6


def test_layer_cake_matches_atom_sum(rng):
    grid = [Fraction(k, 3) for k in range(7)]
    for _ in range(200):
        ms = random_power_structure(rng, rng.randint(1, 5), grid)
        X = RandomQuantity(ms.ground, {a: Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for a in ms.ground.atoms})
        expected = sum((X(a) * ms.lam(ms.ground.subset([a])) for a in ms.ground.atoms), Fraction(0))
        assert integral(X, ms) == expected


def test_coarse_structures_agree_with_atom_oracle(rng):
    for _ in range(100):
        ms = random_coarse_structure(rng, rng.randint(1, 5))
        X = RandomQuantity(ms.ground, {a: rng.randint(-2, 2) for a in ms.ground.atoms})
        expected = expected_integral(X, ms)
        if expected is None:
            with pytest.raises(NotIntegrableError):
                integral(X, ms)
        else:
            assert integral(X, ms) == expected


def test_jump_set(uniform3, ground3):
    X = RandomQuantity(ground3, {"1": 1, "2": 2, "3": 2})
    assert jump_set(X, uniform3).discontinuities == (Fraction(1), Fraction(2))
    report = jump_set(X, uniform3)
    assert report.in_continuity_set(Fraction(3, 2))
    assert not report.in_continuity_set(2)
    assert not report.in_continuity_set(0)


def test_staircase_approximates_from_below(uniform3, ground3):
    X = RandomQuantity(ground3, {"1": Fraction(1, 3), "2": Fraction(5, 2), "3": 9})
    X2 = staircase(X, uniform3, 2)
    # mesh 1/8 up to 4; above 4 the approximation is zero
    assert X2.evaluate("1") == Fraction(1, 4)
    assert X2.evaluate("2") == Fraction(19, 8)
    assert X2.evaluate("3") == 0
    defect = staircase_defect(X, X2, 2)
    assert defect == ground3.subset(["3"])
    assert X2.integral(uniform3) == (Fraction(1, 4) + Fraction(19, 8)) / 3


def test_staircase_rejects_negative_input(uniform3, ground3):
    with pytest.raises(NotMeasurableError):
        staircase(RandomQuantity(ground3, {"1": -1, "2": 0, "3": 0}), uniform3, 1)


def test_tchebycheff_bounds(uniform3, ground3):
    A, B = ground3.subset(["1"]), ground3.subset(["1", "2"])
    f = RandomQuantity(ground3, {"1": 1, "2": Fraction(1, 2), "3": 0})
    ok, _ = tchebycheff_bounds(A, f, B, uniform3)
    assert ok
    bad = RandomQuantity(ground3, {"1": 1, "2": 0, "3": 1})
    ok, message = tchebycheff_bounds(A, bad, B, uniform3)
    assert not ok and "3" in message


def test_density_measure(coarse):
    g = coarse.ground
    density = RandomQuantity(g, {"a": 2, "b": 2, "c": 0, "d": 0})
    weighted = density_measure(coarse, density)
    assert weighted.lam(g.subset(["a", "b"])) == 1
    assert weighted.lam(g.subset(["c"])) == 0
    with pytest.raises(NotMeasurableError):
        density_measure(coarse, RandomQuantity(g, {"a": 1, "b": 0, "c": 0, "d": 0}))


def test_minimal_structure_is_generated_by_level_sets(ground3, uniform3):
    h = RandomQuantity(ground3, {"1": 0, "2": 1, "3": 1})
    minimal = minimal_structure([h], uniform3)
    assert minimal.ring.atoms == (ground3.subset(["2", "3"]),)
    assert minimal.lam(ground3.subset(["2", "3"])) == Fraction(2, 3)
    assert integral(h, minimal) == integral(h, uniform3)
    assert is_extension(minimal, uniform3)


def test_minimal_structure_of_signed_family(ground3):
    ms = point_mass_structure(ground3, {"1": 1, "2": 2, "3": 3})
    h = RandomQuantity(ground3, {"1": -1, "2": 0, "3": 2})
    minimal = minimal_structure([h], ms)
    assert set(minimal.ring.atoms) == {ground3.subset(["1"]), ground3.subset(["3"])}
    assert integral(h, minimal) == 5


def random_signed(rng, ground):
    return RandomQuantity(ground, {a: Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for a in ground.atoms})


def constant_on_atoms(rng, ms):
    values = {a: Fraction(0) for a in ms.ground.atoms}
    for atom in ms.ring.atoms:
        v = Fraction(rng.randint(-6, 6), rng.randint(1, 3))
        for a in atom:
            values[a] = v
    return RandomQuantity(ms.ground, values)


def test_integral_is_linear(rng):
    grid = [Fraction(k, 3) for k in range(7)]
    for _ in range(100):
        ms = random_power_structure(rng, rng.randint(1, 5), grid)
        X, Y = random_signed(rng, ms.ground), random_signed(rng, ms.ground)
        a, b = Fraction(rng.randint(-5, 5), rng.randint(1, 3)), Fraction(rng.randint(-5, 5), rng.randint(1, 3))
        assert integral(X * a + Y * b, ms) == a * integral(X, ms) + b * integral(Y, ms)
    for _ in range(100):
        ms = random_coarse_structure(rng, rng.randint(1, 5))
        X, Y = constant_on_atoms(rng, ms), constant_on_atoms(rng, ms)
        a, b = Fraction(rng.randint(-5, 5), rng.randint(1, 3)), Fraction(rng.randint(-5, 5), rng.randint(1, 3))
        assert integral(X * a + Y * b, ms) == a * integral(X, ms) + b * integral(Y, ms)


def test_staircase_increases_with_n(rng):
    grid = [Fraction(k, 4) for k in range(5)]
    for _ in range(50):
        ms = random_power_structure(rng, rng.randint(1, 5), grid)
        X = RandomQuantity(ms.ground, {a: Fraction(rng.randint(0, 40), 8) for a in ms.ground.atoms})
        previous = None
        for n in range(1, 6):
            current = staircase(X, ms, n).as_random_quantity()
            for a in ms.ground.atoms:
                assert 0 <= current(a) <= X(a)
                if previous is not None:
                    assert previous(a) <= current(a)
            previous = current


def test_density_of_a_density(rng):
    grid = [Fraction(k, 2) for k in range(5)]
    for _ in range(60):
        ms = random_power_structure(rng, rng.randint(1, 5), grid)
        g = RandomQuantity(ms.ground, {a: Fraction(rng.randint(0, 6), rng.randint(1, 3)) for a in ms.ground.atoms})
        h = RandomQuantity(ms.ground, {a: Fraction(rng.randint(0, 6), rng.randint(1, 3)) for a in ms.ground.atoms})
        weighted = density_measure(ms, g)
        assert density_measure(weighted, h) == density_measure(ms, g * h)
        f = random_signed(rng, ms.ground)
        assert integral(f, weighted) == integral(f * g, ms)
