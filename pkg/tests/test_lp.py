from fractions import Fraction

import pytest

from charges.lp import Feasible, FeasibilitySystem, Infeasible, make_system, solve_feasibility, verify_outcome


def test_feasible_system_returns_a_solution():
    system = make_system([[1, 0, 2], [0, 1, 1]], ["3/2", "1/2"])
    outcome = solve_feasibility(system)
    assert isinstance(outcome, Feasible)
    assert verify_outcome(system, outcome)[0]


def test_single_row_certificate():
    system = make_system([[1, 2]], [-1])
    outcome = solve_feasibility(system)
    assert isinstance(outcome, Infeasible)
    assert outcome.certificate == (Fraction(1),)
    assert verify_outcome(system, outcome)[0]


def test_normalized_system_adds_the_sum_row():
    system = make_system([[1, 2]], [3], normalized=True)
    assert system.rows == 1
    matrix, rhs = system.augmented()
    assert matrix[-1] == [1, 1] and rhs[-1] == 1
    outcome = solve_feasibility(system)
    # 3 is outside the hull of {1, 2}
    assert not outcome.feasible
    assert len(outcome.certificate) == 2
    assert verify_outcome(system, outcome)[0]


def test_normalized_interior_point():
    system = make_system([[1, 2]], ["3/2"], normalized=True)
    outcome = solve_feasibility(system)
    assert outcome.mu == (Fraction(1, 2), Fraction(1, 2))


def test_zero_rhs_is_feasible_at_zero():
    system = make_system([[1, -1], [2, 3]], [0, 0])
    outcome = solve_feasibility(system)
    assert outcome.feasible
    assert outcome.mu == (0, 0)


def test_redundant_rows_are_handled():
    system = make_system([[1, 1], [2, 2]], [1, 2])
    outcome = solve_feasibility(system)
    assert outcome.feasible
    assert verify_outcome(system, outcome)[0]


def test_inconsistent_redundant_rows_give_a_certificate():
    system = make_system([[1, 1], [2, 2]], [1, 3])
    outcome = solve_feasibility(system)
    assert not outcome.feasible
    assert verify_outcome(system, outcome)[0]


def test_verify_rejects_wrong_witnesses():
    system = make_system([[1, 2]], [2])
    assert not verify_outcome(system, Feasible((Fraction(1), Fraction(1))))[0]
    assert not verify_outcome(system, Feasible((Fraction(-2), Fraction(2))))[0]
    assert not verify_outcome(system, Infeasible((Fraction(1),)))[0]
    assert not verify_outcome(system, Infeasible((Fraction(1), Fraction(0))))[0]


def test_shape_errors():
    with pytest.raises(ValueError):
        FeasibilitySystem(((1, 2), (1,)), (0, 0))
    with pytest.raises(ValueError):
        FeasibilitySystem(((1, 2),), (0, 0))


def test_random_systems_always_verify(rng):
    for _ in range(200):
        d, n = rng.randint(1, 4), rng.randint(1, 6)
        system = make_system([[rng.randint(-5, 5) for _ in range(n)] for _ in range(d)],
                             [rng.randint(-5, 5) for _ in range(d)], normalized=rng.random() < 0.5)
        outcome = solve_feasibility(system)
        ok, message = verify_outcome(system, outcome)
        assert ok, message


def test_solver_is_deterministic():
    system = make_system([[1, 1, 1], [0, 1, 2]], [2, 2])
    assert solve_feasibility(system) == solve_feasibility(system)


def test_scaling_a_row_keeps_the_verdict(rng):
    for _ in range(150):
        d, n = rng.randint(1, 4), rng.randint(1, 6)
        matrix = [[rng.randint(-5, 5) for _ in range(n)] for _ in range(d)]
        rhs = [rng.randint(-5, 5) for _ in range(d)]
        normalized = rng.random() < 0.5
        before = solve_feasibility(make_system(matrix, rhs, normalized))
        i = rng.randrange(d)
        c = Fraction(rng.randint(1, 9), rng.randint(1, 9))
        matrix[i] = [c * v for v in matrix[i]]
        rhs[i] = c * rhs[i]
        scaled = make_system(matrix, rhs, normalized)
        after = solve_feasibility(scaled)
        assert after.feasible == before.feasible
        ok, message = verify_outcome(scaled, after)
        assert ok, message
