# charges/lp.py
# Exact rational feasibility for {mu >= 0 : A mu = b} (optionally with
# sum(mu) = 1), answered either by a solution or by a Farkas certificate y
# with yᵀA >= 0 and yᵀb < 0. Both branches re-verify by exact substitution.
#
# Two-phase simplex on a dense Fraction tableau with Bland's rule. Phase one
# minimizes the sum of artificial variables; phase two has a zero objective,
# so it only drives artificials left at level zero out of the basis.

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple, Union

from .setcore import Rational, as_fraction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeasibilitySystem:
    """A d×n system A·mu = b, mu >= 0, optionally with sum(mu) = 1.

    Args:
        matrix: The d rows of A.
        rhs: The right-hand side b (length d).
        normalized: Whether the solution must also sum to 1.
    """

    matrix: Tuple[Tuple[Fraction, ...], ...]
    rhs: Tuple[Fraction, ...]
    normalized: bool = False

    def __post_init__(self):
        matrix = tuple(tuple(as_fraction(v) for v in row) for row in self.matrix)
        rhs = tuple(as_fraction(v) for v in self.rhs)
        if not matrix or not matrix[0]:
            raise ValueError("a feasibility system needs at least one row and one column")
        width = len(matrix[0])
        for i, row in enumerate(matrix):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} entries, expected {width}")
        if len(rhs) != len(matrix):
            raise ValueError(f"rhs has {len(rhs)} entries for {len(matrix)} rows")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "rhs", rhs)

    @property
    def rows(self) -> int:
        return len(self.matrix)

    @property
    def cols(self) -> int:
        return len(self.matrix[0])

    def augmented(self) -> Tuple[List[List[Fraction]], List[Fraction]]:
        "The rows actually solved: A and b, plus the all-ones row when normalized."
        matrix = [list(row) for row in self.matrix]
        rhs = list(self.rhs)
        if self.normalized:
            matrix.append([Fraction(1)] * self.cols)
            rhs.append(Fraction(1))
        return matrix, rhs


@dataclass(frozen=True)
class Feasible:
    "A nonnegative solution of the system."

    mu: Tuple[Fraction, ...]
    pivots: int = 0

    feasible = True


@dataclass(frozen=True)
class Infeasible:
    """A Farkas certificate y for the (augmented) system: yᵀA >= 0 and yᵀb < 0.

    When the system is normalized, the last entry belongs to the sum(mu) = 1 row.
    """

    certificate: Tuple[Fraction, ...]
    pivots: int = 0

    feasible = False


FeasibilityOutcome = Union[Feasible, Infeasible]


def _normalize_certificate(y: Sequence[Fraction]) -> Tuple[Fraction, ...]:
    "Scales so the first nonzero entry has absolute value 1."
    for v in y:
        if v != 0:
            scale = abs(v)
            return tuple(x / scale for x in y)
    return tuple(y)


class _Tableau:
    """Phase-one tableau [A | I | b] with the artificial columns kept up to date.

    The artificial block always holds B⁻¹, which is where the dual vector of
    phase one (and hence the certificate) is read from.
    """

    def __init__(self, matrix: List[List[Fraction]], rhs: List[Fraction]):
        self.m = len(matrix)
        self.n = len(matrix[0])
        self.signs = [Fraction(-1) if b < 0 else Fraction(1) for b in rhs]
        self.rows: List[List[Fraction]] = []
        for i, (row, b) in enumerate(zip(matrix, rhs)):
            s = self.signs[i]
            identity = [Fraction(1) if k == i else Fraction(0) for k in range(self.m)]
            self.rows.append([s * v for v in row] + identity + [s * b])
        self.basis = [self.n + i for i in range(self.m)]
        self.pivots = 0

    def cost(self, var: int) -> Fraction:
        return Fraction(1) if var >= self.n else Fraction(0)

    def objective(self) -> Fraction:
        return sum((self.cost(v) * row[-1] for v, row in zip(self.basis, self.rows)), Fraction(0))

    def reduced_cost(self, col: int) -> Fraction:
        return self.cost(col) - sum((self.cost(v) * row[col] for v, row in zip(self.basis, self.rows)), Fraction(0))

    def pivot(self, r: int, col: int) -> None:
        pivot_row = self.rows[r]
        p = pivot_row[col]
        pivot_row[:] = [v / p for v in pivot_row]
        for i, row in enumerate(self.rows):
            if i != r and row[col] != 0:
                factor = row[col]
                row[:] = [a - factor * b for a, b in zip(row, pivot_row)]
        self.basis[r] = col
        self.pivots += 1

    def entering(self) -> int:
        "Bland: the lowest-index original column with negative reduced cost, or -1."
        for col in range(self.n):
            if col not in self.basis and self.reduced_cost(col) < 0:
                return col
        return -1

    def leaving(self, col: int) -> int:
        "Minimum ratio row, ties broken by the lowest basic variable index."
        best = -1
        best_key = None
        for i, row in enumerate(self.rows):
            if row[col] > 0:
                key = (row[-1] / row[col], self.basis[i])
                if best_key is None or key < best_key:
                    best, best_key = i, key
        return best

    def phase_one(self) -> Fraction:
        while self.objective() != 0:
            col = self.entering()
            if col < 0:
                break
            r = self.leaving(col)
            logger.debug(f"Phase one pivot {self.pivots + 1}: column {col} enters, row {r} leaves")
            self.pivot(r, col)
        return self.objective()

    def phase_two(self) -> None:
        for r in range(self.m):
            if self.basis[r] < self.n:
                continue
            for col in range(self.n):
                if col not in self.basis and self.rows[r][col] != 0:
                    self.pivot(r, col)
                    break

    def primal(self) -> Tuple[Fraction, ...]:
        mu = [Fraction(0)] * self.n
        for v, row in zip(self.basis, self.rows):
            if v < self.n:
                mu[v] = row[-1]
        return tuple(mu)

    def farkas(self) -> Tuple[Fraction, ...]:
        # y = c_Bᵀ B⁻¹ is the phase-one dual; -y separates, then undo the row sign flips.
        y = [sum((self.cost(v) * row[self.n + i] for v, row in zip(self.basis, self.rows)), Fraction(0))
             for i in range(self.m)]
        return tuple(-yi * s for yi, s in zip(y, self.signs))


def solve_feasibility(system: FeasibilitySystem) -> FeasibilityOutcome:
    """Decides {mu >= 0 : A mu = b (, sum mu = 1)} exactly.

    Returns:
        Feasible(mu) with a basic solution, or Infeasible(y) with a certificate
        whose first nonzero entry has absolute value 1. The output is
        deterministic for a given system.
    """
    matrix, rhs = system.augmented()
    tableau = _Tableau(matrix, rhs)
    residual = tableau.phase_one()
    if residual == 0:
        tableau.phase_two()
        outcome: FeasibilityOutcome = Feasible(tableau.primal(), tableau.pivots)
    else:
        outcome = Infeasible(_normalize_certificate(tableau.farkas()), tableau.pivots)
    logger.debug(f"Solved {system.rows}x{system.cols} system "
                 f"({'normalized' if system.normalized else 'conic'}): "
                 f"{'feasible' if outcome.feasible else 'infeasible'} after {tableau.pivots} pivots")
    return outcome


def verify_outcome(system: FeasibilitySystem, outcome: FeasibilityOutcome) -> Tuple[bool, str]:
    """Re-verifies either branch by exact substitution."""
    matrix, rhs = system.augmented()
    if isinstance(outcome, Feasible):
        mu = outcome.mu
        if len(mu) != system.cols:
            return False, f"solution has {len(mu)} entries, expected {system.cols}"
        if any(v < 0 for v in mu):
            return False, "solution has a negative entry"
        for i, (row, b) in enumerate(zip(matrix, rhs)):
            lhs = sum((a * v for a, v in zip(row, mu)), Fraction(0))
            if lhs != b:
                return False, f"row {i}: {lhs} != {b}"
        return True, "solution verified"
    y = outcome.certificate
    if len(y) != len(matrix):
        return False, f"certificate has {len(y)} entries, expected {len(matrix)}"
    for j in range(system.cols):
        column = sum((y[i] * matrix[i][j] for i in range(len(matrix))), Fraction(0))
        if column < 0:
            return False, f"yᵀA is negative in column {j}"
    value = sum((yi * b for yi, b in zip(y, rhs)), Fraction(0))
    if value >= 0:
        return False, f"yᵀb = {value} is not negative"
    return True, "certificate verified"


def make_system(matrix: Sequence[Sequence[Rational]], rhs: Sequence[Rational], normalized: bool = False) -> FeasibilitySystem:
    return FeasibilitySystem(tuple(tuple(row) for row in matrix), tuple(rhs), normalized)
