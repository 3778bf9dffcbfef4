# charges/skorohod.py
# The universal dyadic map H = ι∘G on (0, 1): G sends x to the index of the
# cell (1 − 2^-(n-1), 1 − 2^-n] containing it and ι reads off the n-th label
# of an enumeration. Any finitely supported law m is realized as H(U) by
# choosing the measure of U, cell by cell. Only the identity case X = id is
# handled; a general X reduces to it by composing with X.

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .errors import ChargeError
from .setcore import Rational, as_fraction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Enumeration:
    "The labels s_1, s_2, ... of a finite stand-in for a countable dense set."

    labels: Tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(l) for l in self.labels)
        if len(set(labels)) != len(labels):
            raise ChargeError(f"enumeration labels are not distinct: {list(labels)}")
        if not labels:
            raise ChargeError("an enumeration needs at least one label")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    def label(self, n: int) -> str:
        "ι(n), with n counted from 1."
        if not 1 <= n <= len(self.labels):
            raise ChargeError(f"cell {n} has no label in an enumeration of {len(self.labels)}")
        return self.labels[n - 1]

    def index(self, label: str) -> int:
        return self.labels.index(label) + 1


@dataclass(frozen=True)
class IntervalMeasure:
    """Masses on the dyadic cells of (0, 1), keyed by cell index n >= 1."""

    masses: Dict[int, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        masses = {int(n): as_fraction(m) for n, m in self.masses.items()}
        for n, m in masses.items():
            if n < 1:
                raise ChargeError(f"cells are indexed from 1, got {n}")
            if m < 0:
                raise ChargeError(f"cell {n} has negative mass {m}")
        if sum(masses.values(), Fraction(0)) > 1:
            raise ChargeError("an interval measure on (0, 1) has total mass at most 1")
        object.__setattr__(self, "masses", dict(sorted(masses.items())))

    def __call__(self, n: int) -> Fraction:
        return self.masses.get(n, Fraction(0))

    @property
    def total(self) -> Fraction:
        return sum(self.masses.values(), Fraction(0))


def cell_bounds(n: int) -> Tuple[Fraction, Fraction]:
    "The cell G⁻¹({n}) = (1 − 2^-(n-1), 1 − 2^-n]."
    if n < 1:
        raise ChargeError(f"cells are indexed from 1, got {n}")
    return 1 - Fraction(1, 2 ** (n - 1)), 1 - Fraction(1, 2 ** n)


def universal_index(x: Rational) -> int:
    """G(x) = min{n : 1 − 2^-n >= x}, i.e. the smallest n with 2^-n <= 1 − x.

    Raises:
        ChargeError: If x is not in the open unit interval.
    """
    x = as_fraction(x)
    if not 0 < x < 1:
        raise ChargeError(f"{x} is outside (0, 1)")
    gap = 1 - x
    # 2^-n <= p/q  <=>  2^n >= q/p; start from the bit length and step down.
    n = max(1, (gap.denominator // gap.numerator).bit_length())
    while n > 1 and Fraction(1, 2 ** (n - 1)) <= gap:
        n -= 1
    while Fraction(1, 2 ** n) > gap:
        n += 1
    return n


def _check_law(m: Mapping[str, Rational], enum: Enumeration) -> Dict[str, Fraction]:
    law = {s: as_fraction(v) for s, v in m.items()}
    for s, v in law.items():
        if v < 0:
            raise ChargeError(f"negative mass {v} at {s}")
        if v > 0 and s not in enum.labels:
            raise ChargeError(f"support point {s} is not enumerated")
    if sum(law.values(), Fraction(0)) != 1:
        raise ChargeError(f"the target law has total mass {sum(law.values(), Fraction(0))}, expected 1")
    return law


def pushforward_measure(m: Mapping[str, Rational], enum: Enumeration) -> IntervalMeasure:
    """The measure on (0, 1) whose image under H = ι∘G is m: cell n gets m(ι(n)).

    Raises:
        ChargeError: If m is not a probability or charges a label outside the enumeration.
    """
    law = _check_law(m, enum)
    im = IntervalMeasure({n: law.get(enum.label(n), Fraction(0)) for n in range(1, len(enum) + 1)})
    logger.debug(f"Pushed a law on {sum(1 for v in law.values() if v > 0)} points onto {len(enum)} cells")
    return im


def image_law(im: IntervalMeasure, enum: Enumeration) -> Dict[str, Fraction]:
    "The law of H under im."
    law = {s: Fraction(0) for s in enum.labels}
    for n, mass in im.masses.items():
        law[enum.label(n)] += mass
    return law


def verify_pushforward(m: Mapping[str, Rational], enum: Enumeration, im: IntervalMeasure,
                       tests: Sequence[Mapping[str, Rational]]) -> bool:
    """True iff Σ_s h(s)m(s) = Σ_n h(ι(n))·im(n) for every test function h.

    A test function is zero on labels it does not mention.
    """
    law = {s: as_fraction(v) for s, v in m.items()}
    for k, h in enumerate(tests):
        h = {s: as_fraction(v) for s, v in h.items()}
        lhs = sum((h.get(s, Fraction(0)) * v for s, v in law.items()), Fraction(0))
        rhs = sum((h.get(enum.label(n), Fraction(0)) * mass for n, mass in im.masses.items()), Fraction(0))
        if lhs != rhs:
            logger.debug(f"Test function {k} separates the laws: {lhs} != {rhs}")
            return False
    return True


@dataclass
class SampleReport:
    """Outcome of a sampling run.

    Attributes:
        empirical: Empirical frequency per label.
        counts: Draw count per label.
        tv: Total-variation distance ½Σ|empirical − m|.
        seed: The generator seed used.
        samples: Number of draws.
        positions: The realized points of (0, 1).
    """

    empirical: Dict[str, float]
    counts: Dict[str, int]
    tv: float
    seed: int
    samples: int
    positions: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))


def sample_companion(m: Mapping[str, Rational], enum: Enumeration, N: int, seed: int) -> SampleReport:
    """Draws N points of (0, 1) distributed as the pushforward measure and maps them through H.

    Uniform draws from PCG64(seed) are inverted through the cumulative cell
    masses; inside a cell the point is spread uniformly, and its label is the
    label of its cell. Deterministic for fixed (seed, N).
    """
    if N < 1:
        raise ChargeError(f"sample count must be at least 1, got {N}")
    law = _check_law(m, enum)
    im = pushforward_measure(law, enum)
    cells = np.arange(1, len(enum) + 1)
    masses = np.array([float(im(n)) for n in cells])
    cumulative = np.cumsum(masses)
    last_charged = int(np.flatnonzero(masses)[-1])

    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.random(N) * cumulative[-1]
    picked = np.minimum(np.searchsorted(cumulative, draws, side="right"), last_charged)

    lower = 1.0 - 2.0 ** -(cells[picked] - 1)
    width = 2.0 ** -cells[picked]
    start = np.concatenate(([0.0], cumulative[:-1]))[picked]
    within = np.clip((draws - start) / masses[picked], 0.0, 1.0)
    positions = lower + within * width

    tallies = np.bincount(picked, minlength=len(enum))
    counts = {s: int(tallies[k]) for k, s in enumerate(enum.labels)}
    empirical = {s: c / N for s, c in counts.items()}
    tv = 0.5 * sum(abs(empirical[s] - float(law.get(s, 0))) for s in enum.labels)
    logger.info(f"Sampled {N} draws with seed {seed}: total variation {tv:.5f}")
    return SampleReport(empirical, counts, tv, seed, N, positions)


def tv_schedule(m: Mapping[str, Rational], enum: Enumeration, sizes: Sequence[int], seed: int) -> List[Tuple[int, float]]:
    "TV distance of the sampler for each sample size, on one seed."
    return [(N, sample_companion(m, enum, N, seed).tv) for N in sizes]
