# charges/convexdec.py
# Decomposition of a convex function of one real variable into its kink
# measure ν, so that φ(v) = φ(u) + ∫ h_u^v dν once φ has been normalized to
# have zero one-sided slopes at x0, plus the finite Ω-side measure λ0 that
# reproduces the same values through the layer-cake integral.
#
# Piecewise-linear input is handled exactly. Sampled input (values on a
# uniform grid) gets a gridded ν: the node curvature Δ²/h is spread over the
# two adjacent cells and placed at the cell midpoints.

import bisect
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple, Union

from .errors import BracketError, NoMinimizerError, NonConvexError
from .integrate import RandomQuantity, integral
from .setcore import (
    INFINITY,
    AdditiveSetFunction,
    GroundSet,
    MeasureStructure,
    Rational,
    Subset,
    as_fraction,
    format_fraction,
    power_set_ring,
)

logger = logging.getLogger(__name__)


# --- Convex function representations ---
class PiecewiseLinearConvex:
    """A continuous piecewise-linear function on ℝ.

    Args:
        breakpoints: Strictly increasing x_1 < ... < x_k.
        slopes: The k + 1 slopes, slopes[0] on (-∞, x_1] and slopes[k] on (x_k, ∞).
        anchor: (x_ref, φ(x_ref)) fixing the additive constant.

    Convexity (non-decreasing slopes) is not enforced here; decompose and
    normalize_at_min reject non-convex input.
    """

    def __init__(self, breakpoints: Sequence[Rational], slopes: Sequence[Rational],
                 anchor: Tuple[Rational, Rational] = (0, 0)):
        self.breakpoints: Tuple[Fraction, ...] = tuple(as_fraction(b) for b in breakpoints)
        self.slopes: Tuple[Fraction, ...] = tuple(as_fraction(s) for s in slopes)
        if len(self.slopes) != len(self.breakpoints) + 1:
            raise ValueError(f"{len(self.breakpoints)} breakpoints need {len(self.breakpoints) + 1} slopes, "
                             f"got {len(self.slopes)}")
        for a, b in zip(self.breakpoints, self.breakpoints[1:]):
            if a >= b:
                raise ValueError(f"breakpoints must be strictly increasing: {a} >= {b}")
        self.anchor = (as_fraction(anchor[0]), as_fraction(anchor[1]))
        # Values at the breakpoints up to the additive constant.
        self._partial: List[Fraction] = [Fraction(0)]
        for j in range(1, len(self.breakpoints)):
            width = self.breakpoints[j] - self.breakpoints[j - 1]
            self._partial.append(self._partial[-1] + self.slopes[j] * width)
        self._offset = self.anchor[1] - self._raw(self.anchor[0])

    def _raw(self, x: Fraction) -> Fraction:
        if not self.breakpoints:
            return self.slopes[0] * x
        j = bisect.bisect_left(self.breakpoints, x)
        if j == 0:
            return self.slopes[0] * (x - self.breakpoints[0])
        return self._partial[j - 1] + self.slopes[j] * (x - self.breakpoints[j - 1])

    def __call__(self, x: Rational) -> Fraction:
        return self._raw(as_fraction(x)) + self._offset

    def right_derivative(self, x: Rational) -> Fraction:
        return self.slopes[bisect.bisect_right(self.breakpoints, as_fraction(x))]

    def left_derivative(self, x: Rational) -> Fraction:
        return self.slopes[bisect.bisect_left(self.breakpoints, as_fraction(x))]

    @property
    def jumps(self) -> List[Tuple[Fraction, Fraction]]:
        "(breakpoint, slope increase) for every breakpoint, zero and negative jumps included."
        return [(b, self.slopes[j + 1] - self.slopes[j]) for j, b in enumerate(self.breakpoints)]

    @property
    def kinks(self) -> List[Tuple[Fraction, Fraction]]:
        return [(b, jump) for b, jump in self.jumps if jump != 0]

    def is_convex(self) -> bool:
        return all(jump >= 0 for _, jump in self.jumps)

    def __repr__(self) -> str:
        return f"PiecewiseLinearConvex(breakpoints={[str(b) for b in self.breakpoints]}, " \
               f"slopes={[str(s) for s in self.slopes]})"


class SampledConvex:
    """Values of a convex function on the uniform grid origin + i·step, i = 0..N.

    Args:
        origin: The left end a of the grid.
        step: The grid step h > 0.
        values: φ at each of the N + 1 grid points (N >= 2).
    """

    def __init__(self, origin: Rational, step: Rational, values: Sequence[Rational]):
        self.origin = as_fraction(origin)
        self.step = as_fraction(step)
        self.values: Tuple[Fraction, ...] = tuple(as_fraction(v) for v in values)
        if self.step <= 0:
            raise ValueError(f"grid step must be positive, got {self.step}")
        if len(self.values) < 3:
            raise ValueError("a sampled function needs at least three grid points")

    @classmethod
    def from_function(cls, f: Callable[[Fraction], Fraction], a: Rational, b: Rational,
                      step: Rational) -> "SampledConvex":
        a, b, step = as_fraction(a), as_fraction(b), as_fraction(step)
        count = (b - a) / step
        if count.denominator != 1:
            raise ValueError(f"[{a}, {b}] is not a whole number of steps of {step}")
        return cls(a, step, [f(a + i * step) for i in range(int(count) + 1)])

    def node(self, i: int) -> Fraction:
        return self.origin + i * self.step

    @property
    def end(self) -> Fraction:
        return self.node(len(self.values) - 1)

    def second_differences(self) -> List[Fraction]:
        v = self.values
        return [v[i + 1] - 2 * v[i] + v[i - 1] for i in range(1, len(v) - 1)]

    def is_convex(self) -> bool:
        return all(d >= 0 for d in self.second_differences())

    def interpolant(self) -> PiecewiseLinearConvex:
        "The chordal interpolant, extended linearly beyond the grid."
        v, h = self.values, self.step
        slopes = [(v[i + 1] - v[i]) / h for i in range(len(v) - 1)]
        slopes = [slopes[0]] + slopes + [slopes[-1]]
        breakpoints = [self.node(i) for i in range(len(v))]
        return PiecewiseLinearConvex(breakpoints, slopes, (self.origin, v[0]))

    def __call__(self, x: Rational) -> Fraction:
        return self.interpolant()(x)

    def __repr__(self) -> str:
        return f"SampledConvex(origin={self.origin}, step={self.step}, points={len(self.values)})"


ConvexInput = Union[PiecewiseLinearConvex, SampledConvex]


# --- Kink measures ---
@dataclass(frozen=True)
class GriddedDensity:
    "Masses of the cells [origin + k·step, origin + (k+1)·step], placed at the cell midpoints."

    origin: Fraction
    step: Fraction
    masses: Tuple[Fraction, ...]

    def midpoint(self, k: int) -> Fraction:
        return self.origin + (2 * k + 1) * self.step / 2

    def points(self) -> List[Tuple[Fraction, Fraction]]:
        return [(self.midpoint(k), m) for k, m in enumerate(self.masses) if m != 0]

    @property
    def total(self) -> Fraction:
        return sum(self.masses, Fraction(0))


@dataclass(frozen=True)
class KinkMeasure:
    """A finite Borel measure on ℝ: positive point masses plus an optional gridded part.

    Attributes:
        atoms: (location, mass) pairs, sorted by location, masses positive.
        density: Cell masses of the gridded part, if any.
    """

    atoms: Tuple[Tuple[Fraction, Fraction], ...] = ()
    density: Optional[GriddedDensity] = None

    def __post_init__(self):
        atoms = tuple((as_fraction(loc), as_fraction(mass)) for loc, mass in self.atoms)
        for loc, mass in atoms:
            if mass <= 0:
                raise ValueError(f"kink at {loc} has non-positive mass {mass}")
        for (a, _), (b, _) in zip(atoms, atoms[1:]):
            if a >= b:
                raise ValueError(f"kink locations must be distinct and sorted: {a} >= {b}")
        object.__setattr__(self, "atoms", atoms)

    def points(self) -> List[Tuple[Fraction, Fraction]]:
        "Every (location, mass) the measure puts, gridded part included."
        pts = list(self.atoms)
        if self.density is not None:
            pts += self.density.points()
        return pts

    @property
    def total(self) -> Fraction:
        return sum((m for _, m in self.points()), Fraction(0))

    def mass_between(self, u: Rational, v: Rational) -> Fraction:
        "ν((u, v)), the open interval."
        u, v = as_fraction(u), as_fraction(v)
        return sum((m for loc, m in self.points() if u < loc < v), Fraction(0))

    def integrate(self, f: Callable[[Fraction], Fraction]) -> Fraction:
        return sum((m * f(loc) for loc, m in self.points()), Fraction(0))


@dataclass(frozen=True)
class ConvexDecomposition:
    """φ(v) = φ(u) + ∫ h_u^v dν + L(v) − L(u), L being the linear correction.

    Attributes:
        x0: The normalization point.
        nu: The kink measure of the normalized function.
        left_slope: D⁻φ(x0), the slope removed on (-∞, x0].
        right_slope: D⁺φ(x0), the slope removed on (x0, ∞).
    """

    x0: Fraction
    nu: KinkMeasure
    left_slope: Fraction = Fraction(0)
    right_slope: Fraction = Fraction(0)

    def correction(self, x: Rational) -> Fraction:
        x = as_fraction(x)
        slope = self.right_slope if x > self.x0 else self.left_slope
        return slope * (x - self.x0)


# --- Normalization ---
def _pl_minimizer(phi: PiecewiseLinearConvex) -> Optional[Fraction]:
    "Smallest minimizer; the first breakpoint when the argmin is a left ray; None when unbounded below."
    s = phi.slopes
    if s[0] > 0 or s[-1] < 0:
        return None
    if not phi.breakpoints:
        return phi.anchor[0]
    if s[0] == 0:
        return phi.breakpoints[0]
    for j, b in enumerate(phi.breakpoints):
        if s[j + 1] >= 0:
            return b
    return None


def _sampled_minimizer(phi: SampledConvex) -> Tuple[int, Fraction]:
    "Index of the smallest grid argmin and the slope estimate removed there."
    v, h = phi.values, phi.step
    low = min(v)
    i = v.index(low)
    if i == 0:
        return i, (v[1] - v[0]) / h
    if i == len(v) - 1:
        return i, (v[-1] - v[-2]) / h
    return i, (v[i + 1] - v[i - 1]) / (2 * h)


def _normalize_pl(phi: PiecewiseLinearConvex, x0: Fraction) -> PiecewiseLinearConvex:
    left, right = phi.left_derivative(x0), phi.right_derivative(x0)
    points = sorted(set(phi.breakpoints) | {x0})
    slopes = []
    # piece j lies between points[j-1] and points[j]
    for j in range(len(points) + 1):
        sample_x = points[0] - 1 if j == 0 else (points[j - 1] + 1 if j == len(points) else (points[j - 1] + points[j]) / 2)
        slopes.append(phi.right_derivative(sample_x) - (right if sample_x > x0 else left))
    # drop breakpoints without a slope change
    kept_points, kept_slopes = [], [slopes[0]]
    for b, s in zip(points, slopes[1:]):
        if s != kept_slopes[-1]:
            kept_points.append(b)
            kept_slopes.append(s)
    return PiecewiseLinearConvex(kept_points, kept_slopes, (x0, phi(x0)))


def _normalize_sampled(phi: SampledConvex, i0: int, c0: Fraction) -> SampledConvex:
    x0 = phi.node(i0)
    return SampledConvex(phi.origin, phi.step,
                         [v - c0 * (phi.node(i) - x0) for i, v in enumerate(phi.values)])


def _require_convex(phi: ConvexInput) -> None:
    if isinstance(phi, PiecewiseLinearConvex):
        for b, jump in phi.jumps:
            if jump < 0:
                raise NonConvexError(f"slope decreases by {-jump} at {b}")
    else:
        for i, d in enumerate(phi.second_differences(), start=1):
            if d < 0:
                raise NonConvexError(f"negative second difference {d} at grid point {phi.node(i)}")


def normalize_at_min(phi: ConvexInput) -> Tuple[Fraction, ConvexInput]:
    """Returns the smallest minimizer x0 and φ̂ with zero one-sided slopes at x0.

    φ̂(x) = φ(x) − D⁺φ(x0)(x − x0) for x > x0 and φ(x) − D⁻φ(x0)(x − x0) for
    x <= x0. For sampled input the centred difference at x0 is removed on both sides.

    Raises:
        NonConvexError: If φ is not convex.
        NoMinimizerError: If φ does not attain its infimum on the represented range.
    """
    _require_convex(phi)
    if isinstance(phi, PiecewiseLinearConvex):
        x0 = _pl_minimizer(phi)
        if x0 is None:
            raise NoMinimizerError(f"slopes run from {phi.slopes[0]} to {phi.slopes[-1]}: "
                                   f"the infimum is not attained")
        return x0, _normalize_pl(phi, x0)
    i0, c0 = _sampled_minimizer(phi)
    if i0 in (0, len(phi.values) - 1) and c0 != 0:
        raise NoMinimizerError(f"the sampled function is monotone at the grid end {phi.node(i0)}")
    return phi.node(i0), _normalize_sampled(phi, i0, c0)


# --- Kernel, decomposition and reconstruction ---
def kernel_eval(u: Rational, v: Rational, x0: Rational, x: Rational) -> Fraction:
    "h_u^v(x) = (v − x∨u)⁺·1{x > x0} − (v∧x − u)⁺·1{x <= x0}."
    u, v, x0, x = as_fraction(u), as_fraction(v), as_fraction(x0), as_fraction(x)
    if x > x0:
        return max(v - max(x, u), Fraction(0))
    return -max(min(v, x) - u, Fraction(0))


def decompose(phi: ConvexInput, x0: Optional[Rational] = None) -> ConvexDecomposition:
    """The kink measure of φ normalized at x0.

    For piecewise-linear input ν has an atom at every breakpoint with mass equal
    to the slope increase, except at x0. For sampled input ν is gridded. When x0
    is omitted the smallest minimizer is used; a monotone or affine φ is
    normalized at its anchor (piecewise-linear) or at the grid argmin (sampled).

    Raises:
        NonConvexError: If φ is not convex.
    """
    _require_convex(phi)
    if isinstance(phi, PiecewiseLinearConvex):
        if x0 is None:
            x0 = _pl_minimizer(phi)
            if x0 is None:
                x0 = phi.anchor[0]
        x0 = as_fraction(x0)
        atoms = tuple((b, jump) for b, jump in phi.kinks if b != x0)
        dec = ConvexDecomposition(x0, KinkMeasure(atoms), phi.left_derivative(x0), phi.right_derivative(x0))
        logger.debug(f"Decomposed piecewise-linear function at x0={x0}: {len(atoms)} atoms")
        return dec
    if x0 is None:
        i0, c0 = _sampled_minimizer(phi)
    else:
        offset = (as_fraction(x0) - phi.origin) / phi.step
        if offset.denominator != 1 or not 0 <= offset < len(phi.values):
            raise ValueError(f"x0={x0} is not a grid point")
        i0 = int(offset)
        v, h = phi.values, phi.step
        if i0 == 0:
            c0 = (v[1] - v[0]) / h
        elif i0 == len(v) - 1:
            c0 = (v[-1] - v[-2]) / h
        else:
            c0 = (v[i0 + 1] - v[i0 - 1]) / (2 * h)
    # node curvature d_i = Δ²_i / h, with d = 0 at both grid ends
    h = phi.step
    nodes = [Fraction(0)] + [d / h for d in phi.second_differences()] + [Fraction(0)]
    cells = tuple((nodes[k] + nodes[k + 1]) / 2 for k in range(len(nodes) - 1))
    density = GriddedDensity(phi.origin, h, cells)
    logger.debug(f"Decomposed sampled function at x0={phi.node(i0)}: {len(cells)} cells, total mass {density.total}")
    return ConvexDecomposition(phi.node(i0), KinkMeasure((), density), c0, c0)


def reconstruct(x0: Rational, nu: KinkMeasure, u: Rational, phi_u: Rational, v: Rational,
                left_slope: Rational = 0, right_slope: Rational = 0) -> Fraction:
    """φ(v) from φ(u) and the decomposition.

    Uses φ(v) = φ(u) + ∫ h_u^v dν + L(v) − L(u) when v >= u, and the same
    identity with u and v exchanged otherwise.
    """
    x0, u, v, phi_u = as_fraction(x0), as_fraction(u), as_fraction(v), as_fraction(phi_u)
    correction = ConvexDecomposition(x0, nu, as_fraction(left_slope), as_fraction(right_slope)).correction
    if v >= u:
        return phi_u + nu.integrate(lambda x: kernel_eval(u, v, x0, x)) + correction(v) - correction(u)
    return phi_u - nu.integrate(lambda x: kernel_eval(v, u, x0, x)) - correction(u) + correction(v)


def reconstruct_from(dec: ConvexDecomposition, u: Rational, phi_u: Rational, v: Rational) -> Fraction:
    return reconstruct(dec.x0, dec.nu, u, phi_u, v, dec.left_slope, dec.right_slope)


def value_from_minimum(dec: ConvexDecomposition, phi_x0: Rational, v: Rational) -> Fraction:
    """φ(v) from φ(x0) by the one-sided integrals.

    φ(v) = φ(x0) + ∫_{x > x0} (v − x)⁺ dν for v > x0 and
    φ(v) = φ(x0) + ∫_{x <= x0} (x − v)⁺ dν for v <= x0, plus the linear correction.
    """
    x0, v = dec.x0, as_fraction(v)
    if v > x0:
        curved = dec.nu.integrate(lambda x: max(v - x, Fraction(0)) if x > x0 else Fraction(0))
    else:
        curved = dec.nu.integrate(lambda x: max(x - v, Fraction(0)) if x <= x0 else Fraction(0))
    return as_fraction(phi_x0) + curved + dec.correction(v)


def null_intervals(phi: ConvexInput, x0: Optional[Rational] = None) -> List[Tuple[float, float]]:
    """Maximal open intervals on which the slope of φ does not increase.

    Infinite ends are reported as ±INFINITY. For piecewise-linear input every
    kink separates two intervals, including a kink at x0 that the
    normalization moves into the linear correction. Sampled input uses the
    gridded kink measure normalized at x0.
    """
    _require_convex(phi)
    if isinstance(phi, PiecewiseLinearConvex):
        points = [loc for loc, _ in phi.kinks]
    else:
        points = sorted(loc for loc, _ in decompose(phi, x0).nu.points())
    ends = [-INFINITY] + points + [INFINITY]
    return [(a, b) for a, b in zip(ends, ends[1:]) if a != b]


# --- The Ω-side measure ---
@dataclass(frozen=True)
class StieltjesLambda:
    """A finite structure on cells of the real line with the identity-like quantity X.

    Attributes:
        structure: The power-set ring of cells with λ(cell) = F(right) − F(left).
        position: X(cell), the kink location inside the cell or its midpoint.
        x0: The normalization point.
        cells: (left, right) per ground atom, in ground order.
        left_slope, right_slope: The linear correction removed at x0.
    """

    structure: MeasureStructure
    position: RandomQuantity
    x0: Fraction
    cells: Tuple[Tuple[Fraction, Fraction], ...]
    left_slope: Fraction = Fraction(0)
    right_slope: Fraction = Fraction(0)

    def kernel_quantity(self, u: Rational, v: Rational) -> RandomQuantity:
        "h_u^v(X) on the cells."
        ground = self.structure.ground
        return RandomQuantity(ground, {a: kernel_eval(u, v, self.x0, self.position(a)) for a in ground.atoms})

    def interval_mass(self, u: Rational, v: Rational) -> Fraction:
        "λ({u < X <= v})."
        u, v = as_fraction(u), as_fraction(v)
        ground = self.structure.ground
        hit = Subset(ground, (a for a in ground.atoms if u < self.position(a) <= v))
        return self.structure.lam(hit)

    def reconstruct(self, u: Rational, phi_u: Rational, v: Rational) -> Fraction:
        """φ(v) = φ(u) + ∫ h_u^v(X) dλ + L(v) − L(u), through the layer-cake integral."""
        u, v, phi_u = as_fraction(u), as_fraction(v), as_fraction(phi_u)
        dec = ConvexDecomposition(self.x0, KinkMeasure(), self.left_slope, self.right_slope)
        if v >= u:
            return phi_u + integral(self.kernel_quantity(u, v), self.structure) + dec.correction(v) - dec.correction(u)
        return phi_u - integral(self.kernel_quantity(v, u), self.structure) - dec.correction(u) + dec.correction(v)


def _cumulative(dec: ConvexDecomposition, x: Fraction) -> Fraction:
    # ν((x0, x]) to the right of x0, −ν([x, x0)) to the left
    if x >= dec.x0:
        return sum((m for loc, m in dec.nu.points() if dec.x0 < loc <= x), Fraction(0))
    return -sum((m for loc, m in dec.nu.points() if x <= loc < dec.x0), Fraction(0))


def distribution_function(phi: ConvexInput, x0: Rational, x: Rational) -> Fraction:
    """F(x) = D⁺φ̂(x∨x0) + D⁻φ̂(x∧x0) for φ normalized at x0.

    Read off the kink measure, so sampled input gets the distribution
    function of its gridded ν.
    """
    return _cumulative(decompose(phi, x0), as_fraction(x))


def _cell_label(left: Fraction, right: Fraction) -> str:
    return f"({format_fraction(left)},{format_fraction(right)}]"


def stieltjes_lambda(phi: ConvexInput, thresholds: Sequence[Rational], x0: Optional[Rational] = None) -> StieltjesLambda:
    """Builds λ0 on the cells cut by the thresholds and x0.

    Each cell (p, q] gets λ0 = F(q) − F(p). Every point of ν must fall strictly
    inside a cell; cells holding several points are split at the midpoints
    between them, and X(cell) is the point's location, so the layer-cake
    integral of h_u^v(X) equals the sum against ν exactly. For piecewise-linear
    input the points are the kinks and must lie inside the threshold range.
    For sampled input they are the cell midpoints of the gridded ν, and the
    grid ends are added to the cuts.

    Raises:
        BracketError: If a kink lies outside the threshold range or on a cut
            point, or if thresholds leave a sampled grid.
    """
    points = sorted({as_fraction(t) for t in thresholds})
    if len(points) < 1:
        raise BracketError("at least one threshold is needed")
    _require_convex(phi)
    dec = decompose(phi, x0)
    kinks = [loc for loc, _ in dec.nu.points()]
    x0 = dec.x0
    cuts = sorted(set(points) | {x0})
    if isinstance(phi, SampledConvex):
        for t in points:
            if not phi.origin <= t <= phi.end:
                raise BracketError(f"threshold {t} leaves the grid [{phi.origin}, {phi.end}]")
        cuts = sorted(set(cuts) | {phi.origin, phi.end})
    for k in kinks:
        if not cuts[0] < k < cuts[-1]:
            raise BracketError(f"kink at {k} is outside the threshold range [{cuts[0]}, {cuts[-1]}]")
        if k in cuts:
            raise BracketError(f"kink at {k} coincides with a cut point")
    # split cells holding more than one kink
    refined = set(cuts)
    for a, b in zip(kinks, kinks[1:]):
        if bisect.bisect_left(cuts, a) == bisect.bisect_left(cuts, b):
            refined.add((a + b) / 2)
    cuts = sorted(refined)
    cells = tuple(zip(cuts, cuts[1:]))
    if not cells:
        raise BracketError("the thresholds and x0 cut out no cell")
    labels = [_cell_label(p, q) for p, q in cells]
    ground = GroundSet(labels)
    positions = {}
    values = {}
    for label, (p, q) in zip(labels, cells):
        inside = [k for k in kinks if p < k < q]
        positions[label] = inside[0] if inside else (p + q) / 2
        values[Subset(ground, [label])] = _cumulative(dec, q) - _cumulative(dec, p)
    ring = power_set_ring(ground)
    structure = MeasureStructure(ring, AdditiveSetFunction(ring, values))
    logger.debug(f"Stieltjes structure with {len(cells)} cells around x0={x0}")
    return StieltjesLambda(structure, RandomQuantity(ground, positions), x0, cells, dec.left_slope, dec.right_slope)
