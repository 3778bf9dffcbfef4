# charges/conglomerate.py
# Representation theorems as decision procedures on finite instances:
# conglomerability of a functional, probability (barycentric) representation,
# companions with and without a null ideal, disintegration of a marginal into
# a parametric family, the take-out property of kernels, and directedness.
#
# With a finite column set the conical hull of the evaluation functionals is
# polyhedral and therefore closed, so "φ lies in the closed conical hull" is
# plain feasibility of {μ >= 0 : Tμ = φ}. Every function on a finite set is
# bounded, so the purely finitely additive remainder of the general theorem is
# always zero; representation_residual returns it so callers can assert that.
#
# Directedness: T is directed iff some attainable Th' is >= 1 on the support
# (the columns where some row is nonzero). If such Th' exists, |Th| <= c·Th'
# for c = max|Th|. Conversely a generic combination of the rows is nonzero on
# every support column, and any Th' dominating its absolute value is
# strictly positive there.

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

from .errors import ChargeError, GroundSetMismatchError, KernelError
from .integrate import RandomQuantity, integral, minimal_structure
from .lp import Feasible, FeasibilityOutcome, FeasibilitySystem, Infeasible, solve_feasibility
from .setcore import (
    AdditiveSetFunction,
    GroundSet,
    MeasureStructure,
    Rational,
    SetRing,
    Subset,
    all_subsets,
    as_fraction,
    extension_value,
    outer_measure,
    point_mass_structure,
)

logger = logging.getLogger(__name__)


# --- Instances ---
@dataclass(frozen=True)
class ConglomerabilityInstance:
    """The finite form of a functional φ on a span of h_1..h_d and a map T.

    Args:
        basis_labels: Names of the h_i.
        omega: The columns (the set T maps into functions on).
        T: T[i][k] = (T h_i)(omega.atoms[k]).
        phi: phi[i] = φ(h_i).
    """

    basis_labels: Tuple[str, ...]
    omega: GroundSet
    T: Tuple[Tuple[Fraction, ...], ...]
    phi: Tuple[Fraction, ...]

    def __post_init__(self):
        labels = tuple(str(l) for l in self.basis_labels)
        if len(set(labels)) != len(labels):
            raise ChargeError(f"basis labels are not unique: {list(labels)}")
        T = tuple(tuple(as_fraction(v) for v in row) for row in self.T)
        phi = tuple(as_fraction(v) for v in self.phi)
        if len(T) != len(labels) or len(phi) != len(labels):
            raise ChargeError(f"{len(labels)} basis labels but {len(T)} rows of T and {len(phi)} values of phi")
        for i, row in enumerate(T):
            if len(row) != len(self.omega):
                raise ChargeError(f"row {labels[i]} of T has {len(row)} entries for {len(self.omega)} columns")
        object.__setattr__(self, "basis_labels", labels)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "phi", phi)

    @property
    def d(self) -> int:
        return len(self.basis_labels)

    def column(self, k: int) -> Tuple[Fraction, ...]:
        return tuple(row[k] for row in self.T)

    def combination(self, a: Sequence[Fraction]) -> Tuple[Fraction, ...]:
        "(T h)(ω) for every column, where h = Σ a_i h_i."
        return tuple(sum((ai * row[k] for ai, row in zip(a, self.T)), Fraction(0)) for k in range(len(self.omega)))

    def phi_of(self, a: Sequence[Fraction]) -> Fraction:
        return sum((ai * p for ai, p in zip(a, self.phi)), Fraction(0))

    def system(self, normalized: bool = False) -> FeasibilitySystem:
        return FeasibilitySystem(self.T, self.phi, normalized)


@dataclass(frozen=True)
class IdealOfSets:
    """An ideal of subsets given by generators; membership is inclusion in their union."""

    ground: GroundSet
    generators: Tuple[Subset, ...] = ()

    def __post_init__(self):
        for g in self.generators:
            if g.ground != self.ground:
                raise GroundSetMismatchError(f"ideal generator {g} is not on {self.ground!r}")

    @property
    def union(self) -> Subset:
        u = self.ground.empty
        for g in self.generators:
            u = u | g
        return u

    def __contains__(self, subset: Subset) -> bool:
        return subset <= self.union


@dataclass(frozen=True)
class DisintegrationInstance:
    """A probability m on an algebra of Ω and a parametric family Q_θ on the same algebra."""

    algebra: SetRing
    m: AdditiveSetFunction
    thetas: Tuple[str, ...]
    Q: Mapping[str, AdditiveSetFunction]

    def __post_init__(self):
        if not self.algebra.contains(self.algebra.ground.full):
            raise ChargeError("a disintegration needs an algebra: the whole ground set must be a member")
        if self.m.ring != self.algebra:
            raise ChargeError("the marginal is defined on a different algebra")
        if self.m.total != 1:
            raise ChargeError(f"the marginal has total mass {self.m.total}, expected 1")
        if len(set(self.thetas)) != len(self.thetas) or not self.thetas:
            raise ChargeError("parameter labels must be nonempty and unique")
        for theta in self.thetas:
            if theta not in self.Q:
                raise ChargeError(f"no probability given for parameter {theta}")
            q = self.Q[theta]
            if q.ring != self.algebra:
                raise ChargeError(f"Q[{theta}] is defined on a different algebra")
            if q.total != 1:
                raise ChargeError(f"Q[{theta}] has total mass {q.total}, expected 1")


@dataclass
class CompanionResult:
    """Outcome of a companion search.

    Attributes:
        outcome: The raw LP outcome over the columns of Ω′.
        instance: The instance that was solved.
        mu: Pointwise measure on Ω′ (only when feasible).
        minimal: The minimal structure carrying the same integrals (only when feasible and requested).
    """

    outcome: FeasibilityOutcome
    instance: ConglomerabilityInstance
    mu: Optional[Dict[str, Fraction]] = None
    minimal: Optional[MeasureStructure] = None

    @property
    def feasible(self) -> bool:
        return self.outcome.feasible


# --- Conglomerability and barycentres ---
def check_conglomerability(inst: ConglomerabilityInstance) -> FeasibilityOutcome:
    """Feasible(μ) with Σ_ω μ(ω)T[i][ω] = φ(h_i), or a certificate a with
    φ(Σa_i h_i) < 0 while T(Σa_i h_i) >= 0 everywhere."""
    outcome = solve_feasibility(inst.system())
    logger.info(f"Conglomerability of {inst.d}x{len(inst.omega)} instance: "
                f"{'representable' if outcome.feasible else 'violated'}")
    return outcome


def probability_representation(inst: ConglomerabilityInstance) -> FeasibilityOutcome:
    """As check_conglomerability with Σμ = 1.

    On failure the certificate is (a, c) over the basis plus the normalization
    row, and Σa_i φ(h_i) < -c <= min_ω Σa_i T[i][ω].
    """
    outcome = solve_feasibility(inst.system(normalized=True))
    logger.info(f"Probability representation of {inst.d}x{len(inst.omega)} instance: "
                f"{'found' if outcome.feasible else 'impossible'}")
    return outcome


def representing_measure(inst: ConglomerabilityInstance, outcome: FeasibilityOutcome) -> Dict[str, Fraction]:
    if not isinstance(outcome, Feasible):
        raise ChargeError("an infeasible outcome has no representing measure")
    return dict(zip(inst.omega.atoms, outcome.mu))


def representation_residual(inst: ConglomerabilityInstance, mu: Mapping[str, Fraction]) -> Tuple[Fraction, ...]:
    "φ(h_i) − Σ_ω μ(ω)T[i][ω]; the singular part, zero whenever μ represents φ."
    weights = [mu.get(a, Fraction(0)) for a in inst.omega.atoms]
    return tuple(p - sum((w * t for w, t in zip(weights, row)), Fraction(0)) for p, row in zip(inst.phi, inst.T))


def certificate_violation(inst: ConglomerabilityInstance, outcome: Infeasible) -> Tuple[bool, str]:
    """Checks that the first d certificate entries define h with φ(h) < 0 <= Th
    (conic case) or φ(h) < min Th (normalized case)."""
    y = outcome.certificate
    a = y[:inst.d]
    th = inst.combination(a)
    value = inst.phi_of(a)
    if len(y) == inst.d:
        if value < 0 and all(v >= 0 for v in th):
            return True, f"φ(h) = {value} < 0 while Th >= 0"
        return False, f"φ(h) = {value}, min Th = {min(th)}"
    if value < min(th):
        return True, f"φ(h) = {value} < min Th = {min(th)}"
    return False, f"φ(h) = {value} is not below min Th = {min(th)}"


def lift_family(omega: GroundSet,
                generators: Iterable[Tuple[str, Rational, Mapping[str, Rational]]]) -> ConglomerabilityInstance:
    """The linear instance of an arbitrary labelled family.

    Each generator is (label, φ value, Th as a map on omega). Families made of
    several sub-families are passed concatenated, with distinct labels.
    """
    labels, phi, rows = [], [], []
    for label, value, th in generators:
        labels.append(label)
        phi.append(as_fraction(value))
        rows.append(tuple(as_fraction(th[a]) for a in omega.atoms))
    return ConglomerabilityInstance(tuple(labels), omega, tuple(rows), tuple(phi))


def choquet_barycentre(points: Mapping[str, Sequence[Rational]], target: Sequence[Rational]) -> FeasibilityOutcome:
    """A probability on the finite set V = points whose barycentre is target.

    The test space is the affine functions {1, x_1, ..., x_k}; φ is evaluation
    at target.
    """
    labels = list(points)
    if not labels:
        raise ChargeError("a barycentre needs at least one point")
    k = len(target)
    for label in labels:
        if len(points[label]) != k:
            raise ChargeError(f"point {label} has dimension {len(points[label])}, expected {k}")
    omega = GroundSet(labels)
    rows = [tuple(Fraction(1) for _ in labels)]
    rows += [tuple(as_fraction(points[label][j]) for label in labels) for j in range(k)]
    phi = (Fraction(1),) + tuple(as_fraction(t) for t in target)
    basis = ("1",) + tuple(f"x{j + 1}" for j in range(k))
    return probability_representation(ConglomerabilityInstance(basis, omega, tuple(rows), phi))


# --- Companions ---
def companion_instance(m_struct: MeasureStructure, X: Mapping[str, str], H: Sequence[RandomQuantity],
                       Xprime: Mapping[str, str], omega_prime: GroundSet,
                       labels: Optional[Sequence[str]] = None) -> ConglomerabilityInstance:
    """phi[i] = ∫h_i(X)dm and T[i][ω′] = h_i(X′(ω′)).

    Raises:
        NotIntegrableError: If some h_i(X) is not m-integrable.
    """
    if not H:
        raise ChargeError("a companion problem needs at least one test function")
    states = H[0].ground
    for h in H:
        if h.ground != states:
            raise GroundSetMismatchError("test functions must share a state space")
    for atom in m_struct.ground.atoms:
        if X.get(atom) not in states.index:
            raise ChargeError(f"X maps {atom} outside the state space")
    for atom in omega_prime.atoms:
        if Xprime.get(atom) not in states.index:
            raise ChargeError(f"X′ maps {atom} outside the state space")
    labels = tuple(labels) if labels else tuple(f"h{i + 1}" for i in range(len(H)))
    phi = []
    rows = []
    for h in H:
        pulled = RandomQuantity(m_struct.ground, {a: h(X[a]) for a in m_struct.ground.atoms})
        phi.append(integral(pulled, m_struct))
        rows.append(tuple(h(Xprime[a]) for a in omega_prime.atoms))
    return ConglomerabilityInstance(labels, omega_prime, tuple(rows), tuple(phi))


def _finish_companion(inst: ConglomerabilityInstance, outcome: FeasibilityOutcome, H: Sequence[RandomQuantity],
                      Xprime: Mapping[str, str], emit_minimal: bool) -> CompanionResult:
    result = CompanionResult(outcome, inst)
    if isinstance(outcome, Feasible):
        result.mu = representing_measure(inst, outcome)
        if emit_minimal:
            omega_prime = inst.omega
            mu_struct = point_mass_structure(omega_prime, result.mu)
            pulled = [RandomQuantity(omega_prime, {a: h(Xprime[a]) for a in omega_prime.atoms}) for h in H]
            result.minimal = minimal_structure(pulled, mu_struct)
    return result


def solve_companion(m_struct: MeasureStructure, X: Mapping[str, str], H: Sequence[RandomQuantity],
                    Xprime: Mapping[str, str], omega_prime: GroundSet, probability: bool = False,
                    emit_minimal: bool = True, labels: Optional[Sequence[str]] = None) -> CompanionResult:
    """Searches μ on Ω′ with ∫h(X)dm = Σ μ(ω′)h(X′(ω′)) for every h in H.

    Args:
        probability: Also require μ to be a probability.
        emit_minimal: Attach the minimal structure generated by the level sets of h(X′).
    """
    inst = companion_instance(m_struct, X, H, Xprime, omega_prime, labels)
    outcome = solve_feasibility(inst.system(normalized=probability))
    logger.info(f"Companion search over {len(omega_prime)} points with {len(H)} test functions: "
                f"{'found' if outcome.feasible else 'none'}")
    return _finish_companion(inst, outcome, H, Xprime, emit_minimal)


def solve_companion_with_nulls(m_struct: MeasureStructure, X: Mapping[str, str], H: Sequence[RandomQuantity],
                               Xprime: Mapping[str, str], omega_prime: GroundSet, neg: IdealOfSets,
                               probability: bool = False, emit_minimal: bool = True,
                               labels: Optional[Sequence[str]] = None) -> CompanionResult:
    """solve_companion with every column in the ideal's union forced to zero mass.

    The columns are deleted before solving and reinstated with zero weight, so a
    certificate is stated over the same basis as without the ideal.
    """
    if neg.ground != omega_prime:
        raise GroundSetMismatchError("the null ideal lives on a different ground set than Ω′")
    full = companion_instance(m_struct, X, H, Xprime, omega_prime, labels)
    null = neg.union
    kept = [k for k, a in enumerate(omega_prime.atoms) if a not in null]
    if not kept:
        # Every column is null: only μ = 0 is available.
        zero = all(p == 0 for p in full.phi) and not probability
        if zero:
            outcome: FeasibilityOutcome = Feasible(tuple(Fraction(0) for _ in omega_prime.atoms))
        else:
            outcome = _all_null_certificate(full, probability)
        return _finish_companion(full, outcome, H, Xprime, emit_minimal)
    reduced = ConglomerabilityInstance(full.basis_labels, GroundSet(omega_prime.atoms[k] for k in kept),
                                       tuple(tuple(row[k] for k in kept) for row in full.T), full.phi)
    outcome = solve_feasibility(reduced.system(normalized=probability))
    if isinstance(outcome, Feasible):
        weights = dict(zip(reduced.omega.atoms, outcome.mu))
        outcome = Feasible(tuple(weights.get(a, Fraction(0)) for a in omega_prime.atoms), outcome.pivots)
    logger.info(f"Companion search with {len(omega_prime) - len(kept)} null columns: "
                f"{'found' if outcome.feasible else 'none'}")
    return _finish_companion(full, outcome, H, Xprime, emit_minimal)


def _all_null_certificate(inst: ConglomerabilityInstance, probability: bool) -> Infeasible:
    # With no admissible column the system reads 0 = φ (and 0 = 1 when normalized).
    if probability:
        return Infeasible(tuple(Fraction(0) for _ in inst.phi) + (Fraction(-1),))
    k = next(i for i, p in enumerate(inst.phi) if p != 0)
    y = [Fraction(0)] * inst.d
    y[k] = Fraction(-1) if inst.phi[k] > 0 else Fraction(1)
    return Infeasible(tuple(y))


# --- Disintegration and kernels ---
def disintegration_system(inst: DisintegrationInstance) -> FeasibilitySystem:
    "One row per atom of the algebra, one column per parameter, normalized."
    atoms = inst.algebra.atoms
    matrix = tuple(tuple(inst.Q[theta].atom_values[a] for theta in inst.thetas) for a in atoms)
    rhs = tuple(inst.m.atom_values[a] for a in atoms)
    return FeasibilitySystem(matrix, rhs, normalized=True)


def disintegrate(inst: DisintegrationInstance) -> FeasibilityOutcome:
    """A prior λ on the parameters with m(A) = Σ_θ λ(θ)Q_θ(A) for every A.

    One equation per atom of the algebra suffices by additivity. A certificate
    is indexed by those atoms followed by the normalization row.
    """
    atoms = inst.algebra.atoms
    outcome = solve_feasibility(disintegration_system(inst))
    logger.info(f"Disintegration over {len(atoms)} atoms and {len(inst.thetas)} parameters: "
                f"{'found' if outcome.feasible else 'impossible'}")
    return outcome


def prior_of(inst: DisintegrationInstance, outcome: FeasibilityOutcome) -> Dict[str, Fraction]:
    if not isinstance(outcome, Feasible):
        raise ChargeError("an infeasible disintegration has no prior")
    return dict(zip(inst.thetas, outcome.mu))


def mixture_value(inst: DisintegrationInstance, prior: Mapping[str, Fraction], subset: Subset) -> Fraction:
    return sum((prior[t] * inst.Q[t](subset) for t in inst.thetas), Fraction(0))


class TakeoutKernel:
    """A kernel K(A, s) on an algebra of Ω indexed by states s.

    Args:
        algebra: The ring K(·, s) is defined on.
        states: The state space S.
        sections: Additive set function K(·, s) for every state.
    """

    def __init__(self, algebra: SetRing, states: GroundSet, sections: Mapping[str, AdditiveSetFunction]):
        for s in states.atoms:
            if s not in sections:
                raise KernelError(f"no kernel section for state {s}")
            if sections[s].ring != algebra:
                raise KernelError(f"the section for state {s} is on a different ring")
        self.algebra = algebra
        self.states = states
        self.sections = dict(sections)

    @classmethod
    def from_function(cls, algebra: SetRing, states: GroundSet, K) -> "TakeoutKernel":
        """Builds the kernel from a callable K(A, s), checking that each section is additive.

        Raises:
            KernelError: If some K(·, s) is negative or not additive.
        """
        sections = {}
        for s in states.atoms:
            values = {A: as_fraction(K(A, s)) for A in algebra.sets}
            if any(v < 0 for v in values.values()):
                raise KernelError(f"K(·, {s}) takes negative values")
            try:
                sections[s] = AdditiveSetFunction.from_values(algebra, values)
            except ChargeError as e:
                raise KernelError(f"K(·, {s}) is not additive: {e}") from None
        return cls(algebra, states, sections)

    def __call__(self, subset: Subset, state: str) -> Fraction:
        return self.sections[state](subset)

    def section(self, state: str) -> MeasureStructure:
        return MeasureStructure(self.algebra, self.sections[state])


def build_takeout_kernel(inst: DisintegrationInstance, states: GroundSet, G: Mapping[str, str]) -> TakeoutKernel:
    """K(A, s) = Q_{G⁻¹(s)}(A) for s in the range of G and 0 elsewhere.

    Raises:
        KernelError: If G is not injective or leaves the state space.
    """
    targets = [G[t] for t in inst.thetas]
    if len(set(targets)) != len(targets):
        raise KernelError(f"the parameter map {dict(G)} is not injective")
    inverse = {}
    for theta, s in zip(inst.thetas, targets):
        if s not in states.index:
            raise KernelError(f"G maps {theta} outside the state space")
        inverse[s] = theta
    zero = AdditiveSetFunction(inst.algebra, {a: 0 for a in inst.algebra.atoms})
    sections = {s: (inst.Q[inverse[s]] if s in inverse else zero) for s in states.atoms}
    return TakeoutKernel(inst.algebra, states, sections)


def check_concentration(inst: DisintegrationInstance, X: Mapping[str, str], G: Mapping[str, str]) -> Tuple[bool, str]:
    """Checks Q*_θ(A ∩ {X ≠ G(θ)}) = 0 for every member A and parameter θ."""
    ground = inst.algebra.ground
    for theta in inst.thetas:
        ms = MeasureStructure(inst.algebra, inst.Q[theta])
        off = Subset(ground, (a for a in ground.atoms if X[a] != G[theta]))
        for A in inst.algebra.atoms:
            mass = outer_measure(ms, A & off)
            if mass != 0:
                return False, f"Q[{theta}] gives outer mass {mass} to {A & off} where X != G({theta})"
    return True, "every Q_θ is concentrated on {X = G(θ)}"


def verify_takeout(kernel: TakeoutKernel, X: Mapping[str, str]) -> bool:
    """Exhaustively checks K(A ∩ {X ∈ E}; s) = K(A; s)·1_E(s).

    A ranges over the kernel's ring, E over every subset of the state space,
    s over every state. A ∩ {X ∈ E} must be carried by K(·, s).
    """
    ground = kernel.algebra.ground
    for s in kernel.states.atoms:
        section = kernel.section(s)
        for E in all_subsets(kernel.states):
            hit = Subset(ground, (a for a in ground.atoms if X[a] in E))
            for A in kernel.algebra.sets:
                expected = kernel(A, s) if s in E else Fraction(0)
                if extension_value(section, A & hit) != expected:
                    logger.debug(f"Take-out fails at A={A}, E={E}, s={s}")
                    return False
    return True


def kernel_mixing(inst: DisintegrationInstance, kernel: TakeoutKernel, X: Mapping[str, str]) -> FeasibilityOutcome:
    """A measure μ on Ω with m(A) = Σ_ω μ(ω)K(A, X(ω)) for every atom A of the algebra."""
    ground = inst.algebra.ground
    atoms = inst.algebra.atoms
    T = tuple(tuple(kernel(A, X[w]) for w in ground.atoms) for A in atoms)
    phi = tuple(inst.m.atom_values[A] for A in atoms)
    mixing = ConglomerabilityInstance(tuple(repr(A) for A in atoms), ground, T, phi)
    return check_conglomerability(mixing)


# --- Directedness ---
def is_directed(inst: ConglomerabilityInstance) -> Tuple[bool, Optional[Tuple[Fraction, ...]]]:
    """Decides whether every |Th| is dominated by some Th′.

    Returns:
        (True, a) with Σa_i T[i][ω] >= 1 on the support, or (False, None).
    """
    support = [k for k in range(len(inst.omega)) if any(row[k] != 0 for row in inst.T)]
    if not support:
        return True, tuple(Fraction(0) for _ in range(inst.d))
    # a = a⁺ − a⁻ and slacks s >= 0:  Σ_i (a⁺_i − a⁻_i) T[i][k] − s_k = 1 for k in the support.
    d, p = inst.d, len(support)
    matrix = []
    for r, k in enumerate(support):
        col = [inst.T[i][k] for i in range(d)]
        slack = [Fraction(-1) if j == r else Fraction(0) for j in range(p)]
        matrix.append(tuple(col + [-v for v in col] + slack))
    outcome = solve_feasibility(FeasibilitySystem(tuple(matrix), tuple(Fraction(1) for _ in support)))
    if isinstance(outcome, Feasible):
        a = tuple(outcome.mu[i] - outcome.mu[d + i] for i in range(d))
        return True, a
    return False, None
