# charges/selftest.py
# Seeded acceptance suites, runnable without pytest via `main.py selftest`.
# Every suite returns (name, passed, message); a suite that raises counts as
# failed and never stops the others.

import itertools
import logging
import random
import time
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .conglomerate import (
    ConglomerabilityInstance,
    DisintegrationInstance,
    IdealOfSets,
    build_takeout_kernel,
    certificate_violation,
    check_concentration,
    disintegrate,
    disintegration_system,
    mixture_value,
    prior_of,
    probability_representation,
    solve_companion,
    solve_companion_with_nulls,
    verify_takeout,
)
from .convexdec import PiecewiseLinearConvex, SampledConvex, decompose, reconstruct_from, stieltjes_lambda
from .errors import NotIntegrableError
from .integrate import RandomQuantity, integral, layer_integrals, minimal_structure
from .lp import FeasibilitySystem, solve_feasibility, verify_outcome
from .setcore import (
    AdditiveSetFunction,
    GroundSet,
    MeasureStructure,
    SetRing,
    Subset,
    is_extension,
    point_mass_structure,
    power_set_ring,
)
from .skorohod import Enumeration, pushforward_measure, sample_companion, verify_pushforward

logger = logging.getLogger(__name__)

SuiteResult = Tuple[str, bool, str]


# --- Random builders ---
def labels(prefix: str, n: int) -> List[str]:
    return [f"{prefix}{i + 1}" for i in range(n)]


def random_power_structure(rng: random.Random, n: int, grid: Sequence[Fraction]) -> MeasureStructure:
    ground = GroundSet(labels("w", n))
    return point_mass_structure(ground, {a: rng.choice(grid) for a in ground.atoms})


def random_coarse_structure(rng: random.Random, n: int) -> MeasureStructure:
    "Points are dealt into up to n atoms or left outside the ring's union."
    ground = GroundSet(labels("w", n))
    groups: Dict[int, List[str]] = {}
    for a in ground.atoms:
        slot = rng.randrange(-1, max(1, n // 2) + 1)
        if slot >= 0:
            groups.setdefault(slot, []).append(a)
    atoms = [Subset(ground, members) for members in groups.values()]
    ring = SetRing(ground, atoms)
    values = {atom: Fraction(rng.choice([0, 0, 1, 2, 3]), rng.choice([1, 2])) for atom in ring.atoms}
    return MeasureStructure(ring, AdditiveSetFunction(ring, values))


def random_probability(rng: random.Random, keys: Sequence, positive: bool = False) -> Dict:
    weights = [rng.randint(1 if positive else 0, 5) for _ in keys]
    if sum(weights) == 0:
        weights[rng.randrange(len(weights))] = 1
    total = sum(weights)
    return {k: Fraction(w, total) for k, w in zip(keys, weights)}


def random_convex_pl(rng: random.Random, max_kinks: int = 20) -> PiecewiseLinearConvex:
    k = rng.randint(0, max_kinks)
    points = sorted({Fraction(rng.randint(-60, 60), rng.randint(1, 4)) for _ in range(k)})
    slopes = [Fraction(rng.randint(-6, 2), rng.randint(1, 3))]
    for _ in points:
        slopes.append(slopes[-1] + Fraction(rng.randint(0, 4), rng.randint(1, 3)))
    return PiecewiseLinearConvex(points, slopes, (0, Fraction(rng.randint(-10, 10))))


def solve_unique(A: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> Optional[List[Fraction]]:
    "The unique solution of A w = b, or None when the system is inconsistent or rank deficient."
    m, k = len(A), len(A[0])
    M = [list(row) + [bi] for row, bi in zip(A, b)]
    r = 0
    for c in range(k):
        p = next((i for i in range(r, m) if M[i][c] != 0), None)
        if p is None:
            return None
        M[r], M[p] = M[p], M[r]
        pivot = M[r][c]
        M[r] = [v / pivot for v in M[r]]
        for i in range(m):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[r])]
        r += 1
    if any(M[i][k] != 0 for i in range(r, m)):
        return None
    return [M[i][k] for i in range(k)]


def in_convex_hull(columns: Sequence[Sequence[Fraction]], point: Sequence[Fraction]) -> bool:
    """Exhaustive membership test: some affinely independent subset of at most
    d + 1 columns carries nonnegative barycentric weights for the point."""
    d = len(point)
    for size in range(1, min(len(columns), d + 1) + 1):
        for subset in itertools.combinations(columns, size):
            A = [[col[i] for col in subset] for i in range(d)] + [[Fraction(1)] * size]
            w = solve_unique(A, list(point) + [Fraction(1)])
            if w is not None and all(x >= 0 for x in w):
                return True
    return False


def expected_integral(X: RandomQuantity, ms: MeasureStructure) -> Optional[Fraction]:
    """Integral read off atom by atom: None unless X vanishes off the ring's
    union and is constant on every atom of positive mass."""
    union = ms.ring.union
    if any(X(a) != 0 for a in ms.ground.atoms if a not in union):
        return None
    total = Fraction(0)
    for atom, mass in ms.lam.atom_values.items():
        if mass == 0:
            continue
        values = {X(a) for a in atom}
        if len(values) != 1:
            return None
        total += values.pop() * mass
    return total


def all_structures(ground: GroundSet, grid: Sequence[Fraction]):
    "Every structure whose ring atoms form a partition of some subset of the ground set, valued on the grid."
    points = list(ground.atoms)
    for assignment in itertools.product(range(-1, len(points)), repeat=len(points)):
        # canonical labelling of blocks avoids repeating the same partition
        seen: List[int] = []
        canonical = True
        for slot in assignment:
            if slot < 0:
                continue
            if slot not in seen:
                if slot != len(seen):
                    canonical = False
                    break
                seen.append(slot)
        if not canonical:
            continue
        blocks: Dict[int, List[str]] = {}
        for a, slot in zip(points, assignment):
            if slot >= 0:
                blocks.setdefault(slot, []).append(a)
        ring = SetRing(ground, [Subset(ground, m) for m in blocks.values()])
        for values in itertools.product(grid, repeat=len(ring.atoms)):
            yield MeasureStructure(ring, AdditiveSetFunction(ring, dict(zip(ring.atoms, values))))


def represents(candidate: MeasureStructure, family: Sequence[RandomQuantity], ms: MeasureStructure) -> bool:
    """∫ h∧t dλ agrees with ms for every h and every value t of h; the integrals
    are piecewise linear in t with kinks at those values, so this covers every t."""
    for h in family:
        for t in h.distinct_values():
            if t <= 0:
                continue
            capped = RandomQuantity(h.ground, {a: min(h(a), t) for a in h.ground.atoms})
            try:
                if integral(capped, candidate) != integral(capped, ms):
                    return False
            except NotIntegrableError:
                return False
    return True


# --- Suites ---
def suite_farkas(rng: random.Random) -> str:
    for k in range(500):
        d, n = rng.randint(1, 5), rng.randint(1, 8)
        T = [[rng.randint(-10, 10) for _ in range(n)] for _ in range(d)]
        phi = [rng.randint(-10, 10) for _ in range(d)]
        system = FeasibilitySystem(tuple(map(tuple, T)), tuple(phi))
        outcome = solve_feasibility(system)
        ok, message = verify_outcome(system, outcome)
        if not ok:
            raise AssertionError(f"instance {k}: {message}")
        if not outcome.feasible:
            inst = ConglomerabilityInstance(tuple(labels("h", d)), GroundSet(labels("w", n)), T, phi)
            ok, message = certificate_violation(inst, outcome)
            if not ok:
                raise AssertionError(f"instance {k}: {message}")
    return "500 instances, every answer re-verified"


def suite_layer_cake(rng: random.Random) -> str:
    grid = [Fraction(v, 2) for v in range(0, 7)]
    for k in range(1000):
        ms = random_power_structure(rng, rng.randint(1, 5), grid)
        X = RandomQuantity(ms.ground, {a: Fraction(rng.randint(-6, 6), rng.choice([1, 2, 3])) for a in ms.ground.atoms})
        direct = sum((X(a) * ms.lam(Subset(ms.ground, [a])) for a in ms.ground.atoms), Fraction(0))
        if integral(X, ms) != direct:
            raise AssertionError(f"power-set structure {k}: layer cake differs from the direct sum")
    raised = 0
    for k in range(200):
        ms = random_coarse_structure(rng, rng.randint(1, 5))
        X = RandomQuantity(ms.ground, {a: rng.randint(-3, 3) for a in ms.ground.atoms})
        expected = expected_integral(X, ms)
        layers = layer_integrals(X, ms)
        try:
            value = integral(X, ms)
        except NotIntegrableError:
            if layers.integrable or expected is not None:
                raise AssertionError(f"coarse structure {k}: spurious NotIntegrableError")
            raised += 1
            continue
        if expected is None or value != expected or not layers.integrable:
            raise AssertionError(f"coarse structure {k}: integral {value}, expected {expected}")
    return f"1000 power-set and 200 coarse structures ({raised} not integrable)"


def suite_probability_criterion(rng: random.Random) -> str:
    grid = [Fraction(v, 2) for v in range(-4, 5)]
    agreed = 0
    for k in range(300):
        d, n = rng.randint(1, 3), rng.randint(1, 4)
        columns = [[rng.choice(grid) for _ in range(d)] for _ in range(n)]
        phi = [rng.choice(grid) for _ in range(d)]
        if rng.random() < 0.5:
            # bias towards points inside the hull
            w = random_probability(rng, range(n))
            phi = [sum((w[j] * columns[j][i] for j in range(n)), Fraction(0)) for i in range(d)]
        T = tuple(tuple(columns[j][i] for j in range(n)) for i in range(d))
        inst = ConglomerabilityInstance(tuple(labels("h", d)), GroundSet(labels("w", n)), T, tuple(phi))
        outcome = probability_representation(inst)
        if outcome.feasible != in_convex_hull(columns, phi):
            raise AssertionError(f"instance {k}: LP says {outcome.feasible}, exhaustive search disagrees")
        ok, message = verify_outcome(inst.system(normalized=True), outcome)
        if not ok:
            raise AssertionError(f"instance {k}: {message}")
        agreed += 1
    return f"{agreed} instances agree with exhaustive hull search"


def random_companion(rng: random.Random):
    "A companion problem that is feasible by construction: Ω′ contains a copy of Ω."
    ms = random_power_structure(rng, rng.randint(1, 4), [Fraction(v, 4) for v in range(0, 5)])
    states = GroundSet(labels("s", rng.randint(1, 4)))
    X = {a: rng.choice(states.atoms) for a in ms.ground.atoms}
    extra = rng.randint(0, 3)
    omega_prime = GroundSet(list(ms.ground.atoms) + labels("x", extra))
    Xprime = dict(X)
    Xprime.update({a: rng.choice(states.atoms) for a in omega_prime.atoms if a not in X})
    H = [RandomQuantity(states, {s: rng.randint(0, 4) for s in states.atoms}) for _ in range(rng.randint(1, 4))]
    return ms, X, H, Xprime, omega_prime


def suite_companion(rng: random.Random) -> str:
    for k in range(100):
        ms, X, H, Xprime, omega_prime = random_companion(rng)
        result = solve_companion(ms, X, H, Xprime, omega_prime)
        if not result.feasible:
            raise AssertionError(f"instance {k}: a feasible companion problem was declared infeasible")
        mu_struct = point_mass_structure(omega_prime, result.mu)
        for i, h in enumerate(H):
            target = integral(RandomQuantity(ms.ground, {a: h(X[a]) for a in ms.ground.atoms}), ms)
            pulled = RandomQuantity(omega_prime, {a: h(Xprime[a]) for a in omega_prime.atoms})
            if integral(pulled, mu_struct) != target:
                raise AssertionError(f"instance {k}: pointwise companion misses h{i + 1}")
            if integral(pulled, result.minimal) != target:
                raise AssertionError(f"instance {k}: minimal structure misses h{i + 1}")
    return "100 feasible companion instances, integrals reproduced exactly"


def worked_null_example() -> Tuple[Dict[str, Fraction], bool]:
    ground = GroundSet(["1", "2"])
    ms = point_mass_structure(ground, {"1": Fraction(1, 2), "2": Fraction(1, 2)})
    states = GroundSet(["1", "2"])
    H = [RandomQuantity.indicator(states.subset(["1"])), RandomQuantity.indicator(states.subset(["2"]))]
    omega_prime = GroundSet(["1", "2", "3"])
    Xprime = {"1": "1", "2": "2", "3": "2"}
    X = {"1": "1", "2": "2"}
    kept = solve_companion_with_nulls(ms, X, H, Xprime, omega_prime, IdealOfSets(omega_prime, (omega_prime.subset(["3"]),)))
    dropped = solve_companion_with_nulls(ms, X, H, Xprime, omega_prime,
                                         IdealOfSets(omega_prime, (omega_prime.subset(["2", "3"]),)))
    return kept.mu, dropped.feasible


def suite_null_ideal(rng: random.Random) -> str:
    mu, infeasible_feasible = worked_null_example()
    if mu != {"1": Fraction(1, 2), "2": Fraction(1, 2), "3": Fraction(0)} or infeasible_feasible:
        raise AssertionError(f"worked example gave {mu}")
    for k in range(50):
        ms, X, H, Xprime, omega_prime = random_companion(rng)
        extras = [a for a in omega_prime.atoms if a not in ms.ground.index]
        gens = tuple(omega_prime.subset([a]) for a in extras if rng.random() < 0.7)
        neg = IdealOfSets(omega_prime, gens)
        result = solve_companion_with_nulls(ms, X, H, Xprime, omega_prime, neg)
        if not result.feasible:
            raise AssertionError(f"instance {k}: deleting unused columns made the problem infeasible")
        if any(result.mu[a] != 0 for g in gens for a in g):
            raise AssertionError(f"instance {k}: the measure charges the null ideal")
    return "worked example exact; 50 random instances vanish on the ideal"


def suite_convex_round_trip(rng: random.Random) -> str:
    for k in range(100):
        phi = random_convex_pl(rng)
        dec = decompose(phi)
        for _ in range(100):
            u = Fraction(rng.randint(-80, 80), rng.randint(1, 5))
            v = Fraction(rng.randint(-80, 80), rng.randint(1, 5))
            if reconstruct_from(dec, u, phi(u), v) != phi(v):
                raise AssertionError(f"function {k}: reconstruction misses φ({v}) from u={u}")
    start = time.monotonic()
    square = SampledConvex.from_function(lambda x: x * x, -5, 5, Fraction(1, 1000))
    dec = decompose(square)
    worst = Fraction(0)
    for v in (-5, -3, -1, 1, 3, 5):
        worst = max(worst, abs(reconstruct_from(dec, dec.x0, square(dec.x0), v) - v * v))
    if worst > Fraction(1, 10000):
        raise AssertionError(f"sampled x² reconstructed with error {float(worst)}")
    return f"100 piecewise-linear functions exact; x² error {float(worst):.2e} in {time.monotonic() - start:.2f}s"


def kink_refining_thresholds(phi: PiecewiseLinearConvex) -> List[Fraction]:
    points = list(phi.breakpoints)
    if not points:
        return [Fraction(-1), Fraction(1)]
    cuts = [points[0] - 1, points[-1] + 1]
    cuts += [(a + b) / 2 for a, b in zip(points, points[1:])]
    return sorted(cuts)


def suite_two_measures(rng: random.Random) -> str:
    for k in range(20):
        phi = random_convex_pl(rng)
        dec = decompose(phi)
        sl = stieltjes_lambda(phi, kink_refining_thresholds(phi))
        for _ in range(10):
            u = Fraction(rng.randint(-80, 80), rng.randint(1, 5))
            v = u + Fraction(rng.randint(0, 80), rng.randint(1, 5))
            via_lambda = sl.reconstruct(u, phi(u), v)
            via_nu = reconstruct_from(dec, u, phi(u), v)
            if via_lambda != via_nu or via_nu != phi(v):
                raise AssertionError(f"function {k}: λ gives {via_lambda}, ν gives {via_nu}, φ({v}) = {phi(v)}")
    return "20 functions: layer-cake integral against λ equals the atom sum against ν"


def suite_skorohod(rng: random.Random, seed: int) -> str:
    for k in range(50):
        size = rng.randint(1, 16)
        enum = Enumeration(tuple(labels("s", size + rng.randint(0, 3))))
        support = rng.sample(enum.labels, size)
        m = random_probability(rng, support, positive=True)
        im = pushforward_measure(m, enum)
        tests = [{s: Fraction(rng.randint(-9, 9), rng.randint(1, 3)) for s in enum.labels} for _ in range(20)]
        if not verify_pushforward(m, enum, im, tests):
            raise AssertionError(f"law {k}: the pushforward misses a test function")
    worst = 0.0
    for k in range(4):
        size = rng.randint(2, 16)
        enum = Enumeration(tuple(labels("s", size)))
        m = random_probability(rng, enum.labels, positive=True)
        report = sample_companion(m, enum, 100000, seed + k)
        worst = max(worst, report.tv)
    if worst > 0.02:
        raise AssertionError(f"sampler total variation {worst:.4f} exceeds 0.02")
    return f"50 laws exact; sampler total variation at most {worst:.4f}"


def suite_disintegration(rng: random.Random) -> str:
    for k in range(60):
        ground = GroundSet(labels("w", rng.randint(1, 4)))
        algebra = power_set_ring(ground)
        thetas = tuple(labels("t", rng.randint(1, 4)))
        Q = {t: AdditiveSetFunction(algebra, {a: p for a, p in zip(algebra.atoms, random_probability(rng, range(len(ground))).values())})
             for t in thetas}
        prior = random_probability(rng, thetas)
        m = AdditiveSetFunction(algebra, {a: sum((prior[t] * Q[t].atom_values[a] for t in thetas), Fraction(0))
                                          for a in algebra.atoms})
        inst = DisintegrationInstance(algebra, m, thetas, Q)
        outcome = disintegrate(inst)
        if not outcome.feasible:
            raise AssertionError(f"instance {k}: a mixture was declared infeasible")
        found = prior_of(inst, outcome)
        if any(mixture_value(inst, found, A) != m(A) for A in algebra.sets):
            raise AssertionError(f"instance {k}: the prior does not reproduce m")
    for k in range(30):
        ground = GroundSet(labels("w", rng.randint(2, 4)))
        algebra = power_set_ring(ground)
        thetas = tuple(labels("t", rng.randint(1, 3)))
        Q = {t: AdditiveSetFunction(algebra, dict(zip(algebra.atoms, random_probability(rng, range(len(ground)), positive=True).values())))
             for t in thetas}
        point = {a: Fraction(1 if i == 0 else 0) for i, a in enumerate(algebra.atoms)}
        inst = DisintegrationInstance(algebra, AdditiveSetFunction(algebra, point), thetas, Q)
        outcome = disintegrate(inst)
        if outcome.feasible:
            raise AssertionError(f"instance {k}: a point mass outside the family's hull was represented")
        ok, message = verify_outcome(disintegration_system(inst), outcome)
        if not ok:
            raise AssertionError(f"instance {k}: {message}")
    for k in range(10):
        thetas = tuple(labels("t", rng.randint(1, 3)))
        states = GroundSet(list(thetas) + ["spare"])
        points = [f"{t}:{j}" for t in thetas for j in range(rng.randint(1, 2))]
        ground = GroundSet(points)
        X = {p: p.split(":")[0] for p in points}
        algebra = power_set_ring(ground)
        Q = {}
        for t in thetas:
            own = [a for a in algebra.atoms if X[next(iter(a))] == t]
            weights = random_probability(rng, own, positive=True)
            Q[t] = AdditiveSetFunction(algebra, {a: weights.get(a, Fraction(0)) for a in algebra.atoms})
        prior = random_probability(rng, thetas, positive=True)
        m = AdditiveSetFunction(algebra, {a: sum((prior[t] * Q[t].atom_values[a] for t in thetas), Fraction(0))
                                          for a in algebra.atoms})
        inst = DisintegrationInstance(algebra, m, thetas, Q)
        G = {t: t for t in thetas}
        concentrated, message = check_concentration(inst, X, G)
        if not concentrated:
            raise AssertionError(f"kernel {k}: {message}")
        if not verify_takeout(build_takeout_kernel(inst, states, G), X):
            raise AssertionError(f"kernel {k}: take-out identity fails")
    return "60 mixtures recovered, 30 certificates verified, 10 kernels satisfy the take-out identity"


def suite_minimality(rng: random.Random) -> str:
    grid = [Fraction(0), Fraction(1, 2), Fraction(1)]
    checked = 0
    for n in [1, 2, 3] * 6 + [4, 4]:
        ms = random_power_structure(rng, n, grid)
        family = [RandomQuantity(ms.ground, {a: rng.randint(0, 3) for a in ms.ground.atoms})]
        minimal = minimal_structure(family, ms)
        for candidate in all_structures(ms.ground, grid):
            if represents(candidate, family, ms):
                checked += 1
                if not is_extension(minimal, candidate):
                    raise AssertionError(f"a representing structure {candidate} does not extend the minimal one")
    return f"{checked} representing structures all extend the minimal structure"


def run_selftest(seed: int = 12345, only: Optional[Sequence[str]] = None) -> List[SuiteResult]:
    """Runs the acceptance suites and returns (name, passed, message) for each."""
    suites: List[Tuple[str, Callable[[random.Random], str]]] = [
        ("farkas_dichotomy", suite_farkas),
        ("layer_cake", suite_layer_cake),
        ("probability_criterion", suite_probability_criterion),
        ("companion_identity", suite_companion),
        ("null_ideal", suite_null_ideal),
        ("convex_round_trip", suite_convex_round_trip),
        ("two_measure_consistency", suite_two_measures),
        ("skorohod", lambda rng: suite_skorohod(rng, seed)),
        ("disintegration", suite_disintegration),
        ("minimality", suite_minimality),
    ]
    results = []
    for name, suite in suites:
        if only and name not in only:
            continue
        rng = random.Random(f"{seed}:{name}")
        started = time.monotonic()
        try:
            message = suite(rng)
            results.append((name, True, f"{message} ({time.monotonic() - started:.2f}s)"))
        except Exception as e:
            logger.error(f"Suite {name} failed: {e}", exc_info=True)
            results.append((name, False, str(e)))
    return results
