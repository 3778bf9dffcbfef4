# charges/cli.py
# The batch front end: each command reads instance files of the kinds it
# accepts, solves them with the package modules and writes one verdict per
# instance. Exit codes: 0 for feasible or value outcomes, 1 for infeasible
# outcomes (a certificate is emitted), 2 for malformed input. A batch exits
# with the largest code of its items.

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .conglomerate import (
    build_takeout_kernel,
    check_concentration,
    check_conglomerability,
    companion_instance,
    disintegrate,
    disintegration_system,
    is_directed,
    kernel_mixing,
    probability_representation,
    representation_residual,
    representing_measure,
    solve_companion,
    solve_companion_with_nulls,
    verify_takeout,
)
from .convexdec import PiecewiseLinearConvex, SampledConvex, decompose, reconstruct_from, stieltjes_lambda
from .errors import ChargeError, SchemaError
from .instances import (
    Instance,
    VerdictStore,
    decode_rational,
    encode,
    load_instance,
    parse_companion,
    parse_conglomerability,
    parse_convex,
    parse_disintegration,
    parse_integral,
    parse_measure,
    parse_skorohod,
)
from .integrate import is_measurable, jump_set, layer_integrals
from .lp import Feasible, FeasibilityOutcome, FeasibilitySystem, Infeasible, verify_outcome
from .setcore import extension_value, inner_measure, outer_measure
from .skorohod import pushforward_measure, sample_companion, verify_pushforward

logger = logging.getLogger(__name__)

COMMAND_KINDS: Dict[str, Tuple[str, ...]] = {
    "check": ("conglomerability",),
    "represent": ("conglomerability",),
    "companion": ("companion", "companion_nulls"),
    "disintegrate": ("disintegration",),
    "integrate": ("measure", "integral"),
    "decompose": ("convex",),
    "skorohod": ("skorohod",),
}
COMMANDS = tuple(COMMAND_KINDS) + ("selftest",)

EXIT_CODES = {"feasible": 0, "value": 0, "infeasible": 1, "error": 2}


@dataclass(frozen=True)
class RunOptions:
    """Settings of one run, from config.ini overridden by command-line flags."""

    seed: int = 12345
    samples: int = 100000
    tolerance: Fraction = Fraction(1, 10000)
    check_points: int = 7
    emit_minimal_ring: bool = False
    workers: int = 1
    suffix: str = ".verdict.json"
    summary: Optional[Path] = None
    max_ground_atoms: int = 64


def _verdict(instance: Instance, command: str, outcome: str, witness: Mapping[str, Any],
             pivots: Optional[int] = None) -> Dict[str, Any]:
    return {
        "id": instance.id,
        "kind": instance.kind,
        "command": command,
        "outcome": outcome,
        "witness": encode(witness),
        "solver": {"pivots": pivots},
    }


def _lp_witness(outcome: FeasibilityOutcome, columns: Sequence[str], rows: Sequence[str],
                normalized: bool) -> Dict[str, Any]:
    if isinstance(outcome, Feasible):
        return {"mu": dict(zip(columns, outcome.mu))}
    labels = list(rows) + (["normalization"] if normalized else [])
    return {"certificate": dict(zip(labels, outcome.certificate))}


def _outcome_name(outcome: FeasibilityOutcome) -> str:
    return "feasible" if outcome.feasible else "infeasible"


# --- Command handlers ---
def _run_check(instance: Instance, options: RunOptions, normalized: bool) -> Tuple[str, Dict[str, Any], int]:
    inst = parse_conglomerability(instance)
    outcome = probability_representation(inst) if normalized else check_conglomerability(inst)
    witness = _lp_witness(outcome, inst.omega.atoms, inst.basis_labels, normalized)
    if isinstance(outcome, Feasible):
        residual = representation_residual(inst, representing_measure(inst, outcome))
        witness["residual"] = dict(zip(inst.basis_labels, residual))
    directed, a = is_directed(inst)
    witness["directed"] = {"holds": directed, "witness": dict(zip(inst.basis_labels, a)) if a is not None else None}
    return _outcome_name(outcome), witness, outcome.pivots


def _run_companion(instance: Instance, options: RunOptions) -> Tuple[str, Dict[str, Any], int]:
    p = parse_companion(instance, options.max_ground_atoms)
    if p.neg is not None:
        result = solve_companion_with_nulls(p.m_struct, p.X, p.H, p.Xprime, p.omega_prime, p.neg,
                                            probability=p.probability, emit_minimal=options.emit_minimal_ring,
                                            labels=p.labels)
    else:
        result = solve_companion(p.m_struct, p.X, p.H, p.Xprime, p.omega_prime, probability=p.probability,
                                 emit_minimal=options.emit_minimal_ring, labels=p.labels)
    witness = _lp_witness(result.outcome, p.omega_prime.atoms, p.labels, p.probability)
    witness["integrals"] = dict(zip(p.labels, result.instance.phi))
    if result.minimal is not None:
        witness["minimal_ring"] = {
            "atoms": [list(a) for a in result.minimal.ring.atoms],
            "values": [result.minimal.lam.atom_values[a] for a in result.minimal.ring.atoms],
        }
    return _outcome_name(result.outcome), witness, result.outcome.pivots


def _run_disintegrate(instance: Instance, options: RunOptions) -> Tuple[str, Dict[str, Any], int]:
    inst, takeout = parse_disintegration(instance)
    outcome = disintegrate(inst)
    witness = _lp_witness(outcome, inst.thetas, [repr(a) for a in inst.algebra.atoms], True)
    if isinstance(outcome, Feasible) and takeout is not None:
        concentrated, message = check_concentration(inst, takeout.X, takeout.G)
        section: Dict[str, Any] = {"concentrated": concentrated, "message": message}
        if concentrated:
            kernel = build_takeout_kernel(inst, takeout.states, takeout.G)
            section["holds"] = verify_takeout(kernel, takeout.X)
            mixing = kernel_mixing(inst, kernel, takeout.X)
            section["mixing"] = dict(zip(inst.algebra.ground.atoms, mixing.mu)) if isinstance(mixing, Feasible) else None
        witness["takeout"] = section
    return _outcome_name(outcome), witness, outcome.pivots


def _run_integrate(instance: Instance, options: RunOptions) -> Tuple[str, Dict[str, Any], Optional[int]]:
    if instance.kind == "measure":
        ms, queries = parse_measure(instance, options.max_ground_atoms)
        carrier = ms.carrier
        witness = {
            "queries": [{"set": q, "outer": outer_measure(ms, q), "inner": inner_measure(ms, q),
                         "value": extension_value(ms, q)} for q in queries],
            "carrier": {"atoms": [list(a) for a in carrier.ring.atoms],
                        "values": [carrier.lam.atom_values[a] for a in carrier.ring.atoms]},
        }
        return "value", witness, None
    ms, X = parse_integral(instance, options.max_ground_atoms)
    layers = layer_integrals(X, ms)
    bounds = {"lower_positive": layers.lower_positive, "upper_positive": layers.upper_positive,
              "lower_negative": layers.lower_negative, "upper_negative": layers.upper_negative}
    if not layers.integrable:
        return "infeasible", {"layers": bounds, "measurable": is_measurable(X, ms)}, None
    witness = {"value": layers.value, "layers": bounds, "measurable": is_measurable(X, ms),
               "jumps": list(jump_set(X, ms).discontinuities)}
    return "value", witness, None


def _default_checks(phi: SampledConvex, count: int) -> List[Fraction]:
    last = len(phi.values) - 1
    if count <= 1:
        return [phi.node(last // 2)]
    return sorted({phi.node(round(k * last / (count - 1))) for k in range(count)})


def _run_decompose(instance: Instance, options: RunOptions) -> Tuple[str, Dict[str, Any], Optional[int]]:
    p = parse_convex(instance)
    phi = p.phi
    dec = decompose(phi, p.x0)
    witness: Dict[str, Any] = {"x0": dec.x0, "left_slope": dec.left_slope, "right_slope": dec.right_slope}
    if isinstance(phi, PiecewiseLinearConvex):
        witness["atoms"] = [[loc, mass] for loc, mass in dec.nu.atoms]
        checks = list(p.checks)
    else:
        witness["cells"] = len(dec.nu.density.masses)
        witness["total_mass"] = dec.nu.total
        checks = list(p.checks) or _default_checks(phi, options.check_points)
    phi_x0 = phi(dec.x0)
    worst = Fraction(0)
    rows = []
    for v in checks:
        rebuilt = reconstruct_from(dec, dec.x0, phi_x0, v)
        exact = phi(v)
        worst = max(worst, abs(rebuilt - exact))
        rows.append({"v": v, "reconstructed": rebuilt, "exact": exact})
    witness["checks"] = rows
    witness["max_error"] = worst
    limit = Fraction(0) if isinstance(phi, PiecewiseLinearConvex) else options.tolerance
    ok = worst <= limit
    if p.thresholds:
        sl = stieltjes_lambda(phi, p.thresholds, p.x0)
        atoms = sl.structure.ground.atoms
        witness["stieltjes"] = {
            "cells": [[a, b] for a, b in sl.cells],
            "masses": [sl.structure.lam(sl.structure.ground.subset([a])) for a in atoms],
            "positions": [sl.position(a) for a in atoms],
        }
        agree = all(sl.reconstruct(dec.x0, phi_x0, v) == reconstruct_from(dec, dec.x0, phi_x0, v) for v in checks)
        witness["stieltjes"]["consistent"] = agree
        ok = ok and agree
    return ("value" if ok else "infeasible"), witness, None


def _run_skorohod(instance: Instance, options: RunOptions) -> Tuple[str, Dict[str, Any], Optional[int]]:
    p = parse_skorohod(instance)
    im = pushforward_measure(p.m, p.enum)
    verified = verify_pushforward(p.m, p.enum, im, p.tests)
    report = sample_companion(p.m, p.enum, p.samples or options.samples, options.seed)
    witness = {
        "cells": {str(n): mass for n, mass in im.masses.items()},
        "verified": verified,
        "sample": {"seed": report.seed, "samples": report.samples, "tv": report.tv, "counts": report.counts},
    }
    return ("value" if verified else "infeasible"), witness, None


HANDLERS = {
    "check": lambda i, o: _run_check(i, o, normalized=False),
    "represent": lambda i, o: _run_check(i, o, normalized=True),
    "companion": _run_companion,
    "disintegrate": _run_disintegrate,
    "integrate": _run_integrate,
    "decompose": _run_decompose,
    "skorohod": _run_skorohod,
}


def solve_instance(command: str, instance: Instance, options: RunOptions) -> Tuple[Dict[str, Any], int]:
    """Runs one command on one parsed instance; domain errors become "error" verdicts."""
    if instance.kind not in COMMAND_KINDS[command]:
        error = SchemaError("$.kind", f"command '{command}' does not accept kind '{instance.kind}'")
        return _verdict(instance, command, "error", {"location": error.location, "message": error.message}), 2
    try:
        outcome, witness, pivots = HANDLERS[command](instance, options)
    except SchemaError as e:
        logger.warning(f"Malformed instance {instance.id}: {e}")
        return _verdict(instance, command, "error", {"location": e.location, "message": e.message}), 2
    except (ChargeError, ValueError) as e:
        logger.warning(f"Instance {instance.id} rejected: {e}")
        return _verdict(instance, command, "error", {"message": str(e)}), 2
    logger.info(f"{command} {instance.id}: {outcome}")
    return _verdict(instance, command, outcome, witness, pivots), EXIT_CODES[outcome]


def process_file(path: Path, command: str, options: RunOptions, store: VerdictStore) -> int:
    try:
        instance = load_instance(path)
    except SchemaError as e:
        logger.warning(f"Cannot parse {path}: {e}")
        placeholder = Instance(path.stem, "", {}, path)
        verdict = _verdict(placeholder, command, "error", {"location": e.location, "message": e.message})
        store.write(path, verdict, 2)
        return 2
    try:
        verdict, code = solve_instance(command, instance, options)
    except Exception as e:
        # Anything unexpected still yields a verdict so the batch can continue.
        logger.error(f"Failed to process {path}: {e}", exc_info=True)
        verdict, code = _verdict(instance, command, "error", {"message": str(e)}), 2
    store.write(path, verdict, code)
    return code


def collect_inputs(inputs: Sequence[Path], store: VerdictStore) -> Tuple[List[Path], bool]:
    "Instance files to process and whether every input path existed."
    files: List[Path] = []
    ok = True
    for p in inputs:
        if p.is_dir():
            files.extend(sorted(f for f in p.glob("*.json") if not store.is_verdict(f)))
        elif p.is_file():
            files.append(p)
        else:
            logger.error(f"Input {p} does not exist")
            ok = False
    return files, ok


def run(command: str, inputs: Sequence[Path], options: RunOptions) -> int:
    """Runs a command over files and directories and returns the batch exit code."""
    if command not in COMMANDS:
        logger.error(f"Unknown command '{command}'")
        return 2
    if command == "selftest":
        from .selftest import run_selftest
        results = run_selftest(seed=options.seed)
        failed = [name for name, ok, _ in results if not ok]
        for name, ok, message in results:
            (logger.info if ok else logger.error)(f"{'PASS' if ok else 'FAIL'} {name}: {message}")
        return 0 if not failed else 1

    store = VerdictStore(options.suffix)
    files, found = collect_inputs(inputs, store)
    if not files:
        logger.error("No instance files to process")
        return 2
    logger.info(f"Running '{command}' on {len(files)} instance(s) with {options.workers} worker(s)")
    with ThreadPoolExecutor(max_workers=max(1, options.workers)) as pool:
        codes = list(pool.map(lambda f: process_file(f, command, options, store), files))
    if options.summary is not None:
        store.export_summary_csv(options.summary, order=files)
    code = max(codes)
    return max(code, 0 if found else 2)


# --- Re-verification ---
def _vector(witness: Mapping[str, Any], key: str, labels: Sequence[str]) -> Tuple[Fraction, ...]:
    values = witness[key]
    return tuple(decode_rational(values[label]) for label in labels)


def _verify_lp(system: FeasibilitySystem, witness: Mapping[str, Any], columns: Sequence[str],
               rows: Sequence[str], outcome: str) -> Tuple[bool, str]:
    if outcome == "feasible":
        return verify_outcome(system, Feasible(_vector(witness, "mu", columns)))
    labels = list(rows) + (["normalization"] if system.normalized else [])
    return verify_outcome(system, Infeasible(_vector(witness, "certificate", labels)))


def verify_verdict(instance: Instance, verdict: Mapping[str, Any],
                   options: Optional[RunOptions] = None) -> Tuple[bool, str]:
    """Re-checks a verdict's witness against its instance.

    LP witnesses (measures and certificates) are re-substituted exactly; other
    witnesses are recomputed and compared.
    """
    options = options or RunOptions()
    command = verdict["command"]
    outcome = verdict["outcome"]
    witness = verdict["witness"]
    try:
        if outcome in ("feasible", "infeasible") and command in ("check", "represent"):
            inst = parse_conglomerability(instance)
            return _verify_lp(inst.system(command == "represent"), witness, inst.omega.atoms,
                              inst.basis_labels, outcome)
        if outcome in ("feasible", "infeasible") and command == "companion":
            p = parse_companion(instance, options.max_ground_atoms)
            if outcome == "infeasible" and p.neg is not None:
                # the certificate refers to the system without the null columns
                return _recompute(instance, verdict, options)
            inst = companion_instance(p.m_struct, p.X, p.H, p.Xprime, p.omega_prime, p.labels)
            ok, message = _verify_lp(inst.system(p.probability), witness, p.omega_prime.atoms, p.labels, outcome)
            if ok and outcome == "feasible" and p.neg is not None:
                mu = dict(zip(p.omega_prime.atoms, _vector(witness, "mu", p.omega_prime.atoms)))
                if any(mu[a] != 0 for a in p.neg.union):
                    return False, "the measure charges the null ideal"
            return ok, message
        if outcome in ("feasible", "infeasible") and command == "disintegrate":
            inst, _ = parse_disintegration(instance)
            return _verify_lp(disintegration_system(inst), witness, inst.thetas,
                              [repr(a) for a in inst.algebra.atoms], outcome)
    except (KeyError, TypeError, ValueError, ChargeError) as e:
        return False, f"witness does not match the instance: {e}"
    return _recompute(instance, verdict, options)


def _recompute(instance: Instance, verdict: Mapping[str, Any], options: RunOptions) -> Tuple[bool, str]:
    if verdict["command"] == "skorohod":
        sample = verdict["witness"].get("sample", {})
        options = replace(options, seed=sample.get("seed", options.seed), samples=sample.get("samples", options.samples))
    fresh, _ = solve_instance(verdict["command"], instance, options)
    if encode(fresh) == encode(dict(verdict)):
        return True, "verdict reproduced"
    return False, "recomputed verdict differs"
