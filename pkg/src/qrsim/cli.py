"""Command-line front end: scenario files in, deterministic JSON/CSV out.

Data goes to stdout, diagnostics to stderr.  Identical inputs (including
seeds) produce byte-identical stdout: dict keys are emitted in fixed order
and floats use shortest round-trip formatting.

Exit codes: 0 success, 2 validation failure (nothing computed), 3 internal
numerical invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from .bell import (
    BellScenario,
    SWEEP_HEADER,
    chsh,
    chsh_at_point,
    run_bell,
    sample_joint_outcomes,
    sweep,
)
from .errors import NumericalInvariantError, ValidationError
from .hilbert import CompositeSystem, PureState, apply, as_subsystem_set, partial_trace
from .measurement import SAMPLER_ALGORITHM, MeasurementDevice, build_measurement_unitary, spin_basis
from .qrs import comparability, formal_joint, joint_probability
from .schmidt import possible_internal_states, schmidt_decompose

INV_SQRT2 = 0.7071067811865476


def _emit_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _reim_list(vector) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(vector, dtype=complex)]


# ---------------------------------------------------------------------------
# scenario ingestion

def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where} must be a number")
    return float(value)


def _number_or_pair(value, where: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if (
        isinstance(value, list)
        and len(value) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        return complex(float(value[0]), float(value[1]))
    raise ValidationError(f"{where} must be a number or a [re, im] pair")


def _complex_vector(value, where: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ValidationError(f"{where} must be a non-empty list of [re, im] pairs")
    out = np.empty(len(value), dtype=complex)
    for k, entry in enumerate(value):
        if (
            not isinstance(entry, list)
            or len(entry) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in entry)
        ):
            raise ValidationError(f"{where}[{k}] must be a [re, im] pair")
        out[k] = complex(float(entry[0]), float(entry[1]))
    return out


def _device_from_json(entry, index: int):
    where = f"devices[{index}]"
    if not isinstance(entry, dict):
        raise ValidationError(f"{where} must be an object")
    label = entry.get("label")
    if not isinstance(label, str) or not label:
        raise ValidationError(f"{where}: 'label' must be a non-empty string")
    target = entry.get("target")
    if isinstance(target, str):
        target_labels = [target]
    elif isinstance(target, list) and target and all(isinstance(t, str) for t in target):
        target_labels = list(target)
    else:
        raise ValidationError(f"{where}: 'target' must be a label or list of labels")
    has_theta = "theta" in entry
    has_basis = "basis" in entry
    if has_theta == has_basis:
        raise ValidationError(f"{where}: give exactly one of 'theta' or 'basis'")
    if has_theta:
        basis = spin_basis(_number(entry["theta"], f"{where}: 'theta'"))
    else:
        raw = entry["basis"]
        if not isinstance(raw, list) or not raw:
            raise ValidationError(
                f"{where}: 'basis' must be a list of measured-state vectors"
            )
        columns = [
            _complex_vector(vec, f"{where}: basis[{k}]") for k, vec in enumerate(raw)
        ]
        if any(c.size != columns[0].size for c in columns):
            raise ValidationError(f"{where}: basis vectors must share one dimension")
        basis = np.stack(columns, axis=1)
    pointer_dim = entry.get("pointer_dim")
    if pointer_dim is not None and (isinstance(pointer_dim, bool) or not isinstance(pointer_dim, int)):
        raise ValidationError(f"{where}: 'pointer_dim' must be an integer")
    ready = entry.get("ready_index", 0)
    if isinstance(ready, bool) or not isinstance(ready, int):
        raise ValidationError(f"{where}: 'ready_index' must be an integer")
    pointers = entry.get("pointers")
    if pointers is not None and (
        not isinstance(pointers, list)
        or any(isinstance(p, bool) or not isinstance(p, int) for p in pointers)
    ):
        raise ValidationError(f"{where}: 'pointers' must be a list of integers")
    device = MeasurementDevice.from_basis(label, basis, pointer_dim, ready, pointers)
    return device, target_labels


def _initial_state(data, comp: CompositeSystem, devices) -> PureState:
    state = data.get("state")
    if isinstance(state, list):
        return PureState(comp, _complex_vector(state, "state"))
    if isinstance(state, dict):
        name = state.get("name")
        if name != "bell":
            raise ValidationError(
                f"unknown state constructor {name!r}; available: 'bell'"
            )
        a = _number_or_pair(state.get("a"), "state.a")
        b = _number_or_pair(state.get("b"), "state.b")
        for particle in ("P1", "P2"):
            if particle not in comp.labels:
                raise ValidationError(
                    f"state constructor 'bell' requires subsystem {particle!r}"
                )
            if comp.dim_of(particle) != 2:
                raise ValidationError(
                    f"state constructor 'bell' requires {particle!r} to have dimension 2"
                )
        ready_of = {}
        for device, _ in devices:
            ready_of[device.label] = device.ready_index
        slot = []
        for label in comp.labels:
            if label in ("P1", "P2"):
                slot.append(slice(None))
            elif label in ready_of:
                slot.append(ready_of[label])
            else:
                raise ValidationError(
                    f"state constructor 'bell' cannot initialize subsystem "
                    f"{label!r} (neither a particle nor a device pointer)"
                )
        pair = np.array([[0.0, a], [-b, 0.0]], dtype=complex)
        if comp.axis("P2") < comp.axis("P1"):
            pair = pair.T
        full = np.zeros(comp.dims, dtype=complex)
        full[tuple(slot)] = pair
        return PureState(comp, full.reshape(-1))
    raise ValidationError(
        "'state' must be an amplitude list or a named-constructor object"
    )


def _prepare(path: str):
    """Load a scenario file and return (prepared state, composite, raw data)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"{path}:{exc.lineno}: invalid JSON: {exc.msg}"
        ) from None
    try:
        if not isinstance(data, dict):
            raise ValidationError("scenario must be a JSON object")
        subsystems = data.get("subsystems")
        if not isinstance(subsystems, list) or not subsystems:
            raise ValidationError("'subsystems' must be a non-empty list")
        pairs = []
        for k, entry in enumerate(subsystems):
            if (
                not isinstance(entry, dict)
                or not isinstance(entry.get("label"), str)
                or isinstance(entry.get("dim"), bool)
                or not isinstance(entry.get("dim"), int)
            ):
                raise ValidationError(
                    f"subsystems[{k}] must be an object with 'label' and integer 'dim'"
                )
            pairs.append((entry["label"], entry["dim"]))
        comp = CompositeSystem(pairs)
        raw_devices = data.get("devices", [])
        if not isinstance(raw_devices, list):
            raise ValidationError("'devices' must be a list")
        devices = [
            _device_from_json(entry, k) for k, entry in enumerate(raw_devices)
        ]
        seen = set()
        for device, _ in devices:
            if device.label in seen:
                raise ValidationError(
                    f"duplicate device label {device.label!r}"
                )
            seen.add(device.label)
        psi = _initial_state(data, comp, devices)
        for device, target_labels in devices:
            target = as_subsystem_set(target_labels, comp)
            op = build_measurement_unitary(device, target)
            psi = apply(op, psi)
        return psi, comp, data
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def _resolve_set(expr: str, comp: CompositeSystem):
    parts = str(expr).split("+")
    if any(not p for p in parts):
        raise ValidationError(f"system expression {expr!r} has an empty label")
    try:
        return as_subsystem_set(parts, comp)
    except ValidationError as exc:
        raise ValidationError(f"system expression {expr!r}: {exc}") from None


# ---------------------------------------------------------------------------
# subcommands

def cmd_schmidt(args) -> int:
    psi, comp, _ = _prepare(args.scenario)
    cut = _resolve_set(args.cut, comp)
    sd = schmidt_decompose(psi, cut)
    left_spectrum = possible_internal_states(partial_trace(psi, sd.left)).eigenvalues
    right_spectrum = possible_internal_states(partial_trace(psi, sd.right)).eigenvalues
    out = {
        "cut": sd.left.label,
        "complement": sd.right.label,
        "coefficients": [float(c) for c in sd.coefficients],
        "rank": int(sd.rank),
        "left_basis": [_reim_list(sd.left_basis[:, k]) for k in range(sd.left_basis.shape[1])],
        "right_basis": [_reim_list(sd.right_basis[:, k]) for k in range(sd.right_basis.shape[1])],
        "left_spectrum": [float(v) for v in left_spectrum],
        "right_spectrum": [float(v) for v in right_spectrum],
    }
    _emit_json(out)
    return 0


def _joint_query(psi: PureState, comp: CompositeSystem, exprs) -> dict:
    sets = [_resolve_set(e, comp) for e in exprs]
    verdict = comparability(sets, comp)
    if verdict.comparable:
        replacement = {orig.label: repl for orig, repl in verdict.substitutions}
        resolved = [replacement.get(s.label, s) for s in sets]
        dist = joint_probability(resolved, psi)
        return {
            "query": [s.label for s in sets],
            "comparable": True,
            "route": verdict.route,
            "substitutions": [
                {"original": o.label, "replacement": r.label}
                for o, r in verdict.substitutions
            ],
            "systems": [s.label for s in resolved],
            "distribution": dist.to_json_dict(),
        }
    quasi = formal_joint(sets, psi)
    print(
        "NOT COMPARABLE: "
        + " ".join(s.label for s in sets)
        + f" (max_imag={quasi.max_imag!r}, min_real={quasi.min_real!r})",
        file=sys.stderr,
    )
    return {
        "query": [s.label for s in sets],
        "comparable": False,
        "route": verdict.route,
        "substitutions": [],
        "systems": [s.label for s in sets],
        "quasi": quasi.to_json_dict(),
    }


def cmd_joint(args) -> int:
    psi, comp, data = _prepare(args.scenario)
    if args.systems:
        _emit_json(_joint_query(psi, comp, args.systems))
        return 0
    queries = data.get("queries")
    if not isinstance(queries, list) or not queries:
        raise ValidationError(
            "no systems given on the command line and the scenario has no 'queries'"
        )
    results = []
    for k, query in enumerate(queries):
        if not isinstance(query, list) or not all(isinstance(q, str) for q in query):
            raise ValidationError(
                f"{args.scenario}: queries[{k}] must be a list of system expressions"
            )
        results.append(_joint_query(psi, comp, query))
    _emit_json({"queries": results})
    return 0


def _parse_chsh_angles(raw: str, degrees: bool) -> tuple:
    parts = raw.split(",")
    if len(parts) != 4:
        raise ValidationError(
            "--chsh-angles needs four comma-separated angles: a1,a2,b1,b2"
        )
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ValidationError(f"--chsh-angles: could not parse {raw!r}") from None
    if degrees:
        values = [math.radians(v) for v in values]
    return tuple(values)


def cmd_bell(args) -> int:
    modes = sum(1 for flag in (args.sweep, args.chsh_angles) if flag is not None)
    if modes > 1:
        raise ValidationError("choose one of --sweep / --chsh-angles")
    if args.samples is not None and modes:
        raise ValidationError("--samples applies only to single-point runs")

    theta1, theta2 = args.theta1, args.theta2
    if args.degrees:
        theta1, theta2 = math.radians(theta1), math.radians(theta2)

    if args.sweep is not None:
        header, rows = sweep(args.a, args.b, points=args.sweep)
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return 0

    if args.chsh_angles is not None:
        angles = _parse_chsh_angles(args.chsh_angles, args.degrees)
        if args.model == "quasi":
            raise ValidationError(
                "model 'quasi' has no correlator; valid models for --chsh-angles: "
                "quantum, hidden, all"
            )
        out = {"angles": [float(v) for v in angles], "model": args.model}
        if args.model in ("quantum", "all"):
            out["S_quantum"] = chsh(args.a, args.b, angles, "quantum")
        if args.model in ("hidden", "all"):
            out["S_hidden"] = chsh(args.a, args.b, angles, "hidden")
        _emit_json(out)
        return 0

    include_m3 = args.model in ("hidden", "all")
    scenario = BellScenario(args.a, args.b, theta1, theta2, include_m3=include_m3)
    result = run_bell(scenario)
    full = result.to_json_dict()
    out = {
        "a": full["a"],
        "b": full["b"],
        "theta1": full["theta1"],
        "theta2": full["theta2"],
        "model": args.model,
        "outcome_values": full["outcome_values"],
    }
    if args.model in ("quantum", "all"):
        out["marginal1"] = full["marginal1"]
        out["marginal2"] = full["marginal2"]
        out["quantum_joint"] = full["quantum_joint"]
        out["E_quantum"] = full["E_quantum"]
        out["S_quantum"] = chsh_at_point(args.a, args.b, theta1, theta2, "quantum")
    if args.model in ("hidden", "all"):
        out["hidden_joint"] = full["hidden_joint"]
        out["E_hidden"] = full["E_hidden"]
        out["S_hidden"] = chsh_at_point(args.a, args.b, theta1, theta2, "hidden")
    if args.model in ("quasi", "all"):
        out["quasi"] = full["quasi"]
    if args.samples is not None:
        if args.model == "quasi":
            raise ValidationError(
                "model 'quasi' is not a probability table and cannot be sampled"
            )
        table = result.hidden_table if args.model == "hidden" else result.quantum_table
        counts = sample_joint_outcomes(table, args.samples, args.seed)
        out["sampling"] = {
            "n": int(args.samples),
            "seed": int(args.seed),
            "algorithm": SAMPLER_ALGORITHM,
            "counts": [[int(c) for c in row] for row in counts],
            "frequencies": [
                [float(c / args.samples) for c in row] for row in counts
            ],
        }
    _emit_json(out)
    return 0


# ---------------------------------------------------------------------------
# entry point

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrsim",
        description=(
            "Relative-state simulations: Schmidt analysis, joint internal-state "
            "probabilities, and the two-particle correlation experiment."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_schmidt = sub.add_parser(
        "schmidt", help="Schmidt decomposition of a scenario state across a cut"
    )
    p_schmidt.add_argument("scenario", help="scenario JSON file")
    p_schmidt.add_argument(
        "--cut", required=True, help="left side of the cut, labels joined with '+'"
    )
    p_schmidt.set_defaults(func=cmd_schmidt)

    p_joint = sub.add_parser(
        "joint", help="joint (or formal) outcome table for named systems"
    )
    p_joint.add_argument("scenario", help="scenario JSON file")
    p_joint.add_argument(
        "systems",
        nargs="*",
        help="system expressions like P1 or P1+M1 (defaults to scenario 'queries')",
    )
    p_joint.set_defaults(func=cmd_joint)

    p_bell = sub.add_parser(
        "bell", help="two-particle correlation experiment quantities"
    )
    p_bell.add_argument("--a", type=float, default=INV_SQRT2, help="pair coefficient a")
    p_bell.add_argument("--b", type=float, default=INV_SQRT2, help="pair coefficient b")
    p_bell.add_argument("--theta1", type=float, default=0.0, help="first device angle")
    p_bell.add_argument("--theta2", type=float, default=0.0, help="second device angle")
    p_bell.add_argument(
        "--model",
        choices=["quantum", "hidden", "quasi", "all"],
        default="all",
        help="which statistics to emit",
    )
    p_bell.add_argument(
        "--sweep",
        type=int,
        nargs="?",
        const=16,
        default=None,
        metavar="POINTS",
        help="emit a CSV angle-grid sweep (default 16 points per axis)",
    )
    p_bell.add_argument(
        "--chsh-angles",
        default=None,
        metavar="A1,A2,B1,B2",
        help="emit the CHSH combination for four comma-separated angles",
    )
    p_bell.add_argument("--seed", type=int, default=0, help="sampling seed")
    p_bell.add_argument(
        "--samples",
        type=int,
        default=None,
        metavar="N",
        help="draw N outcomes and report empirical frequencies",
    )
    p_bell.add_argument(
        "--degrees", action="store_true", help="interpret angles as degrees"
    )
    p_bell.set_defaults(func=cmd_bell)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalInvariantError as exc:
        print(f"internal numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
