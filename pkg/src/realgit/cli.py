"""Command-line front end: ``analyze``, ``flow`` and ``labels``.

Reports are JSON with sorted keys; every report echoes the action, the
settings (tolerances, step cap, seed) and the format version.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .examples import example_action
from .moment import FlowOptions, flow, moment_coords, write_trajectory_csv
from .rep import ActionSpecError, LinearAction, TorusError, load_action, maximal_torus
from .strata import candidate_labels, minimal_vector_descent, stratum_label, stratum_samples, make_label
from .torus import (
    EnumerationCapError,
    closed_orbit_in_closure,
    destabilizing_direction,
    evaluate_phi,
    is_in_null_cone_torus,
    is_orbit_closed,
    minimal_vector_torus,
    orbit_support,
    separation_family,
)

REPORT_FORMAT = "realgit-report/1"
EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGED, EXIT_CAP = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def resolve_action(spec: str) -> LinearAction:
    path = Path(spec)
    if path.exists():
        return load_action(path)
    try:
        return example_action(spec)
    except KeyError as exc:
        raise CliError(f"--action {spec!r} is neither a file nor a known example ({exc.args[0]})", EXIT_VALIDATION)


def parse_vector(text: str, dim: int) -> np.ndarray:
    """Inline ``1,0,2`` or a file with one number per line or one comma-separated line."""
    path = Path(text)
    raw = path.read_text() if path.exists() else text
    tokens = [t for t in raw.replace(",", " ").split()]
    try:
        vec = np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise CliError(f"bad vector: {exc}", EXIT_VALIDATION)
    if vec.size != dim:
        raise CliError(f"vector has {vec.size} entries, action needs {dim}", EXIT_VALIDATION)
    if not np.all(np.isfinite(vec)):
        raise CliError("vector has non-finite entries", EXIT_VALIDATION)
    return vec


def parse_supports(path: str | None) -> list[tuple[int, ...]] | None:
    if path is None:
        return None
    try:
        data = json.loads(Path(path).read_text())
        return [tuple(int(i) for i in s) for s in data]
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(f"bad --supports file: {exc}", EXIT_VALIDATION)


def _floats(x) -> list[float]:
    return [float(v) for v in np.asarray(x, dtype=float).ravel()]


def _header(action: LinearAction, args, command: str) -> dict:
    return {
        "format": REPORT_FORMAT,
        "version": __version__,
        "command": command,
        "action": {
            "name": action.name,
            "dim_v": action.dim_v,
            "dim_g": action.dim_g,
            "dim_k": action.split.dim_k,
            "dim_p": action.split.dim_p,
        },
        "settings": {
            "tol": args.tol,
            "max_steps": args.max_steps,
            "seed": args.seed,
            "label_tol": 1e-7,
        },
    }


def _is_torus_action(action: LinearAction, frame) -> bool:
    return action.split.dim_k == 0 and frame.rank == action.split.dim_p


def _torus_suite(action: LinearAction, v: np.ndarray, supports) -> dict:
    frame = maximal_torus(action.split)
    supp = orbit_support(v, frame)
    closed = is_orbit_closed(v, frame)
    out: dict = {
        "support": list(supp.indices),
        "signs": [supp.signs[i] for i in supp.indices],
        "orbit_closed": closed,
        "support_tol": 1e-10,
    }
    if not closed:
        d = destabilizing_direction(v, frame)
        out["destabilizer"] = {"direction": _floats(d.direction), "limit": _floats(action.to_user(d.limit))}
    elif np.any(v):
        out["minimal_vector"] = _floats(action.to_user(minimal_vector_torus(v, frame)))
    out["closed_orbit_in_closure"] = _floats(action.to_user(closed_orbit_in_closure(v, frame)))
    fam = separation_family(frame, supports)
    out["null_cone"] = is_in_null_cone_torus(v, frame, fam)
    phi = evaluate_phi(v, fam)
    out["phi"] = {"size": len(fam), "nonzero": int(np.count_nonzero(phi)), "norm": float(np.linalg.norm(phi))}
    return out


def cmd_analyze(args) -> tuple[dict, int]:
    action = resolve_action(args.action)
    v_user = parse_vector(args.vector, action.dim_v)
    v = action.from_user(v_user)
    report = _header(action, args, "analyze")
    report["vector"] = _floats(v_user)
    if not np.any(v):
        raise CliError("vector must be nonzero", EXIT_VALIDATION)
    code = EXIT_OK
    lab, fr = stratum_label(v, action, FlowOptions(tol=args.tol, max_steps=args.max_steps, keep_trajectory=False))
    res: dict = {
        "stratum_label": lab.as_dict() | {"steps": fr.steps, "newton": fr.accelerated},
    }
    if not fr.converged:
        code = EXIT_NONCONVERGED
    desc = minimal_vector_descent(v, action)
    res["minimal_vector_descent"] = {
        "status": desc.status,
        "moment_norm": desc.moment_norm,
        "iterations": desc.iterations,
        "vector": _floats(action.to_user(desc.vector)) if desc.status == "semistable" else None,
        "tol": 1e-10,
        "floor": 1e-12,
    }
    if desc.status == "stalled":
        code = EXIT_NONCONVERGED
    res["null_cone"] = desc.status == "null"
    res["null_cone_agrees_with_label"] = (desc.status == "null") == (lab.norm > 1e-6)
    frame = maximal_torus(action.split)
    if _is_torus_action(action, frame):
        res["torus"] = _torus_suite(action, v, parse_supports(args.supports))
    report["analyses"] = sorted(res)
    report["results"] = res
    return report, code


def cmd_flow(args) -> tuple[dict, int]:
    action = resolve_action(args.action)
    v_user = parse_vector(args.vector, action.dim_v)
    v = action.from_user(v_user)
    if not np.any(v):
        raise CliError("vector must be nonzero", EXIT_VALIDATION)
    fr = flow(v, action, FlowOptions(tol=args.tol, max_steps=args.max_steps, keep_trajectory=args.trace is not None))
    if args.trace:
        write_trajectory_csv(fr, args.trace)
    lab = make_label(moment_coords(fr.limit, action), action, converged=fr.converged, residual=fr.gradient_residual)
    report = _header(action, args, "flow")
    report["vector"] = _floats(v_user)
    report["results"] = {
        "converged": fr.converged,
        "steps": fr.steps,
        "time": fr.time,
        "energy": fr.energy,
        "gradient_residual": fr.gradient_residual,
        "limit": _floats(action.to_user(fr.limit)),
        "label": lab.as_dict(),
        "trace": args.trace,
        "newton": fr.accelerated,
    }
    return report, EXIT_OK if fr.converged else EXIT_NONCONVERGED


def cmd_labels(args) -> tuple[dict, int]:
    action = resolve_action(args.action)
    frame = maximal_torus(action.split)
    supports = parse_supports(args.supports)
    subsets = None
    if supports is not None:
        _, owner = frame.distinct_weights()
        subsets = [tuple(sorted({int(owner[i]) for i in s})) for s in supports]
    try:
        cands = candidate_labels(frame, action, seed=args.seed, subsets=subsets)
    except EnumerationCapError as exc:
        raise CliError(f"{exc}; pass --supports <file> with a JSON list of index subsets", EXIT_CAP)
    rng = np.random.default_rng(args.seed)
    realized = [i for i, r in enumerate(cands.realized) if r]
    hits = [0] * len(cands.labels)
    extra: list = []
    unmatched = 0
    code = EXIT_OK
    opts = FlowOptions(tol=args.tol, max_steps=args.max_steps, keep_trajectory=False)
    for j in range(args.samples):
        # cycle: a Gaussian start, then one start per realized stratum
        slot = j % (len(realized) + 1)
        if slot == 0 or action.dim_g == 0:
            v = rng.normal(size=action.dim_v)
        else:
            v = stratum_samples(action, cands.labels[realized[slot - 1]].beta, 1, rng)[0]
        lab, fr = stratum_label(v, action, opts)
        if not fr.converged:
            code = EXIT_NONCONVERGED
        idx = cands.find(lab, 1e-6)
        if idx is None:
            unmatched += 1
            if not any(lab.distance(o) < 1e-6 for o in extra):
                extra.append(lab)
        else:
            hits[idx] += 1
    report = _header(action, args, "labels")
    report["settings"]["samples"] = args.samples
    rows = []
    for i, lab in enumerate(cands.labels):
        rows.append(
            {
                "spectrum": _floats(lab.spectrum),
                "norm": lab.norm,
                "active_weights": list(lab.active_set),
                "realized": cands.realized[i],
                "hits": hits[i],
            }
        )
    report["results"] = {
        "candidates": rows,
        "unconfirmed_subsets": len(cands.unconfirmed),
        "flow_labels_outside_candidates": unmatched,
        "outside_spectra": [_floats(o.spectrum) for o in extra],
        "census_count": sum(1 for h in hits if h) + len(extra),
        "realized_count": len(realized),
        "agreement": unmatched == 0,
    }
    return report, code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="realgit", description="Numerical moment-map and stratification toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, vector: bool):
        sp.add_argument("--action", required=True, help="action spec file (JSON) or example name")
        if vector:
            sp.add_argument("--vector", required=True, help="inline comma list or file")
        sp.add_argument("--tol", type=float, default=1e-10)
        sp.add_argument("--max-steps", type=int, default=1_000_000)
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--supports", help="JSON list of frame-index subsets")

    a = sub.add_parser("analyze", help="stratum label, minimal vector, null-cone status, torus suite")
    common(a, True)
    a.set_defaults(func=cmd_analyze)
    f = sub.add_parser("flow", help="negative gradient flow of the energy")
    common(f, True)
    f.add_argument("--trace", help="CSV trajectory output")
    f.set_defaults(func=cmd_flow)
    lb = sub.add_parser("labels", help="candidate stratum labels and flow census")
    common(lb, False)
    lb.add_argument("--samples", type=int, default=0)
    lb.set_defaults(func=cmd_labels)
    return p


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def render(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report, code = args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ActionSpecError, TorusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EnumerationCapError as exc:
        print(f"error: {exc}; pass --supports <file>", file=sys.stderr)
        return EXIT_CAP
    text = render(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
