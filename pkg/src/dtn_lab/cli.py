"""Command-line front end: ``dtn-lab {forward,invert,stability,oracle-check}``.

Exit codes: 0 success, 1 a check failed, 2 bad input, 3 numeric failure,
4 reconstruction failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .cylinder import CylinderClass, CylinderConductivity, CylinderDtnSpectrum, cylinder_spectrum
from .cylinder_inverse import LIMIT_BASED, TWO_MODE, reconstruct_cylinder
from .disk import AdmissibleDiskClass, DiskConductivity, DiskDtnSpectrum, disk_spectrum
from .disk_inverse import reconstruct
from .errors import DtnLabError, NumericError, ReconstructionError
from .oracle import (
    cylinder_fixed_grid_multiplier,
    disk_fixed_grid_multiplier,
    oracle_cylinder_multiplier,
    oracle_disk_spectrum,
)
from .special import compute_zeros
from .stability import lipschitz_sweep

SCHEMA = "dtn-lab/1"
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_NUMERIC = 3
EXIT_RECONSTRUCTION = 4

DISK_FIELDS = ("alpha0", "alpha1", "alpha2", "a")
CYLINDER_FIELDS = ("alpha1", "alpha2", "h")
DISK_CLASS_FIELDS = ("a", "eps0", "M", "N")
CYLINDER_CLASS_FIELDS = ("h", "M")
TOLERANCE_FIELDS = ("oracle_rtol", "check_threshold", "noise_floor", "homogeneity_tol")
DEFAULT_THRESHOLD = {"disk": 1e-6, "cylinder": 1e-8}
PARAM_NAMES = {"disk": ("alpha0", "alpha1", "alpha2"), "cylinder": ("alpha1", "alpha2")}


class InputError(DtnLabError, ValueError):
    """A config or spectrum file is malformed."""


@dataclass(frozen=True)
class ProblemConfig:
    geometry: str
    conductivity: object = None
    n_modes: int | None = None
    tolerances: dict = field(default_factory=dict)
    seed: int | None = None
    class_bounds: object = None


def _fmt(x):
    """17 significant digits: round-trips every double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc.msg} (line {exc.lineno})") from exc


def _check_keys(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise InputError(f"{where} must be a JSON object")
    for key in obj:
        if key not in allowed:
            raise InputError(f"unknown field '{where}.{key}'" if where else f"unknown field '{key}'")
    for key in required:
        if key not in obj:
            raise InputError(f"missing field '{where}.{key}'" if where else f"missing field '{key}'")


def _number(obj, key, where):
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"field '{where}.{key}' must be a number")
    return float(value)


def _integer(value, name):
    if isinstance(value, bool) or not isinstance(value, int):
        raise InputError(f"field '{name}' must be an integer")
    return value


def _geometry(doc, override):
    geometry = doc.get("geometry", override)
    if geometry not in ("disk", "cylinder"):
        raise InputError(f"field 'geometry' must be 'disk' or 'cylinder', got {geometry!r}")
    if override is not None and override != geometry:
        raise InputError(f"--geometry {override} contradicts field 'geometry' = {geometry!r}")
    return geometry


def _check_schema(doc):
    if doc.get("schema") != SCHEMA:
        raise InputError(f"field 'schema' must be {SCHEMA!r}, got {doc.get('schema')!r}")


def _build(kind, fields, payload, where):
    values = {k: _number(payload, k, where) for k in fields}
    try:
        return kind(**values)
    except DtnLabError as exc:
        raise InputError(f"invalid '{where}': {exc}") from exc


def _tolerances(doc):
    tol = doc.get("tolerances", {})
    _check_keys(tol, TOLERANCE_FIELDS, "tolerances")
    return {k: _number(tol, k, "tolerances") for k in tol}


def parse_problem(doc, geometry=None):
    """Validate a forward/oracle config document."""
    _check_keys(doc, ("schema", "geometry", "conductivity", "n_modes", "tolerances"), "",
                required=("schema", "conductivity"))
    _check_schema(doc)
    geometry = _geometry(doc, geometry)
    fields = DISK_FIELDS if geometry == "disk" else CYLINDER_FIELDS
    kind = DiskConductivity if geometry == "disk" else CylinderConductivity
    payload = doc["conductivity"]
    _check_keys(payload, fields, "conductivity", required=fields)
    gamma = _build(kind, fields, payload, "conductivity")
    n_modes = doc.get("n_modes")
    if n_modes is not None:
        n_modes = _integer(n_modes, "n_modes")
        if n_modes < 1:
            raise InputError("field 'n_modes' must be >= 1")
    return ProblemConfig(geometry, gamma, n_modes, _tolerances(doc))


def parse_class(doc, geometry=None):
    """Validate a stability-sweep config document."""
    _check_keys(doc, ("schema", "geometry", "class", "seed", "samples"), "",
                required=("schema", "class"))
    _check_schema(doc)
    geometry = _geometry(doc, geometry)
    if geometry == "disk":
        payload = doc["class"]
        _check_keys(payload, DISK_CLASS_FIELDS, "class", required=DISK_CLASS_FIELDS)
        cls = _build(AdmissibleDiskClass, DISK_CLASS_FIELDS, payload, "class")
    else:
        payload = doc["class"]
        _check_keys(payload, CYLINDER_CLASS_FIELDS, "class", required=CYLINDER_CLASS_FIELDS)
        cls = _build(CylinderClass, CYLINDER_CLASS_FIELDS, payload, "class")
    seed = _integer(doc["seed"], "seed") if "seed" in doc else None
    samples = _integer(doc["samples"], "samples") if "samples" in doc else None
    return ProblemConfig(geometry, None, samples, {}, seed, cls)


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _modes(cfg, override):
    n = override if override is not None else cfg.n_modes
    if n is None:
        raise InputError("number of modes missing: set 'n_modes' or pass --modes")
    if n < 1:
        raise InputError("--modes must be >= 1")
    return n


def _conductivity_dict(gamma, geometry):
    fields = DISK_FIELDS if geometry == "disk" else CYLINDER_FIELDS
    return {k: getattr(gamma, k) for k in fields}


def cmd_forward(args):
    cfg = parse_problem(_load_json(args.config), args.geometry)
    n = _modes(cfg, args.modes)
    doc = {
        "schema": SCHEMA,
        "geometry": cfg.geometry,
        "conductivity": _conductivity_dict(cfg.conductivity, cfg.geometry),
    }
    if cfg.geometry == "disk":
        spec = disk_spectrum(cfg.conductivity, n)
        doc["modes"] = [{"n": i + 1, "multiplier": float(c)} for i, c in enumerate(spec.multipliers)]
    else:
        zeros = compute_zeros(n)
        spec = cylinder_spectrum(cfg.conductivity, n, zeros)
        doc["modes"] = [
            {"n": i + 1, "lambda": float(zeros.zeros[i]), "multiplier": float(c)}
            for i, c in enumerate(spec.multipliers)
        ]
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def _parse_spectrum(doc, geometry):
    _check_keys(doc, ("schema", "geometry", "conductivity", "modes"), "", required=("schema", "modes"))
    _check_schema(doc)
    geometry = _geometry(doc, geometry)
    modes = doc["modes"]
    if not isinstance(modes, list) or not modes:
        raise InputError("field 'modes' must be a non-empty list")
    allowed = ("n", "multiplier") if geometry == "disk" else ("n", "lambda", "multiplier")
    values = []
    for i, entry in enumerate(modes):
        _check_keys(entry, allowed, f"modes[{i}]", required=("n", "multiplier"))
        if _integer(entry["n"], f"modes[{i}].n") != i + 1:
            raise InputError(f"field 'modes[{i}].n' must be {i + 1} (modes are consecutive from 1)")
        values.append(_number(entry, "multiplier", f"modes[{i}]"))
    return geometry, np.array(values)


def cmd_invert(args):
    geometry, values = _parse_spectrum(_load_json(args.spectrum), args.geometry)
    if args.noise_floor < 0.0 or not math.isfinite(args.noise_floor):
        raise InputError("--noise-floor must be finite and >= 0")
    if geometry == "disk":
        rec = reconstruct(DiskDtnSpectrum(values), noise_floor=args.noise_floor)
        method = "staged-limits"
        unidentified = ["a"] if rec.homogeneous else []
    else:
        zeros = compute_zeros(values.size)
        rec = reconstruct_cylinder(
            CylinderDtnSpectrum(values, zeros), zeros, args.noise_floor, args.method
        )
        method = rec.method
        unidentified = ["h"] if rec.homogeneous else []
    params = _conductivity_dict(rec.gamma, geometry)
    bounds = {}
    for name in params:
        est = rec.diagnostics.get(name)
        bounds[name] = None if est is None else est.error_bound
    for name in unidentified:
        params[name] = None
    doc = {
        "schema": SCHEMA,
        "geometry": geometry,
        "method": method,
        "homogeneous": rec.homogeneous,
        "parameters": params,
        "error_bounds": bounds,
    }
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def stability_csv(report, geometry):
    """Serialise a sweep as CSV with a trailing summary row."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["pair_id", "params_a", "params_b", "gap_norm", "param_distance", "ratio", "argmax_mode"]
    )
    for rec in report.pairs:
        r = rec.result
        writer.writerow(
            [
                rec.pair_id,
                ";".join(_fmt(x) for x in rec.params_a),
                ";".join(_fmt(x) for x in rec.params_b),
                _fmt(r.gap_norm),
                _fmt(r.param_distance),
                _fmt(r.ratio),
                r.argmax_mode,
            ]
        )
    stats = report.ratios
    summary = ";".join(
        f"{k}={_fmt(stats.get(k, math.nan))}" for k in ("min", "median", "max")
    )
    writer.writerow(
        ["summary", ";".join(PARAM_NAMES[geometry]), f"duplicates={stats.get('duplicates', 0)}",
         "", f"count={stats.get('count', 0)}", summary, ""]
    )
    return buf.getvalue()


def cmd_stability(args):
    cfg = parse_class(_load_json(args.config), args.geometry)
    samples = args.samples if args.samples is not None else cfg.n_modes
    seed = args.seed if args.seed is not None else cfg.seed
    if samples is None:
        samples = 1000
    if seed is None:
        seed = 42
    if samples < 2:
        raise InputError(f"--samples must be >= 2, got {samples}")
    if seed < 0 or seed >= 2**64:
        raise InputError("--seed must be a 64-bit unsigned integer")
    vary = None
    if args.vary is not None:
        names = PARAM_NAMES[cfg.geometry]
        if args.vary not in names:
            raise InputError(f"--vary must be one of {', '.join(names)}")
        vary = names.index(args.vary)
    report = lipschitz_sweep(cfg.class_bounds, samples, seed, vary=vary)
    _emit(stability_csv(report, cfg.geometry), args.out)
    return EXIT_OK


def cmd_oracle_check(args):
    cfg = parse_problem(_load_json(args.config), args.geometry)
    n = _modes(cfg, args.modes)
    threshold = cfg.tolerances.get("check_threshold", DEFAULT_THRESHOLD[cfg.geometry])
    rtol = cfg.tolerances.get("oracle_rtol", 1e-10 if cfg.geometry == "disk" else 1e-9)
    modes = np.arange(1, n + 1)
    gamma = cfg.conductivity
    if cfg.geometry == "disk":
        closed = disk_spectrum(gamma, n).multipliers
        if args.grid_points is not None:
            oracle = np.array([disk_fixed_grid_multiplier(int(k), gamma, args.grid_points) for k in modes])
        else:
            oracle = oracle_disk_spectrum(modes, gamma, rtol=rtol)
    else:
        zeros = compute_zeros(n)
        closed = cylinder_spectrum(gamma, n, zeros).multipliers
        if args.grid_points is not None:
            oracle = np.array(
                [cylinder_fixed_grid_multiplier(int(k), gamma, zeros, grid_points=args.grid_points)
                 for k in modes]
            )
        else:
            oracle = np.array([oracle_cylinder_multiplier(int(k), gamma, zeros, rtol=rtol) for k in modes])
    rel = np.abs(closed - oracle) / np.abs(closed)
    ok = rel <= threshold
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "closed_form", "oracle", "rel_error", "pass"])
    for k, c, o, e, p in zip(modes, closed, oracle, rel, ok):
        writer.writerow([int(k), _fmt(c), _fmt(o), _fmt(e), "PASS" if p else "FAIL"])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK if bool(np.all(ok)) else EXIT_CHECK_FAILED


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dtn-lab", description="Forward and inverse DtN spectra for layered conductivities."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, metavar="PATH", help="JSON config file")
        p.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
        p.add_argument("--geometry", choices=("disk", "cylinder"), help="override/confirm geometry")

    p = sub.add_parser("forward", help="closed-form DtN spectrum")
    common(p)
    p.add_argument("--modes", type=int, metavar="N", help="number of modes (overrides n_modes)")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("invert", help="reconstruct a conductivity from a spectrum file")
    p.add_argument("spectrum", metavar="SPECTRUM", help="spectrum JSON as written by 'forward'")
    common(p, config_required=False)
    p.add_argument("--noise-floor", type=float, default=0.0, help="relative noise of the multipliers")
    p.add_argument("--method", choices=(LIMIT_BASED, TWO_MODE), default=LIMIT_BASED,
                   help="cylinder reconstruction path")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("stability", help="Lipschitz sweep over a conductivity class (CSV)")
    common(p)
    p.add_argument("--samples", type=int, metavar="N", help="number of pairs (default 1000)")
    p.add_argument("--seed", type=int, metavar="N", help="Philox seed (default 42)")
    p.add_argument("--vary", metavar="PARAM", help="single-parameter slice: only PARAM differs")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("oracle-check", help="compare closed-form multipliers with the ODE oracle")
    common(p)
    p.add_argument("--modes", type=int, metavar="N", help="number of modes (overrides n_modes)")
    p.add_argument("--grid-points", type=int, metavar="G",
                   help="single unrefined grid of G points instead of the refined oracle")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which matches the bad-input code
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except ReconstructionError as exc:
        print(f"error: reconstruction failed at stage '{exc.stage}': {exc}", file=sys.stderr)
        return EXIT_RECONSTRUCTION
    except NumericError as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DtnLabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
