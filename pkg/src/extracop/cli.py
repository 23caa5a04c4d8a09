"""Command-line front end: ``extracop generate|perturb|analyze|validate|bench``.

Every flag may also be set through an environment variable named
``EXTRACOP_<FLAG>`` (upper case, dashes as underscores); explicit flags win.
Each run writes a JSON manifest echoing the effective parameters, next to
the output file (``<output>.manifest.json``) or to stderr when writing to
stdout.

Exit codes: 0 success, 1 criterion failure, 2 input error, 3 capacity or
numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .analysis import DEFAULT_RADIUS_GRID, autocorrelation_report, classify_meshiness
from .coefficient import analyze
from .core import DomainError, ParticleSystem, SeedPolicy
from .generators import (
    LATTICE_TYPES,
    PackingSpec,
    generate_fcc_with_extrinsic_stacking_fault,
    generate_penrose_vertices,
    generate_poisson_disk,
    lattice,
)
from .neighborhoods import DegeneracyError, PerturbationConfig, robust_voronoi_neighborhood
from .thermal import CapacityError, ThermalSpec, apply_thermal_displacements
from .validation import CHECKS, ValidationOptions, check_throughput, format_report, run_validation
from .xyz import XYZParseError, format_xyz, read_xyz

EXIT_OK, EXIT_CRITERION, EXIT_INPUT, EXIT_CAPACITY = 0, 1, 2, 3

GENERATOR_KINDS = LATTICE_TYPES + ("stacking-fault", "penrose", "poisson-disk")


class InputError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(x)) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _radius_grid(text: str) -> list[float]:
    """``start:stop:step`` or an explicit list."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        return [float(r) for r in np.round(np.arange(start, stop + step / 2, step), 10)]
    return _float_list(text)


def _add_neighborhood_flags(p):
    p.add_argument("--sigma", type=float, default=0.1, help="perturbation scale as a fraction of <r_p>")
    p.add_argument("--tau", type=float, default=1 / 3, help="naive neighborhood slack for candidates")
    p.add_argument("--max-samples", type=int, default=128)
    p.add_argument("--rmse-threshold", type=float, default=5.0, help="degrees")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--manifest", default=None, help="manifest path (default: next to the output)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="extracop", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"extracop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a generated particle system as extended XYZ")
    g.add_argument("kind", choices=GENERATOR_KINDS)
    g.add_argument("-o", "--output", default="-")
    g.add_argument("--extent", type=_float_list, nargs="+", default=None,
                   help="repetitions per axis (lattices), box edges (poisson-disk) or pentagrid size")
    g.add_argument("--a", type=float, default=1.0, help="lattice constant / nearest-neighbor distance")
    g.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="lattice parameter, e.g. ratio=2 or angle=60")
    g.add_argument("--open", action="store_true", help="drop the periodic box")
    g.add_argument("--dimension", type=int, default=2, choices=(2, 3))
    g.add_argument("--min-distance", type=float, default=1.0)
    _add_common(g)

    t = sub.add_parser("perturb", help="apply thermal displacements")
    t.add_argument("input")
    t.add_argument("-o", "--output", default="-")
    t.add_argument("--mode", choices=("correlated", "uncorrelated"), default="correlated")
    grp = t.add_mutually_exclusive_group()
    grp.add_argument("--temperature", type=float, default=None, help="kelvin (copper calibration)")
    grp.add_argument("--rms-fraction", type=float, default=None)
    t.add_argument("--cutoff", type=float, default=None,
                   help="correlation cutoff in units of <r_p>; required above 5000 particles")
    _add_common(t)

    a = sub.add_parser("analyze", help="per-particle k, |Theta^Delta|, E, delta")
    a.add_argument("input")
    a.add_argument("-o", "--output", default="-")
    a.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_neighborhood_flags(a)
    a.add_argument("--interior-margin", type=float, default=0.0,
                   help="only report particles this far (in <r_p>) from the bounding box")
    a.add_argument("--radius-grid", type=_radius_grid, default=None,
                   help="also report rank statistics over these ball radii (start:stop:step or list)")
    _add_common(a)

    v = sub.add_parser("validate", help="run the reference experiments")
    v.add_argument("-o", "--output", default="-")
    v.add_argument("--format", choices=("text", "json"), default="text")
    v.add_argument("--criteria", type=_int_list, default=sorted(CHECKS))
    v.add_argument("--trials", type=int, default=1000, help="seeded trials per lattice")
    v.add_argument("--replicas", type=int, default=10, help="random packing replicas")
    v.add_argument("--thermal-replicas", type=int, default=5)
    v.add_argument("--interior-margin", type=float, default=2.0)
    v.add_argument("--radius-grid", type=_radius_grid, default=list(DEFAULT_RADIUS_GRID))
    _add_neighborhood_flags(v)
    _add_common(v)

    b = sub.add_parser("bench", help="throughput of the full pipeline on fcc")
    b.add_argument("--sizes", type=_int_list, default=[10_000, 100_000])
    b.add_argument("-o", "--output", default="-")
    b.add_argument("--format", choices=("text", "json"), default="text")
    _add_neighborhood_flags(b)
    _add_common(b)
    return parser


def _apply_env(parser: argparse.ArgumentParser, command: str, environ) -> None:
    """Use ``EXTRACOP_*`` variables as defaults for the chosen subcommand."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    p = sub.choices[command]
    defaults = {}
    for action in p._actions:
        if not action.option_strings or action.dest in ("help",):
            continue
        key = "EXTRACOP_" + action.dest.upper()
        if key not in environ:
            continue
        raw = environ[key]
        if action.nargs == 0:
            defaults[action.dest] = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                defaults[action.dest] = action.type(raw) if action.type else raw
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise InputError(f"{key}: {exc}") from None
            if action.choices is not None and defaults[action.dest] not in action.choices:
                raise InputError(f"{key}: {raw!r} not one of {list(action.choices)}")
    p.set_defaults(**defaults)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _emit(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _write_manifest(args, extra: dict) -> None:
    params = {k: v for k, v in vars(args).items() if k not in ("manifest",)}
    manifest = {"program": "extracop", "version": __version__, "parameters": _jsonable(params)}
    manifest.update(_jsonable(extra))
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    path = args.manifest
    if path is None and args.output != "-":
        path = args.output + ".manifest.json"
    if path is None:
        sys.stderr.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _read(path: str) -> ParticleSystem:
    try:
        return read_xyz(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    except XYZParseError as exc:
        raise InputError(f"{path}: {exc}") from None


def _params(items) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--param expects KEY=VALUE, got {item!r}")
        try:
            out[key] = float(value)
        except ValueError:
            raise InputError(f"--param {key}: not a number: {value!r}") from None
    return out


def cmd_generate(args) -> int:
    kind = args.kind
    # each value may itself be a comma list, and the env default is a flat list
    ext = None if args.extent is None else [
        x for part in args.extent for x in (part if isinstance(part, list) else [part])]
    if kind in LATTICE_TYPES:
        extent = 6 if ext is None else tuple(int(x) for x in ext) if len(ext) > 1 else int(ext[0])
        system = lattice(kind, extent, args.a, **_params(args.param))
    elif kind == "stacking-fault":
        p = {k: int(v) for k, v in _params(args.param).items()}
        extent = (6, 4) if ext is None else tuple(int(x) for x in ext)
        system = generate_fcc_with_extrinsic_stacking_fault(extent, a=args.a, **p)
    elif kind == "penrose":
        system = generate_penrose_vertices(6 if ext is None else int(ext[0]))
    else:
        d = args.dimension
        extent = (50.0,) * d if ext is None else tuple(ext) * (d if len(ext) == 1 else 1)
        system = generate_poisson_disk(PackingSpec(d, args.min_distance, extent, seed=SeedPolicy(args.seed)))
    if args.open and system.box is not None:
        system = ParticleSystem(system.positions, None, system.species)
    _emit(format_xyz(system, f"extracop generate {kind}"), args.output)
    _write_manifest(args, {"particles": system.n, "dimension": system.dimension})
    return EXIT_OK


def cmd_perturb(args) -> int:
    system = _read(args.input)
    if args.temperature is None and args.rms_fraction is None:
        raise InputError("give --temperature or --rms-fraction")
    spec = ThermalSpec(mode=args.mode, temperature=args.temperature, rms_fraction=args.rms_fraction,
                       seed=SeedPolicy(args.seed), cutoff=args.cutoff)
    out = apply_thermal_displacements(system, spec)
    _emit(format_xyz(out, f"extracop perturb {args.mode}"), args.output)
    _write_manifest(args, {"particles": system.n, "rms_fraction": spec.fraction})
    return EXIT_OK


def cmd_analyze(args) -> int:
    system = _read(args.input)
    config = PerturbationConfig(sigma_fraction=args.sigma, tau=args.tau, max_samples=args.max_samples,
                                seed=SeedPolicy(args.seed), workers=args.threads)
    nm = robust_voronoi_neighborhood(system, config)
    result = analyze(system, nm, args.rmse_threshold)
    mask = system.interior_mask(args.interior_margin * system.median_nn_distance)
    rows = np.nonzero(mask)[0]
    if args.format == "csv":
        lines = ["index,k,unique_angles,E,delta"]
        lines += [f"{i},{result.k[i]},{result.unique_angles[i]},{float(result.E[i])!r},{float(result.delta[i])!r}"
                  for i in rows]
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps([result[i] for i in rows], indent=1) + "\n"
    _emit(text, args.output)
    extra = {"particles": system.n, "reported": int(len(rows)), "samples": nm.samples,
             "converged": nm.converged, "undecided_particles": int(len(nm.undecided_particles()))}
    if args.radius_grid:
        extra["autocorrelation"] = autocorrelation_report(system, result, args.radius_grid, mask).to_dict()
        extra["mesh"] = classify_meshiness(system, nm, mask).to_dict()
    _write_manifest(args, extra)
    return EXIT_OK


def _validation_options(args) -> ValidationOptions:
    return ValidationOptions(seed=args.seed, sigma_fraction=args.sigma, tau=args.tau,
                             max_samples=args.max_samples, rmse_threshold=args.rmse_threshold,
                             trials=args.trials, replicas=args.replicas,
                             thermal_replicas=args.thermal_replicas, interior_margin=args.interior_margin,
                             radius_grid=tuple(args.radius_grid), threads=args.threads)


def cmd_validate(args) -> int:
    unknown = set(args.criteria) - set(CHECKS)
    if unknown:
        raise InputError(f"unknown criteria {sorted(unknown)}; choose from {sorted(CHECKS)}")
    opts = _validation_options(args)
    results = run_validation(opts, args.criteria,
                             progress=lambda n: print(f"criterion {n} ...", file=sys.stderr, flush=True))
    _emit(format_report(results, args.format), args.output)
    _write_manifest(args, {"passed": [r.number for r in results if r.passed],
                           "failed": [r.number for r in results if not r.passed]})
    return EXIT_OK if all(r.passed for r in results) else EXIT_CRITERION


def cmd_bench(args) -> int:
    opts = ValidationOptions(seed=args.seed, sigma_fraction=args.sigma, tau=args.tau,
                             max_samples=args.max_samples, rmse_threshold=args.rmse_threshold,
                             threads=args.threads)
    res = check_throughput(args.sizes, opts)
    _emit(format_report([res], args.format), args.output)
    _write_manifest(args, {"throughput": res.data})
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "perturb": cmd_perturb, "analyze": cmd_analyze,
            "validate": cmd_validate, "bench": cmd_bench}


def main(argv=None, environ=None) -> int:
    environ = os.environ if environ is None else environ
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        command = next((a for a in argv if a in COMMANDS), None)
        if command is not None:
            _apply_env(parser, command, environ)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_OK if exc.code == 0 else EXIT_INPUT
        start = time.perf_counter()
        code = COMMANDS[args.command](args)
        print(f"done in {time.perf_counter() - start:.2f} s", file=sys.stderr)
        return code
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CapacityError, DegeneracyError, ArithmeticError, MemoryError) as exc:
        print(f"capacity/numerical error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())
