"""Command line: ``clinkercooler simulate | validate | properties``.

Exit codes: 0 success, 1 invalid scenario, 2 solver failure, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import thermo
from .scenario import ScenarioError, bundled_scenario_path, load_scenario, validate
from .simulation import RunError, export, run

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


def _load(path):
    sc = load_scenario(path)
    problems = validate(sc)
    if problems:
        raise ScenarioError(problems)
    return sc


def _scenario_arg(value):
    return bundled_scenario_path() if value == "reference" else Path(value)


def cmd_simulate(args) -> int:
    sc = _load(_scenario_arg(args.scenario))
    out = Path(args.out)
    try:
        bundle = run(sc, args.mode, t_end=args.t_end, dt=args.dt)
    except RunError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "solver_failure.json").write_text(
                json.dumps(exc.diagnostics, indent=2, default=float) + "\n", encoding="utf-8")
        except OSError:
            pass
        return EXIT_SOLVER
    files = export(bundle, out)
    prof = bundle.profiles
    T_out = prof.column("T_out_extrapolated")[0] - 273.15
    print(f"{sc.name}: {bundle.mode} run, {bundle.meta['samples']} samples, "
          f"{bundle.meta['wall_time_s']:.1f} s wall time")
    print(f"outlet clinker (extrapolated): {T_out:.1f} degC")
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


def cmd_validate(args) -> int:
    sc = _load(_scenario_arg(args.scenario))
    print(f"{sc.name}: valid ({sc.geometry.n_segments} segments x "
          f"{sc.geometry.n_layers} layers, digest {sc.digest()})")
    return EXIT_OK


def cmd_properties(args) -> int:
    T = np.asarray(args.T, dtype=float)
    table = thermo.DEFAULT_TABLE
    if args.what == "mixture":
        comp = dict(_pair(s) for s in args.x) if args.x else {"N2": 0.79, "O2": 0.21}
        x = table.gas.vector(comp)
        x = x / x.sum()
        mu, k = thermo.mixture_transport(np.broadcast_to(x, T.shape + x.shape), T, table.gas)
        eps = thermo.gas_emissivity(x[table.gas.index("H2O")], x[table.gas.index("CO2")],
                                    T, args.P, args.path_length)
        print("T[K],mu[Pa s],k[W/(m K)],emissivity[-]")
        for row in zip(T, mu, k, np.broadcast_to(eps, T.shape)):
            print(",".join(format(float(v), ".10g") for v in row))
        return EXIT_OK
    names = args.species or list(thermo.SOLIDS + thermo.GASES)
    print("species,T[K],cp[J/(mol K)],h[J/mol],k[W/(m K)],mu[Pa s]")
    for name in names:
        phase = table.phase_of(name)
        i = phase.index(name)
        cp = thermo.cp_species(T, phase)[..., i]
        h = thermo.molar_enthalpy(T, phase)[..., i]
        if phase.name == "gas":
            k = thermo.gas_conductivities(T, phase)[..., i]
            mu = thermo.gas_viscosities(T, phase)[..., i]
        else:
            k = np.broadcast_to(thermo.solid_conductivities(phase)[i], T.shape)
            mu = np.full(T.shape, np.nan)
        for row in zip(T, cp, h, k, mu):
            print(name + "," + ",".join(format(float(v), ".10g") for v in row))
    return EXIT_OK


def _pair(text):
    name, _, value = text.partition("=")
    return name, float(value)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clinkercooler",
                                description="Grate belt clinker cooler simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and export CSV/JSON results")
    s.add_argument("scenario", help="scenario JSON file, or 'reference' for the bundled one")
    s.add_argument("--mode", choices=("dynamic", "steady"), default="dynamic")
    s.add_argument("--out", default="results", help="output directory (default: results)")
    s.add_argument("--t-end", type=float, default=None, help="simulated time, s")
    s.add_argument("--dt", type=float, default=None, help="initial step size, s")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)

    q = sub.add_parser("properties", help="print property tables")
    q.add_argument("what", choices=("species", "mixture"))
    q.add_argument("--T", type=float, nargs="+", required=True, help="temperatures, K")
    q.add_argument("--species", nargs="*", help="species names (default: all)")
    q.add_argument("--x", nargs="*", help="gas mole fractions as NAME=VALUE")
    q.add_argument("--P", type=float, default=101325.0, help="pressure, Pa")
    q.add_argument("--path-length", type=float, default=1.5, help="radiation path, m")
    q.set_defaults(func=cmd_properties)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    warnings.formatwarning = lambda msg, cat, *rest, **kw: f"{cat.__name__}: {msg}"
    logging.captureWarnings(True)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for path, msg in exc.errors:
            print(f"invalid scenario: {path}: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except thermo.ThermoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
