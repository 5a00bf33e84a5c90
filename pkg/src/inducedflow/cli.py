"""Command-line entry point: ``inducedflow COMMAND --model FILE [options]``.

Exit codes: 0 ok, 2 usage, 3 model parse, 4 solver (including singular
input and unresolved grids), 5 verification failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checks import run_checks
from .config import load_model
from .exceptions import (
    BranchBoundaryError,
    ConvergenceError,
    DomainError,
    GridResolutionError,
    ModelError,
    SingularInputError,
    TailError,
)
from .inducing import enumerate_cylinders
from .io import AtomicOutput, csv_text, json_text
from .operator import DEFAULT_GRID, estimate_Zc
from .thermo import REGULAR, abramov_lift, gibbs_measure, mme, pressure_curve, solve_pressure

log = logging.getLogger("inducedflow")

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4, 5
EXIT_CODES = {
    ModelError: EXIT_MODEL,
    ConvergenceError: EXIT_SOLVER,
    TailError: EXIT_SOLVER,
    GridResolutionError: EXIT_SOLVER,
    SingularInputError: EXIT_SOLVER,
    BranchBoundaryError: EXIT_SOLVER,
    DomainError: EXIT_SOLVER,
}
MANIFEST_SCHEMA = 1
COMMANDS = ("mme", "pressure", "pressure-curve", "gibbs", "verify", "zc")


class UsageError(Exception):
    pass


def parse_beta_grid(text):
    """``START:STOP:STEP`` to an inclusive grid; an empty grid is a usage error."""
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--beta-grid must be START:STOP:STEP, got {text!r}") from None
    if not (math.isfinite(start) and math.isfinite(stop) and step > 0):
        raise UsageError("--beta-grid needs finite bounds and a positive step")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    if count < 1:
        raise UsageError("--beta-grid is empty")
    grid = start + step * np.arange(count)
    if grid[0] < 0:
        raise UsageError("--beta-grid must be nonnegative")
    return grid


def _positive(kind):
    def conv(text):
        val = kind(text)
        if not val > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return val
    return conv


def _grid_size(text):
    n = int(text)
    if n < 16:
        raise argparse.ArgumentTypeError("grid size must be >= 16")
    return n


def _emit(text):
    parts = {p.strip() for p in text.split(",") if p.strip()}
    if not parts or not parts <= {"csv", "json"}:
        raise argparse.ArgumentTypeError("--emit takes a comma list of csv, json")
    return sorted(parts)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="TOML model file")
    common.add_argument("--grid", type=_grid_size, default=DEFAULT_GRID, help="grid nodes (>= 16)")
    common.add_argument("--cutoff", type=_positive(int), default=None,
                        help="explicit branches for countable families")
    common.add_argument("--tol", type=_positive(float), default=1e-10, help="solver tolerance")
    common.add_argument("--out", default="inducedflow-out", help="output directory")
    common.add_argument("--emit", type=_emit, default=["csv", "json"], help="csv,json")
    common.add_argument("--threads", type=_positive(int), default=os.cpu_count() or 1,
                        help="parallel beta solves (results do not depend on it)")
    common.add_argument("-v", "--verbose", action="store_true")
    beta = argparse.ArgumentParser(add_help=False)
    beta.add_argument("--beta", type=float, default=1.0, help="inverse temperature")

    p = argparse.ArgumentParser(prog="inducedflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    m = sub.add_parser("mme", parents=[common], help="measure of maximal entropy")
    m.add_argument("--depth", type=_positive(int), default=4, help="cylinder depth for the CSV")
    sub.add_parser("pressure", parents=[common, beta], help="P(beta) and the eigen-data")
    pc = sub.add_parser("pressure-curve", parents=[common], help="P on a beta grid")
    pc.add_argument("--beta-grid", required=True, help="START:STOP:STEP (inclusive)")
    g = sub.add_parser("gibbs", parents=[common, beta], help="cylinder measures at Z = P")
    g.add_argument("--depth", type=_positive(int), default=6)
    v = sub.add_parser("verify", parents=[common, beta], help="run the invariant suite")
    v.add_argument("--depth", type=_positive(int), default=6)
    z = sub.add_parser("zc", parents=[common, beta], help="root-test estimate of Z_c")
    z.add_argument("--n-max", type=int, default=40)
    z.add_argument("--method", choices=("fit", "limsup"), default="fit")
    return p


def _config_echo(args):
    skip = {"verbose"}
    return {k: (v if not isinstance(v, np.ndarray) else v.tolist())
            for k, v in sorted(vars(args).items()) if k not in skip}


def _cylinder_rows(system, potential, depth, cutoff, measures=None):
    cyl = enumerate_cylinders(system, potential, depth, cutoff=cutoff, mass_tol=1.0)
    rows = []
    for k, c in enumerate(cyl):
        row = {"word": "-".join(map(str, c.word)), "lo": c.interval[0], "hi": c.interval[1],
               "induced_roof": c.induced_roof, "birkhoff_W": c.birkhoff_W}
        if measures is not None:
            row["measure"] = measures[c.word]
        rows.append(row)
    return rows


_CYL_HEADER = ["word", "lo", "hi", "induced_roof", "birkhoff_W"]


def _spectral_outputs(sol):
    meta = {"beta": sol.beta, "Z": sol.Z, "lambda": sol.lam, "residual": sol.residual,
            "dual_residual": sol.dual_residual, "K": sol.K_distortion, "grid": sol.grid,
            "cutoff": sol.cutoff, "iterations": sol.iterations, "interp": sol.H.interp}
    rows = zip(sol.H.nodes, sol.H.values, sol.nu)
    return meta, csv_text(["node", "H", "nu"], rows)


def _gibbs_block(sol, depth):
    try:
        return gibbs_measure(sol, depth), None
    except GridResolutionError as err:
        if not err.max_depth:
            raise
        return gibbs_measure(sol, err.max_depth), err.max_depth


def cmd_mme(args, model, out):
    h, lift = mme(model.system, args.grid, args.cutoff, args.tol)
    sol = lift.base
    g, limited = _gibbs_block(sol, args.depth)
    words, meas, _ = g.cylinder_table()
    rows = _cylinder_rows(model.system, None, g.depth, 4 if model.system.countable else None,
                          dict(zip(words, meas)))
    result = {"h_top": h, "mean_roof": lift.mean_roof, "entropy_induced": lift.entropy_induced,
              "entropy_flow": lift.entropy_flow, "lambda": sol.lam, "cylinder_depth": g.depth}
    if limited:
        result["depth_limit"] = limited
    out.json("mme.json", result)
    out.csv("cylinders.csv", _CYL_HEADER[:3] + ["induced_roof", "measure"],
            [{k: r[k] for k in ("word", "lo", "hi", "induced_roof", "measure")} for r in rows])
    print(f"h_top = {h:.17g}")
    return EXIT_OK, {"iterations": sol.iterations, "residual": sol.residual}


def cmd_pressure(args, model, out):
    ps = solve_pressure(model.system, model.potential, args.beta, args.tol, args.grid, args.cutoff)
    meta, nodes = _spectral_outputs(ps.spectral)
    result = {"beta": args.beta, "pressure": ps.Z, "regime": ps.regime, "lambda_margin": ps.margin,
              "zc": ps.zc, "z0": ps.z0}
    if ps.regime == REGULAR:
        lift = abramov_lift(ps.spectral)
        result.update(mean_roof=lift.mean_roof, entropy_flow=lift.entropy_flow,
                      free_energy=lift.free_energy)
    out.json("pressure.json", result)
    out.json("spectral.json", meta)
    out.csv_text("spectral_nodes.csv", nodes)
    print(f"P({args.beta:g}) = {ps.Z:.17g} [{ps.regime}]")
    return EXIT_OK, {"evaluations": ps.evaluations, "residual": ps.spectral.residual,
                     "margin": ps.margin}


def cmd_pressure_curve(args, model, out):
    betas = parse_beta_grid(args.beta_grid)
    pc = pressure_curve(model.system, model.potential, betas, args.tol, args.grid, args.cutoff,
                        workers=args.threads)
    header = ["beta", "pressure", "zc", "regime", "lambda_margin", "mean_roof", "entropy_flow"]
    out.csv("pressure_curve.csv", header, list(pc.rows()))
    summary = {"asymptote_slope": pc.asymptote_slope,
               "asymptote_candidates": pc.asymptote_candidates, "checks": pc.checks}
    if pc.beta_c is not None:
        summary["beta_c"] = pc.beta_c
        summary["beta_c_interval"] = list(pc.beta_c_interval)
        print(f"beta_c = {pc.beta_c:.17g} in [{pc.beta_c_interval[0]:.17g}, {pc.beta_c_interval[1]:.17g}]")
    out.json("pressure_curve.json", summary)
    print(f"{len(betas)} beta values, regimes: {', '.join(sorted(set(pc.regime)))}")
    return EXIT_OK, {"points": len(betas), "max_margin": float(np.max(np.abs(pc.lambda_margin)))}


def cmd_gibbs(args, model, out):
    ps = solve_pressure(model.system, model.potential, args.beta, args.tol, args.grid, args.cutoff)
    g, limited = _gibbs_block(ps.spectral, args.depth)
    words, meas, _ = g.cylinder_table()
    rows = _cylinder_rows(model.system, model.potential, g.depth,
                          4 if model.system.countable else None, dict(zip(words, meas)))
    result = {"beta": args.beta, "Z": ps.Z, "regime": ps.regime, "depth": g.depth,
              "max_depth": g.max_depth, "K_gibbs": g.K_gibbs,
              "max_log_gibbs_ratio": float(np.max(np.abs(g.gibbs_ratios())))}
    if g.depth >= 2:
        result["additivity_residual"] = g.additivity_residual()
    if limited:
        result["depth_limit"] = limited
    out.json("gibbs.json", result)
    out.csv("cylinders.csv", _CYL_HEADER + ["measure"], rows)
    return EXIT_OK, {"residual": ps.spectral.residual}


def cmd_verify(args, model, out):
    results = run_checks(model.system, model.potential, args.beta, args.grid, args.cutoff, args.tol,
                         args.depth)
    rows = [{"check": r.name, "status": r.status, "value": r.value, "threshold": r.threshold,
             "detail": r.detail} for r in results]
    out.csv("verify.csv", ["check", "status", "value", "threshold", "detail"], rows)
    out.json("verify.json", {"checks": rows, "passed": all(r.passed for r in results)})
    for r in results:
        print(f"{r.status.upper():8s} {r.name:20s} {r.detail}")
    failed = [r.name for r in results if not r.passed]
    return (EXIT_VERIFY if failed else EXIT_OK), {"failed": failed}


def cmd_zc(args, model, out):
    est = estimate_Zc(model.system, model.potential, args.beta, args.n_max, args.method)
    declared = model.system.family.critical_abscissa(args.beta, model.potential)
    out.json("zc.json", {"beta": args.beta, "value": est.value, "spread": est.spread,
                         "method": est.method, "n_max": est.n_max, "unbounded": est.unbounded,
                         "declared": declared})
    out.csv("zc_partial.csv", ["n", "exponent"], est.partial_exponents)
    print("Z_c = -inf (finite branch set)" if est.unbounded else
          f"Z_c ~ {est.value:.10g} (spread {est.spread:.3g})")
    return EXIT_OK, {"spread": est.spread}


HANDLERS = {"mme": cmd_mme, "pressure": cmd_pressure, "pressure-curve": cmd_pressure_curve,
            "gibbs": cmd_gibbs, "verify": cmd_verify, "zc": cmd_zc}


class _Emitter:
    def __init__(self, sink, emit):
        self.sink, self.emit = sink, set(emit)

    def json(self, name, obj):
        if "json" in self.emit:
            self.sink.write(name, json_text(obj))

    def csv(self, name, header, rows):
        if "csv" in self.emit:
            self.sink.write(name, csv_text(header, rows))

    def csv_text(self, name, text):
        if "csv" in self.emit:
            self.sink.write(name, text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "pressure-curve":
            parse_beta_grid(args.beta_grid)
        model = load_model(args.model)
        t0 = time.perf_counter()
        with AtomicOutput(args.out) as sink:
            code, metrics = HANDLERS[args.command](args, model, _Emitter(sink, args.emit))
            manifest = {"schema_version": MANIFEST_SCHEMA, "library_version": __version__,
                        "command": args.command, "config": _config_echo(args),
                        "model_sha256": model.sha256, "model": model.system.describe(),
                        "potential": model.potential.describe(), "metrics": metrics,
                        "exit_code": code}
            sink.write("manifest.json", json_text(manifest))
        # wall time lives outside the manifest so reruns stay byte-identical
        Path(args.out, "timing.json").write_text(
            json_text({"wall_time_s": time.perf_counter() - t0}), encoding="utf-8")
        return code
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except tuple(EXIT_CODES) as exc:
        code = next(c for cls, c in EXIT_CODES.items() if isinstance(exc, cls))
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
