"""Command-line front end.

Subcommands: rho, eigen, psi, packet, propagate, verify.  Every data-producing
run writes its tables plus ``<out>.manifest.json`` with the resolved
configuration and a sha256 digest per output file.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__
from .errors import ConfigError, LRError
from .ermakov import ErmakovSolution, ermakov_residual, solve_rho
from .operators import GridSpec, WavefunctionFrame
from .params import (PRESETS, CaldirolaKanaiParams, OscillatorModel, TimeFunction,
                     make_caldirola_kanai)
from .propagator import propagate, recommended_q_max
from .verify import gaussian_frame, run_suite, summary_table
from .wavefunction import (eigenfunction_frame, exact_solution_frame, gauss_legendre,
                           packet_weights, synthesize_packet)


# ---------------------------------------------------------------------------
# configuration

def _schema():
    text = resources.files("lrinvariant").joinpath("schemas/model.schema.json").read_text()
    return json.loads(text)


def _time_function(doc, window):
    kind = doc["kind"]
    if kind == "tabulated":
        if "times" not in doc or "values" not in doc:
            raise ConfigError("tabulated time function needs 'times' and 'values'")
        return TimeFunction.tabulated(doc["times"], doc["values"], window)
    return TimeFunction(kind, tuple(doc.get("coefficients", ())), window)


def model_from_config(doc: dict):
    """Validate a model document and build (model, ck-or-None).

    Raises ConfigError naming the offending field.
    """
    errors = sorted(Draft202012Validator(_schema()).iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"invalid model config at '{where}': {e.message}")
    hbar = float(doc.get("hbar", 1.0))
    window = tuple(doc.get("window", (-math.inf, math.inf)))
    if "caldirola_kanai" in doc:
        if "mass" in doc or "frequency" in doc or "y" in doc:
            raise ConfigError("'caldirola_kanai' excludes 'mass', 'frequency' and 'y'")
        c = doc["caldirola_kanai"]
        ck = CaldirolaKanaiParams(c["m"], c["gamma"], c["omega0"], c.get("y0", 0.0))
        try:
            model = make_caldirola_kanai(ck, hbar, window, c.get("suppress_y", False))
        except (ValueError, LRError) as exc:
            raise ConfigError(f"invalid 'caldirola_kanai': {exc}") from exc
        return model, ck
    for key in ("mass", "frequency"):
        if key not in doc:
            raise ConfigError(f"missing required field '{key}'")
    try:
        fns = {k: _time_function(doc[k], window) for k in ("mass", "frequency")}
        y_doc = doc.get("y")
        y_fn = None if y_doc is None else _time_function(y_doc, window)
    except ValueError as exc:
        raise ConfigError(f"invalid time function: {exc}") from exc
    model = OscillatorModel(fns["mass"], fns["frequency"], y_fn, hbar, doc.get("name", "model"))
    return model, None


def load_model(args):
    """(model, ck, config document) from --model or --preset."""
    if args.model:
        try:
            doc = json.loads(Path(args.model).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read model file {args.model}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("model config must be a JSON object")
        model, ck = model_from_config(doc)
        return model, ck, doc
    preset = PRESETS[args.preset or "ck-reference"]
    ck = preset.ck
    doc = {"caldirola_kanai": {"m": ck.m, "gamma": ck.gamma, "omega0": ck.omega0, "y0": ck.y0},
           "hbar": preset.hbar}
    return make_caldirola_kanai(ck, preset.hbar), ck, doc


def _preset(args):
    return PRESETS[args.preset or "ck-reference"]


def _grid(args) -> GridSpec:
    if args.grid:
        q_min, q_max, n = args.grid
        return GridSpec(float(q_min), float(q_max), int(n))
    p = _preset(args)
    return GridSpec(p.q_min, p.q_max, p.n_points)


def resolve_ermakov(model, ck, t_lo, t_hi):
    """Closed form for the exponential-mass family, else a numerical solve covering [t_lo, t_hi]."""
    if ck is not None and ck.omega1_sq > 0:
        return ErmakovSolution.closed_form(ck, model)
    lo, hi = min(t_lo, 0.0), max(t_hi, 0.0)
    if hi == lo:
        hi = lo + 1e-3
    return solve_rho(model, t_span=(lo, hi))


# ---------------------------------------------------------------------------
# output

def _fmt(x) -> str:
    return format(float(x), ".17g")


def table_bytes(columns, rows, fmt: str) -> bytes:
    if fmt == "json":
        data = {"columns": list(columns), "data": [[float(v) for v in r] for r in rows]}
        return (json.dumps(data, indent=1) + "\n").encode()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(v) for v in r])
    return buf.getvalue().encode()


class Outputs:
    """Collects output files and writes them and the manifest at the end."""

    def __init__(self, args, subcommand, config):
        self.args = args
        self.subcommand = subcommand
        self.config = config
        self.files = []
        self.started = datetime.now(timezone.utc).isoformat()

    def add(self, path, data: bytes):
        self.files.append((Path(path), data))

    def add_table(self, path, columns, rows):
        self.add(path, table_bytes(columns, rows, self.args.format))

    def write(self, manifest_base):
        for path, data in self.files:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
        manifest = {
            "tool_version": __version__,
            "subcommand": self.subcommand,
            "full_config": self.config,
            "timestamps": {"started": self.started,
                           "finished": datetime.now(timezone.utc).isoformat()},
            "outputs": [{"path": str(p), "sha256": hashlib.sha256(d).hexdigest()}
                        for p, d in self.files],
        }
        mpath = Path(str(manifest_base) + ".manifest.json")
        mpath.write_text(json.dumps(manifest, indent=1) + "\n")
        return mpath


def _frame_rows(frame: WavefunctionFrame):
    return np.column_stack([frame.grid.nodes, frame.values.real, frame.values.imag])


def _default_out(args, stem):
    ext = "json" if args.format == "json" else "csv"
    return Path(args.out) if args.out else Path(f"{stem}.{ext}")


def _base_config(args, model_doc):
    cfg = {"model": model_doc, "preset": args.preset, "format": args.format}
    return cfg


# ---------------------------------------------------------------------------
# subcommands

def cmd_rho(args):
    model, ck, doc = load_model(args)
    t0, t1 = args.t_span
    if ck is not None and args.rho0 is None and ck.omega1_sq > 0:
        # seed the numerical solve from the closed form so it tracks that solution
        closed = ErmakovSolution.closed_form(ck, model)
        rho0, rho_dot0 = closed.rho(t0), closed.rho_dot(t0)
    else:
        rho0, rho_dot0 = args.rho0, args.rho_dot0
    er = solve_rho(model, rho0, rho_dot0, (t0, t1), tol=args.tol)
    ts = np.linspace(t0, t1, args.samples)
    rho, rho_dot = er.rho(ts), er.rho_dot(ts)
    res = ermakov_residual(model, rho, rho_dot, er.rho_ddot(ts), ts)
    cfg = _base_config(args, doc)
    cfg.update({"t_span": [t0, t1], "samples": args.samples, "tol": args.tol,
                "rho0": float(rho[0]), "rho_dot0": float(rho_dot[0])})
    out = _default_out(args, "rho")
    o = Outputs(args, "rho", cfg)
    o.add_table(out, ["t", "rho", "rho_dot", "residual"], np.column_stack([ts, rho, rho_dot, res]))
    o.write(out)
    return 0


def _parity_mix(args):
    return (1.0, 0.0) if args.parity == "even" else (0.0, 1.0)


def cmd_eigen(args, exact=False):
    model, ck, doc = load_model(args)
    grid = _grid(args)
    t = args.t
    er = resolve_ermakov(model, ck, t, t)
    builder = exact_solution_frame if exact else eigenfunction_frame
    frame = builder(args.lam, _parity_mix(args), model, er, grid, t)
    cfg = _base_config(args, doc)
    cfg.update({"lambda": args.lam, "parity": args.parity, "t": t,
                "grid": [grid.q_min, grid.q_max, grid.n_points]})
    name = "psi" if exact else "eigen"
    out = _default_out(args, name)
    o = Outputs(args, name, cfg)
    o.add_table(out, ["q", "re", "im"], _frame_rows(frame))
    o.write(out)
    return 0


def _initial_gaussian(args, grid):
    return gaussian_frame(grid, args.center, args.width, args.momentum)


def _print_domain_hint(ck, args, t_final, grid):
    if ck is None or ck.omega1_sq <= 0:
        return
    q0 = abs(args.center) + args.width
    q_rec = recommended_q_max(q0, ck.omega1, t_final)
    print(f"recommended q_max for t_final={t_final:g}: {q_rec:.4g} "
          f"(grid reaches {max(abs(grid.q_min), abs(grid.q_max)):.4g})", file=sys.stderr)


def cmd_packet(args):
    model, ck, doc = load_model(args)
    grid = _grid(args)
    a, b, n = args.lambda_range
    t = args.t
    er = resolve_ermakov(model, ck, t, t)
    nodes, weights = gauss_legendre(float(a), float(b), int(n))
    f = _initial_gaussian(args, grid)
    spec = packet_weights(f, nodes, model, er, lambda_weights=weights)
    frame = synthesize_packet(spec, model, er, grid, t)
    _print_domain_hint(ck, args, t, grid)
    cfg = _base_config(args, doc)
    cfg.update({"lambda_range": [float(a), float(b), int(n)], "t": t,
                "grid": [grid.q_min, grid.q_max, grid.n_points],
                "initial": {"center": args.center, "width": args.width, "momentum": args.momentum},
                "tail_estimate": spec.tail_estimate})
    out = _default_out(args, "packet")
    o = Outputs(args, "packet", cfg)
    o.add_table(out, ["q", "re", "im"], _frame_rows(frame))
    ext = out.suffix or ".csv"
    o.add_table(out.with_name(out.stem + "_weights" + ext), ["lambda", "weight", "re_even", "im_even",
                                                             "re_odd", "im_odd"],
                np.column_stack([spec.lambda_nodes, spec.lambda_weights, spec.c_even.real,
                                 spec.c_even.imag, spec.c_odd.real, spec.c_odd.imag]))
    o.write(out)
    return 0


def cmd_propagate(args):
    model, ck, doc = load_model(args)
    grid = _grid(args)
    dt = args.dt if args.dt is not None else _preset(args).dt
    _print_domain_hint(ck, args, args.t, grid)
    run = propagate(model, _initial_gaussian(args, grid), args.t, dt, stride=args.stride)
    cfg = _base_config(args, doc)
    cfg.update({"t_final": args.t, "dt": dt, "stride": args.stride,
                "grid": [grid.q_min, grid.q_max, grid.n_points],
                "initial": {"center": args.center, "width": args.width, "momentum": args.momentum}})
    out_dir = Path(args.out) if args.out else Path("propagate")
    ext = "json" if args.format == "json" else "csv"
    o = Outputs(args, "propagate", cfg)
    for k, frame in enumerate(run.frames):
        o.add_table(out_dir / f"frame_{k:05d}.{ext}", ["q", "re", "im"], _frame_rows(frame))
    o.add_table(out_dir / f"norm_history.{ext}", ["t", "norm"],
                np.column_stack([run.norm_times, run.norm_history]))
    o.add_table(out_dir / f"frame_times.{ext}", ["index", "t"],
                np.column_stack([np.arange(len(run.frames)), run.times]))
    o.write(out_dir / "run")
    return 0


def cmd_verify(args):
    reports = run_suite(args.preset or "ck-reference", seed=args.seed)
    print(summary_table(reports))
    n_fail = sum(not r.passed for r in reports)
    print(f"{len(reports) - n_fail}/{len(reports)} checks passed")
    if args.out:
        cfg = {"preset": args.preset or "ck-reference", "seed": args.seed}
        o = Outputs(args, "verify", cfg)
        doc = {"reports": [r.to_dict() for r in reports], "all_passed": n_fail == 0}
        o.add(args.out, (json.dumps(doc, indent=1) + "\n").encode())
        o.write(args.out)
    return 1 if n_fail else 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrinvariant",
                                     description="Invariant-based exact solutions of the inverted oscillator.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--model", help="model config (JSON)")
        src.add_argument("--preset", choices=sorted(PRESETS), help="built-in configuration")
        p.add_argument("--out", help="output path")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        return p

    def grid_flag(p):
        p.add_argument("--grid", nargs=3, type=float, metavar=("QMIN", "QMAX", "N"))

    def packet_flags(p):
        p.add_argument("--center", type=float, default=0.0, help="initial Gaussian centre")
        p.add_argument("--width", type=float, default=1.0, help="initial Gaussian width")
        p.add_argument("--momentum", type=float, default=0.0, help="initial mean wavenumber")

    p = common(sub.add_parser("rho", help="solve the auxiliary equation"))
    p.add_argument("--t-span", nargs=2, type=float, required=True, metavar=("A", "B"))
    p.add_argument("--samples", type=int, default=301)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--rho0", type=float)
    p.add_argument("--rho-dot0", type=float)
    p.set_defaults(func=cmd_rho)

    for name, helptext, exact in (("eigen", "invariant eigenfunction", False),
                                  ("psi", "exact Schroedinger solution", True)):
        p = common(sub.add_parser(name, help=helptext))
        p.add_argument("--lambda", dest="lam", type=float, required=True)
        p.add_argument("--parity", choices=("even", "odd"), default="even")
        p.add_argument("--t", type=float, default=0.0)
        grid_flag(p)
        p.set_defaults(func=(lambda a, e=exact: cmd_eigen(a, e)))

    p = common(sub.add_parser("packet", help="superpose exact solutions into a packet"))
    p.add_argument("--lambda-range", nargs=3, type=float, required=True, metavar=("A", "B", "N"))
    p.add_argument("--t", type=float, default=0.0)
    grid_flag(p)
    packet_flags(p)
    p.set_defaults(func=cmd_packet)

    p = common(sub.add_parser("propagate", help="Crank-Nicolson run of a Gaussian packet"))
    p.add_argument("--t", type=float, required=True, help="final time")
    p.add_argument("--dt", type=float)
    p.add_argument("--stride", type=int, default=100)
    grid_flag(p)
    packet_flags(p)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("--preset", choices=sorted(PRESETS), default="ck-reference")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_verify)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (LRError, ValueError) as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())
