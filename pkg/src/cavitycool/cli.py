"""Command-line driver: ``cavitycool {cool,sweep,wigner,analytic}``.

Every subcommand that writes files accepts ``--config FILE`` with one
``key = value`` per line (keys are flag names without the leading dashes,
``#`` starts a comment). Flags given on the command line override the file.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analytic
from .errors import SimulationError
from .lindblad import BathSpec, IntegratorSpec
from .protocol import ProtocolConfig, run_cooling, stable_metrics
from .fock import FockSpace, recommended_dim
from .states import load_state, save_state, thermal_state, wigner
from .sweep import SweepConfig, run_sweep, slice as sweep_slice, write_cells_csv

OUT_ENV = "CAVITYCOOL_OUT"
EXIT_USAGE = 2
EXIT_SIMULATION = 3


class UsageError(Exception):
    pass


def parse_complex(text: str) -> complex:
    """``"re"`` or ``"re,im"`` to a complex number."""
    parts = [p.strip() for p in str(text).split(",")]
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected 're' or 're,im', got {text!r}")


def parse_floats(text: str) -> list[float]:
    try:
        return [float(p) for p in str(text).split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def read_config_file(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("_", "-")] = value
    return out


def _add_flag(parser, name, type_, help_, default):
    """Register ``--name`` with default None so that file values can be detected."""
    parser.add_argument(f"--{name}", type=type_, default=None,
                        help=help_ if default is None else f"{help_} (default: {default})")
    parser.set_defaults(**{f"_default_{name.replace('-', '_')}": default})


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    val = str(text).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


PROTOCOL_FLAGS = [
    ("g", parse_complex, "coupling g as 're' or 're,im'", "0.1"),
    ("dt", float, "electron spacing kappa*dt", "0.05"),
    ("kappa", float, "dissipation rate kappa", "1"),
    ("kappa-nbar", float, "bath occupation", "1"),
    ("nbar0", float, "initial thermal occupation", "1"),
    ("max-ocb", int, "maximum number of OCBs", "200"),
    ("dim", int, "Fock truncation; auto picks a size from nbar0 and g for cool and 128 for sweep", None),
    ("stability-tol", float, "relative tolerance between adjacent OCB maxima", "0.01"),
    ("confirm-ocb", int, "extra OCBs simulated after stability", "0"),
    ("step", float, "RK4 step in kappa*t", "0.001"),
    ("run-all", _bool, "ignore stability and run max-ocb OCBs", "false"),
    ("drift-first", _bool, "drift for kappa*dt before the first electron", "false"),
]

SWEEP_FLAGS = [
    ("g-values", parse_floats, "explicit comma-separated g grid", None),
    ("dt-values", parse_floats, "explicit comma-separated kappa*dt grid", None),
    ("g-min", float, "smallest g of the log grid", "0.05"),
    ("g-max", float, "largest g of the log grid", "1.0"),
    ("g-count", int, "number of g values", "17"),
    ("dt-min", float, "smallest kappa*dt of the log grid", "0.01"),
    ("dt-max", float, "largest kappa*dt of the log grid", "0.4"),
    ("dt-count", int, "number of kappa*dt values", "13"),
    ("workers", int, "worker processes", "1"),
    ("slice-dt", float, "also write the row at this kappa*dt", None),
    ("slice-g", float, "also write the column at this g", None),
]

WIGNER_FLAGS = [
    ("nbar", float, "thermal occupation of the state", None),
    ("state", str, "density-matrix file written by 'cool'", None),
    ("dim", int, "Fock truncation used for evaluation", "256"),
    ("extent", float, "grid covers [-extent, extent] on both axes", "6"),
    ("points", int, "grid points per axis", "121"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavitycool", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    cool = sub.add_parser("cool", help="simulate one cooling run")
    for spec in PROTOCOL_FLAGS:
        _add_flag(cool, *spec)

    sweep = sub.add_parser("sweep", help="grid over (g, kappa*dt)")
    for spec in PROTOCOL_FLAGS:
        if spec[0] not in ("g", "dt"):
            _add_flag(sweep, *spec)
    for spec in SWEEP_FLAGS:
        _add_flag(sweep, *spec)

    wig = sub.add_parser("wigner", help="Wigner function on a grid")
    for spec in WIGNER_FLAGS:
        _add_flag(wig, *spec)

    for p in (cool, sweep, wig):
        p.add_argument("--out", default=None,
                       help=f"output directory (default: ${OUT_ENV} or ./out)")
        p.add_argument("--config", default=None, help="key = value config file")

    an = sub.add_parser("analytic", help="evaluate a closed-form result")
    an.add_argument("--formula", required=True, choices=["p-plus", "nbar1", "prob1", "nbark", "probk"])
    an.add_argument("--nbar", type=float, required=True)
    an.add_argument("--g", type=parse_complex, required=True)
    an.add_argument("--k", type=int, default=None)
    return parser


def merged_options(args, flags) -> dict:
    """Effective option values: built-in defaults < config file < command line."""
    from_file = read_config_file(args.config) if args.config else {}
    known = {name for name, *_ in flags}
    unknown = set(from_file) - known
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    out = {}
    for name, type_, _, default in flags:
        attr = name.replace("-", "_")
        cli_val = getattr(args, attr)
        if cli_val is not None:
            out[name] = cli_val
        elif name in from_file:
            try:
                out[name] = type_(from_file[name])
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {name}: {exc}")
        else:
            out[name] = None if default is None else type_(default)
    return out


def _format_value(value) -> str:
    if isinstance(value, complex):
        return f"{value.real!r},{value.imag!r}"
    if isinstance(value, list):
        return ",".join(repr(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def write_effective_config(opts: dict, path: Path) -> None:
    with open(path, "w") as fh:
        fh.write("# effective configuration; rerun with --config this-file\n")
        for key, value in opts.items():
            if value is not None:
                fh.write(f"{key} = {_format_value(value)}\n")


def protocol_config(opts: dict, g: complex | None = None, dt: float | None = None) -> ProtocolConfig:
    g = opts["g"] if g is None else g
    dt = opts["dt"] if dt is None else dt
    dim = opts["dim"]
    if dim is None:
        dim = recommended_dim(max(opts["nbar0"], opts["kappa-nbar"]), g)
        opts["dim"] = dim
    return ProtocolConfig(
        g=g, delta_t_kappa=dt,
        bath=BathSpec(opts["kappa"], opts["kappa-nbar"]),
        nbar_initial=opts["nbar0"], max_ocb=opts["max-ocb"],
        stability_rel_tol=opts["stability-tol"], dim=dim,
        integrator=IntegratorSpec(opts["step"]),
        confirm_ocb=opts["confirm-ocb"], stop_at_stability=not opts["run-all"],
        drift_first=opts["drift-first"])


def out_dir(args) -> Path:
    path = Path(args.out or os.environ.get(OUT_ENV) or "out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_manifest(out: Path, command: str, config: dict, artifacts: list[Path], started: float,
                   extra: dict | None = None) -> Path:
    path = out / "manifest.json"
    doc = {
        "tool": "cavitycool",
        "version": __version__,
        "command": command,
        "config": config,
        "artifacts": [str(p) for p in artifacts] + [str(path)],
        "wall_clock_s": time.time() - started,
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
    return path


def cmd_cool(args) -> int:
    started = time.time()
    opts = merged_options(args, PROTOCOL_FLAGS)
    try:
        config = protocol_config(opts)
    except ValueError as exc:
        raise UsageError(str(exc))
    trace = run_cooling(config)
    metrics = stable_metrics(trace, config.stability_rel_tol)
    out = out_dir(args)
    files = [out / "trace.csv", out / "trace.json", out / "final_state.txt", out / "effective.conf"]
    trace.to_csv(files[0])
    trace.to_json(files[1])
    save_state(trace.final_state, files[2])
    write_effective_config(opts, files[3])
    write_manifest(out, "cool", config.to_dict(), files, started,
                   {"metrics": {"nbar_final": metrics.nbar_final, "prob_final": metrics.prob_final,
                                "ocb_at_stability": metrics.ocb_at_stability,
                                "reached": metrics.reached},
                    "warnings": trace.warnings})
    print(f"nbar_f = {metrics.nbar_final:.17g}")
    print(f"P_f = {metrics.prob_final:.17g}")
    print(f"stability_ocb = {metrics.ocb_at_stability}" + ("" if metrics.reached else " (not reached)"))
    return 0


def _grid(values, lo, hi, count, name):
    if values:
        return tuple(values)
    if count < 1 or not 0 < lo <= hi:
        raise UsageError(f"invalid {name} grid [{lo}, {hi}] x {count}")
    return tuple(np.geomspace(lo, hi, count))


def cmd_sweep(args) -> int:
    started = time.time()
    flags = [f for f in PROTOCOL_FLAGS if f[0] not in ("g", "dt")] + SWEEP_FLAGS
    opts = merged_options(args, flags)
    opts.setdefault("g", 0.0)
    opts.setdefault("dt", 0.0)
    g_values = _grid(opts["g-values"], opts["g-min"], opts["g-max"], opts["g-count"], "g")
    dt_values = _grid(opts["dt-values"], opts["dt-min"], opts["dt-max"], opts["dt-count"], "dt")
    if opts["dim"] is None:
        opts["dim"] = 128
    try:
        base = protocol_config(opts, g=complex(g_values[0]), dt=dt_values[0])
        config = SweepConfig(g_values, dt_values, base, opts["workers"])
    except ValueError as exc:
        raise UsageError(str(exc))
    # validate slice requests before the expensive part
    for axis, key, grid in (("dt", "slice-dt", config.dt_values), ("g", "slice-g", config.g_values)):
        val = opts[key]
        if val is not None and not any(abs(x - val) <= 1e-12 for x in grid):
            listing = ", ".join(f"{x:.17g}" for x in grid)
            raise UsageError(f"--{key} {val!r} is not on the grid; available values: {listing}")
    result = run_sweep(config)
    out = out_dir(args)
    files = [out / "sweep.csv", out / "sweep.json", out / "effective.conf"]
    result.to_csv(files[0])
    result.to_json(files[1])
    for axis, key in (("dt", "slice-dt"), ("g", "slice-g")):
        if opts[key] is not None:
            path = out / f"slice_{axis}_{opts[key]:g}.csv"
            write_cells_csv(sweep_slice(result, axis, opts[key]), path)
            files.append(path)
    opts.pop("g")
    opts.pop("dt")
    write_effective_config(opts, files[2])
    failed = [c for c in result.cells if c.error]
    write_manifest(out, "sweep", config.to_dict(), files, started,
                   {"failed_cells": [{"g": c.g, "dt_kappa": c.dt_kappa, "error": c.error}
                                     for c in failed]})
    print(f"cells = {len(result.cells)}, failed = {len(failed)}, "
          f"reached = {sum(c.reached for c in result.cells)}")
    for c in failed:
        print(f"failed cell g={c.g:.6g} dt={c.dt_kappa:.6g}: {c.error}", file=sys.stderr)
    return 0 if result.success_fraction() >= 0.9 else EXIT_SIMULATION


def cmd_wigner(args) -> int:
    started = time.time()
    opts = merged_options(args, WIGNER_FLAGS)
    if (opts["nbar"] is None) == (opts["state"] is None):
        raise UsageError("give exactly one of --nbar or --state")
    if opts["state"] is not None:
        try:
            rho = load_state(opts["state"])
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read state file: {exc}")
        if rho.dim > opts["dim"]:
            raise UsageError(f"state file has dim={rho.dim}, larger than --dim {opts['dim']}")
        # zero-padding is exact and gives the displaced-parity kernel room at the grid corners
        padded = np.zeros((opts["dim"], opts["dim"]), dtype=complex)
        padded[:rho.dim, :rho.dim] = rho.data
        rho = padded
    else:
        try:
            rho = thermal_state(FockSpace(opts["dim"]), opts["nbar"])
        except ValueError as exc:
            raise UsageError(str(exc))
    if opts["points"] < 2 or not opts["extent"] > 0:
        raise UsageError("need --points >= 2 and --extent > 0")
    axis = np.linspace(-opts["extent"], opts["extent"], opts["points"])
    grid = wigner(rho, axis, axis)
    out = out_dir(args)
    files = [out / "wigner.csv", out / "effective.conf"]
    grid.to_csv(files[0])
    write_effective_config(opts, files[1])
    write_manifest(out, "wigner", opts, files, started)
    print(f"W(0,0) = {grid.values[len(axis) // 2, len(axis) // 2]:.17g}")
    print(f"integral = {grid.integral():.17g}")
    return 0


def cmd_analytic(args) -> int:
    g, nbar, k = args.g, args.nbar, args.k
    if args.formula in ("nbark", "probk") and (k is None or k < 0):
        raise UsageError(f"--formula {args.formula} needs --k >= 0")
    if nbar < 0:
        raise UsageError("--nbar must be >= 0")
    value = {
        "p-plus": lambda: analytic.p_plus_exact(nbar, g),
        "nbar1": lambda: analytic.nbar_one_round(nbar, g),
        "prob1": lambda: analytic.prob_one_round(nbar, g),
        "nbark": lambda: analytic.nbar_k_rounds(nbar, g, k),
        "probk": lambda: analytic.prob_k_rounds(nbar, g, k),
    }[args.formula]()
    inputs = {"nbar": nbar, "g": [g.real, g.imag]}
    if k is not None:
        inputs["k"] = k
    print(json.dumps({"formula": args.formula, "inputs": inputs, "value": value}))
    return 0


COMMANDS = {"cool": cmd_cool, "sweep": cmd_sweep, "wigner": cmd_wigner, "analytic": cmd_analytic}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.exit(EXIT_USAGE, f"{parser.prog} {args.command}: error: {exc}\n")
    except SimulationError as exc:
        print(f"simulation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
