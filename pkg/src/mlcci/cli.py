"""Command line entry point: ``mlcci run|sweep|theory``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .analysis import theoretical_ber
from .harness import ConfigError, SimConfig

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--speed", type=float, help="MS speed in km/h")
    p.add_argument("--ebn0", type=float, help="Eb/N0 in dB")
    p.add_argument("--frames", type=int, help="frames per trial")
    p.add_argument("--trials", type=int, help="independent trials per point")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--pc", choices=("on", "off", "both"), help="closed-loop power control")
    p.add_argument("--profile", help="single, twopath, a profile file, or '0:0,6:-8'")
    p.add_argument("--thresholds", help="PR threshold table file")
    p.add_argument("--perfect-csi", action="store_true", help="feed true channels to the receiver")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mlcci", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a single SIR point")
    _add_common(run)
    run.add_argument("--sir", type=float, required=True, help="average SIR in dB")
    run.add_argument("--trace", help="write a per-frame trace CSV (first trial)")

    sw = sub.add_parser("sweep", help="simulate the SIR grid")
    _add_common(sw)
    sw.add_argument("--sir", help="comma-separated SIR grid in dB")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")

    th = sub.add_parser("theory", help="tabulate the closed-form BER with CCI")
    th.add_argument("--sir", default="-20,-15,-10,-5,0,5,10,15,20,25,30,35")
    th.add_argument("--ebn0", default="18", help="comma-separated Eb/N0 values in dB")
    th.add_argument("-M", type=int, default=4, help="QAM order")
    th.add_argument("--out")
    return ap


def config_from_args(args) -> SimConfig:
    cfg = harness.load_config(args.config) if args.config else SimConfig()
    overrides = {}
    if args.speed is not None:
        overrides["speed_kmh"] = args.speed
    if args.ebn0 is not None:
        overrides["ebn0_db"] = args.ebn0
    if args.frames is not None:
        overrides["frames_per_trial"] = args.frames
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.pc is not None:
        overrides["pc_enabled"] = args.pc != "off"
        overrides["pc_compare"] = args.pc == "both"
    if args.profile:
        overrides["channel_profile"] = harness.parse_profile(args.profile)
    if args.thresholds:
        overrides["threshold_table_path"] = args.thresholds
    if args.perfect_csi:
        overrides["perfect_csi"] = True
    if getattr(args, "sir", None) and args.command == "sweep":
        overrides["sir_grid_db"] = harness._coerce("sir_grid_db", args.sir)
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise ConfigError(f"bad number list {text!r}") from e


def cmd_theory(args) -> None:
    sirs, ebn0s = _floats(args.sir), _floats(args.ebn0)
    try:
        theoretical_ber(args.M, [], 1.0)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    lines = ["sir_db,ebn0_db,ber_theory"]
    for e in ebn0s:
        for s in sirs:
            ber = theoretical_ber(args.M, [10 ** (s / 10)], 10 ** (e / 10))
            lines.append(f"{s!r},{e!r},{ber:.16e}")
    _write("\n".join(lines) + "\n", args.out)


def cmd_run(args) -> None:
    cfg = config_from_args(args)
    modes = (True, False) if cfg.pc_compare else (cfg.pc_enabled,)
    tasks = [(args.sir, pc, cfg.base_seed + t) for pc in modes for t in range(cfg.trials)]
    if args.trace:
        res = harness.simulate_trial(cfg, args.sir, cfg.base_seed, modes[0])
        Path(args.trace).write_text(harness.trace_csv(res))
    rows = harness.sweep(cfg, tasks=tasks)
    _write(harness.emit_csv(rows), args.out)


def cmd_sweep(args) -> None:
    cfg = config_from_args(args)
    rows = harness.sweep(cfg, jobs=args.jobs)
    _write(harness.emit_csv(rows), args.out)
    if cfg.pc_compare:
        g = harness.cell_edge_gain(rows)
        print(f"cell-edge shift {g['shift_db']:.2f} dB, penalty {g['penalty_db']:.2f} dB, "
              f"net gain {g['gain_db']:.2f} dB", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": cmd_run, "sweep": cmd_sweep, "theory": cmd_theory}
    try:
        with np.errstate(invalid="raise", over="raise"):
            handlers[args.command](args)
    except (ConfigError, OSError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, FloatingPointError, ValueError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
