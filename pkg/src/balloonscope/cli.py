"""Command-line entry points for the experiments and the live service.

    balloonscope sweep     --out out/sweep
    balloonscope calibrate --seed 7 --out out/cal --save cal.json
    balloonscope step      --seed 7 --out out/step
    balloonscope toolcomp  --seed 7 --out out/tool
    balloonscope replay    --commands scripts/operator_staircase.csv --out out/replay
    balloonscope serve     --port 8765 --time-scale 1.0

Exit codes: 0 when every scored requirement passes, 1 when any fails,
2 for configuration or usage errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from balloonscope.config import ConfigError, SimConfig, default_config, load_config
from balloonscope.harness import (
    ExperimentResult,
    ensure_calibration,
    load_command_csv,
    run_calibration,
    run_replay,
    run_step,
    run_sweep,
    run_tool_compensation,
)


def _add_common(p: argparse.ArgumentParser, seed: bool = True) -> None:
    p.add_argument("--config", type=Path, default=None, help="YAML config file (defaults built in)")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    p.add_argument("--out", type=Path, default=None, help="output directory for traces and metrics")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="balloonscope",
        description="Balloon endoscope steering simulator: experiments and live teleoperation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="quasi-static volume sweep and geometry checks")
    _add_common(p, seed=False)

    p = sub.add_parser("calibrate", help="angle sweep, polynomial ratio calibration")
    _add_common(p)
    p.add_argument("--save", type=Path, default=None, help="also write the calibration JSON here")

    p = sub.add_parser("step", help="rest-to-target closed-loop step response")
    _add_common(p)
    p.add_argument("--calibration", default="auto",
                   help="calibration JSON path, or 'auto' to sweep one first (default)")

    p = sub.add_parser("toolcomp", help="tool insertion/removal disturbance rejection")
    _add_common(p)
    p.add_argument("--calibration", default="auto")

    p = sub.add_parser("replay", help="replay an operator command script")
    _add_common(p)
    p.add_argument("--commands", type=Path, required=True, help="CSV script: time_s,kind,value")
    p.add_argument("--duration", type=float, default=None,
                   help="run length in seconds (default: last command + 3)")
    p.add_argument("--calibration", default="auto")

    p = sub.add_parser("serve", help="live teleoperation WebSocket service")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--time-scale", type=float, default=None,
                   help="simulated seconds per wall second (default from config)")
    p.add_argument("--static", type=Path, default=None,
                   help="directory of console assets to serve at /")
    p.add_argument("--calibration", default="auto")
    return parser


def _load(args) -> SimConfig:
    return load_config(args.config) if args.config else default_config()


def _report(result: ExperimentResult, elapsed_s: float) -> int:
    print(f"== {result.name} (seed {result.seed}) ==")
    for key, value in result.metrics.items():
        print(f"   {key}: {value}")
    for v in result.verdicts:
        print(f"   [{v.status}] {v.requirement}: {v.detail}")
    print(f"   wall time: {elapsed_s:.2f} s")
    return 0 if result.passed else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "sweep":
            t0 = time.perf_counter()
            result = run_sweep(config, args.out)
            return _report(result, time.perf_counter() - t0)

        if args.command == "calibrate":
            t0 = time.perf_counter()
            result, _ = run_calibration(config, args.seed, args.out, args.save)
            return _report(result, time.perf_counter() - t0)

        if args.command == "step":
            t0 = time.perf_counter()
            calibration = ensure_calibration(config, args.seed, args.calibration)
            result = run_step(config, args.seed, args.out, calibration)
            return _report(result, time.perf_counter() - t0)

        if args.command == "toolcomp":
            t0 = time.perf_counter()
            calibration = ensure_calibration(config, args.seed, args.calibration)
            result = run_tool_compensation(config, args.seed, args.out, calibration)
            return _report(result, time.perf_counter() - t0)

        if args.command == "replay":
            t0 = time.perf_counter()
            commands = load_command_csv(args.commands)
            calibration = ensure_calibration(config, args.seed, args.calibration)
            result = run_replay(config, commands, args.duration, args.seed, args.out, calibration)
            return _report(result, time.perf_counter() - t0)

        if args.command == "serve":
            from balloonscope.service import serve  # uvicorn import is heavy; keep it lazy

            serve(
                config,
                host=args.host,
                port=args.port,
                seed=args.seed,
                time_scale=args.time_scale,
                static_dir=args.static,
                calibration_source=args.calibration,
            )
            return 0
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
