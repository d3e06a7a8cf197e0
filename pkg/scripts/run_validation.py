"""Run every scripted experiment against one configuration and summarize.

This is the long-form smoke test: geometry sweep, auto-calibration, step
response, tool compensation, and the staircase replay, each writing its
traces and metrics under --out.  Exit status is nonzero if any requirement
verdict fails, so CI or a pre-release check can just run this file.
"""

import argparse
import sys
import time
from pathlib import Path

from balloonscope.config import default_config, load_config
from balloonscope.harness import (
    load_command_csv,
    run_calibration,
    run_replay,
    run_step,
    run_sweep,
    run_tool_compensation,
)

STAIRCASE = Path(__file__).resolve().parent / "operator_staircase.csv"


def report(result, wall_s: float) -> int:
    print(f"\n== {result.name} (seed {result.seed}) ==")
    for key, value in result.metrics.items():
        print(f"  {key}: {value}")
    for verdict in result.verdicts:
        print(f"  [{verdict.status}] {verdict.requirement}: {verdict.detail}")
    print(f"  wall time: {wall_s:.2f} s")
    return 0 if result.passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None, help="YAML config (default: built-in)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out/validation")
    args = parser.parse_args(argv)

    config = load_config(args.config) if args.config else default_config()
    out = Path(args.out)
    failures = 0

    started = time.perf_counter()
    result = run_sweep(config, out_dir=out / "sweep")
    failures += report(result, time.perf_counter() - started)

    started = time.perf_counter()
    result, calibration = run_calibration(
        config, seed=args.seed, out_dir=out / "calibration",
        save_path=out / "calibration" / "calibration.json",
    )
    failures += report(result, time.perf_counter() - started)

    started = time.perf_counter()
    result = run_step(config, seed=args.seed, out_dir=out / "step", calibration=calibration)
    failures += report(result, time.perf_counter() - started)

    started = time.perf_counter()
    result = run_tool_compensation(
        config, seed=args.seed, out_dir=out / "toolcomp", calibration=calibration
    )
    failures += report(result, time.perf_counter() - started)

    started = time.perf_counter()
    commands = load_command_csv(STAIRCASE)
    result = run_replay(
        config, commands, seed=args.seed, out_dir=out / "replay", calibration=calibration
    )
    failures += report(result, time.perf_counter() - started)

    print(f"\n{'all experiments passed' if failures == 0 else f'{failures} experiment(s) FAILED'}")
    print(f"outputs under {out.resolve()}")
    return 0 if failures == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
