"""Command-line interface.

    paylevel list
    paylevel validate SCENARIO_FILE
    paylevel run --scenario NAME|PATH [--out DIR] [--seed N] [--duration S] [--plot-script]

Exit codes: 0 ok, 2 usage, 3 invalid scenario, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import parse_scenario, with_overrides
from .scenarios import BUILTIN, builtin
from .sim import ScenarioError, SimulationError, format_metrics, run, summarize, write_log_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_RUNTIME = 4

log = logging.getLogger("paylevel")

PLOT_SCRIPT = '''"""Plot payload tilt and piston lengths from log.csv (needs matplotlib)."""
import csv
import math
import sys
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
with open(here / "log.csv", newline="") as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
n = sum(1 for k in rows[0] if k.endswith("_length"))

fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
ax1.plot(t, [math.degrees(float(r["roll"])) for r in rows], "r", label="roll")
ax1.plot(t, [math.degrees(float(r["pitch"])) for r in rows], "b", label="pitch")
ax1.set_ylabel("payload angle [deg]")
ax1.legend()
for i in range(1, n + 1):
    ax2.plot(t, [float(r[f"r{i}_length"]) for r in rows], label=f"robot {i}")
ax2.set_ylabel("piston length [m]")
ax2.set_xlabel("time [s]")
ax2.legend()
fig.tight_layout()
fig.savefig(here / "figures.png", dpi=120)
if "--show" in sys.argv:
    plt.show()
'''


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="paylevel", description="Multi-robot payload leveling simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run a built-in or file scenario")
    p_run.add_argument("--scenario", required=True, help="built-in name or path to a TOML file")
    p_run.add_argument("--out", default="out", type=Path, help="output directory (default: out)")
    p_run.add_argument("--seed", type=int, help="IMU noise seed")
    p_run.add_argument("--duration", type=float, help="override run length in seconds")
    p_run.add_argument("--plot-script", action="store_true", help="also write plot.py next to the log")
    p_run.add_argument("--workers", type=int, default=None, help="threads for per-robot evaluation")

    sub.add_parser("list", help="list built-in scenarios")

    p_val = sub.add_parser("validate", help="check a scenario file without running it")
    p_val.add_argument("path", type=Path)
    return parser


def _load(name: str):
    if name in BUILTIN:
        return builtin(name)
    return parse_scenario(name)


def _cmd_run(args) -> int:
    try:
        scenario = with_overrides(_load(args.scenario), seed=args.seed, duration=args.duration)
    except (ScenarioError, ValueError) as exc:
        print(f"paylevel: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        records = run(scenario, workers=args.workers)
        metrics = summarize(records)
        args.out.mkdir(parents=True, exist_ok=True)
        write_log_csv(records, args.out / "log.csv")
        (args.out / "metrics.txt").write_text(format_metrics({"scenario": scenario.name, **metrics}))
        if args.plot_script:
            (args.out / "plot.py").write_text(PLOT_SCRIPT)
    except (SimulationError, ScenarioError, ValueError, OSError) as exc:
        print(f"paylevel: run of {scenario.name!r} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log.info("wrote %s", args.out)
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        scenario = parse_scenario(args.path)
    except (ScenarioError, ValueError) as exc:
        print(f"paylevel: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"{args.path}: ok ({scenario.name}, {len(scenario.robots)} robots)")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in BUILTIN:
            print(name)
        return EXIT_OK
    if args.command == "validate":
        return _cmd_validate(args)
    return _cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
