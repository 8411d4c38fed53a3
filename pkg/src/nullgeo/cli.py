"""Command-line scenario runner.

    nullgeo run SCENARIO [--seed N] [--out FILE] [--plot-dir DIR]
                [--rel-tol X] [--max-param X] [--boundary-margin X]
                [--grid-cache FILE] [--config FILE]

Exit code 0 iff every assertion of the scenario passes.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError
from .metrics import load_config
from .scenarios import SCENARIOS, run


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nullgeo",
        description="Scenario runner for null geodesic space experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run a registered scenario")
    runp.add_argument("scenario", help="one of: " + ", ".join(sorted(SCENARIOS)))
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--out", default=None, help="write the JSON report here")
    runp.add_argument("--plot-dir", default=None,
                      help="directory for CSV plot data")
    runp.add_argument("--rel-tol", type=float, default=None)
    runp.add_argument("--max-param", type=float, default=None)
    runp.add_argument("--boundary-margin", type=float, default=None)
    runp.add_argument("--grid-cache", default=None,
                      help="binary cache file for the grid oracle")
    runp.add_argument("--config", default=None,
                      help="flat key = value config file")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.config:
        overrides.update(load_config(args.config))
    for key, value in (("seed", args.seed), ("rel_tol", args.rel_tol),
                       ("max_param", args.max_param),
                       ("boundary_margin", args.boundary_margin),
                       ("grid_cache", args.grid_cache)):
        if value is not None:
            overrides[key] = value
    try:
        report = run(args.scenario, overrides, plot_dir=args.plot_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    for record in report.assertions:
        status = "PASS" if record.passed else "FAIL"
        print(f"[{status}] {record.name}: actual={record.actual} "
              f"expected={record.expected}", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
