"""Command line entry point.

    savopt run --config FILE [--seed N]
    savopt compare --config FILE [--seed N]
    savopt verify [--scope operators|problems|sav|all]
    savopt plot --out FILE.svg TRACE [TRACE ...]

Exit status: 0 success, 1 when a run diverged (or a verify check failed),
2 for usage, configuration and runtime errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .runner import compare, run_experiment
from .traces import read_trace, render_plot
from .verify import SCOPES, verify_suite


def _parser():
    ap = argparse.ArgumentParser(prog="savopt", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "compare"):
        p = sub.add_parser(name, help=f"{name} an experiment config")
        p.add_argument("--config", required=True, help="YAML or JSON experiment file")
        p.add_argument("--seed", type=int, help="override every seed in the config")
    p = sub.add_parser("verify", help="run the invariant checks")
    p.add_argument("--scope", choices=SCOPES, default="all")
    p = sub.add_parser("plot", help="overlay loss curves from trace files")
    p.add_argument("--out", required=True, help="output SVG path")
    p.add_argument("--title", default="loss")
    p.add_argument("traces", nargs="+")
    return ap


def _status_code(statuses):
    if "error" in statuses:
        return 2
    if "diverge" in statuses:
        return 1
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify":
            report = verify_suite(args.scope)
            print(report.text())
            return 0 if report.ok else 1
        if args.command == "plot":
            traces = [(Path(t).stem, read_trace(t)) for t in args.traces]
            render_plot(traces, args.out, title=args.title)
            print(f"wrote {args.out}")
            return 0
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.command == "run":
            result = run_experiment(cfg)
            s = {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                 for k, v in result.summary.items()}
            print(json.dumps(s, indent=1))
            return _status_code([result.summary["status"]])
        results, table = compare(cfg)
        print(table)
        return _status_code([r.summary["status"] for r in results.values()])
    except (ConfigError, OSError, ValueError) as exc:
        print(f"savopt: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
