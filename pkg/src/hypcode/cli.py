"""Command line: hypcode run | check | report."""

import argparse
import sys

from .config import STAGES, load_config
from .errors import ConfigError


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypcode", description="Symbolic coding pipeline for model suspension flows.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run every stage and emit all artifacts")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides the config)")
    chk = sub.add_parser("check", help="run stages up to the given one")
    chk.add_argument("config")
    chk.add_argument("--stage", choices=STAGES, required=True)
    chk.add_argument("--out")
    rep = sub.add_parser("report", help="print the summary of an output directory")
    rep.add_argument("dir")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "report":
        from .pipeline import report
        try:
            status, text = report(args.dir)
        except (FileNotFoundError, ValueError) as exc:
            print(f"no readable summary in {args.dir}: {exc}", file=sys.stderr)
            return 2
        print(text)
        return status
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    from .pipeline import run_pipeline
    stage = args.stage if args.command == "check" else None
    status, _ = run_pipeline(cfg, stage=stage, out=args.out)
    return status


if __name__ == "__main__":
    sys.exit(main())
