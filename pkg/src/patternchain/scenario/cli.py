"""``patternchain`` command line: run scenarios, list them, verify traces."""

import argparse
import json
import sys
from pathlib import Path

from ..errors import ChainError
from .bundle import bundled_scenarios, find_scenario
from .runner import run_scenario
from .script import ParseError
from .trace import load_trace, verify_trace

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="patternchain", description="Blockchain design pattern scenarios.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute a scenario script")
    run.add_argument("script", help="path to a script, or the name of a bundled scenario")
    run.add_argument("--seed", type=int)
    run.add_argument("--profile")
    run.add_argument("--interactive", action="store_true", help="ask before signing DApp transactions")
    run.add_argument("--trace", type=Path, help="write the JSON trace here")
    sub.add_parser("list-scenarios", help="list bundled scenarios")
    vt = sub.add_parser("verify-trace", help="re-check a trace file offline")
    vt.add_argument("trace", type=Path)
    return p


def _run(args) -> int:
    path = Path(args.script)
    if not path.is_file():
        path = find_scenario(args.script)
        if path is None:
            print(f"error: no script or bundled scenario {args.script!r}", file=sys.stderr)
            return EXIT_USAGE
    try:
        result = run_scenario(path, args.seed, args.profile, args.interactive, args.trace)
    except (ParseError, ChainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    n = result.trace["result"]["assertions"]
    print(f"{result.name}: {'PASS' if result.passed else 'FAIL'} ({n} assertions)")
    for failure in result.failures:
        print(f"  failed: {failure}")
    return result.exit_code


def _verify(args) -> int:
    try:
        trace = load_trace(args.trace.read_text())
        problems = verify_trace(trace)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        print(f"error: unreadable trace: {e}", file=sys.stderr)
        return EXIT_USAGE
    for problem in problems:
        print(f"  {problem}")
    ok = not problems and trace["result"]["passed"]
    print(f"{trace['scenario']}: {'OK' if ok else 'INVALID' if problems else 'FAILED RUN'}")
    return EXIT_PASS if ok else EXIT_FAIL


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_PASS
    if args.command == "run":
        return _run(args)
    if args.command == "list-scenarios":
        for name, path in bundled_scenarios().items():
            desc = json.loads(path.read_text()).get("description", "")
            print(f"{name:32s} {desc}")
        return EXIT_PASS
    return _verify(args)


if __name__ == "__main__":
    sys.exit(main())
