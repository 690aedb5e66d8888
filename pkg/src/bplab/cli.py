"""Command-line harness: ``bplab run|trace|modelcheck|bench``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import fixtures
from .core import load_image, run
from .errors import ImageError
from .harness import BenchConfig, expand_levels, run_bench
from .modelcheck import run_equivalence
from .report import emit_report
from .trace import read_trace, write_trace


def _int(text: str) -> int:
    return int(text, 0)


def _add_output(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--json", dest="fmt", action="store_const", const="json",
                   help="stats JSON (default)")
    g.add_argument("--csv", dest="fmt", action="store_const", const="csv",
                   help="report table as CSV")
    p.set_defaults(fmt="json")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bplab", description="Trace-driven branch prediction lab")
    sub = ap.add_subparsers(dest="cmd", required=True)

    rp = sub.add_parser("run", help="execute a memory image and time it")
    src = rp.add_mutually_exclusive_group(required=True)
    src.add_argument("--image", type=Path, help="memory image file")
    src.add_argument("--fixture", choices=fixtures.FIXTURES, help="bundled fixture")
    rp.add_argument("--entry", type=_int, default=None,
                    help="entry pc (default: first @address of the image)")
    rp.add_argument("--level", default="+batage", help="ablation level or 'all'")
    rp.add_argument("--steps", type=int, default=fixtures.DEFAULT_STEPS,
                    help="instruction budget (default %(default)s)")
    rp.add_argument("--config", type=Path, help="JSON config overrides")
    rp.add_argument("--dump-trace", type=Path, help="also write the control-transfer trace here")
    _add_output(rp)

    tr = sub.add_parser("trace", help="time a recorded control-transfer trace")
    tr.add_argument("--in", dest="infile", type=Path, required=True)
    tr.add_argument("--level", default="+batage", help="ablation level or 'all'")
    tr.add_argument("--config", type=Path)
    _add_output(tr)

    mc = sub.add_parser("modelcheck", help="check BATAGE against the reference model")
    mc.add_argument("--seed", type=int, default=1)
    mc.add_argument("--steps", type=int, default=100_000)
    mc.add_argument("--digest-every", type=int, default=1000)

    bench = sub.add_parser("bench", help="every fixture at every level")
    bench.add_argument("--fixture", action="append", choices=fixtures.FIXTURES,
                       help="restrict to these fixtures (repeatable)")
    bench.add_argument("--level", default="all")
    bench.add_argument("--steps", type=int, default=fixtures.DEFAULT_STEPS)
    bench.add_argument("--config", type=Path)
    bench.add_argument("--json", dest="fmt", action="store_const", const="json")
    bench.set_defaults(fmt="csv")
    return ap


def _emit(name: str, results: list, fmt: str) -> str:
    if fmt == "json" and len(results) == 1:
        return json.dumps(results[0][2].to_dict(), indent=2)
    return emit_report([(name, lv, s) for _, lv, s in results], fmt).rstrip("\n")


def _execute(state, steps: int, label: str):
    result = run(state, steps)
    if result.state.trap:
        print(f"{label}: trapped: {result.state.trap}", file=sys.stderr)
    elif result.truncated:
        print(f"{label}: stopped after {steps} steps without halting", file=sys.stderr)
    return result


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = BenchConfig.load(args.config) if getattr(args, "config", None) else BenchConfig()
        if args.cmd == "modelcheck":
            verdict = run_equivalence(args.seed, args.steps, digest_every=args.digest_every)
            print(verdict)
            return 0 if verdict.passed else 1

        levels = expand_levels(args.level)
        if args.cmd == "trace":
            events, retired = read_trace(args.infile.read_text())
            results = [(args.infile.stem, lv, run_bench(events, lv, config, retired)) for lv in levels]
            print(_emit(args.infile.stem, results, args.fmt))
            return 0

        if args.cmd == "run":
            if args.image is not None:
                name, state = args.image.stem, load_image(args.image.read_text(), args.entry)
            else:
                name = args.fixture
                state = load_image(fixtures.image_text(name), args.entry if args.entry is not None else 0)
            result = _execute(state, args.steps, name)
            if args.dump_trace:
                with open(args.dump_trace, "w") as fh:
                    write_trace(result.trace, result.state.retired, fh)
            results = [(name, lv, run_bench(result.trace, lv, config, result.state.retired))
                       for lv in levels]
            if result.state.uart_out:
                sys.stderr.write(result.state.uart_out.decode("latin-1"))
            print(_emit(name, results, args.fmt))
            return 0

        # bench
        rows = []
        for name in args.fixture or fixtures.FIXTURES:
            result = _execute(fixtures.load(name), args.steps, name)
            for lv in levels:
                rows.append((name, lv, run_bench(result.trace, lv, config, result.state.retired)))
        print(emit_report(rows, args.fmt).rstrip("\n"))
        return 0
    except (OSError, ValueError, ImageError) as exc:
        print(f"bplab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
