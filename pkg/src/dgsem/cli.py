"""Command-line experiment driver.

Subcommands: ``bounds`` (threshold table), ``run`` (convergence study),
``scan`` (bound-compliance scan), ``bisect`` (experimental lambda floor),
``bench`` (block-solver timings).  Exit status 0 on success, 2 when a
built-in verification fails, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import sys

from . import harness


class CheckFailure(RuntimeError):
    pass


def _emit(rows, out, header=None):
    if out:
        harness.emit_report(rows, out, header=header)
    else:
        header = header or (list(rows[0].keys()) if rows else [])
        print(",".join(header))
        for row in rows:
            print(",".join(harness._fmt(row.get(k, "")) for k in header))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dgsem", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="print the lambda_min / d_min table")
    b.add_argument("--p-max", type=int, default=6)
    b.add_argument("--out", default=None)

    for name, hlp in [("run", "convergence study from a spec file"),
                      ("scan", "bound-compliance scan from a spec file"),
                      ("bisect", "experimental lambda threshold per degree")]:
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--spec", required=True)
        s.add_argument("--out", default=None)
        s.add_argument("--threads", type=int, default=1)

    be = sub.add_parser("bench", help="time dense vs factored block solves")
    be.add_argument("--p-max", type=int, default=6)
    be.add_argument("--trials", type=int, default=20)
    be.add_argument("--out", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bounds":
            rows = harness.bounds_table(args.p_max)
            _emit(rows, args.out)
        elif args.command == "run":
            spec = harness.load_spec(args.spec)
            rows = harness.run_convergence(spec, threads=args.threads)
            _emit(rows, args.out or spec.out, header=harness.CONV_HEADER)
        elif args.command == "scan":
            spec = harness.load_spec(args.spec)
            rows = harness.run_mp_scan(spec, threads=args.threads)
            _emit(rows, args.out or spec.out, header=harness.SCAN_HEADER)
        elif args.command == "bisect":
            spec = harness.load_spec(args.spec)
            rows = harness.run_bisection_lambda(spec, threads=args.threads)
            _emit(rows, args.out or spec.out, header=harness.BISECT_HEADER)
        elif args.command == "bench":
            try:
                rows = harness.bench_blocks(p_max=args.p_max, trials=args.trials)
            except RuntimeError as exc:
                print(f"benchmark verification failed: {exc}", file=sys.stderr)
                return 2
            _emit(rows, args.out, header=harness.BENCH_HEADER)
    except Exception as exc:  # noqa: BLE001 - reported via exit status
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
