"""Command-line interface: exact, tabulate, delta, estimate, report, shape."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import MultableError

DEFAULT_WHEEL = 6


class UsageError(Exception):
    pass


def _threads(args) -> int:
    from .tabulation import default_workers

    return args.threads if args.threads is not None else default_workers()


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _wheel(text: str) -> int:
    from .incremental import WHEELS

    v = int(text)
    if v not in WHEELS:
        raise argparse.ArgumentTypeError(f"wheel must be one of {', '.join(map(str, WHEELS))}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multable", description=(
        "Distinct products of the n x n multiplication table: exact counts, "
        "delta tabulation, Monte Carlo estimates and shape drawings."))
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("exact", help="print M(n)")
    e.add_argument("--n", type=_positive, required=True)
    e.add_argument("--algorithm", choices=("direct", "incremental", "subquadratic"), default="direct")
    e.add_argument("--segment-bits", type=_positive, help="segment size for the direct sieve")
    e.add_argument("--wheel", type=_wheel, help=f"wheel for incremental/subquadratic (default {DEFAULT_WHEEL})")
    e.add_argument("--threads", type=_positive)

    t = sub.add_parser("tabulate", help="write k,delta,M for 1 <= k <= n")
    t.add_argument("--n", type=_positive, required=True)
    t.add_argument("--wheel", type=_wheel, default=DEFAULT_WHEEL)
    t.add_argument("--algorithm", choices=("incremental", "subquadratic"), default="incremental")
    t.add_argument("--out", default="-", help="output CSV path, or - for stdout")
    t.add_argument("--checkpoint", help="checkpoint file; resumes if it exists")
    t.add_argument("--checkpoint-every", type=_positive)
    t.add_argument("--threads", type=_positive)

    d = sub.add_parser("delta", help="print delta(n) and the number of marked cells")
    d.add_argument("--n", type=_positive, required=True)
    d.add_argument("--wheel", type=_wheel, default=0)

    s = sub.add_parser("estimate", help="Monte Carlo estimate of M(n)/n^2")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--n", type=_positive)
    g.add_argument("--n-exponent", type=_positive, help="use n = 2^k - 1")
    s.add_argument("--method", choices=("bernoulli", "product"), required=True)
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--sampler", choices=("bach", "kalai"), default="bach")
    s.add_argument("--seed", type=int)
    s.add_argument("--mr-rounds", type=_positive, default=30)
    s.add_argument("--threads", type=_positive)
    s.add_argument("--out", help="also write the report to this path")

    r = sub.add_parser("report", help="ratios and normalized values from a table or estimate")
    r.add_argument("--input", required=True, help="k,delta,M CSV or an estimate report")
    r.add_argument("--normalized", action="store_true", help="add the (n^2/M)/Phi(n) column")
    r.add_argument("--dyadic", action="store_true", help="only rows with k = 2^j - 1")

    h = sub.add_parser("shape", help="SVG drawing of the delta(n) shape")
    h.add_argument("--n", type=_positive, required=True)
    h.add_argument("--wheel", type=_wheel, default=0)
    h.add_argument("--out", required=True)
    return p


def cmd_exact(args, out) -> None:
    if args.algorithm == "direct":
        if args.wheel is not None:
            raise UsageError("--wheel does not apply to the direct algorithm")
        from .direct import SegmentPlan, m_exact_direct

        if args.segment_bits is not None:
            try:
                SegmentPlan(args.n, args.segment_bits)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        print(m_exact_direct(args.n, _threads(args), args.segment_bits), file=out)
        return
    if args.segment_bits is not None:
        raise UsageError(f"--segment-bits only applies to the direct algorithm, not {args.algorithm}")
    from .tabulation import run_tabulation

    wheel = DEFAULT_WHEEL if args.wheel is None else args.wheel
    res = run_tabulation(args.n, algorithm=args.algorithm, wheel=wheel, workers=_threads(args))
    print(res.final_m, file=out)


def cmd_tabulate(args, out) -> None:
    from .tabulation import run_tabulation

    if args.checkpoint and args.out == "-":
        raise UsageError("--checkpoint needs --out to name a file")
    target = out if args.out == "-" else args.out
    res = run_tabulation(args.n, algorithm=args.algorithm, wheel=args.wheel, workers=_threads(args),
                         out=target, checkpoint_path=args.checkpoint,
                         checkpoint_every=args.checkpoint_every)
    if args.out != "-":
        print(f"M({args.n}) = {res.final_m}", file=sys.stderr)


def cmd_delta(args, out) -> None:
    from .incremental import delta_value

    rec = delta_value(args.n, args.wheel)
    print(f"n: {rec.n}\nwheel: {args.wheel}\ndelta: {rec.delta}\nconstructed: {rec.constructed}", file=out)


def cmd_estimate(args, out) -> None:
    from .montecarlo import estimate

    if args.trials < 2:
        raise UsageError("--trials must be at least 2")
    n = args.n if args.n is not None else (1 << args.n_exponent) - 1
    rep = estimate(n, args.trials, args.method, args.seed, args.mr_rounds, args.sampler,
                   _threads(args), n_exponent=args.n_exponent)
    text = rep.to_text()
    out.write(text)
    if args.out:
        Path(args.out).write_text(text)


def cmd_report(args, out) -> None:
    from .analysis import format_rows, row_from_estimate, rows_from_table
    from .montecarlo import EstimateReport
    from .tabulation import CSV_HEADER, parse_csv

    text = Path(args.input).read_text()
    if text.startswith(CSV_HEADER):
        rows = rows_from_table(parse_csv(text), args.normalized, args.dyadic)
    else:
        try:
            rows = [row_from_estimate(EstimateReport.from_text(text))]
        except (json.JSONDecodeError, TypeError):
            raise UsageError(f"{args.input} is neither a k,delta,M table nor an estimate report") from None
    out.write(format_rows(rows, args.normalized))


def cmd_shape(args, out) -> None:
    from .shapes import render_shape, shape_metadata

    svg = render_shape(args.n, args.wheel)
    Path(args.out).write_text(svg)
    meta = shape_metadata(svg)
    print(f"dark cells: {meta['dark_cells']}, light cells: {meta['light_cells']}", file=out)


COMMANDS = {
    "exact": cmd_exact,
    "tabulate": cmd_tabulate,
    "delta": cmd_delta,
    "estimate": cmd_estimate,
    "report": cmd_report,
    "shape": cmd_shape,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"multable {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (MultableError, ValueError, OSError) as exc:
        print(f"multable {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
