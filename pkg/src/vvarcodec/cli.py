"""Command-line front end.

Exit status: 0 success, 1 usage error, 2 I/O or format error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import rd
from .engine import EncodeSettings, decode, encode, verify_v_variability
from .errors import CodeFormatError, DimensionError, InvalidTupleError, PGMError
from .image import from_square, read_pgm, square_depth, to_square, write_pgm
from .model import VTuple, deserialize, serialize, storage_report

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INVALID = 0, 1, 2, 3


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _tuple_from_args(args) -> VTuple:
    if args.preset is not None and args.tuple is not None:
        raise UsageError("give either --preset or --tuple, not both")
    if args.preset is not None:
        try:
            return rd.preset(args.preset).vtuple
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
    if args.tuple is None:
        raise UsageError("a tuple is required (--preset or --tuple)")
    return VTuple.from_values(args.tuple)


def cmd_encode(args) -> int:
    v = _tuple_from_args(args)
    image = read_pgm(args.input)
    if square_depth(image.width, image.height) > v.m:
        raise ValidationFailure(f"{image.width}x{image.height} image needs m >= "
                                f"{square_depth(image.width, image.height)}, tuple has m={v.m}")
    square = to_square(image, v.m)
    settings = EncodeSettings(v, threshold=args.threshold, seed=args.seed, max_iter=args.max_iter)
    code = encode(square, settings, size=(image.width, image.height))
    data = serialize(code)
    Path(args.output).write_bytes(data)
    report = storage_report(code)
    print(f"tuple {v}  model {rd.format_bytes(report.model_bytes)} B  "
          f"(bound {rd.format_bytes(report.upper_bound)} B)  file {len(data)} B")
    return EXIT_OK


def cmd_decode(args) -> int:
    code = deserialize(Path(args.input).read_bytes())
    square = decode(code)
    write_pgm(args.output, from_square(square, code.width, code.height))
    return EXIT_OK


def cmd_psnr(args) -> int:
    value = rd.psnr(read_pgm(args.a), read_pgm(args.b))
    print(rd.format_psnr(value))
    return EXIT_OK


def cmd_verify(args) -> int:
    v = _tuple_from_args(args)
    image = read_pgm(args.input)
    if not (image.is_square_pow2 and image.depth == v.m):
        image = to_square(image, v.m)
    report = verify_v_variability(image, v)
    for n, (count, limit) in enumerate(zip(report.counts, report.limits), start=1):
        print(f"level {n}: {count} distinct / V={limit}  {'ok' if count <= limit else 'FAIL'}")
    print("pass" if report.passed else "fail")
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_sweep(args) -> int:
    if not args.seeds:
        raise UsageError("--seeds needs at least one seed")
    image = read_pgm(args.input)
    points = rd.sweep(image, budget=args.budget, thresholds=args.thresholds, seeds=args.seeds,
                      jobs=args.jobs, max_iter=args.max_iter)
    Path(args.out).write_text(rd.points_to_csv(points))
    print(f"{len(points)} points written to {args.out}")
    if args.frontier and points:
        for p in rd.frontier(points):
            print(f"{p.label}  i={p.threshold}  seed={p.seed}  {rd.format_bytes(p.model_bytes)} B  "
                  f"{rd.format_psnr(p.psnr)} dB")
    return EXIT_OK


def cmd_presets(args) -> int:
    print(f"{'label':>6}  {'V4':>5} {'V5':>5} {'V6':>5} {'V7':>5} {'V8':>5}  {'memory':>7}")
    for p in rd.presets():
        cols = " ".join(f"{x:>5}" for x in p.middle)
        print(f"{p.label:>6}  {cols}  {rd.format_bytes(p.model_bytes):>7}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vvar", description="V-variable grayscale image codec")
    sub = parser.add_subparsers(dest="command", required=True)

    def tuple_opts(p):
        p.add_argument("--preset", help="preset label (see `vvar presets`)")
        p.add_argument("--tuple", type=_int_list, help="V_1,...,V_m as powers of two")

    p = sub.add_parser("encode", help="compress a PGM into a .vvar code")
    tuple_opts(p)
    p.add_argument("--threshold", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="reconstruct a PGM from a .vvar code")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("psnr", help="PSNR between two PGMs")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_psnr)

    p = sub.add_parser("verify", help="check that an image is V-variable")
    tuple_opts(p)
    p.add_argument("input")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="rate-distortion sweep over the tuple space")
    p.add_argument("input")
    p.add_argument("--budget", type=float, default=rd.DEFAULT_BUDGET)
    p.add_argument("--thresholds", type=_int_list, default=list(rd.DEFAULT_THRESHOLDS))
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--frontier", action="store_true", help="print the Pareto frontier")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("presets", help="list the preset tuples and their storage")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, PGMError, CodeFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationFailure, InvalidTupleError, DimensionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
