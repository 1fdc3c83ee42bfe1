"""Command line surface for pruning, validating, multiplying and benchmarking.

Exit codes: 0 success, 1 runtime or validation failure, 2 usage errors
(unknown flags, unparsable level specs). All randomness is seeded through
``--seed``, so every command is reproducible.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .analysis import sparsity_summary, topk_retention
from .core import BlockShape, HBSConfig, reconstruct, validate
from .errors import ConfigError, HbsError, ValidationError
from .io import read_dmat, read_hbsf, read_irf, write_dmat, write_hbsf, write_irf
from .kernels import dense_matmul, hbs_matmul, max_rel_error
from .perf import BenchPlan, calibrate_irf, estimate_cost
from .pruning import prune_hierarchical


def _levels_arg(text: str) -> HBSConfig:
    try:
        return HBSConfig.parse(text)
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _dims_arg(text: str) -> tuple[int, int, int]:
    parts = text.strip().split("x")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        dims = ()
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError(
            f"bad dims {text!r}, expected MxKxN with positive integers"
        )
    return dims


def _percentiles_arg(text: str) -> tuple[float, ...]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            v = float(tok)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad percentile {tok!r}") from None
        if not 0.0 < v <= 100.0:
            raise argparse.ArgumentTypeError(
                f"percentile {tok!r} outside (0, 100] (percentages, e.g. 10,20,50)"
            )
        out.append(v / 100.0)
    if not out:
        raise argparse.ArgumentTypeError("empty percentile list")
    return tuple(out)


def _shapes_arg(text: str) -> tuple[BlockShape, ...]:
    try:
        shapes = tuple(BlockShape.parse(tok) for tok in text.split(",") if tok.strip())
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e)) from None
    if not shapes:
        raise argparse.ArgumentTypeError("empty shape list")
    return shapes


def _sparsities_arg(text: str) -> tuple[float, ...]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            v = float(tok)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad sparsity {tok!r}") from None
        if not 0.0 <= v <= 1.0:
            hint = " (sparsities are fractions in [0, 1], not percentages)" if v > 1 else ""
            raise argparse.ArgumentTypeError(f"sparsity {tok!r} outside [0, 1]{hint}")
        out.append(v)
    if not out:
        raise argparse.ArgumentTypeError("empty sparsity list")
    return tuple(out)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _cmd_prune(args) -> int:
    a = read_dmat(args.in_path)
    hbs, trace = prune_hierarchical(a, args.levels)
    write_hbsf(args.out, hbs)
    print(trace.render())
    print(sparsity_summary(hbs).render())
    print(f"wrote {args.out}")
    return 0


def _cmd_validate(args) -> int:
    try:
        m = read_hbsf(args.in_path)
    except ValidationError as e:
        print(e.report.render())
        return 1
    print(validate(m).render())
    return 0


def _cmd_reconstruct(args) -> int:
    write_dmat(args.out, reconstruct(read_hbsf(args.in_path)))
    print(f"wrote {args.out}")
    return 0


def _cmd_matmul(args) -> int:
    m = read_hbsf(args.a)
    b = read_dmat(args.b)
    c = hbs_matmul(m, b)
    write_dmat(args.out, c)
    if args.oracle:
        d = dense_matmul(reconstruct(m), b)
        print(f"max relative error vs dense oracle: {max_rel_error(c, d):.3e}")
    print(f"wrote {args.out}")
    return 0


def _cmd_topk(args) -> int:
    report = topk_retention(read_dmat(args.original), read_hbsf(args.pruned), args.percentiles)
    print(report.render())
    return 0


def _cmd_speedup(args) -> int:
    est = estimate_cost(args.dims, args.levels, read_irf(args.irf))
    print(est.render())
    return 0


def _cmd_calibrate(args) -> int:
    plan = BenchPlan(args.dims, reps=args.reps, seed=args.seed)
    table = calibrate_irf(args.shapes, args.sparsities, plan)
    write_irf(args.out, table)
    m, k, n = args.dims
    print(f"calibrated {len(table.entries)} entries at {m}x{k}x{n}")
    print(f"wrote {args.out}")
    return 0


def _cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.dist == "gaussian":
        vals = rng.standard_normal((args.rows, args.cols), dtype=np.float32)
    else:
        vals = rng.random((args.rows, args.cols), dtype=np.float32)
    write_dmat(args.out, vals)
    print(f"wrote {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hbs", description="hierarchical block sparse matrix toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prune", help="prune a dense matrix into an HBS matrix")
    p.add_argument("--in", dest="in_path", required=True, metavar="PATH", help="input .dmat")
    p.add_argument("--out", required=True, metavar="PATH", help="output .hbsf")
    p.add_argument(
        "--levels",
        required=True,
        type=_levels_arg,
        metavar="SPEC",
        help='comma list of <bh>x<bw>:<sparsity>, e.g. "32x1:0.75,1x1:0.96875"',
    )
    p.set_defaults(func=_cmd_prune)

    p = sub.add_parser("validate", help="check every invariant of an HBS file")
    p.add_argument("--in", dest="in_path", required=True, metavar="PATH", help="input .hbsf")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("reconstruct", help="expand an HBS matrix to dense")
    p.add_argument("--in", dest="in_path", required=True, metavar="PATH", help="input .hbsf")
    p.add_argument("--out", required=True, metavar="PATH", help="output .dmat")
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("matmul", help="multiply an HBS matrix by a dense matrix")
    p.add_argument("--a", required=True, metavar="PATH", help="left operand .hbsf")
    p.add_argument("--b", required=True, metavar="PATH", help="right operand .dmat")
    p.add_argument("--out", required=True, metavar="PATH", help="output .dmat")
    p.add_argument(
        "--oracle",
        action="store_true",
        help="also run the dense reference product and print the max relative error",
    )
    p.set_defaults(func=_cmd_matmul)

    p = sub.add_parser("topk", help="top-magnitude retention of a pruned matrix")
    p.add_argument("--original", required=True, metavar="PATH", help="original .dmat")
    p.add_argument("--pruned", required=True, metavar="PATH", help="pruned .hbsf")
    p.add_argument(
        "--percentiles",
        required=True,
        type=_percentiles_arg,
        metavar="LIST",
        help="comma list of percentages in (0, 100], e.g. 10,20,30,40,50",
    )
    p.set_defaults(func=_cmd_topk)

    p = sub.add_parser("speedup", help="model the speedup of a pruning configuration")
    p.add_argument("--dims", required=True, type=_dims_arg, metavar="MxKxN")
    p.add_argument("--levels", required=True, type=_levels_arg, metavar="SPEC")
    p.add_argument("--irf", required=True, metavar="PATH", help="irregularity table .irf")
    p.set_defaults(func=_cmd_speedup)

    p = sub.add_parser("bench", help="microbenchmark utilities")
    bench_sub = p.add_subparsers(dest="bench_command", required=True)
    b = bench_sub.add_parser("calibrate", help="measure an irf table on this machine")
    b.add_argument("--shapes", required=True, type=_shapes_arg, metavar="LIST")
    b.add_argument("--sparsities", required=True, type=_sparsities_arg, metavar="LIST")
    b.add_argument("--dims", required=True, type=_dims_arg, metavar="MxKxN")
    b.add_argument("--reps", type=_positive_int, default=5, metavar="N")
    b.add_argument("--seed", type=int, default=0, metavar="N")
    b.add_argument("--out", required=True, metavar="PATH", help="output .irf")
    b.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("gen", help="generate a seeded random dense matrix")
    p.add_argument("--rows", required=True, type=_positive_int, metavar="R")
    p.add_argument("--cols", required=True, type=_positive_int, metavar="C")
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.add_argument("--dist", choices=("gaussian", "uniform"), default="gaussian")
    p.add_argument("--out", required=True, metavar="PATH", help="output .dmat")
    p.set_defaults(func=_cmd_gen)

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        return args.func(args)
    except (HbsError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def console_main() -> None:
    raise SystemExit(main())
