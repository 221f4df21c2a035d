"""Command-line surface: pattern emission, verification suites, and the
synthetic segmentation demo.

Exit codes: 0 success, 1 verification or runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .basis import (
    DEFAULT_ORACLE_MAX_DEGREE,
    burnside_count,
    commutant_basis,
    commutes_exactly,
    constant_on_orbits,
    materialize,
    orbit_pattern,
    pattern_csv,
    pattern_of_structure,
    pattern_pgm,
    pattern_summary,
)
from .layer import equivariance_check, random_layer
from .perm import EnumerationLimitError, max_order_limit
from .pointcloud import format_predictions, make_blob_scene
from .structure import (
    StructureParseError,
    degree,
    format_structure,
    group_of,
    param_count,
    parse_structure,
    reassociate_wreaths,
)
from .train import (
    TrainingDivergedError,
    build_segnet,
    make_seg_samples,
    net_forward,
    sgd_train,
    trace_csv,
)

USAGE_ERROR = 2


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")


def cmd_pattern(args: argparse.Namespace) -> int:
    try:
        expr = parse_structure(args.structure)
    except StructureParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    pattern = pattern_of_structure(expr)
    if args.format == "csv":
        _emit(pattern_csv(pattern), args.out)
    elif args.format == "pgm":
        _emit(pattern_pgm(pattern), args.out)
    else:
        _emit(pattern_summary(format_structure(expr), pattern), args.out)
    return 0


def _verify_rows(expr, max_order: int, trials: int):
    """Yield (leg, status, detail) rows; status is 'pass'/'FAIL'/'skip'."""
    group = group_of(expr)
    pattern = pattern_of_structure(expr)
    closed = param_count(expr)

    generated = orbit_pattern(group)
    ok = closed == pattern.num_orbits == generated.num_orbits
    yield ("counts", "pass" if ok else "FAIL",
           f"closed-form={closed} pattern={pattern.num_orbits} generators={generated.num_orbits}")

    yield ("pattern-equality", "pass" if pattern == generated else "FAIL",
           "closed-form pattern matches generator orbits")

    try:
        b = burnside_count(group, limit=max_order)
        yield ("burnside", "pass" if b == closed else "FAIL", f"average fixed points = {b}")
    except EnumerationLimitError:
        yield ("burnside", "skip", f"warning: group order exceeds limit {max_order}")

    if degree(expr) <= DEFAULT_ORACLE_MAX_DEGREE:
        oracle = commutant_basis(group)
        dim_ok = oracle.size == closed
        proj_ok = all(constant_on_orbits(b, pattern) for b in oracle.bases)
        yield ("oracle", "pass" if dim_ok and proj_ok else "FAIL",
               f"nullspace dim = {oracle.size}, basis constant on orbits: {proj_ok}")
    else:
        yield ("oracle", "skip", f"degree {degree(expr)} > {DEFAULT_ORACLE_MAX_DEGREE}")

    tied = materialize(pattern, np.arange(1, pattern.num_orbits + 1, dtype=np.float64))
    comm = all(commutes_exactly(tied, g) for g in group.generators)
    yield ("commutation", "pass" if comm else "FAIL", "W g = g W for all generators, exact")

    layer = random_layer(expr, c_in=2, c_out=2, rng=np.random.default_rng(0), bias=True)
    report = equivariance_check(layer, trials=trials)
    yield ("equivariance", "pass" if report.passed else "FAIL",
           f"max residual {report.max_residual:.3e} over {trials} random inputs")

    flat = reassociate_wreaths(expr)
    if flat != expr:
        same = pattern_of_structure(flat) == pattern
        yield ("associativity", "pass" if same else "FAIL",
               f"pattern unchanged under {format_structure(flat)}")
    else:
        yield ("associativity", "pass", "no nested wreaths to reassociate")


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        expr = parse_structure(args.structure)
    except StructureParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    print(f"structure {format_structure(expr)}  degree {degree(expr)}")
    failed = False
    for leg, status, detail in _verify_rows(expr, args.max_order, args.trials):
        print(f"  {leg:<17} {status:<4} {detail}")
        failed = failed or status == "FAIL"
    print("result: " + ("FAIL" if failed else "pass"))
    return 1 if failed else 0


def cmd_demo(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    scene_rng = np.random.default_rng(args.seed)
    centers = make_blob_scene(args.blobs, args.res, scene_rng)
    data_rng = np.random.default_rng(args.seed * 1000 + 1)
    train = make_seg_samples(centers, 6, args.points_per_blob, args.noise, 0.25, args.res, data_rng)
    test = make_seg_samples(centers, 3, args.points_per_blob, args.noise, 0.25, args.res, data_rng)
    init_rng = np.random.default_rng(args.seed * 1000 + 2)
    kernel = 3 if args.res >= 3 else 1
    blocks = build_segnet(
        6, args.blobs, args.blocks, 8, kernel, init_rng, attention_latents=args.attention
    )
    # the soft-assignment path pools unnormalized sums over points, so its
    # gradients scale with cloud size; a gentler, longer schedule keeps it
    # stable (single-latent softmax is the touchiest case)
    if args.attention == 0:
        lr = 0.2
    elif args.attention == 1:
        lr = 0.001
    else:
        lr = 0.005
    epochs = args.epochs if args.epochs is not None else (40 if args.attention == 0 else 400)
    try:
        trained, trace = sgd_train(blocks, train, epochs=epochs, lr=lr, seed=args.seed)
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    (out_dir / "trace.csv").write_text(trace_csv(trace))

    vox, x, labels = test[0]
    logits, _ = net_forward(trained, vox, x)
    (out_dir / "predictions.txt").write_text(format_predictions(logits.argmax(axis=1)))

    from .pointcloud import permute_points, shift_assignment, within_voxel_permutation

    check_rng = np.random.default_rng(args.seed + 7)
    y = logits
    worst = 0.0
    for _ in range(3):
        shifts = tuple(int(v) for v in check_rng.integers(0, args.res, size=3))
        y2, _ = net_forward(trained, shift_assignment(vox, shifts), x)
        order = within_voxel_permutation(vox, check_rng)
        y3, _ = net_forward(trained, permute_points(vox, order), x[order])
        scale = max(np.abs(y).max(), 1e-12)
        worst = max(
            worst,
            float(np.abs(y2 - y).max() / scale),
            float(np.abs(y3 - y[order]).max() / scale),
        )
    passed = worst <= 1e-10
    acc = float((logits.argmax(axis=1) == labels).mean())
    report = [
        f"task segnet  res={args.res} blocks={args.blocks} attention={args.attention}",
        f"epochs={epochs} seed={args.seed}",
        f"final train loss {trace[-1][1]!r}  held-out accuracy {acc!r}",
        f"equivariance max residual {worst:.3e} -> {'pass' if passed else 'FAIL'}",
    ]
    (out_dir / "equivariance.txt").write_text("\n".join(report) + "\n")
    print("\n".join(report))
    return 0 if passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wreathlin",
        description="Equivariant linear maps for nested set/cycle symmetries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pattern", help="emit the weight-sharing pattern of a structure")
    p.add_argument("--structure", required=True, help='e.g. "wr(S(4),S(3))"')
    p.add_argument("--format", choices=["csv", "pgm", "summary"], default="summary")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.set_defaults(fn=cmd_pattern)

    v = sub.add_parser("verify", help="run the verification suite on a structure")
    v.add_argument("--structure", required=True)
    v.add_argument("--max-order", type=int, default=max_order_limit(),
                   help="group-order cap for exhaustive enumeration")
    v.add_argument("--trials", type=int, default=5, help="random inputs per equivariance leg")
    v.set_defaults(fn=cmd_verify)

    d = sub.add_parser("demo", help="train the toy point-cloud segmentation stack")
    d.add_argument("--task", choices=["segnet"], default="segnet")
    d.add_argument("--res", type=int, default=4, help="voxel grid resolution per axis")
    d.add_argument("--blocks", type=int, default=2)
    d.add_argument("--attention", type=int, default=0, help="latent count, 0 disables")
    d.add_argument("--epochs", type=int, default=None,
                   help="default 40, or 400 when attention is enabled")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True, help="output directory")
    d.add_argument("--blobs", type=int, default=6)
    d.add_argument("--points-per-blob", type=int, default=12)
    d.add_argument("--noise", type=float, default=0.2, help="per-point position noise, voxel units")
    d.set_defaults(fn=cmd_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
