"""Command line entry point: ``cbm-leakage run | grid | plot-projection``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .clm import Mode


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="base seed; repeat i uses seed + i")
    p.add_argument("--mcd-samples", type=int, help="dropout passes per MCD prediction")
    p.add_argument("--dropout", type=float, help="hidden-layer dropout rate")
    p.add_argument("--threshold", type=float, help="hard-label threshold")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--mnist-dir", help="directory with the MNIST IDX files (default: $MNIST_DIR)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "markdown"), default="csv")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-repeat accuracies")


def _overrides(args) -> dict:
    return {
        "mcd_samples": args.mcd_samples,
        "dropout_p": args.dropout,
        "threshold": args.threshold,
        "epochs": args.epochs,
        "learning_rate": args.lr,
        "batch_size": args.batch_size,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbm-leakage",
        description="Concept bottleneck leakage experiments with Monte-Carlo dropout.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one dataset x mode experiment")
    run.add_argument("--dataset", required=True, choices=list(harness.DATASETS))
    run.add_argument("--mode", required=True, choices=[m.value for m in Mode])
    run.add_argument("--repeats", type=int, help="default: 20 for blobs, 10 for MNIST")
    _add_model_flags(run)

    grid = sub.add_parser("grid", help="every dataset x mode (the full results table)")
    grid.add_argument("--datasets", default=",".join(harness.DATASETS),
                      help="comma-separated subset of datasets")
    grid.add_argument("--blob-repeats", type=int, default=20)
    grid.add_argument("--mnist-repeats", type=int, default=10)
    _add_model_flags(grid)

    proj = sub.add_parser("plot-projection", help="linear-CLM projection data for a blob dataset")
    proj.add_argument("--dataset", default="blobs", choices=list(harness.BLOB_DATASETS))
    proj.add_argument("--seed", type=int, default=0)
    proj.add_argument("--out", help="output CSV (default: stdout)")
    return parser


def _emit(text: str, out):
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(message)s",
    )
    try:
        if args.command == "run":
            repeats = args.repeats or harness.DEFAULT_REPEATS[args.dataset]
            spec = harness.ExperimentSpec(
                args.dataset, args.mode, repeats, args.seed,
                overrides=_overrides(args), mnist_dir=args.mnist_dir,
            )
            if args.dataset in harness.MNIST_DATASETS:
                harness.resolve_mnist_dir(args.mnist_dir)
            _emit(harness.write_results([harness.run_experiment(spec)], args.format), args.out)
        elif args.command == "grid":
            datasets = [harness.dataset_id(d) for d in args.datasets.split(",") if d]
            repeats = {
                d: args.mnist_repeats if d in harness.MNIST_DATASETS else args.blob_repeats
                for d in datasets
            }
            results = harness.run_grid(datasets, args.seed, repeats, _overrides(args),
                                       mnist_dir=args.mnist_dir)
            _emit(harness.write_results(results, args.format), args.out)
        else:
            _emit(harness.emit_projection(args.dataset, args.seed), args.out)
    except (OSError, ValueError) as exc:
        print(f"cbm-leakage: error: {exc}", file=sys.stderr)
        return 1
    return 0


def cli_main(argv=None) -> int:
    """Like :func:`main` but returns 2 instead of raising SystemExit on usage errors."""
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1


if __name__ == "__main__":
    sys.exit(main())
