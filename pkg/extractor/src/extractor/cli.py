"""Command-line front end: extract one dataset into the interchange files.

Exit codes: 0 on success, 1 when a backbone or dataset is unavailable
(missing weights, missing local data), 2 on usage errors (bad flags,
missing or malformed input files).
"""

from __future__ import annotations

import argparse
import sys

from .job import DEFAULT_PROMPT_TEMPLATES, ExtractionJob
from .pipeline import extract

__all__ = ["build_parser", "main"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extractor",
        description=(
            "Encode a labeled image dataset and its class names into the "
            "ONZ1 embedding files, prompt-ensembled class proxies, labels "
            "and manifest consumed by the streaming classifier."
        ),
    )
    parser.add_argument(
        "--dataset",
        required=True,
        help="'npz:<file>' with images/labels/class_names arrays, or 'cifar10'",
    )
    parser.add_argument(
        "--backbone",
        required=True,
        help="'fake' or 'fake:<dim>' (deterministic stand-in), or 'clip:<model-id>'",
    )
    parser.add_argument("--output", required=True, help="output directory")
    parser.add_argument(
        "--data-dir", default=None, help="local dataset root (cifar10 only)"
    )
    parser.add_argument("--batch-size", type=int, default=256)
    parser.add_argument("--device", default="cpu")
    parser.add_argument(
        "--template",
        action="append",
        metavar="TEXT",
        help=(
            "prompt template with one {} placeholder; repeat for an ensemble "
            f"(default: the {len(DEFAULT_PROMPT_TEMPLATES)}-template ensemble)"
        ),
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = ExtractionJob(
            dataset=args.dataset,
            backbone=args.backbone,
            output_dir=args.output,
            data_dir=args.data_dir,
            templates=tuple(args.template) if args.template else DEFAULT_PROMPT_TEMPLATES,
            batch_size=args.batch_size,
            device=args.device,
        )
        result = extract(job)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"unavailable: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {result.num_samples} embeddings of width {result.dim} "
        f"and {result.num_classes} class proxies to {result.output_dir}"
    )
    print(f"manifest: {result.manifest_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
