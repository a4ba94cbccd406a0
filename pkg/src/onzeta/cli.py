"""Command-line front end: stream runs, synthetic data, oracles, benchmarks.

Subcommands:

* ``run``     stream a dataset through the engine, write report + predictions
* ``synth``   generate a synthetic dataset in the on-disk formats
* ``oracle``  solve the offline balanced-labeling / proxy-fitting problems
* ``bench``   parameter sweeps and convergence-slope measurements

Exit codes: 0 on success, 1 on internal numerical failure (e.g. an oracle
hitting its iteration cap), 2 on usage errors (bad flags, missing or
malformed files).  All reports are JSON with sorted keys and no timestamps,
so identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .dataio import (
    EmbeddingFormatError,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    read_embeddings,
    read_labels,
    write_embeddings,
    write_synthetic_dataset,
)
from .labels import HyperParams, softmax_similarity
from .oracle import (
    OracleConvergenceError,
    duality_gap,
    onlab_gap_curve,
    proxy_regret_curve,
    solve_offline_labels,
    solve_offline_proxies,
)
from .pipeline import SCHEMA_VERSION, run_stream

__all__ = ["main", "build_parser", "PRESETS"]

# Flag bundles applied before explicit flags; "small-dataset" trades some
# balancing and mixing aggressiveness for stability on short streams.
PRESETS = {
    "default": {},
    "small-dataset": {"alpha": 0.4, "beta": 0.4},
}

_HYPER_FLAGS = ("alpha", "beta", "c_rho", "c_w", "tau_t", "tau_i", "epochs", "seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onzeta",
        description="Streaming zero-shot classification with online class "
        "balancing and proxy learning.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--manifest", help="dataset manifest (JSON)")
    data.add_argument("--embeddings", help="embedding file (alternative to --manifest)")
    data.add_argument("--proxies", help="class-proxy file (alternative to --manifest)")
    data.add_argument("--labels", help="labels file (optional)")
    data.add_argument(
        "--num-samples",
        type=int,
        help="declared stream length for the mixing ramp (default: dataset size)",
    )

    hyper = argparse.ArgumentParser(add_help=False)
    hyper.add_argument("--alpha", type=float, help="class-balance floor ratio in [0, 1]")
    hyper.add_argument("--beta", type=float, help="mixing-weight cap in [0, 1]")
    hyper.add_argument("--c-rho", type=float, dest="c_rho", help="dual step-size scale")
    hyper.add_argument("--c-w", type=float, dest="c_w", help="proxy step-size scale")
    hyper.add_argument("--tau-t", type=float, dest="tau_t", help="text-similarity temperature")
    hyper.add_argument("--tau-i", type=float, dest="tau_i", help="proxy-similarity temperature")
    hyper.add_argument("--epochs", type=int, help="passes over the stream (default 1)")
    hyper.add_argument("--seed", type=int, help="RNG seed for epoch shuffles (default 0)")
    hyper.add_argument(
        "--preset",
        choices=sorted(PRESETS),
        default="default",
        help="named flag bundle; explicit flags still win",
    )

    p_run = sub.add_parser("run", parents=[data, hyper], help="stream a dataset")
    p_run.add_argument("--output", default=".", help="directory for report.json / predictions.jsonl")

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--classes", type=int, default=10)
    p_synth.add_argument("--dim", type=int, default=16)
    p_synth.add_argument("--samples", type=int, default=10_000)
    p_synth.add_argument("--concentration", type=float, default=4.0, help="cluster tightness")
    p_synth.add_argument(
        "--bias-angle",
        type=float,
        default=0.3,
        dest="bias_angle",
        help="rotation (radians) between true centroids and emitted proxies",
    )
    p_synth.add_argument(
        "--prior",
        choices=["uniform", "skewed"],
        default="uniform",
        help="class frequencies; 'skewed' makes class 0 heavier",
    )
    p_synth.add_argument(
        "--skew-factor",
        type=float,
        default=5.0,
        dest="skew_factor",
        help="weight of class 0 relative to the others under --prior skewed",
    )
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--output", default=".", help="directory for the dataset files")

    p_oracle = sub.add_parser(
        "oracle", parents=[data, hyper], help="solve the offline reference problems"
    )
    p_oracle.add_argument(
        "--mode",
        choices=["labels", "proxy"],
        default="labels",
        help="'labels': balanced relabeling; 'proxy': best fixed proxy matrix",
    )
    p_oracle.add_argument("--tol", type=float, default=1e-6)
    p_oracle.add_argument("--output", default=".", help="directory for oracle_report.json")

    p_bench = sub.add_parser(
        "bench", parents=[data, hyper], help="sweeps and convergence slopes"
    )
    p_bench.add_argument(
        "--sweep",
        choices=["alpha", "beta", "slopes"],
        default="alpha",
    )
    p_bench.add_argument("--alphas", default="0,0.4,0.6,0.8,1", help="comma-separated values")
    p_bench.add_argument("--betas", default="0,0.2,0.4,0.6,0.8,1", help="comma-separated values")
    p_bench.add_argument("--ns", default="100,1000,10000", help="prefix lengths for --sweep slopes")
    p_bench.add_argument(
        "--curve",
        choices=["gap", "regret", "both"],
        default="both",
        help="which convergence curve(s) to fit under --sweep slopes",
    )
    p_bench.add_argument("--output", default=".", help="directory for bench_report.json")
    return parser


def _load_inputs(args):
    """Resolve --manifest or the --embeddings/--proxies pair to arrays."""
    if args.manifest and (args.embeddings or args.proxies):
        raise ValueError("give either --manifest or --embeddings/--proxies, not both")
    if args.manifest:
        ds = load_dataset(args.manifest)
        return ds.embeddings, ds.proxies, ds.labels, ds.n_declared
    if not (args.embeddings and args.proxies):
        raise ValueError("need --manifest, or both --embeddings and --proxies")
    embeddings = read_embeddings(args.embeddings)
    proxies = read_embeddings(args.proxies)
    labels = read_labels(args.labels) if args.labels else None
    if labels is not None and labels.shape[0] != embeddings.shape[0]:
        raise ValueError(
            f"labels file has {labels.shape[0]} entries for {embeddings.shape[0]} embeddings"
        )
    return embeddings, proxies, labels, embeddings.shape[0]


def _resolve_params(args, n_declared: int) -> HyperParams:
    """Defaults < preset < explicit flags, then validate via HyperParams."""
    chosen = dict(PRESETS[args.preset])
    for name in _HYPER_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            chosen[name] = value
    n = args.num_samples if getattr(args, "num_samples", None) else n_declared
    return HyperParams(n=n, **chosen)


def _write_json(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_run(args) -> int:
    embeddings, proxies, labels, n_declared = _load_inputs(args)
    params = _resolve_params(args, n_declared)
    report, trajectory = run_stream(
        embeddings, proxies, params, labels=labels, record_trajectory=True
    )
    out = Path(args.output)
    _write_json(report.to_dict(), out / "report.json")
    with open(out / "predictions.jsonl", "w") as fh:
        for step in range(trajectory.predicted.shape[0]):
            row = int(trajectory.sample_rows[step])
            record = {
                "step": step + 1,
                "row": row,
                "predicted_class": int(trajectory.predicted[step]),
                "mix_weight": float(trajectory.mix_weights[step]),
            }
            if labels is not None:
                record["label"] = int(labels[row])
                record["correct"] = bool(trajectory.predicted[step] == labels[row])
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    if report.accumulated_accuracy is not None:
        print(f"accumulated accuracy: {report.accumulated_accuracy:.4f}")
    if report.accuracy is not None:
        print(f"final-epoch accuracy: {report.accuracy:.4f}")
    print(f"report written to {out / 'report.json'}")
    return 0


def cmd_synth(args) -> int:
    if args.prior == "skewed":
        weights = np.ones(args.classes)
        weights[0] = args.skew_factor
        prior = weights / weights.sum()
    else:
        prior = None
    spec = SyntheticSpec(
        num_classes=args.classes,
        dim=args.dim,
        num_samples=args.samples,
        cluster_concentration=args.concentration,
        text_proxy_bias_angle=args.bias_angle,
        class_prior=prior,
        seed=args.seed,
    )
    manifest_path = write_synthetic_dataset(generate_synthetic(spec), args.output)
    print(f"manifest written to {manifest_path}")
    return 0


def cmd_oracle(args) -> int:
    embeddings, proxies, labels, n_declared = _load_inputs(args)
    params = _resolve_params(args, n_declared)
    text_probs = softmax_similarity(embeddings, proxies, params.tau_t)
    solution = solve_offline_labels(text_probs, params.alpha, tol=args.tol)
    slackness = float(
        np.max(solution.duals * np.abs(solution.probs.mean(axis=0) - params.alpha / len(solution.duals)))
    )
    # widen the evaluation box to cover the solved multipliers, which can
    # exceed any fixed radius on sharply separated streams
    gap = duality_gap(
        solution.duals,
        solution.probs,
        text_probs,
        params.alpha,
        box_radius=max(10.0, float(solution.duals.max())),
    )
    payload = {
        "schema_version": SCHEMA_VERSION,
        "mode": args.mode,
        "config": params.to_dict(),
        "objective": solution.objective,
        "duals": [float(r) for r in solution.duals],
        "iterations": solution.iterations,
        "max_violation": solution.max_violation,
        "complementary_slackness": slackness,
        "duality_gap": gap,
    }
    out = Path(args.output)
    if args.mode == "proxy":
        proxy_solution = solve_offline_proxies(
            embeddings, solution.probs, params.tau_i, init=proxies, tol=args.tol
        )
        out.mkdir(parents=True, exist_ok=True)
        write_embeddings(proxy_solution.proxies, out / "reference_proxies.onz")
        payload["proxy_objective"] = proxy_solution.objective
        payload["proxy_iterations"] = proxy_solution.iterations
        payload["proxy_grad_norm"] = proxy_solution.grad_norm
        payload["proxy_file"] = "reference_proxies.onz"
    _write_json(payload, out / "oracle_report.json")
    print(f"oracle report written to {out / 'oracle_report.json'}")
    return 0


def _parse_floats(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValueError(f"expected comma-separated numbers, got {text!r}") from exc


def cmd_bench(args) -> int:
    embeddings, proxies, labels, n_declared = _load_inputs(args)
    base = _resolve_params(args, n_declared)
    results: dict = {"schema_version": SCHEMA_VERSION, "sweep": args.sweep, "config": base.to_dict()}

    if args.sweep == "alpha":
        points = []
        for alpha in _parse_floats(args.alphas):
            params = HyperParams(
                n=base.n, alpha=alpha, beta=base.beta, c_rho=base.c_rho, c_w=base.c_w,
                tau_t=base.tau_t, tau_i=base.tau_i, epochs=base.epochs, seed=base.seed,
            )
            report = run_stream(embeddings, proxies, params, labels=labels)
            points.append(
                {
                    "alpha": alpha,
                    "min_class_proportion": report.min_class_proportion,
                    "accuracy": report.accuracy,
                }
            )
        results["points"] = points
    elif args.sweep == "beta":
        points = []
        for beta in _parse_floats(args.betas):
            params = HyperParams(
                n=base.n, alpha=base.alpha, beta=beta, c_rho=base.c_rho, c_w=base.c_w,
                tau_t=base.tau_t, tau_i=base.tau_i, epochs=base.epochs, seed=base.seed,
            )
            report = run_stream(embeddings, proxies, params, labels=labels)
            points.append({"beta": beta, "accuracy": report.accuracy})
        results["points"] = points
    else:
        ns = sorted(int(n) for n in _parse_floats(args.ns))
        if ns[-1] > embeddings.shape[0]:
            raise ValueError(
                f"--ns asks for {ns[-1]} samples but the dataset has {embeddings.shape[0]}"
            )
        prefix = embeddings[: ns[-1]]
        params = HyperParams(
            n=ns[-1], alpha=base.alpha, beta=base.beta, c_rho=base.c_rho, c_w=base.c_w,
            tau_t=base.tau_t, tau_i=base.tau_i, epochs=1, seed=base.seed,
        )
        if args.curve in ("gap", "both"):
            curve = onlab_gap_curve(prefix, proxies, params, ns)
            results["gap_checkpoints"] = curve.checkpoints
            results["gap_slope"] = curve.fitted_slope
        if args.curve in ("regret", "both"):
            curve = proxy_regret_curve(prefix, proxies, params, ns)
            results["regret_checkpoints"] = curve.checkpoints
            results["regret_slope"] = curve.fitted_slope

    out = Path(args.output)
    _write_json(results, out / "bench_report.json")
    print(f"bench report written to {out / 'bench_report.json'}")
    return 0


_COMMANDS = {"run": cmd_run, "synth": cmd_synth, "oracle": cmd_oracle, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.subcommand](args)
    except (EmbeddingFormatError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OracleConvergenceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
