"""Streaming zero-shot classification with online class balancing,
online proxy learning, and a scheduled mix of the two predictions.

The public surface re-exported here covers the full pipeline: hyperparameter
and state types, the per-step math (``labels``, ``proxies``, ``mixing``),
the streaming engine (``pipeline``), the offline reference solvers
(``oracle``), and the file formats plus synthetic generator (``dataio``).
"""

from .dataio import (
    EmbeddingFormatError,
    LoadedDataset,
    Manifest,
    SyntheticDataset,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    load_manifest,
    read_embeddings,
    read_labels,
    save_manifest,
    write_embeddings,
    write_labels,
    write_synthetic_dataset,
)
from .labels import (
    DualState,
    HyperParams,
    check_simplex,
    reweight_with_duals,
    softmax_similarity,
    update_duals,
)
from .mixing import MixSchedule, combine_predictions, mixing_weight, optimal_lambda
from .oracle import (
    OfflineLabelSolution,
    OfflineProxySolution,
    OracleConvergenceError,
    RegretCurve,
    duality_gap,
    finite_difference_gradient,
    fit_loglog_slope,
    onlab_gap_curve,
    proxy_regret_curve,
    solve_offline_labels,
    solve_offline_proxies,
)
from .pipeline import (
    OnZeta,
    RunReport,
    StepResult,
    Trajectory,
    mean_nearest_proxy_cosine,
    run_stream,
)
from .proxies import (
    proxy_gradient,
    proxy_loss,
    proxy_probabilities,
    update_proxy,
)

__version__ = "0.1.0"

__all__ = [
    "DualState",
    "EmbeddingFormatError",
    "HyperParams",
    "LoadedDataset",
    "Manifest",
    "MixSchedule",
    "OfflineLabelSolution",
    "OfflineProxySolution",
    "OnZeta",
    "OracleConvergenceError",
    "RegretCurve",
    "RunReport",
    "StepResult",
    "SyntheticDataset",
    "SyntheticSpec",
    "Trajectory",
    "check_simplex",
    "combine_predictions",
    "duality_gap",
    "finite_difference_gradient",
    "fit_loglog_slope",
    "generate_synthetic",
    "load_dataset",
    "load_manifest",
    "mean_nearest_proxy_cosine",
    "mixing_weight",
    "onlab_gap_curve",
    "optimal_lambda",
    "proxy_gradient",
    "proxy_loss",
    "proxy_probabilities",
    "proxy_regret_curve",
    "read_embeddings",
    "read_labels",
    "reweight_with_duals",
    "run_stream",
    "save_manifest",
    "softmax_similarity",
    "solve_offline_labels",
    "solve_offline_proxies",
    "update_duals",
    "update_proxy",
    "write_embeddings",
    "write_labels",
    "write_synthetic_dataset",
]
