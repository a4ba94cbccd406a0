"""The streaming classification engine.

Each embedding arrives once, gets a prediction immediately, and is never
stored: the engine's state is the dual vector (one scalar per class), the
learned vision-space proxy matrix, and a running class histogram, so memory
stays at O(C * d + C) regardless of stream length.

Per step, three distributions are formed from text proxies ``Z`` and learned
proxies ``W``:

    q        softmax of text-proxy similarities  (temperature ``tau_t``)
    p_star   q reweighted by the class-balance duals
    p_prime  softmax of learned-proxy similarities (temperature ``tau_i``)

The emitted prediction is the argmax of ``lam * p_prime + (1 - lam) *
p_star`` where ``lam`` follows the square-root ramp; afterwards the duals
take one projected ascent step and the proxies one projected gradient step.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .labels import (
    DualState,
    HyperParams,
    reweight_with_duals,
    softmax_similarity,
    update_duals,
)
from .mixing import MixSchedule, combine_predictions, mixing_weight
from .proxies import (
    degenerate_rows,
    proxy_gradient,
    proxy_loss,
    proxy_probabilities,
    update_proxy,
)

__all__ = [
    "SCHEMA_VERSION",
    "StepResult",
    "Trajectory",
    "RunReport",
    "OnZeta",
    "run_stream",
    "mean_nearest_proxy_cosine",
]

SCHEMA_VERSION = 1


@dataclass
class StepResult:
    """Everything computed for one arriving embedding (caller may discard)."""

    step_index: int
    predicted_class: int
    mix_weight: float
    text_probs: np.ndarray       # q
    balanced_probs: np.ndarray   # p_star
    proxy_probs: np.ndarray      # p_prime
    mixed_probs: np.ndarray
    proxy_loss: float


@dataclass
class Trajectory:
    """Per-step arrays recorded on request (for offline analysis only).

    ``duals`` holds the dual vector *as used* at each step, i.e. before that
    step's ascent update; ``proxy_losses`` likewise score the proxy matrix
    before its update, which is the online (one-look-ahead) loss sequence.
    """

    duals: np.ndarray          # (n_steps, C)
    balanced_probs: np.ndarray  # (n_steps, C) p_star targets
    text_probs: np.ndarray     # (n_steps, C) q
    proxy_losses: np.ndarray   # (n_steps,)
    mix_weights: np.ndarray    # (n_steps,)
    sample_rows: np.ndarray    # (n_steps,) original row index seen at each step
    predicted: np.ndarray      # (n_steps,) emitted class per step


@dataclass
class RunReport:
    """Summary of one full streaming run; ``to_dict`` is JSON-ready."""

    n: int
    epochs: int
    num_classes: int
    dim: int
    params: dict
    predictions: np.ndarray          # last-epoch predictions, row-aligned
    class_counts: np.ndarray         # last-epoch predicted-class histogram
    min_class_proportion: float
    degenerate_updates: int
    final_mix_weight: float
    accuracy: float | None = None            # final-epoch, labeled rows only
    accumulated_accuracy: float | None = None  # on-the-fly, across all steps
    text_proxy_cosine: float = 0.0    # mean nearest-proxy cosine, text proxies
    learned_proxy_cosine: float = 0.0  # same, learned proxies after the run

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "epochs": self.epochs,
            "num_classes": self.num_classes,
            "dim": self.dim,
            "params": dict(self.params),
            "predictions": [int(p) for p in self.predictions],
            "class_counts": [int(c) for c in self.class_counts],
            "min_class_proportion": float(self.min_class_proportion),
            "degenerate_updates": int(self.degenerate_updates),
            "final_mix_weight": float(self.final_mix_weight),
            "accuracy": None if self.accuracy is None else float(self.accuracy),
            "accumulated_accuracy": (
                None if self.accumulated_accuracy is None else float(self.accumulated_accuracy)
            ),
            "text_proxy_cosine": float(self.text_proxy_cosine),
            "learned_proxy_cosine": float(self.learned_proxy_cosine),
        }


class OnZeta:
    """Streaming engine; construct once, then feed embeddings through ``step``.

    ``mix_weight_fn`` overrides the mixing schedule when given: it receives
    the 1-based global step index and must return a weight in [0, 1] (handy
    for pinning a fixed weight when comparing schedules).
    """

    def __init__(self, text_proxies, params: HyperParams, mix_weight_fn=None):
        text_proxies = np.asarray(text_proxies, dtype=np.float64)
        if text_proxies.ndim != 2:
            raise ValueError(f"text proxies must be (C, d), got shape {text_proxies.shape}")
        norms = np.linalg.norm(text_proxies, axis=1)
        if np.any(norms < 1e-12):
            raise ValueError("text proxies contain a zero row")
        self.text_proxies = text_proxies / norms[:, None]
        self.params = params
        self.duals = DualState.fresh(text_proxies.shape[0])
        self.vision_proxies = self.text_proxies.copy()
        self.degenerate_updates = 0
        self.renormalized_inputs = 0
        if mix_weight_fn is None:
            schedule = MixSchedule(beta=params.beta, n_total=params.n_total)
            mix_weight_fn = lambda i: mixing_weight(i, schedule)
        self._mix_weight_fn = mix_weight_fn
        self.last_mix_weight = 0.0

    @property
    def num_classes(self) -> int:
        return self.text_proxies.shape[0]

    @property
    def dim(self) -> int:
        return self.text_proxies.shape[1]

    @property
    def step_index(self) -> int:
        """1-based index of the *next* sample to be processed."""
        return self.duals.step_index

    def step(self, x) -> StepResult:
        """Predict for one embedding, then advance duals and proxies."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected embedding of shape ({self.dim},), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("embedding contains non-finite values")
        norm = float(np.linalg.norm(x))
        if norm < 1e-12:
            raise ValueError("zero-norm embedding cannot be classified")
        if abs(norm - 1.0) > 1e-3:
            x = x / norm
            self.renormalized_inputs += 1

        i = self.duals.step_index
        q = softmax_similarity(x, self.text_proxies, self.params.tau_t)
        p_star = reweight_with_duals(q, self.duals)
        p_prime = proxy_probabilities(x, self.vision_proxies, self.params.tau_i)
        lam = float(self._mix_weight_fn(i))
        mixed = combine_predictions(p_prime, p_star, lam)
        loss = proxy_loss(p_star, p_prime)

        self.duals = update_duals(self.duals, p_star, self.params)
        grad = proxy_gradient(x, p_star, p_prime, self.params.tau_i)
        skipped = degenerate_rows(self.vision_proxies, grad, i, self.params.c_w)
        self.degenerate_updates += int(skipped.sum())
        self.vision_proxies = update_proxy(self.vision_proxies, grad, i, self.params.c_w)
        self.last_mix_weight = lam

        return StepResult(
            step_index=i,
            predicted_class=int(np.argmax(mixed)),
            mix_weight=lam,
            text_probs=q,
            balanced_probs=p_star,
            proxy_probs=p_prime,
            mixed_probs=mixed,
            proxy_loss=loss,
        )


def run_stream(
    embeddings,
    text_proxies,
    params: HyperParams,
    labels=None,
    mix_weight_fn=None,
    record_trajectory: bool = False,
):
    """Run the engine over a stream and summarize.

    The first epoch consumes rows in arrival order; later epochs (when
    ``params.epochs > 1``) revisit the data in fresh seeded shuffles, with
    step counters carrying across epochs so the learning-rate and mixing
    schedules keep decaying/ramping.  Predictions, the class histogram, and
    accuracy are taken from the final epoch only, aligned back to row order.

    ``params.n`` is the *declared* stream length feeding the mixing ramp; it
    need not match the actual row count — a stream that runs past it simply
    holds the mixing weight at its cap.  An unlabeled stream (``labels=None``)
    still gets full class statistics, just no accuracy figures.

    Returns ``RunReport``, or ``(RunReport, Trajectory)`` when
    ``record_trajectory=True``.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2:
        raise ValueError(f"embeddings must be (n, d), got shape {embeddings.shape}")
    n = embeddings.shape[0]
    if n == 0:
        raise ValueError("empty stream")
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise ValueError(f"labels shape {labels.shape} does not match {n} rows")

    engine = OnZeta(text_proxies, params, mix_weight_fn=mix_weight_fn)
    num_classes = engine.num_classes
    if labels is not None and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(
            f"label ids must lie in [0, {num_classes}), found range "
            f"[{labels.min()}, {labels.max()}]"
        )
    rng = np.random.default_rng(params.seed)

    n_steps = n * params.epochs
    if record_trajectory:
        traj = Trajectory(
            duals=np.zeros((n_steps, num_classes)),
            balanced_probs=np.zeros((n_steps, num_classes)),
            text_probs=np.zeros((n_steps, num_classes)),
            proxy_losses=np.zeros(n_steps),
            mix_weights=np.zeros(n_steps),
            sample_rows=np.zeros(n_steps, dtype=np.int64),
            predicted=np.zeros(n_steps, dtype=np.int64),
        )

    predictions = np.zeros(n, dtype=np.int64)
    correct_steps = 0
    step = 0
    for epoch in range(params.epochs):
        order = np.arange(n) if epoch == 0 else rng.permutation(n)
        final_epoch = epoch == params.epochs - 1
        for row in order:
            pre_duals = engine.duals.rho.copy() if record_trajectory else None
            result = engine.step(embeddings[row])
            if record_trajectory:
                traj.duals[step] = pre_duals
                traj.balanced_probs[step] = result.balanced_probs
                traj.text_probs[step] = result.text_probs
                traj.proxy_losses[step] = result.proxy_loss
                traj.mix_weights[step] = result.mix_weight
                traj.sample_rows[step] = row
                traj.predicted[step] = result.predicted_class
            if labels is not None:
                correct_steps += int(result.predicted_class == labels[row])
            if final_epoch:
                predictions[row] = result.predicted_class
            step += 1

    class_counts = np.bincount(predictions, minlength=num_classes)
    accuracy = None
    accumulated = None
    if labels is not None:
        accuracy = float(np.mean(predictions == labels))
        accumulated = correct_steps / n_steps
    report = RunReport(
        n=n,
        epochs=params.epochs,
        num_classes=num_classes,
        dim=engine.dim,
        params=params.to_dict(),
        predictions=predictions,
        class_counts=class_counts,
        min_class_proportion=float(class_counts.min() / n),
        degenerate_updates=engine.degenerate_updates,
        final_mix_weight=engine.last_mix_weight,
        accuracy=accuracy,
        accumulated_accuracy=accumulated,
        text_proxy_cosine=mean_nearest_proxy_cosine(embeddings, engine.text_proxies),
        learned_proxy_cosine=mean_nearest_proxy_cosine(embeddings, engine.vision_proxies),
    )
    if record_trajectory:
        return report, traj
    return report


def mean_nearest_proxy_cosine(embeddings, proxies) -> float:
    """Mean over rows of the best cosine to any proxy (all rows unit-norm)."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    proxies = np.asarray(proxies, dtype=np.float64)
    if embeddings.size == 0:
        raise ValueError("empty embedding batch")
    sims = embeddings @ proxies.T
    return float(sims.max(axis=1).mean())
