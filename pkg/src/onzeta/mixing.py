"""Bias-variance mixing of the text-space and vision-space predictions.

The text-side prediction is a biased but steady estimate; the vision-side one
is unbiased in the limit but noisy while the proxies are still young.  The
final prediction is a convex combination whose vision share grows like the
square root of stream progress, capped at ``beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .labels import check_simplex

__all__ = ["MixSchedule", "mixing_weight", "combine_predictions", "optimal_lambda"]


@dataclass
class MixSchedule:
    beta: float
    n_total: int

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.n_total < 1:
            raise ValueError(f"n_total must be >= 1, got {self.n_total}")


def mixing_weight(step_index: int, schedule: MixSchedule) -> float:
    """Vision-side weight ``beta * sqrt(i / n_total)``, clamped at ``beta``.

    The clamp only matters when a stream runs past its declared length.
    """
    if step_index < 1:
        raise ValueError(f"step_index starts at 1, got {step_index}")
    return min(schedule.beta, schedule.beta * math.sqrt(step_index / schedule.n_total))


def combine_predictions(p_prime, p_star, lam: float) -> np.ndarray:
    """Convex combination ``lam * p' + (1 - lam) * p*``.

    Accepts single distributions or batches of rows; the output stays on the
    simplex by convexity.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mixing weight must lie in [0, 1], got {lam}")
    p_prime = check_simplex(p_prime, "p_prime")
    p_star = check_simplex(p_star, "p_star")
    if p_prime.shape != p_star.shape:
        raise ValueError(
            f"shape mismatch: p_prime {p_prime.shape} vs p_star {p_star.shape}"
        )
    return lam * p_prime + (1.0 - lam) * p_star


def optimal_lambda(bias_sq: float, variance: float) -> float:
    """Weight minimizing the expected squared error of the mix.

    For a fixed bias on one side and zero-mean noise of the given variance on
    the other, the minimizer is ``bias^2 / (bias^2 + variance)``.
    """
    if bias_sq < 0 or variance < 0:
        raise ValueError("bias_sq and variance must be nonnegative")
    total = bias_sq + variance
    if total == 0:
        raise ValueError("undefined ratio: bias_sq and variance are both zero")
    return bias_sq / total
