"""Online label learning over an embedding stream.

Each arriving embedding gets a text-space class distribution (softmax over
cosine similarities against fixed class proxies), which is then reweighted by
one nonnegative balance multiplier per class.  A class that has been receiving
less than its guaranteed share ``alpha / C`` of probability mass is boosted
multiplicatively at the next prediction; over-assigned classes decay back
toward the raw text-space prediction.  The multipliers are learned by
projected gradient ascent with a ``c_rho / sqrt(i)`` step size, so the whole
learner needs O(C) memory regardless of stream length.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

__all__ = [
    "SIMPLEX_ATOL",
    "DualState",
    "HyperParams",
    "check_simplex",
    "softmax_similarity",
    "reweight_with_duals",
    "update_duals",
]

# Tolerance on "sums to one" for anything claiming to be a distribution.
SIMPLEX_ATOL = 1e-9


def check_simplex(p, name: str = "probabilities") -> np.ndarray:
    """Validate that ``p`` (last axis) lies on the probability simplex.

    Accepts a single vector or a batch of row vectors; returns the validated
    float64 array.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 0:
        raise ValueError(f"{name} must be a vector, got a scalar")
    if np.any(p < 0):
        raise ValueError(f"{name} has negative entries")
    sums = p.sum(axis=-1)
    if not np.allclose(sums, 1.0, rtol=0.0, atol=SIMPLEX_ATOL):
        raise ValueError(f"{name} must sum to 1 within {SIMPLEX_ATOL}")
    return p


def _stable_softmax(logits: np.ndarray) -> np.ndarray:
    # Max-logit subtraction: temperatures like 0.01 push logits to +-100,
    # which would overflow a naive exp at 32-bit and lose digits at 64-bit.
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_similarity(x, proxies, tau: float) -> np.ndarray:
    """Class distribution from cosine logits: ``softmax(x @ proxies.T / tau)``.

    ``x`` is a unit vector ``(d,)`` or a batch ``(n, d)``; ``proxies`` is the
    ``(C, d)`` matrix of unit class proxies.  Returns ``(C,)`` or ``(n, C)``.
    """
    x = np.asarray(x, dtype=np.float64)
    proxies = np.asarray(proxies, dtype=np.float64)
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    if proxies.ndim != 2:
        raise ValueError(f"proxies must be a 2-D matrix, got shape {proxies.shape}")
    if x.ndim == 0 or x.shape[-1] != proxies.shape[1]:
        raise ValueError(
            f"embedding dimension {x.shape[-1] if x.ndim else '()'} does not match "
            f"proxy dimension {proxies.shape[1]}"
        )
    return _stable_softmax(x @ proxies.T / tau)


@dataclass
class DualState:
    """Per-class balance multipliers plus the 1-based sample counter.

    ``step_index`` is the ordinal of the next sample to be processed.  The
    first sample sees ``step_index == 1``, so the ascent step size
    ``c_rho / sqrt(step_index)`` is defined from the start, and the counter
    keeps running across epochs so the decay schedule never resets.
    """

    rho: np.ndarray
    step_index: int = 1

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=np.float64)
        if self.rho.ndim != 1:
            raise ValueError(f"rho must be a vector, got shape {self.rho.shape}")
        if np.any(self.rho < 0):
            raise ValueError("dual variables must be nonnegative")
        if self.step_index < 1:
            raise ValueError(f"step_index starts at 1, got {self.step_index}")

    @classmethod
    def fresh(cls, num_classes: int) -> "DualState":
        return cls(rho=np.zeros(num_classes), step_index=1)

    @property
    def num_classes(self) -> int:
        return self.rho.shape[0]


@dataclass
class HyperParams:
    """Stream-run configuration.

    ``n`` is the declared stream length (the mixing schedule needs it up
    front; runs that overshoot it simply saturate the schedule).  The other
    defaults are the reference operating point: ``alpha=1`` asks for a fully
    balanced assignment, ``beta=0.8`` caps the vision-side mixing weight, the
    step constants are ``c_rho=20`` and ``c_w=0.5``, and the temperatures are
    ``tau_t=0.01`` (text) and ``tau_i=0.04`` (vision).
    """

    n: int
    alpha: float = 1.0
    beta: float = 0.8
    c_rho: float = 20.0
    c_w: float = 0.5
    tau_t: float = 0.01
    tau_i: float = 0.04
    epochs: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.c_rho <= 0 or self.c_w <= 0:
            raise ValueError("step constants c_rho and c_w must be positive")
        if self.tau_t <= 0 or self.tau_i <= 0:
            raise ValueError("temperatures must be positive")
        if self.n < 1:
            raise ValueError(f"declared stream length must be >= 1, got {self.n}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.tau_i <= self.tau_t:
            # The vision temperature is meant to be the larger of the two;
            # equal or smaller values are legal but usually a mistake.
            warnings.warn(
                f"tau_i ({self.tau_i}) should exceed tau_t ({self.tau_t})",
                stacklevel=2,
            )

    @property
    def n_total(self) -> int:
        """Declared total step count across all epochs."""
        return self.n * self.epochs

    def to_dict(self) -> dict:
        return asdict(self)


def reweight_with_duals(q, duals) -> np.ndarray:
    """Boost each class by ``exp(rho_j)`` and renormalize.

    This is the closed-form minimizer of ``KL(p || q) - rho . p`` over the
    simplex; with all multipliers at zero the input comes back unchanged.
    ``q`` may be a single distribution or a batch of rows, and ``duals`` may
    be a :class:`DualState` or a raw nonnegative vector.
    """
    rho = duals.rho if isinstance(duals, DualState) else np.asarray(duals, dtype=np.float64)
    q = check_simplex(q, "q")
    if np.any(rho < 0):
        raise ValueError("dual variables must be nonnegative")
    if q.shape[-1] != rho.shape[-1]:
        raise ValueError(
            f"q has {q.shape[-1]} classes but duals have {rho.shape[-1]}"
        )
    if not rho.any():
        # identity in exact arithmetic; honor it bit-for-bit rather than
        # round-tripping through exp/log
        return q.copy()
    boosted = q * np.exp(rho - rho.max())
    return boosted / boosted.sum(axis=-1, keepdims=True)


def update_duals(duals: DualState, p_star, params: HyperParams) -> DualState:
    """One projected ascent step on the balance multipliers.

    ``rho_j <- max(0, rho_j - eta * (p*_j - alpha / C))`` with
    ``eta = c_rho / sqrt(step_index)``; the returned state has the sample
    counter advanced by one.  With ``alpha = 0`` and zero-initialized
    multipliers this is a no-op apart from the counter.
    """
    p_star = check_simplex(p_star, "p_star")
    if p_star.shape != duals.rho.shape:
        raise ValueError(
            f"p_star shape {p_star.shape} does not match duals shape {duals.rho.shape}"
        )
    eta = params.c_rho / math.sqrt(duals.step_index)
    target = params.alpha / duals.num_classes
    rho_new = np.maximum(0.0, duals.rho - eta * (p_star - target))
    return DualState(rho=rho_new, step_index=duals.step_index + 1)
