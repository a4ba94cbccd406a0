"""Online vision-proxy learning.

The vision-space classifier is a matrix of per-class unit vectors, started at
the text proxies and pulled toward the arriving embeddings by projected
gradient steps: cross-entropy against the reweighted text-space label, one
``c_w / sqrt(i)`` step per sample, then renormalization of every row back to
the unit sphere.
"""

from __future__ import annotations

import math

import numpy as np

from .labels import check_simplex, softmax_similarity

__all__ = [
    "DEGENERATE_NORM",
    "proxy_probabilities",
    "proxy_loss",
    "proxy_gradient",
    "update_proxy",
    "degenerate_rows",
]

# A stepped row shorter than this cannot be projected back to the sphere.
DEGENERATE_NORM = 1e-12


def proxy_probabilities(x, proxies, tau_i: float) -> np.ndarray:
    """Vision-space class distribution ``softmax(x @ proxies.T / tau_i)``.

    Same kernel as :func:`onzeta.labels.softmax_similarity`; kept as its own
    entry point because it runs at the vision temperature, which is larger
    than the text one.
    """
    return softmax_similarity(x, proxies, tau_i)


def proxy_loss(p_star, p_prime) -> float:
    """Cross-entropy ``-sum_j p*_j log p'_j`` of the vision prediction
    against the reweighted text-space label."""
    p_star = check_simplex(p_star, "p_star")
    p_prime = check_simplex(p_prime, "p_prime")
    if p_star.shape != p_prime.shape:
        raise ValueError(
            f"shape mismatch: p_star {p_star.shape} vs p_prime {p_prime.shape}"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p_star > 0, -p_star * np.log(p_prime), 0.0)
    return float(terms.sum())


def proxy_gradient(x, p_star, p_prime, tau_i: float) -> np.ndarray:
    """Gradient of the per-sample cross-entropy with respect to the proxies.

    Row ``j`` is ``(p'_j - p*_j) * x / tau_i``; the rows always sum to the
    zero vector because both distributions have unit mass.
    """
    x = np.asarray(x, dtype=np.float64)
    p_star = check_simplex(p_star, "p_star")
    p_prime = check_simplex(p_prime, "p_prime")
    if p_star.shape != p_prime.shape:
        raise ValueError(
            f"shape mismatch: p_star {p_star.shape} vs p_prime {p_prime.shape}"
        )
    if tau_i <= 0:
        raise ValueError(f"temperature must be positive, got {tau_i}")
    return np.outer(p_prime - p_star, x) / tau_i


def degenerate_rows(proxies, grad, step_index: int, c_w: float) -> np.ndarray:
    """Boolean mask of rows whose stepped norm falls below DEGENERATE_NORM."""
    eta = c_w / math.sqrt(step_index)
    stepped = np.asarray(proxies, dtype=np.float64) - eta * np.asarray(grad, dtype=np.float64)
    return np.linalg.norm(stepped, axis=1) < DEGENERATE_NORM


def update_proxy(proxies, grad, step_index: int, c_w: float) -> np.ndarray:
    """Gradient step then per-row projection back to the unit sphere.

    ``eta = c_w / sqrt(step_index)``.  A row whose stepped norm lands below
    ``DEGENERATE_NORM`` is left at its previous value, since the projection is
    undefined that close to the origin (with ``c_w <= 0.5`` and unit inputs
    this does not happen in practice).
    """
    proxies = np.asarray(proxies, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if proxies.shape != grad.shape:
        raise ValueError(
            f"gradient shape {grad.shape} does not match proxies {proxies.shape}"
        )
    if step_index < 1:
        raise ValueError(f"step_index starts at 1, got {step_index}")
    if c_w <= 0:
        raise ValueError(f"c_w must be positive, got {c_w}")
    eta = c_w / math.sqrt(step_index)
    stepped = proxies - eta * grad
    norms = np.linalg.norm(stepped, axis=1)
    degenerate = norms < DEGENERATE_NORM
    safe = np.where(degenerate, 1.0, norms)
    projected = stepped / safe[:, None]
    return np.where(degenerate[:, None], proxies, projected)
