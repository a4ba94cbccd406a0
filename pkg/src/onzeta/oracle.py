"""Offline reference solvers and convergence diagnostics.

The streaming engine only ever sees one sample at a time; everything here
gets the whole batch and grinds to (near-)optimality, which is what lets the
tests pin the online algorithm against ground truth:

* ``solve_offline_labels`` solves the batch class-balanced relabeling
  problem (minimum total KL to the text-proxy distributions subject to every
  class receiving at least ``alpha / C`` average mass) by projected dual
  ascent on the per-class multipliers.
* ``solve_offline_proxies`` fits the best fixed proxy matrix (unit rows) for
  a given target sequence by projected gradient descent with Armijo
  backtracking.
* ``duality_gap`` / ``onlab_gap_curve`` and ``proxy_regret_curve`` measure
  how fast the online trajectories approach those offline optima; both
  curves should fall roughly like 1/sqrt(n), i.e. have log-log slope near
  -1/2 (``fit_loglog_slope``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .labels import HyperParams, reweight_with_duals
from .pipeline import run_stream
from .proxies import proxy_probabilities

__all__ = [
    "OracleConvergenceError",
    "OfflineLabelSolution",
    "OfflineProxySolution",
    "RegretCurve",
    "solve_offline_labels",
    "solve_offline_proxies",
    "duality_gap",
    "onlab_gap_curve",
    "proxy_regret_curve",
    "fit_loglog_slope",
    "finite_difference_gradient",
]


class OracleConvergenceError(RuntimeError):
    """An offline solver hit its iteration cap before reaching tolerance."""


@dataclass
class OfflineLabelSolution:
    probs: np.ndarray        # (n, C) optimal balanced distributions
    duals: np.ndarray        # (C,) multipliers at the solution
    objective: float         # total KL(probs || text_probs), summed over rows
    iterations: int
    max_violation: float     # worst remaining shortfall below alpha / C


@dataclass
class OfflineProxySolution:
    proxies: np.ndarray      # (C, d) unit rows
    objective: float         # mean cross-entropy against the targets
    iterations: int
    grad_norm: float         # largest row norm of the tangent gradient


@dataclass
class RegretCurve:
    """A positive quantity evaluated at several stream lengths, plus its
    fitted log-log slope (so -0.5 means ~ 1/sqrt(n) decay)."""

    checkpoints: list  # of (n, value) pairs, strictly increasing in n
    fitted_slope: float

    def __post_init__(self):
        ns = [n for n, _ in self.checkpoints]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError(f"checkpoints must be strictly increasing in n, got {ns}")

    @property
    def ns(self) -> np.ndarray:
        return np.array([n for n, _ in self.checkpoints], dtype=np.int64)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.checkpoints], dtype=np.float64)


def _logsumexp(a, axis=-1):
    peak = np.max(a, axis=axis, keepdims=True)
    return np.squeeze(peak, axis) + np.log(np.sum(np.exp(a - peak), axis=axis))


def solve_offline_labels(
    text_probs,
    alpha: float,
    step_scale: float = 5.0,
    tol: float = 1e-6,
    max_iters: int = 100_000,
) -> OfflineLabelSolution:
    """Batch class-balanced relabeling by projected dual ascent.

    Finds the simplex rows ``p_i`` minimizing the total KL divergence to the
    given ``text_probs`` rows subject to ``mean_i p_{i,j} >= alpha / C`` for
    every class ``j``.  Each iteration takes the projected ascent step
    ``rho <- max(0, rho + eta * (alpha/C - mean_i p_i))`` on the smooth
    concave dual, with ``eta`` chosen by Armijo backtracking (starting from
    ``step_scale``, doubling between iterations): a fixed diminishing
    schedule oscillates at amplitude ~eta and cannot push the residuals to
    tight tolerances.  Iteration stops once the worst constraint shortfall
    and the primal objective progress both fall under ``tol``.
    """
    q = np.asarray(text_probs, dtype=np.float64)
    if q.ndim != 2:
        raise ValueError(f"text_probs must be (n, C), got shape {q.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    n, num_classes = q.shape
    floor = alpha / num_classes
    log_q = np.log(q)
    duals = np.zeros(num_classes)
    last_objective = np.inf
    iterations = 0

    def _dual_value(rho):
        # concave dual: mean of the closed-form inner minima plus the floor term
        return float(-_logsumexp(log_q + rho, axis=1).mean() + floor * rho.sum())

    def _evaluate(rho):
        probs = reweight_with_duals(q, rho)
        kl = np.sum(probs * (np.log(probs) - log_q))
        shortfall = np.maximum(0.0, floor - probs.mean(axis=0))
        return probs, kl, float(shortfall.max())

    probs, objective, violation = _evaluate(duals)
    step = step_scale
    for t in range(1, max_iters + 1):
        iterations = t
        if violation < tol and abs(last_objective - objective) < tol:
            break
        grad = floor - probs.mean(axis=0)
        value = _dual_value(duals)
        step = min(step * 2.0, 1e6)
        for _ in range(80):
            candidate = np.maximum(0.0, duals + step * grad)
            # projected-Armijo sufficient increase; the inner product is the
            # actual (clipped) move, nonnegative by the box geometry
            if _dual_value(candidate) >= value + 1e-4 * grad @ (candidate - duals):
                break
            step *= 0.5
        else:
            raise OracleConvergenceError(
                f"label solver: backtracking stalled at iteration {t} "
                f"(violation {violation:.3e})"
            )
        duals = candidate
        last_objective = objective
        probs, objective, violation = _evaluate(duals)
    else:
        raise OracleConvergenceError(
            f"label solver: {max_iters} iterations, violation still {violation:.3e}"
        )
    # Canonicalize: subtracting the smallest multiplier from all of them
    # leaves every reweighted row unchanged and never lowers the dual value
    # for alpha <= 1 (with alpha = 1 the dual is flat along constant shifts),
    # so report the representative with min rho = 0.
    shift = duals.min()
    if shift > 0:
        duals = duals - shift
        probs, objective, violation = _evaluate(duals)
    return OfflineLabelSolution(
        probs=probs,
        duals=duals,
        objective=float(objective),
        iterations=iterations,
        max_violation=violation,
    )


def _mean_proxy_loss(embeddings, targets, proxies, tau):
    logits = embeddings @ proxies.T / tau
    log_probs = logits - _logsumexp(logits, axis=1)[:, None]
    return float(-np.sum(targets * log_probs) / embeddings.shape[0])


def solve_offline_proxies(
    embeddings,
    targets,
    tau: float,
    init=None,
    tol: float = 1e-6,
    max_iters: int = 200_000,
) -> OfflineProxySolution:
    """Best fixed unit-row proxy matrix for a known target sequence.

    Minimizes the mean cross-entropy between ``targets`` and the softmax of
    embedding/proxy similarities via gradient descent, renormalizing rows
    after every step and backtracking (Armijo) on the step size.  Stops when
    the largest row norm of the sphere-tangent gradient drops below ``tol``,
    or when ten consecutive accepted steps each improve the objective by
    less than float precision allows resolving — at that point the value is
    numerically stationary and ``grad_norm`` reports how flat the tail was.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or targets.ndim != 2 or x.shape[0] != targets.shape[0]:
        raise ValueError(
            f"need aligned (n, d) embeddings and (n, C) targets, got {x.shape} and {targets.shape}"
        )
    n, num_classes = targets.shape
    if init is None:
        proxies = targets.T @ x
        norms = np.linalg.norm(proxies, axis=1, keepdims=True)
        rng = np.random.default_rng(0)
        fallback = rng.standard_normal(proxies.shape)
        proxies = np.where(norms > 1e-12, proxies, fallback)
    else:
        proxies = np.array(init, dtype=np.float64)
        if proxies.shape != (num_classes, x.shape[1]):
            raise ValueError(
                f"init shape {proxies.shape} does not match ({num_classes}, {x.shape[1]})"
            )
    proxies = proxies / np.linalg.norm(proxies, axis=1, keepdims=True)

    objective = _mean_proxy_loss(x, targets, proxies, tau)
    step = 1.0
    iterations = 0
    grad_norm = np.inf
    stalled = 0
    for t in range(1, max_iters + 1):
        iterations = t
        probs = proxy_probabilities(x, proxies, tau)
        grad = (probs - targets).T @ x / (tau * n)
        tangent = grad - np.sum(grad * proxies, axis=1, keepdims=True) * proxies
        grad_norm = float(np.linalg.norm(tangent, axis=1).max())
        if grad_norm < tol:
            break
        sq_norm = float(np.sum(tangent * tangent))
        step = min(step * 2.0, 1e6)
        for _ in range(80):
            candidate = proxies - step * grad
            candidate /= np.linalg.norm(candidate, axis=1, keepdims=True)
            new_objective = _mean_proxy_loss(x, targets, candidate, tau)
            if new_objective <= objective - 1e-4 * step * sq_norm:
                break
            step *= 0.5
        else:
            raise OracleConvergenceError(
                f"proxy solver: backtracking stalled at iteration {t} "
                f"(gradient norm {grad_norm:.3e})"
            )
        proxies = candidate
        improvement = objective - new_objective
        objective = new_objective
        if improvement <= 1e-13 * max(1.0, abs(objective)):
            stalled += 1
            if stalled >= 10:
                break
        else:
            stalled = 0
    else:
        raise OracleConvergenceError(
            f"proxy solver: {max_iters} iterations, gradient norm still {grad_norm:.3e}"
        )
    return OfflineProxySolution(
        proxies=proxies,
        objective=float(objective),
        iterations=iterations,
        grad_norm=grad_norm,
    )


def duality_gap(duals, balanced_probs, text_probs, alpha: float, box_radius: float = 10.0) -> float:
    """Primal-minus-dual value of a balanced-relabeling trajectory.

    ``text_probs`` holds the per-step distributions ``q_i``, and
    ``balanced_probs`` the (online or offline) reweighted rows actually
    chosen for them.  ``duals`` is either one multiplier vector or the
    per-step multipliers actually used (one row per step, each *before* that
    step's update).  The primal side scores the chosen rows at the most
    adversarial multiplier in the box ``[0, box_radius]^C`` — their average
    KL plus ``box_radius`` per unit of average constraint shortfall; the
    dual side averages the concave dual function along the trajectory.  The
    result is nonnegative whenever the multipliers stay within the box and
    shrinks as the trajectory approaches the offline optimum.
    """
    q = np.asarray(text_probs, dtype=np.float64)
    p = np.asarray(balanced_probs, dtype=np.float64)
    if q.ndim != 2 or p.shape != q.shape:
        raise ValueError(
            f"need matching (n, C) balanced_probs and text_probs, got {p.shape} and {q.shape}"
        )
    n, num_classes = q.shape
    rho = np.asarray(duals, dtype=np.float64)
    if rho.ndim == 1:
        rho = np.broadcast_to(rho, (n, num_classes))
    if rho.shape != (n, num_classes):
        raise ValueError(f"duals shape {rho.shape} does not match {(n, num_classes)}")
    floor = alpha / num_classes

    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(np.where(p > 0, p, 1.0)) - np.log(q)), 0.0)
    kl = terms.sum(axis=1).mean()
    shortfall = np.maximum(0.0, floor - p.mean(axis=0)).sum()
    primal = kl + box_radius * shortfall

    # min over the simplex of KL(p || q) - rho . p, in closed form; a row of
    # zero multipliers gives log(sum q) = log 1 = 0 exactly by the simplex
    # constraint, so take that branch without the exp/log round trip
    lse = _logsumexp(np.log(q) + rho, axis=1)
    inner_min = -np.where(rho.any(axis=1), lse, 0.0)
    dual = float(inner_min.mean() + floor * rho.sum(axis=1).mean())
    return float(primal - dual)


def onlab_gap_curve(embeddings, text_proxies, params: HyperParams, ns) -> RegretCurve:
    """Duality gap of one streaming run, evaluated at several prefix lengths.

    The stream is run once (``params.n`` must equal the longest prefix); the
    gap at each ``n`` uses only the first ``n`` steps, which is exactly what
    the online updates had seen by then.  The primal-side evaluation box is
    widened (from the default 10) to cover the largest multiplier the run
    actually played — sharply separated streams can push duals well past
    any fixed radius, and a box that fails to contain them would report
    meaningless negative gaps.
    """
    ns = np.asarray(sorted(int(n) for n in ns), dtype=np.int64)
    if params.n != ns[-1]:
        raise ValueError(f"params.n = {params.n} but the longest prefix is {ns[-1]}")
    if params.epochs != 1:
        raise ValueError("gap curves are defined for single-epoch runs")
    _, trajectory = run_stream(
        embeddings, text_proxies, params, record_trajectory=True
    )
    box_radius = max(10.0, float(trajectory.duals.max()))
    values = np.array(
        [
            duality_gap(
                trajectory.duals[:n],
                trajectory.balanced_probs[:n],
                trajectory.text_probs[:n],
                params.alpha,
                box_radius=box_radius,
            )
            for n in ns
        ]
    )
    return RegretCurve(
        checkpoints=[(int(n), float(v)) for n, v in zip(ns, values)],
        fitted_slope=fit_loglog_slope(ns, values),
    )


def proxy_regret_curve(embeddings, text_proxies, params: HyperParams, ns) -> RegretCurve:
    """Average online proxy loss minus the offline optimum, per prefix.

    For each prefix length the offline solver refits the best fixed proxy
    matrix for the exact target sequence the online learner faced, so the
    difference is a true regret: it is nonnegative and should decay toward
    zero as the schedule's 1/sqrt(i) steps average out.
    """
    ns = np.asarray(sorted(int(n) for n in ns), dtype=np.int64)
    if params.n != ns[-1]:
        raise ValueError(f"params.n = {params.n} but the longest prefix is {ns[-1]}")
    if params.epochs != 1:
        raise ValueError("regret curves are defined for single-epoch runs")
    embeddings = np.asarray(embeddings, dtype=np.float64)
    _, trajectory = run_stream(
        embeddings, text_proxies, params, record_trajectory=True
    )
    values = []
    for n in ns:
        online = trajectory.proxy_losses[:n].mean()
        offline = solve_offline_proxies(
            embeddings[trajectory.sample_rows[:n]],
            trajectory.balanced_probs[:n],
            params.tau_i,
            init=text_proxies,
        )
        values.append(float(online - offline.objective))
    return RegretCurve(
        checkpoints=[(int(n), v) for n, v in zip(ns, values)],
        fitted_slope=fit_loglog_slope(ns, np.array(values)),
    )


def fit_loglog_slope(ns, values) -> float:
    """Least-squares slope of log(values) against log(ns).

    Values are floored at 1e-12 so an exactly-converged point (value 0)
    reads as a steep drop instead of blowing up the fit.
    """
    ns = np.asarray(ns, dtype=np.float64)
    values = np.maximum(np.asarray(values, dtype=np.float64), 1e-12)
    if ns.shape != values.shape or ns.ndim != 1 or ns.size < 2:
        raise ValueError("need two or more aligned (n, value) pairs")
    slope, _ = np.polyfit(np.log(ns), np.log(values), 1)
    return float(slope)


def finite_difference_gradient(fn, x, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function, any array shape."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    base = x.copy()
    for k in range(base.size):
        bump = np.zeros_like(base).reshape(-1)
        bump[k] = eps
        bump = bump.reshape(base.shape)
        flat[k] = (fn(base + bump) - fn(base - bump)) / (2.0 * eps)
    return grad
