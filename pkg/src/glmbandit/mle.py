"""Online maximum-likelihood estimation for the GLM reward model.

The estimate solves the score equation

    sum_i (y_i - mu(x_i' theta)) x_i = 0

by damped Newton steps with the Fisher matrix
``sum_i mu'(x_i' theta) x_i x_i'`` as the step matrix.  The log-likelihood
is concave for the built-in links, so Newton with step halving is the
standard solver; bandit callers warm-start from the previous round's
estimate, which keeps per-round cost to one or two iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import min_eigenvalue
from .errors import SingularFisherError
from .links import LinkFunction

FISHER_EIGENVALUE_FLOOR = 1e-10
FISHER_RIDGE = 1e-8

_MAX_HALVINGS = 40


@dataclass
class MleResult:
    theta: np.ndarray
    iterations: int
    converged: bool
    final_score_norm: float


def score_vector(link: LinkFunction, xs: np.ndarray, ys: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Gradient of the GLM log-likelihood at theta."""
    return xs.T @ (ys - link.mu(xs @ theta))


def mle_fit(
    link: LinkFunction,
    xs: np.ndarray,
    ys: np.ndarray,
    warm_start: np.ndarray | None = None,
    tolerance: float = 1e-8,
    max_iterations: int = 100,
) -> MleResult:
    """Solve the score equation; convergence is sup-norm of the score.

    Never raises on non-convergence: the returned result carries the last
    iterate with ``converged=False`` and callers decide whether to proceed
    with it.  Raises SingularFisherError only if the step matrix stays
    below the eigenvalue floor even after adding a small ridge.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    n, d = xs.shape
    if n < 1:
        raise ValueError("mle_fit needs at least one observation")
    theta = np.zeros(d) if warm_start is None else np.asarray(warm_start, dtype=float).copy()
    if theta.shape != (d,):
        raise ValueError(f"warm start must have length {d}")

    score = score_vector(link, xs, ys, theta)
    snorm = float(np.abs(score).max())
    iterations = 0
    while iterations < max_iterations and snorm > tolerance:
        iterations += 1
        weights = link.mu_dot(xs @ theta)
        fisher = (xs * weights[:, None]).T @ xs
        if min_eigenvalue(fisher) < FISHER_EIGENVALUE_FLOOR:
            fisher = fisher + FISHER_RIDGE * np.eye(d)
            if min_eigenvalue(fisher) < FISHER_EIGENVALUE_FLOOR:
                raise SingularFisherError(
                    f"Fisher matrix singular at iteration {iterations} (n={n}, d={d})"
                )
        step = np.linalg.solve(fisher, score)

        # Step halving until the score norm decreases; keep the best
        # candidate seen so a stalled search still makes the least-bad move.
        best_theta, best_score, best_norm = None, None, np.inf
        scale = 1.0
        for _ in range(_MAX_HALVINGS):
            cand = theta + scale * step
            cand_score = score_vector(link, xs, ys, cand)
            cand_norm = float(np.abs(cand_score).max())
            if cand_norm < best_norm:
                best_theta, best_score, best_norm = cand, cand_score, cand_norm
            if cand_norm < snorm:
                break
            scale *= 0.5
        theta, score, snorm = best_theta, best_score, best_norm

    return MleResult(
        theta=theta,
        iterations=iterations,
        converged=snorm <= tolerance,
        final_score_norm=snorm,
    )
