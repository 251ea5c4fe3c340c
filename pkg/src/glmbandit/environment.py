"""Synthetic ground-truth world: contexts, rewards, and regret accounting.

The environment is the only component that holds the true parameter
vector.  Rewards follow ``Y = mu(X'theta*) + eps`` where the noise is
either exact Bernoulli deviation (logistic link only; sub-Gaussian with
scale 1/2) or centered Gaussian with a configured scale.  Gaussian rewards
are deliberately not clipped to [0, 1]: clipping would break the exact GLM
mean structure, and only sub-Gaussianity matters downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from . import rng as streams
from .errors import InvalidConfigError
from .links import LinkFunction

CONTEXT_DISTRIBUTIONS = ("uniform_ball", "sphere", "gaussian_normalized", "fixed")
NOISE_KINDS = ("bernoulli", "gaussian")

BERNOULLI_SUB_GAUSSIAN_SIGMA = 0.5


def sample_context_batch(
    gen: np.random.Generator,
    dist: str,
    n: int,
    d: int,
    fixed_contexts: np.ndarray | None = None,
) -> np.ndarray:
    """Draw n iid feature vectors from the named distribution, norms <= 1."""
    if dist == "fixed":
        if fixed_contexts is None:
            raise InvalidConfigError("context_dist 'fixed' requires fixed_contexts")
        if n != fixed_contexts.shape[0]:
            raise InvalidConfigError("fixed contexts must supply one vector per arm")
        return fixed_contexts
    z = gen.standard_normal((n, d))
    norms = np.linalg.norm(z, axis=1)
    norms[norms == 0.0] = 1.0
    if dist == "sphere":
        return z / norms[:, None]
    if dist == "uniform_ball":
        radii = gen.random(n) ** (1.0 / d)
        return z / norms[:, None] * radii[:, None]
    if dist == "gaussian_normalized":
        # N(0, I/d) draws, rescaled onto the unit sphere when they land
        # outside the ball.
        scaled = norms / np.sqrt(d)
        shrink = np.maximum(scaled, 1.0)
        return z / np.sqrt(d) / shrink[:, None]
    raise InvalidConfigError(f"unknown context distribution {dist!r}")


def second_moment_min_eig(
    dist: str, d: int, fixed_contexts: np.ndarray | None = None
) -> float:
    """Smallest eigenvalue of E[X X'] for the named context distribution.

    By radial symmetry the first three distributions have E[X X'] = c I:
    c = 1/(d+2) for the uniform ball, 1/d for the sphere, and for the
    clipped N(0, I/d) draw c = [P(chi2_{d+2} <= d) + P(chi2_d > d)] / d
    (split E[min(|Z|^2, 1)] at the clipping boundary).
    """
    if dist == "uniform_ball":
        return 1.0 / (d + 2)
    if dist == "sphere":
        return 1.0 / d
    if dist == "gaussian_normalized":
        return float(chi2.cdf(d, d + 2) + chi2.sf(d, d)) / d
    if dist == "fixed":
        if fixed_contexts is None:
            raise InvalidConfigError("context_dist 'fixed' requires fixed_contexts")
        gram = fixed_contexts.T @ fixed_contexts / fixed_contexts.shape[0]
        return float(np.linalg.eigvalsh(gram)[0])
    raise InvalidConfigError(f"unknown context distribution {dist!r}")


def draw_theta_star(gen: np.random.Generator, d: int, norm: float) -> np.ndarray:
    """Uniform draw from the sphere of the given radius."""
    z = gen.standard_normal(d)
    z_norm = float(np.linalg.norm(z))
    if z_norm == 0.0:
        z, z_norm = np.ones(d), float(np.sqrt(d))
    return z / z_norm * norm


@dataclass
class Environment:
    d: int
    K: int
    theta_star: np.ndarray
    link: LinkFunction
    noise: str
    sigma: float
    context_dist: str
    contexts_rng: np.random.Generator
    rewards_rng: np.random.Generator
    fixed_contexts: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.noise not in NOISE_KINDS:
            raise InvalidConfigError(f"unknown noise kind {self.noise!r}")
        if self.noise == "bernoulli" and self.link.kind != "logistic":
            raise InvalidConfigError("bernoulli rewards require the logistic link")
        if self.noise == "gaussian" and self.sigma < 0:
            raise InvalidConfigError("gaussian noise scale must be nonnegative")
        if self.context_dist not in CONTEXT_DISTRIBUTIONS:
            raise InvalidConfigError(f"unknown context distribution {self.context_dist!r}")
        self.theta_star = np.asarray(self.theta_star, dtype=float)
        if self.theta_star.shape != (self.d,):
            raise InvalidConfigError("theta_star must have length d")
        if self.fixed_contexts is not None:
            self.fixed_contexts = np.asarray(self.fixed_contexts, dtype=float)
            if self.fixed_contexts.shape != (self.K, self.d):
                raise InvalidConfigError("fixed_contexts must have shape (K, d)")
            if (np.linalg.norm(self.fixed_contexts, axis=1) > 1.0 + 1e-12).any():
                raise InvalidConfigError("fixed contexts must lie in the unit ball")

    @classmethod
    def build(
        cls,
        *,
        d: int,
        K: int,
        link: LinkFunction,
        noise: str,
        sigma: float,
        context_dist: str,
        theta_norm: float,
        master_seed: int,
        replication: int,
        fixed_contexts: np.ndarray | None = None,
        theta_star: np.ndarray | None = None,
    ) -> Environment:
        """Construct the world for one replication, with its own streams."""
        if theta_star is None:
            theta_gen = streams.stream(master_seed, replication, streams.THETA)
            theta_star = draw_theta_star(theta_gen, d, theta_norm)
        return cls(
            d=d,
            K=K,
            theta_star=theta_star,
            link=link,
            noise=noise,
            sigma=sigma,
            context_dist=context_dist,
            contexts_rng=streams.stream(master_seed, replication, streams.CONTEXTS),
            rewards_rng=streams.stream(master_seed, replication, streams.REWARDS),
            fixed_contexts=fixed_contexts,
        )

    @property
    def sub_gaussian_sigma(self) -> float:
        """Noise scale entering the confidence formulas."""
        if self.noise == "bernoulli":
            return BERNOULLI_SUB_GAUSSIAN_SIGMA
        return self.sigma

    def sample_contexts(self) -> np.ndarray:
        """One round's K feature vectors, iid across arms and rounds."""
        return sample_context_batch(
            self.contexts_rng, self.context_dist, self.K, self.d, self.fixed_contexts
        )

    def mean_reward(self, x: np.ndarray) -> float:
        return float(self.link.mu(float(x @ self.theta_star)))

    def arm_means(self, contexts: np.ndarray) -> np.ndarray:
        return np.asarray(self.link.mu(contexts @ self.theta_star), dtype=float)

    def sample_reward(self, x: np.ndarray) -> float:
        """Draw one reward for the chosen feature vector.

        Exactly one generator call per round, whichever arm was chosen, so
        runs with a shared seed stay paired across policies.
        """
        mean = self.mean_reward(x)
        if self.noise == "bernoulli":
            return float(self.rewards_rng.random() < mean)
        return mean + self.sigma * float(self.rewards_rng.standard_normal())

    def optimal_arm(self, contexts: np.ndarray) -> int:
        # mu is strictly increasing, so the linear scale has the same argmax.
        return int(np.argmax(contexts @ self.theta_star))

    def instantaneous_regret(self, contexts: np.ndarray, chosen: int) -> float:
        means = self.arm_means(contexts)
        return float(means.max() - means[chosen])
