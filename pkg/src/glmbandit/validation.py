"""Monte Carlo checks of the high-probability guarantees.

Each check replays the generative model many times, evaluates the claimed
inequality on every replication, and reports the empirical hit rate next
to the nominal level.  Over-coverage always counts as a pass (the
guarantees are one-sided); the standard acceptance slack is three binomial
standard errors.  A finite probe over directions or replications can only
falsify, never certify, a for-all statement, so reports record exactly
what was probed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as streams
from .design import min_eigenvalue, weighted_norm
from .environment import (
    BERNOULLI_SUB_GAUSSIAN_SIGMA,
    Environment,
    draw_theta_star,
    sample_context_batch,
    second_moment_min_eig,
)
from .errors import InvalidConfigError
from .links import LinkFunction, compute_kappa
from .mle import mle_fit
from .policies import PolicyConfig, UcbGlmPolicy, alpha_from_rule, tau_for_ucb


@dataclass
class CoverageReport:
    replications: int
    hits: int
    nominal: float
    condition_satisfied: bool
    nonconvergent: int = 0
    hit_flags: list[bool] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def empirical_coverage(self) -> float:
        return self.hits / self.replications if self.replications else float("nan")

    @property
    def binomial_stderr(self) -> float:
        if not self.replications:
            return float("nan")
        p = self.empirical_coverage
        return math.sqrt(p * (1.0 - p) / self.replications)

    def passes(self, slack_stderrs: float = 3.0) -> bool:
        return self.empirical_coverage >= self.nominal - slack_stderrs * self.binomial_stderr

    def to_dict(self) -> dict:
        return {
            "replications": self.replications,
            "hits": self.hits,
            "empirical_coverage": self.empirical_coverage,
            "nominal": self.nominal,
            "condition_satisfied": self.condition_satisfied,
            "binomial_stderr": self.binomial_stderr,
            "nonconvergent": self.nonconvergent,
            "passes_3se": self.passes(),
            "details": self.details,
        }


def probe_directions(d: int, n_random: int, master_seed: int = 0) -> np.ndarray:
    """Standard basis plus seeded random unit vectors."""
    gen = streams.stream(master_seed, 0, streams.DIRECTIONS)
    dirs = [np.eye(d)]
    if n_random > 0:
        z = gen.standard_normal((n_random, d))
        dirs.append(z / np.linalg.norm(z, axis=1)[:, None])
    return np.vstack(dirs)


def _noise_sigma(noise: str, sigma: float | None) -> float:
    if noise == "bernoulli":
        return BERNOULLI_SUB_GAUSSIAN_SIGMA
    if sigma is None:
        raise InvalidConfigError("gaussian noise requires sigma")
    return float(sigma)


def _draw_sample(
    link: LinkFunction,
    n: int,
    d: int,
    noise: str,
    sigma: float,
    context_dist: str,
    theta: np.ndarray,
    master_seed: int,
    replication: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """n iid (context, reward) pairs plus the realized noise vector.

    Gaussian noise is sigma times a unit normal draw, so scaling sigma
    scales the realized noise linearly for a fixed seed.
    """
    ctx_gen = streams.stream(master_seed, replication, streams.CONTEXTS)
    rew_gen = streams.stream(master_seed, replication, streams.REWARDS)
    xs = sample_context_batch(ctx_gen, context_dist, n, d)
    means = np.asarray(link.mu(xs @ theta), dtype=float)
    if noise == "bernoulli":
        ys = (rew_gen.random(n) < means).astype(float)
    else:
        ys = means + sigma * rew_gen.standard_normal(n)
    return xs, ys, ys - means


def normality_condition_threshold(
    link: LinkFunction, d: int, sigma: float, delta: float, kappa: float
) -> float:
    """Design-eigenvalue level sufficient for the directional bound.

    For curved links: 512 M^2 sigma^2 / kappa^4 * (d^2 + log(1/delta)).
    A zero curvature bound (identity link) makes that vacuous and only the
    consistency level 16 sigma^2 (d + log(1/delta)) / kappa^2 remains.
    """
    m = link.curvature_bound
    if m > 0:
        return 512.0 * m**2 * sigma**2 / kappa**4 * (d**2 + math.log(1.0 / delta))
    return 16.0 * sigma**2 * (d + math.log(1.0 / delta)) / kappa**2


def theorem1_coverage(
    link: LinkFunction,
    d: int,
    n: int,
    sigma: float | None,
    delta: float,
    directions: np.ndarray,
    replications: int,
    *,
    noise: str = "gaussian",
    context_dist: str = "uniform_ball",
    theta_norm: float = 1.0,
    theta_star: np.ndarray | None = None,
    master_seed: int = 0,
) -> CoverageReport:
    """Simultaneous coverage of |x'(theta_hat - theta*)| over the probe set.

    Per replication: draw n iid contexts, generate rewards, fit the MLE,
    and count a hit when every probed direction satisfies

        |x'(theta_hat - theta*)| <= (3 sigma / kappa) sqrt(log(1/delta)) |x|_{V^{-1}}

    The nominal level is 1 - 3 delta.  The report also records whether the
    sufficient design condition held (runs are flagged, never blocked).
    """
    if n < d:
        raise InvalidConfigError("theorem1 check needs n >= d")
    sig = _noise_sigma(noise, sigma)
    directions = np.asarray(directions, dtype=float)
    hits = 0
    nonconvergent = 0
    hit_flags: list[bool] = []
    condition_all = True
    for rep in range(replications):
        if theta_star is None:
            theta_gen = streams.stream(master_seed, rep, streams.THETA)
            theta = draw_theta_star(theta_gen, d, theta_norm)
        else:
            theta = np.asarray(theta_star, dtype=float)
        kappa = compute_kappa(link, float(np.linalg.norm(theta)))
        xs, ys, _ = _draw_sample(
            link, n, d, noise, sig, context_dist, theta, master_seed, rep
        )
        v = xs.T @ xs
        lam = min_eigenvalue(v)
        condition_all &= lam >= normality_condition_threshold(link, d, sig, delta, kappa)
        result = mle_fit(link, xs, ys)
        if not result.converged:
            nonconvergent += 1
            continue
        v_inv = np.linalg.inv(v)
        gaps = np.abs(directions @ (result.theta - theta))
        widths = np.sqrt(
            np.clip(np.einsum("ij,jk,ik->i", directions, v_inv, directions), 0.0, None)
        )
        bound = (3.0 * sig / kappa) * math.sqrt(math.log(1.0 / delta)) * widths
        ok = bool((gaps <= bound + 1e-12).all())
        hit_flags.append(ok)
        hits += ok
    return CoverageReport(
        replications=replications - nonconvergent,
        hits=hits,
        nominal=1.0 - 3.0 * delta,
        condition_satisfied=condition_all,
        nonconvergent=nonconvergent,
        hit_flags=hit_flags,
        details={
            "check": "theorem1",
            "n": n,
            "d": d,
            "sigma": sig,
            "delta": delta,
            "n_directions": int(directions.shape[0]),
        },
    )


@dataclass
class GrowthReport:
    """Empirical distribution of lambda_min(V_n) / n along a sample grid."""

    n_grid: list[int]
    quantiles: dict[str, list[float]]
    sigma_min_eig: float
    median_ratio_at_largest: float
    passed: bool
    replications: int

    def to_dict(self) -> dict:
        return {
            "check": "prop1",
            "n_grid": self.n_grid,
            "quantiles": self.quantiles,
            "sigma_min_eig": self.sigma_min_eig,
            "median_ratio_at_largest": self.median_ratio_at_largest,
            "passed": self.passed,
            "replications": self.replications,
        }


def proposition1_growth(
    context_dist: str,
    d: int,
    n_grid: list[int],
    replications: int,
    *,
    master_seed: int = 0,
) -> GrowthReport:
    """Linear growth of the smallest design eigenvalue under iid contexts.

    Passes when the median of lambda_min(V_n)/n at the largest grid point
    is within 10% of lambda_min(E[X X']).
    """
    if sorted(n_grid) != list(n_grid) or len(n_grid) == 0 or n_grid[0] < 1:
        raise InvalidConfigError("n_grid must be increasing and positive")
    target = second_moment_min_eig(context_dist, d)
    ratios = np.empty((replications, len(n_grid)))
    for rep in range(replications):
        gen = streams.stream(master_seed, rep, streams.CONTEXTS)
        xs = sample_context_batch(gen, context_dist, n_grid[-1], d)
        v = np.zeros((d, d))
        start = 0
        for j, n in enumerate(n_grid):
            chunk = xs[start:n]
            v += chunk.T @ chunk
            start = n
            ratios[rep, j] = min_eigenvalue(v) / n
    qs = {
        q: [float(np.quantile(ratios[:, j], float(q))) for j in range(len(n_grid))]
        for q in ("0.1", "0.25", "0.5", "0.75", "0.9")
    }
    median_last = qs["0.5"][-1]
    return GrowthReport(
        n_grid=list(n_grid),
        quantiles=qs,
        sigma_min_eig=target,
        median_ratio_at_largest=median_last,
        passed=abs(median_last - target) <= 0.1 * target,
        replications=replications,
    )


@dataclass
class UcbRunStats:
    """Instrumented UCB-GLM trajectory for inequality checks."""

    d: int
    tau: int
    lambda_min_init: float
    ts: np.ndarray
    delta_vt_norms: np.ndarray  # |theta_hat_t - theta*|_{V_t} per round
    chosen_widths: np.ndarray  # |X_t|_{V_t^{-1}} per round
    n_nonconverged: int


def run_ucb_glm_instrumented(
    link: LinkFunction,
    d: int,
    K: int,
    T: int,
    delta: float,
    sigma: float | None,
    replications: int,
    *,
    noise: str = "bernoulli",
    context_dist: str = "uniform_ball",
    theta_norm: float = 1.0,
    tau: int | None = None,
    kappa: float | None = None,
    master_seed: int = 0,
) -> list[UcbRunStats]:
    """Run UCB-GLM replications, recording the per-round quantities the
    trajectory inequalities talk about."""
    sig = _noise_sigma(noise, sigma)
    kap = kappa if kappa is not None else compute_kappa(link, theta_norm)
    sigma0 = second_moment_min_eig(context_dist, d)
    tau_val = tau if tau is not None else tau_for_ucb(d, delta, sigma0)
    if tau_val >= T:
        raise InvalidConfigError(f"tau={tau_val} leaves no rounds below T={T}")
    alpha = alpha_from_rule(
        "theorem2", T=T, d=d, K=K, delta=delta, sigma=sig, kappa=kap
    )
    config = PolicyConfig(
        T=T, d=d, K=K, alpha=alpha, tau=tau_val, kappa=kap, sigma=sig, delta=delta,
        alpha_rule="theorem2",
    )
    runs = []
    for rep in range(replications):
        env = Environment.build(
            d=d,
            K=K,
            link=link,
            noise=noise,
            sigma=sig,
            context_dist=context_dist,
            theta_norm=theta_norm,
            master_seed=master_seed,
            replication=rep,
        )
        policy = UcbGlmPolicy(
            config, link, streams.stream(master_seed, rep, streams.POLICY)
        )
        ts, delta_norms, widths = [], [], []
        for t in range(1, T + 1):
            contexts = env.sample_contexts()
            arm = policy.select(t, contexts)
            x = contexts[arm]
            if t > tau_val:
                diff = policy.theta - env.theta_star
                ts.append(t)
                delta_norms.append(weighted_norm(diff, policy.design.V))
                widths.append(weighted_norm(x, policy.design.inverse()))
            y = env.sample_reward(x)
            policy.update(t, arm, x, y)
        runs.append(
            UcbRunStats(
                d=d,
                tau=tau_val,
                lambda_min_init=float(policy.lambda_min_init),
                ts=np.array(ts, dtype=int),
                delta_vt_norms=np.array(delta_norms),
                chosen_widths=np.array(widths),
                n_nonconverged=policy.n_nonconverged,
            )
        )
    return runs


def estimate_ellipsoid_bound(d: int, t: int, sigma: float, kappa: float, delta: float) -> float:
    """(sigma/kappa) sqrt((d/2) log(1 + 2t/d) + log(1/delta)), nondecreasing in t."""
    return (sigma / kappa) * math.sqrt(
        0.5 * d * math.log(1.0 + 2.0 * t / d) + math.log(1.0 / delta)
    )


def lemma4_event_coverage(
    runs: list[UcbRunStats], sigma: float, kappa: float, delta: float
) -> CoverageReport:
    """All-rounds coverage of the estimate-ellipsoid event on UCB-GLM runs.

    A run is a hit when |theta_hat_t - theta*|_{V_t} stayed below the bound
    at every post-initialization round.  Only runs whose initial design
    reached lambda_min >= 1 enter the count (the event is defined on that
    footing); excluded runs are reported.
    """
    hits = 0
    counted = 0
    excluded = 0
    hit_flags = []
    for run in runs:
        if run.lambda_min_init < 1.0:
            excluded += 1
            continue
        counted += 1
        bounds = np.array(
            [estimate_ellipsoid_bound(run.d, t, sigma, kappa, delta) for t in run.ts]
        )
        ok = bool((run.delta_vt_norms <= bounds + 1e-12).all())
        hit_flags.append(ok)
        hits += ok
    return CoverageReport(
        replications=counted,
        hits=hits,
        nominal=1.0 - delta,
        condition_satisfied=excluded == 0,
        nonconvergent=sum(run.n_nonconverged > 0 for run in runs),
        hit_flags=hit_flags,
        details={"check": "lemma4", "excluded_runs": excluded, "delta": delta},
    )


@dataclass
class WidthSumReport:
    """Prefix check of the accumulated-width inequality on logged runs."""

    runs_checked: int
    runs_skipped: int
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.runs_checked > 0

    def to_dict(self) -> dict:
        return {
            "check": "width_sum",
            "runs_checked": self.runs_checked,
            "runs_skipped": self.runs_skipped,
            "violations": self.violations,
            "passed": self.passed,
        }


def width_sum_check(runs: list[UcbRunStats]) -> WidthSumReport:
    """Deterministic inequality: on any run with lambda_min(V_{tau+1}) >= 1,
    every prefix obeys sum |X_t|_{V_t^{-1}} <= sqrt(2 n d log((n + tau)/d))."""
    checked = skipped = violations = 0
    for run in runs:
        if run.lambda_min_init < 1.0:
            skipped += 1
            continue
        checked += 1
        sums = np.cumsum(run.chosen_widths)
        ns = np.arange(1, len(sums) + 1)
        bounds = np.sqrt(2.0 * ns * run.d * np.log((ns + run.tau) / run.d))
        violations += int((sums > bounds + 1e-9).sum() > 0)
    return WidthSumReport(runs_checked=checked, runs_skipped=skipped, violations=violations)


def znorm_bound_check(
    link: LinkFunction,
    d: int,
    n: int,
    sigma: float | None,
    delta: float,
    replications: int,
    *,
    noise: str = "gaussian",
    context_dist: str = "uniform_ball",
    theta_norm: float = 1.0,
    theta_star: np.ndarray | None = None,
    master_seed: int = 0,
) -> CoverageReport:
    """Coverage of |Z|_{V^{-1}} <= 4 sigma sqrt(d + log(1/delta)) where
    Z = sum eps_i X_i under iid contexts with known realized noise."""
    if n < d:
        raise InvalidConfigError("znorm check needs n >= d")
    sig = _noise_sigma(noise, sigma)
    hits = 0
    hit_flags = []
    bound = 4.0 * sig * math.sqrt(d + math.log(1.0 / delta))
    for rep in range(replications):
        if theta_star is None:
            theta_gen = streams.stream(master_seed, rep, streams.THETA)
            theta = draw_theta_star(theta_gen, d, theta_norm)
        else:
            theta = np.asarray(theta_star, dtype=float)
        xs, _, eps = _draw_sample(
            link, n, d, noise, sig, context_dist, theta, master_seed, rep
        )
        v = xs.T @ xs
        z = xs.T @ eps
        norm = weighted_norm(z, np.linalg.inv(v))
        ok = bool(norm <= bound + 1e-12)
        hit_flags.append(ok)
        hits += ok
    return CoverageReport(
        replications=replications,
        hits=hits,
        nominal=1.0 - delta,
        condition_satisfied=True,
        hit_flags=hit_flags,
        details={"check": "znorm", "n": n, "d": d, "sigma": sig, "bound": bound},
    )
