import numpy as np
import pytest

from glmbandit import rng as streams
from glmbandit.environment import (
    Environment,
    draw_theta_star,
    sample_context_batch,
    second_moment_min_eig,
)
from glmbandit.errors import InvalidConfigError
from glmbandit.links import IDENTITY, LOGISTIC, get_link


def _env(**overrides):
    params = dict(
        d=3,
        K=4,
        link=LOGISTIC,
        noise="bernoulli",
        sigma=0.5,
        context_dist="uniform_ball",
        theta_norm=1.0,
        master_seed=100,
        replication=0,
    )
    params.update(overrides)
    return Environment.build(**params)


def test_sphere_d1_contexts_are_signs():
    gen = streams.stream(0, 0, streams.CONTEXTS)
    xs = sample_context_batch(gen, "sphere", 1000, 1)
    assert set(np.unique(xs)) <= {-1.0, 1.0}


@pytest.mark.parametrize("dist", ["uniform_ball", "sphere", "gaussian_normalized"])
def test_all_norms_within_unit_ball(dist):
    gen = streams.stream(1, 0, streams.CONTEXTS)
    xs = sample_context_batch(gen, dist, 20000, 4)
    assert np.linalg.norm(xs, axis=1).max() <= 1.0 + 1e-12


def test_uniform_ball_second_moment():
    # E[X X'] = I/(d+2) for the uniform ball.
    gen = streams.stream(2, 0, streams.CONTEXTS)
    xs = sample_context_batch(gen, "uniform_ball", 100_000, 3)
    sigma = xs.T @ xs / xs.shape[0]
    lam_min = float(np.linalg.eigvalsh(sigma)[0])
    assert abs(lam_min - 0.2) <= 0.02


@pytest.mark.parametrize("dist,d", [("uniform_ball", 3), ("sphere", 4), ("gaussian_normalized", 3)])
def test_second_moment_min_eig_matches_monte_carlo(dist, d):
    gen = streams.stream(3, 0, streams.CONTEXTS)
    xs = sample_context_batch(gen, dist, 200_000, d)
    sigma = xs.T @ xs / xs.shape[0]
    lam_min = float(np.linalg.eigvalsh(sigma)[0])
    assert second_moment_min_eig(dist, d) == pytest.approx(lam_min, rel=0.05)


def test_fixed_context_distribution():
    fixed = np.array([[1.0, 0.0], [0.0, 1.0]])
    env = _env(
        d=2, K=2, link=IDENTITY, noise="gaussian", sigma=0.1,
        context_dist="fixed", fixed_contexts=fixed,
    )
    assert np.array_equal(env.sample_contexts(), fixed)
    assert second_moment_min_eig("fixed", 2, fixed) == pytest.approx(0.5)


def test_theta_star_draw_has_requested_norm():
    gen = streams.stream(4, 0, streams.THETA)
    for norm in (0.5, 1.0, 2.0):
        theta = draw_theta_star(gen, 5, norm)
        assert np.linalg.norm(theta) == pytest.approx(norm, rel=1e-12)


def test_bernoulli_requires_logistic():
    with pytest.raises(InvalidConfigError):
        _env(link=IDENTITY, noise="bernoulli")


def test_bernoulli_mean_at_origin():
    env = _env(theta_norm=0.0)
    draws = [env.sample_reward(np.array([0.3, 0.1, -0.2])) for _ in range(100_000)]
    assert set(np.unique(draws)) <= {0.0, 1.0}
    assert abs(np.mean(draws) - 0.5) <= 0.01


def test_bernoulli_mean_at_log3():
    env = _env(d=2, theta_star=np.array([np.log(3.0), 0.0]))
    x = np.array([1.0, 0.0])
    draws = [env.sample_reward(x) for _ in range(100_000)]
    assert abs(np.mean(draws) - 0.75) <= 0.01


def test_noiseless_gaussian_identity_reward_is_exact():
    env = _env(link=IDENTITY, noise="gaussian", sigma=0.0)
    x = np.array([0.2, -0.4, 0.1])
    assert env.sample_reward(x) == pytest.approx(float(x @ env.theta_star), abs=1e-15)


def test_reward_mean_converges_at_monte_carlo_rate():
    env = _env(link=IDENTITY, noise="gaussian", sigma=0.3)
    x = np.array([0.5, 0.2, -0.1])
    n = 100_000
    draws = np.array([env.sample_reward(x) for _ in range(n)])
    se = 0.3 / np.sqrt(n)
    assert abs(draws.mean() - env.mean_reward(x)) <= 3 * se


def test_instantaneous_regret_examples():
    env = _env(d=2, K=2, link=IDENTITY, noise="gaussian", sigma=0.1,
               theta_star=np.array([1.0, 0.0]))
    contexts = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert env.instantaneous_regret(contexts, env.optimal_arm(contexts)) == 0.0
    assert env.instantaneous_regret(contexts, 1) == pytest.approx(1.0)

    env_log = _env(d=2, K=2, theta_star=np.array([1.0, 0.0]))
    contexts = np.array([[1.0, 0.0], [-1.0, 0.0]])
    # mu(1) - mu(-1) = tanh(1/2)
    assert env_log.instantaneous_regret(contexts, 1) == pytest.approx(
        np.tanh(0.5), abs=1e-12
    )


def test_regret_nonnegative_and_zero_for_optimal():
    env = _env()
    for _ in range(200):
        contexts = env.sample_contexts()
        best = env.optimal_arm(contexts)
        assert env.instantaneous_regret(contexts, best) == 0.0
        for arm in range(env.K):
            assert env.instantaneous_regret(contexts, arm) >= 0.0


def test_linear_and_mu_scale_argmax_agree():
    env = _env(K=6)
    for _ in range(300):
        contexts = env.sample_contexts()
        linear = int(np.argmax(contexts @ env.theta_star))
        mu_scale = int(np.argmax(env.arm_means(contexts)))
        assert linear == mu_scale


def test_sub_gaussian_sigma():
    assert _env().sub_gaussian_sigma == 0.5
    assert _env(link=IDENTITY, noise="gaussian", sigma=0.2).sub_gaussian_sigma == 0.2


def test_environment_field_validation():
    with pytest.raises(InvalidConfigError):
        _env(theta_star=np.zeros(5))
    with pytest.raises(InvalidConfigError):
        _env(noise="poisson")
    with pytest.raises(InvalidConfigError):
        Environment.build(
            d=2, K=2, link=get_link("identity"), noise="gaussian", sigma=0.1,
            context_dist="fixed", theta_norm=1.0, master_seed=0, replication=0,
            fixed_contexts=np.array([[2.0, 0.0], [0.0, 1.0]]),
        )
