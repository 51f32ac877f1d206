"""Shared test helpers: finite differences, replay fixtures, learner surrogates.

The surrogate objectives freeze every quantity the learners treat as constant
(importance weights, advantages, TD targets, near masks) so central finite
differences of the surrogate match the analytic gradient exactly, not just in
expectation.
"""

import numpy as np
import pytest

from refer_rl.envs import action_rescale, make_env
from refer_rl.learners import make_learner
from refer_rl.learners.advantage import asym_params, quad_matrices
from refer_rl.nncore import mlp_forward, softplus
from refer_rl.policy import kl_divergence, log_density
from refer_rl.replay import EpisodeBuilder, ReplayMemory


def fd_gradient(f, x, h=1e-5):
    """Central finite differences of scalar f over every coordinate of x.

    Mutates x in place coordinate by coordinate and restores it.
    """
    g = np.empty_like(x)
    for i in range(x.size):
        x0 = x.flat[i]
        x.flat[i] = x0 + h
        fp = f()
        x.flat[i] = x0 - h
        fm = f()
        x.flat[i] = x0
        g.flat[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(analytic, numeric):
    """Worst relative error with denominator max(1, |g|) per coordinate."""
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))


def run_episode(learner, rm, env, rng, max_steps=None):
    """Collect one episode with the learner's stochastic policy and store it."""
    s = env.reset(rng)
    eb = EpisodeBuilder()
    r_prev = 0.0
    n = 0
    while True:
        a, mu_m, mu_s, val = learner.act(rm.standardize(s), rng)
        s2, r, done = env.step(action_rescale(a, env.spec.act_low, env.spec.act_high))
        eb.add(s, a, r_prev, mu_m, mu_s, val)
        r_prev, s, n = r, s2, n + 1
        if done is None and max_steps is not None and n >= max_steps:
            done = "truncated"
        if done:
            term = done == "terminal"
            closing = 0.0 if term else learner.closing_value(rm.standardize(s))
            rm.add_episode(eb.close(s, r_prev, closing, term))
            return


def fill_memory(learner, env_name="pendulum", episodes=5, capacity=4096, seed=11,
                gamma=0.995, max_steps=None):
    """Fresh memory populated by the learner acting in the named environment."""
    rng = np.random.Generator(np.random.PCG64(seed))
    env = make_env(env_name)
    rm = ReplayMemory(capacity, env.spec.state_dim, env.spec.act_dim,
                      env.spec.max_steps, gamma)
    for _ in range(episodes):
        run_episode(learner, rm, env, rng, max_steps=max_steps)
    return rm, rng


# ---- frozen-constant surrogate objectives -----------------------------------
#
# Each builder takes a learner plus the stats dict from gradient_step(update=
# False) and returns (objective, list of (label, params, analytic_grad)).

def vracer_surrogate(ln, rm, view, stats, beta):
    rho0 = stats["rho"]
    near0 = stats["near"]
    rho_g0 = np.where(near0, rho0, 0.0)
    s = rm.standardize(view["states"])
    out0, _ = mlp_forward(ln.net, s)
    adv0 = view["q_ret"] - out0[:, 0]
    da, nn = ln.act_dim, ln._n_net
    std0 = softplus(ln.flat[nn:]).copy()
    u0 = view["actions"] - out0[:, 1 : 1 + da]
    head = ln.adv_head

    def objective():
        out, _ = mlp_forward(ln.net, s)
        v = out[:, 0]
        mean = out[:, 1 : 1 + da]
        std = np.broadcast_to(softplus(ln.flat[nn:]), mean.shape)
        lp = log_density(mean, std, view["actions"])
        task = rho_g0 * adv0 * lp - 0.5 * (v - view["v_ret"]) ** 2
        if head == "quad":
            L, _ = quad_matrices(out[:, 1 + da :], da)
            ltu = np.einsum("bij,bi->bj", L, u0)
            f = -0.5 * np.sum(ltu * ltu, -1)
            e = -0.5 * np.einsum("bij,bi->b", L * L, np.broadcast_to(std0**2, u0.shape))
            task = task - 0.5 * rho_g0 * ((f - e) + v - view["q_ret"]) ** 2
        elif head == "asym":
            k, lp_, lm_ = asym_params(out[:, 1 + da :], da)
            sel = np.where(u0 > 0, lp_, lm_)
            f = k * np.exp(-0.5 * np.sum(u0 * u0 / sel, -1))
            cp = 0.5 * np.sqrt(lp_ / (lp_ + std0**2))
            cm = 0.5 * np.sqrt(lm_ / (lm_ + std0**2))
            e = k * np.prod(cp + cm, -1)
            task = task - 0.5 * rho_g0 * ((f - e) + v - view["q_ret"]) ** 2
        kl = kl_divergence(view["mu_mean"], view["mu_std"], mean, std)
        return float(np.mean(beta * near0 * task - (1 - beta) * kl))

    return objective, [("vracer", ln.flat, stats["grad"])]


def ddpg_surrogate(ln, rm, view, stats, beta):
    near0 = stats["near"]
    s = rm.standardize(view["states"])
    s2 = rm.standardize(view["next_states"])
    raw2, _ = mlp_forward(ln.target_actor, s2)
    q2, _ = mlp_forward(ln.target_critic, np.concatenate([s2, np.tanh(raw2)], -1))
    term = view["next_closing"] & view["terminal"]
    qhat0 = rm.scale_reward(view["reward_next"]) + rm.gamma * np.where(term, 0.0, q2[:, 0])

    def critic_objective():
        q, _ = mlp_forward(ln.critic, np.concatenate([s, view["actions"]], -1))
        pen = 0.5 * ln.critic_decay * float(ln.critic.theta @ ln.critic.theta)
        return float(np.mean(near0 * (-0.5 * (q[:, 0] - qhat0) ** 2 - pen)))

    def actor_objective():
        raw, _ = mlp_forward(ln.actor, s)
        mean = np.tanh(raw)
        std = np.broadcast_to(ln.explore_std, mean.shape)
        q, _ = mlp_forward(ln.critic, np.concatenate([s, mean], -1))
        kl = kl_divergence(view["mu_mean"], view["mu_std"], mean, std)
        return float(np.mean(beta * near0 * q[:, 0] - (1 - beta) * kl))

    return (critic_objective, actor_objective), [
        ("ddpg critic", ln.critic.theta, stats["grad_critic"]),
        ("ddpg actor", ln.actor.theta, stats["grad_actor"]),
    ]


def naf_surrogate(ln, rm, view, stats, beta):
    near0 = stats["near"]
    s = rm.standardize(view["states"])
    out2, _ = mlp_forward(ln.target, rm.standardize(view["next_states"]))
    term = view["next_closing"] & view["terminal"]
    qhat0 = rm.scale_reward(view["reward_next"]) + rm.gamma * np.where(term, 0.0, out2[:, 0])
    da = ln.act_dim

    def objective():
        out, _ = mlp_forward(ln.net, s)
        mean = out[:, 1 : 1 + da]
        std = np.broadcast_to(ln.explore_std, mean.shape)
        L, _ = quad_matrices(out[:, 1 + da :], da)
        u = view["actions"] - mean
        ltu = np.einsum("bij,bi->bj", L, u)
        q = out[:, 0] - np.sum(ltu * ltu, -1)
        kl = kl_divergence(view["mu_mean"], view["mu_std"], mean, std)
        return float(np.mean(beta * near0 * (-0.5 * (q - qhat0) ** 2) - (1 - beta) * kl))

    return objective, [("naf", ln.net.theta, stats["grad"])]


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(0))
