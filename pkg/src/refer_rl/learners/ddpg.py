"""Deterministic policy gradient learner with separate actor and critic nets.

The actor maps the standardized state to a tanh-bounded mean action; behavior
is a fixed-width truncated Gaussian around it (or OU noise, which the worker
owns). The critic scores (state, action) pairs and carries its own L2 decay,
attached per sample inside the clipping mask so that a fully clipped batch
moves nothing. Only the deterministic policy gradient is scaled by beta; the
critic update ignores the penalty entirely.
"""

from __future__ import annotations

import numpy as np

from ..nncore import MlpParams, mlp_backward, mlp_forward, mlp_init, param_count
from ..optim import AdamState, adam_step
from ..policy import importance_weight, kl_gradient, sample
from .common import refer_combine, soft_update


class Ddpg:
    def __init__(self, state_dim, act_dim, hidden=(48, 352), explore_std=0.2, lr=1e-4,
                 actor_lr=1e-5, soft_update_rate=0.01, critic_decay=1e-4, seed=0):
        self.state_dim = int(state_dim)
        self.act_dim = int(act_dim)
        self.lr = float(lr)
        self.actor_lr = float(actor_lr)
        self.soft_update_rate = float(soft_update_rate)
        self.critic_decay = float(critic_decay)
        self.explore_std = np.full(self.act_dim, float(explore_std))
        if isinstance(seed, np.random.Generator):
            rng = seed
        else:
            rng = np.random.Generator(np.random.PCG64(int(seed)))
        a_sizes = (self.state_dim, *hidden, self.act_dim)
        c_sizes = (self.state_dim + self.act_dim, *hidden, 1)
        self.actor = mlp_init(a_sizes, rng)
        self.critic = mlp_init(c_sizes, rng)
        self.target_actor = MlpParams(a_sizes, self.actor.theta.copy())
        self.target_critic = MlpParams(c_sizes, self.critic.theta.copy())
        self.adam_actor = AdamState.for_params(self.actor.theta)
        self.adam_critic = AdamState.for_params(self.critic.theta)

    # ---- acting ------------------------------------------------------------

    def policy_stats(self, states):
        raw, _ = mlp_forward(self.actor, states)
        mean = np.tanh(np.atleast_2d(raw))
        std = np.broadcast_to(self.explore_std, mean.shape)
        return mean, std, self._value(np.atleast_2d(states), mean)

    def _value(self, states, actions):
        q, _ = mlp_forward(self.critic, np.concatenate([states, actions], axis=-1))
        return q[:, 0]

    def act(self, state, rng):
        mean = self.mean_action(state)
        value = float(self._value(state.reshape(1, -1), mean.reshape(1, -1))[0])
        return sample(mean, self.explore_std, rng), mean, self.explore_std.copy(), value

    def mean_action(self, state):
        raw, _ = mlp_forward(self.actor, state)
        return np.tanh(raw)

    def closing_value(self, state) -> float:
        mean = self.mean_action(state)
        return float(self._value(state.reshape(1, -1), mean.reshape(1, -1))[0])

    # ---- learning ----------------------------------------------------------

    def gradient_step(self, rm, slots, *, c_max, beta, eta, clip_far=True, penalty_on=True,
                      rho_cap=1e3, per_weights=None, update=True):
        view = rm.batch_view(slots)
        b = len(slots)
        s = rm.standardize(view["states"])
        a = view["actions"]

        raw_m, tape_a = mlp_forward(self.actor, s)
        mean = np.tanh(raw_m)
        std = np.broadcast_to(self.explore_std, mean.shape)
        rho_new = np.atleast_1d(importance_weight(mean, std, view["mu_mean"], view["mu_std"], a))
        if clip_far:
            near = (rho_new > 1.0 / c_max) & (rho_new < c_max)
        else:
            near = np.ones(b, dtype=bool)
        row_w = near.astype(np.float64)
        if per_weights is not None:
            row_w = row_w * np.asarray(per_weights)

        # critic: TD regression toward the frozen target estimate
        q, tape_c = mlp_forward(self.critic, np.concatenate([s, a], axis=-1))
        q = q[:, 0]
        s2 = rm.standardize(view["next_states"])
        raw2, _ = mlp_forward(self.target_actor, s2)
        q2, _ = mlp_forward(self.target_critic, np.concatenate([s2, np.tanh(raw2)], axis=-1))
        term = view["next_closing"] & view["terminal"]
        q_hat = rm.scale_reward(view["reward_next"]) + rm.gamma * np.where(term, 0.0, q2[:, 0])
        td = q - q_hat
        g_critic, _ = mlp_backward(self.critic, tape_c, (-(row_w * td) / b)[:, None])
        g_critic -= self.critic_decay * row_w.mean() * self.critic.theta

        # actor: ascend Q(s, mean(s)); dQ/da comes from the critic's input grad
        q_m, tape_cm = mlp_forward(self.critic, np.concatenate([s, mean], axis=-1))
        _, d_in = mlp_backward(self.critic, tape_cm, np.ones((b, 1)))
        dq_da = d_in[:, self.state_dim :]
        g_task = dq_da if per_weights is None else dq_da * np.asarray(per_weights)[:, None]
        if penalty_on:
            g_kl, _ = kl_gradient(view["mu_mean"], view["mu_std"], mean, std)
        else:
            g_kl = np.zeros_like(g_task)
            beta = 1.0
        g_mean = refer_combine(g_task, g_kl, beta, near) / b
        g_actor, _ = mlp_backward(self.actor, tape_a, g_mean * (1.0 - mean * mean))

        stats = {"rho": rho_new, "near": near, "values": q_m[:, 0], "n_far": int(b - near.sum())}
        if not update:
            stats["grad_actor"] = g_actor
            stats["grad_critic"] = g_critic
            return stats
        adam_step(self.critic.theta, -g_critic, self.adam_critic, eta)
        adam_step(self.actor.theta, -g_actor, self.adam_actor, eta * self.actor_lr / self.lr)
        soft_update(self.target_actor.theta, self.actor.theta, self.soft_update_rate)
        soft_update(self.target_critic.theta, self.critic.theta, self.soft_update_rate)
        rm.refresh_many(slots, q_m[:, 0], rho_new, c_max, rescan=False)
        rm.update_priorities(slots, np.abs(td))
        return stats

    # ---- checkpointing -----------------------------------------------------

    def arrays(self):
        return {
            "actor_theta": self.actor.theta,
            "critic_theta": self.critic.theta,
            "target_actor_theta": self.target_actor.theta,
            "target_critic_theta": self.target_critic.theta,
            "adam_actor_m": self.adam_actor.m,
            "adam_actor_v": self.adam_actor.v,
            "adam_critic_m": self.adam_critic.m,
            "adam_critic_v": self.adam_critic.v,
        }

    def scalars(self):
        return {"adam_actor_t": self.adam_actor.t, "adam_critic_t": self.adam_critic.t}

    def load(self, arrays, scalars):
        self.actor.theta[...] = arrays["actor_theta"]
        self.critic.theta[...] = arrays["critic_theta"]
        self.target_actor.theta[...] = arrays["target_actor_theta"]
        self.target_critic.theta[...] = arrays["target_critic_theta"]
        self.adam_actor.m[...] = arrays["adam_actor_m"]
        self.adam_actor.v[...] = arrays["adam_actor_v"]
        self.adam_critic.m[...] = arrays["adam_critic_m"]
        self.adam_critic.v[...] = arrays["adam_critic_v"]
        self.adam_actor.t = int(scalars["adam_actor_t"])
        self.adam_critic.t = int(scalars["adam_critic_t"])
