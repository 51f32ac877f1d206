"""Normalized advantage function learner: one network, closed-form argmax.

The network outputs [V, mean, lower-triangular factor] and the action value is
Q(s, a) = V(s) - u^T L L^T u with u = a - mean(s), so the greedy action is the
mean itself. Exploration is a fixed-width truncated Gaussian around the mean.
The TD gradient flows through every head and the whole per-sample gradient is
scaled by beta, with the KL penalty attached to the mean.
"""

from __future__ import annotations

import numpy as np

from ..nncore import MlpParams, mlp_backward, mlp_forward, mlp_init, param_count
from ..optim import AdamState, adam_step
from ..policy import importance_weight, kl_gradient, sample
from .advantage import quad_matrices, quad_n_raw
from .common import refer_combine, soft_update


class Naf:
    def __init__(self, state_dim, act_dim, hidden=(48, 352), explore_std=0.2, lr=1e-4,
                 soft_update_rate=0.01, seed=0):
        self.state_dim = int(state_dim)
        self.act_dim = int(act_dim)
        self.lr = float(lr)
        self.soft_update_rate = float(soft_update_rate)
        self.explore_std = np.full(self.act_dim, float(explore_std))
        self.n_tri = quad_n_raw(self.act_dim)
        sizes = (self.state_dim, *hidden, 1 + self.act_dim + self.n_tri)
        self.net = mlp_init(sizes, seed)
        self.target = MlpParams(sizes, self.net.theta.copy())
        self.adam = AdamState.for_params(self.net.theta)

    # ---- acting ------------------------------------------------------------

    def policy_stats(self, states):
        out, _ = mlp_forward(self.net, states)
        out = np.atleast_2d(out)
        mean = out[:, 1 : 1 + self.act_dim]
        std = np.broadcast_to(self.explore_std, mean.shape)
        return mean, std, out[:, 0]

    def q_value(self, states, actions):
        """Q(s, a) = V(s) - u^T L L^T u, the quadratic advantage around the mean."""
        out, _ = mlp_forward(self.net, np.atleast_2d(states))
        mean = out[:, 1 : 1 + self.act_dim]
        L, _ = quad_matrices(out[:, 1 + self.act_dim :], self.act_dim)
        u = np.atleast_2d(actions) - mean
        ltu = np.einsum("bij,bi->bj", L, u)
        return out[:, 0] - np.sum(ltu * ltu, axis=-1)

    def act(self, state, rng):
        out, _ = mlp_forward(self.net, state)
        mean = out[1 : 1 + self.act_dim]
        return sample(mean, self.explore_std, rng), mean, self.explore_std.copy(), float(out[0])

    def mean_action(self, state):
        out, _ = mlp_forward(self.net, state)
        return out[1 : 1 + self.act_dim]

    def closing_value(self, state) -> float:
        out, _ = mlp_forward(self.net, state)
        return float(out[0])

    # ---- learning ----------------------------------------------------------

    def gradient_step(self, rm, slots, *, c_max, beta, eta, clip_far=True, penalty_on=True,
                      rho_cap=1e3, per_weights=None, update=True):
        view = rm.batch_view(slots)
        b = len(slots)
        s = rm.standardize(view["states"])
        out, tape = mlp_forward(self.net, s)
        v = out[:, 0]
        mean = out[:, 1 : 1 + self.act_dim]
        raw = out[:, 1 + self.act_dim :]
        std = np.broadcast_to(self.explore_std, mean.shape)

        rho_new = np.atleast_1d(importance_weight(mean, std, view["mu_mean"], view["mu_std"], view["actions"]))
        if clip_far:
            near = (rho_new > 1.0 / c_max) & (rho_new < c_max)
        else:
            near = np.ones(b, dtype=bool)

        L, dderiv = quad_matrices(raw, self.act_dim)
        u = view["actions"] - mean
        ltu = np.einsum("bij,bi->bj", L, u)
        q = v - np.sum(ltu * ltu, axis=-1)
        out2, _ = mlp_forward(self.target, rm.standardize(view["next_states"]))
        term = view["next_closing"] & view["terminal"]
        q_hat = rm.scale_reward(view["reward_next"]) + rm.gamma * np.where(term, 0.0, out2[:, 0])
        td = q - q_hat

        # dQ/d(head outputs): V enters directly, the mean through u, L directly
        dq_dm = 2.0 * np.einsum("bij,bj->bi", L, ltu)
        dq_dl = -2.0 * u[:, :, None] * ltu[:, None, :]
        diag = np.arange(self.act_dim)
        dq_dl[:, diag, diag] *= dderiv
        rows, cols = np.tril_indices(self.act_dim)
        g_task = np.empty_like(out)
        g_task[:, 0] = 1.0
        g_task[:, 1 : 1 + self.act_dim] = dq_dm
        g_task[:, 1 + self.act_dim :] = dq_dl[:, rows, cols]
        g_task *= -td[:, None]
        if per_weights is not None:
            g_task *= np.asarray(per_weights)[:, None]

        g_kl = np.zeros_like(out)
        if penalty_on:
            g_kl[:, 1 : 1 + self.act_dim], _ = kl_gradient(view["mu_mean"], view["mu_std"], mean, std)
        else:
            beta = 1.0
        g_out = refer_combine(g_task, g_kl, beta, near) / b
        grad, _ = mlp_backward(self.net, tape, g_out)

        stats = {"rho": rho_new, "near": near, "values": v, "n_far": int(b - near.sum())}
        if not update:
            stats["grad"] = grad
            return stats
        adam_step(self.net.theta, -grad, self.adam, eta)
        soft_update(self.target.theta, self.net.theta, self.soft_update_rate)
        rm.refresh_many(slots, v, rho_new, c_max, rescan=False)
        rm.update_priorities(slots, np.abs(td))
        return stats

    # ---- checkpointing -----------------------------------------------------

    def arrays(self):
        return {
            "net_theta": self.net.theta,
            "target_theta": self.target.theta,
            "adam_m": self.adam.m,
            "adam_v": self.adam.v,
        }

    def scalars(self):
        return {"adam_t": self.adam.t}

    def load(self, arrays, scalars):
        self.net.theta[...] = arrays["net_theta"]
        self.target.theta[...] = arrays["target_theta"]
        self.adam.m[...] = arrays["adam_m"]
        self.adam.v[...] = arrays["adam_v"]
        self.adam.t = int(scalars["adam_t"])
