"""Actor-critic learner with a shared value/policy network and corrected
off-policy returns.

One network maps the (standardized) state to [V, policy mean, optional
advantage head outputs]. The policy standard deviation is state-independent:
it lives in a trailing block of the flat parameter vector, mapped through
softplus. Gradients are assembled at the network output per sample, combined
with the trust-region machinery (clipping mask, KL penalty, beta scaling),
and pushed through one batched backward pass.
"""

from __future__ import annotations

import numpy as np

from ..nncore import MlpParams, mlp_backward, mlp_forward, mlp_init, param_count, softplus, softplus_deriv, softplus_inv
from ..optim import AdamState, adam_step
from ..policy import importance_weight, kl_divergence, kl_gradient, logprob_gradient, sample
from .advantage import asym_advantage, asym_n_raw, quad_advantage, quad_n_raw
from .common import refer_combine


class VRacer:
    def __init__(self, state_dim, act_dim, hidden=(48, 352), explore_std=0.2, lr=1e-4, adv_head="none", seed=0):
        if adv_head not in ("none", "quad", "asym"):
            raise ValueError(f"unknown advantage head {adv_head!r}")
        self.state_dim = int(state_dim)
        self.act_dim = int(act_dim)
        self.adv_head = adv_head
        self.lr = float(lr)
        if adv_head == "quad":
            self.n_adv = quad_n_raw(self.act_dim)
        elif adv_head == "asym":
            self.n_adv = asym_n_raw(self.act_dim)
        else:
            self.n_adv = 0
        sizes = (self.state_dim, *hidden, 1 + self.act_dim + self.n_adv)
        n_net = param_count(sizes)
        # one flat vector: network weights then the raw (pre-softplus) std block
        self.flat = np.zeros(n_net + self.act_dim, dtype=np.float64)
        self.flat[:n_net] = mlp_init(sizes, seed).theta
        self.flat[n_net:] = softplus_inv(float(explore_std))
        self.net = MlpParams(sizes, self.flat[:n_net])
        self._n_net = n_net
        self.adam = AdamState.for_params(self.flat)

    # ---- acting ------------------------------------------------------------

    @property
    def policy_std(self) -> np.ndarray:
        return softplus(self.flat[self._n_net :])

    def policy_stats(self, states):
        """(mean, std, value) for a batch of standardized states."""
        out, _ = mlp_forward(self.net, states)
        out = np.atleast_2d(out)
        std = np.broadcast_to(self.policy_std, (out.shape[0], self.act_dim))
        return out[:, 1 : 1 + self.act_dim], std, out[:, 0]

    def act(self, state, rng):
        out, _ = mlp_forward(self.net, state)
        mean = out[1 : 1 + self.act_dim]
        std = self.policy_std
        return sample(mean, std, rng), mean, std.copy(), float(out[0])

    def mean_action(self, state):
        out, _ = mlp_forward(self.net, state)
        return out[1 : 1 + self.act_dim]

    def closing_value(self, state) -> float:
        out, _ = mlp_forward(self.net, state)
        return float(out[0])

    # ---- learning ----------------------------------------------------------

    def gradient_step(self, rm, slots, *, c_max, beta, eta, clip_far=True, penalty_on=True,
                      rho_cap=1e3, per_weights=None, update=True):
        """One batch update from sampled replay slots.

        Gradients use the cached return estimates as they were at sampling
        time; the fresh values and importance weights are written back only
        after the step (update=True). Returns a stats dict; with update=False
        nothing is mutated and the dict carries the ascent gradient for
        inspection.
        """
        view = rm.batch_view(slots)
        b = len(slots)
        s = rm.standardize(view["states"])
        out, tape = mlp_forward(self.net, s)
        v = out[:, 0]
        mean = out[:, 1 : 1 + self.act_dim]
        std_raw = self.flat[self._n_net :]
        std = np.broadcast_to(softplus(std_raw), mean.shape)

        rho_new = np.atleast_1d(importance_weight(mean, std, view["mu_mean"], view["mu_std"], view["actions"]))
        if clip_far:
            near = (rho_new > 1.0 / c_max) & (rho_new < c_max)
        else:
            near = np.ones(b, dtype=bool)
        # rho can be inf (behavior box excluded the action); cap it when there
        # is no clipping rule, zero it on clipped rows so 0*inf never appears
        rho_g = np.minimum(rho_new, rho_cap) if not clip_far else np.where(near, rho_new, 0.0)
        adv = view["q_ret"] - v

        g_mean_task, g_std_task = logprob_gradient(mean, std, view["actions"])
        scale = (rho_g * adv)[:, None]
        g_mean_task = scale * g_mean_task
        g_std_task = scale * g_std_task
        g_v_task = -(v - view["v_ret"])

        g_out_task = np.zeros((b, 1 + self.act_dim + self.n_adv))
        if self.n_adv:
            raw = out[:, 1 + self.act_dim :]
            u = view["actions"] - mean
            head = quad_advantage if self.adv_head == "quad" else asym_advantage
            a_val, a_grad = head(raw, u, std)
            delta = a_val + v - view["q_ret"]
            rho_d = rho_g * delta
            g_out_task[:, 1 + self.act_dim :] = -rho_d[:, None] * a_grad
            g_v_task = g_v_task - rho_d
        g_out_task[:, 0] = g_v_task
        g_out_task[:, 1 : 1 + self.act_dim] = g_mean_task

        if per_weights is not None:
            g_out_task *= np.asarray(per_weights)[:, None]
            g_std_task = g_std_task * np.asarray(per_weights)[:, None]

        g_out_kl = np.zeros_like(g_out_task)
        g_std_kl = np.zeros_like(g_std_task)
        if penalty_on:
            km, ks = kl_gradient(view["mu_mean"], view["mu_std"], mean, std)
            g_out_kl[:, 1 : 1 + self.act_dim] = km
            g_std_kl = ks
        else:
            beta = 1.0

        g_out = refer_combine(g_out_task, g_out_kl, beta, near) / b
        g_std = refer_combine(g_std_task, g_std_kl, beta, near).mean(axis=0)

        grad = np.empty_like(self.flat)
        grad[: self._n_net], _ = mlp_backward(self.net, tape, g_out)
        grad[self._n_net :] = g_std * softplus_deriv(std_raw)

        stats = {
            "rho": rho_new,
            "near": near,
            "values": v,
            "n_far": int(b - near.sum()),
        }
        if not update:
            stats["grad"] = grad
            return stats
        adam_step(self.flat, -grad, self.adam, eta)
        rm.refresh_many(slots, v, rho_new, c_max)
        rm.update_priorities(slots, np.abs(view["v_ret"] - v))
        return stats

    # ---- checkpointing -----------------------------------------------------

    def arrays(self):
        return {
            "learner_flat": self.flat,
            "adam_m": self.adam.m,
            "adam_v": self.adam.v,
        }

    def scalars(self):
        return {"adam_t": self.adam.t}

    def load(self, arrays, scalars):
        self.flat[...] = arrays["learner_flat"]
        self.adam.m[...] = arrays["adam_m"]
        self.adam.v[...] = arrays["adam_v"]
        self.adam.t = int(scalars["adam_t"])
