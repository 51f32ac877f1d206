"""Off-policy learners sharing one gradient_step interface."""

from .common import corrected_returns, refer_combine, soft_update
from .ddpg import Ddpg
from .naf import Naf
from .vracer import VRacer

ALGOS = {"vracer": VRacer, "ddpg": Ddpg, "naf": Naf}


def make_learner(algo, state_dim, act_dim, *, hidden=(48, 352), explore_std=0.2, lr=1e-4,
                 actor_lr=1e-5, soft_update_rate=0.01, critic_decay=1e-4, adv_head="none", seed=0):
    if algo == "vracer":
        return VRacer(state_dim, act_dim, hidden=hidden, explore_std=explore_std, lr=lr,
                      adv_head=adv_head, seed=seed)
    if algo == "ddpg":
        return Ddpg(state_dim, act_dim, hidden=hidden, explore_std=explore_std, lr=lr,
                    actor_lr=actor_lr, soft_update_rate=soft_update_rate,
                    critic_decay=critic_decay, seed=seed)
    if algo == "naf":
        return Naf(state_dim, act_dim, hidden=hidden, explore_std=explore_std, lr=lr,
                   soft_update_rate=soft_update_rate, seed=seed)
    raise ValueError(f"unknown algorithm {algo!r}")


__all__ = ["ALGOS", "Ddpg", "Naf", "VRacer", "corrected_returns", "make_learner",
           "refer_combine", "soft_update"]
