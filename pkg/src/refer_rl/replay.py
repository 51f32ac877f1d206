"""Episode-FIFO replay memory with per-step cached statistics.

Episodes are stored whole in a flat ring arena: each episode owns a
contiguous run of slots, one per action step plus one closing slot holding
the terminal/truncated observation. Closing slots are never sampled and do
not count toward n_obs; they exist so the backward return scan and
next-state lookups are simple slot arithmetic.

Cached per-step quantities (value, importance ratio, corrected return
estimates, |TD| priority, far flag) are refreshed lazily when a step is
sampled; a full far recount at a fixed cadence bounds the drift that the
annealed classification threshold introduces.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .learners.common import _scan_many, corrected_returns
from .policy import GaussianPolicy

REWARD_EPS = 1e-7
STATE_EPS = 1e-7


def classify(rho, c_max):
    """True where a step is near-policy: 1/c_max < rho < c_max (strict)."""
    if c_max <= 1.0:
        raise ValueError("c_max must exceed 1")
    rho = np.asarray(rho, dtype=np.float64)
    out = (rho > 1.0 / c_max) & (rho < c_max)
    return out if out.ndim else bool(out)


def update_beta(beta, far_fraction, far_target, eta):
    """One controller step for the penalty mixing weight.

    Decays toward 0 while the far fraction exceeds the target, otherwise
    recovers toward 1; eta is the current (annealed) learning rate.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta out of [0, 1]")
    if far_fraction > far_target:
        return (1.0 - eta) * beta
    return (1.0 - eta) * beta + eta


@dataclass(frozen=True)
class TimeStep:
    """One stored step. Closing steps carry no action/behavior."""

    state: np.ndarray
    action: Optional[np.ndarray]
    reward: float
    behavior: Optional[GaussianPolicy]
    value: float


class Episode:
    """A finished trajectory: T action steps plus the closing observation."""

    def __init__(self, states, actions, rewards, mu_mean, mu_std, values, terminal):
        self.states = np.asarray(states, dtype=np.float64)
        self.actions = np.asarray(actions, dtype=np.float64)
        self.rewards = np.asarray(rewards, dtype=np.float64)
        self.mu_mean = np.asarray(mu_mean, dtype=np.float64)
        self.mu_std = np.asarray(mu_std, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        self.terminal = bool(terminal)
        self._validate()

    def _validate(self):
        t = self.actions.shape[0]
        if t < 1:
            raise ValueError("episode needs at least one action step")
        if self.states.shape[0] != t + 1 or self.rewards.shape[0] != t + 1 or self.values.shape[0] != t + 1:
            raise ValueError("states/rewards/values must have one closing entry beyond the actions")
        if self.mu_mean.shape != self.actions.shape or self.mu_std.shape != self.actions.shape:
            raise ValueError("behavior records must align with actions")
        if self.rewards[0] != 0.0:
            raise ValueError("first reward must be 0 (nothing preceded it)")
        if np.any(self.mu_std <= 0.0):
            raise ValueError("behavior stddev must be positive")
        if self.terminal and self.values[t] != 0.0:
            raise ValueError("terminal closing value must be 0")

    @property
    def n_steps(self) -> int:
        return self.actions.shape[0]

    @property
    def total_return(self) -> float:
        return float(self.rewards.sum())

    def steps(self):
        t = self.n_steps
        out = [
            TimeStep(
                self.states[i],
                self.actions[i],
                float(self.rewards[i]),
                GaussianPolicy(self.mu_mean[i], self.mu_std[i]),
                float(self.values[i]),
            )
            for i in range(t)
        ]
        out.append(TimeStep(self.states[t], None, float(self.rewards[t]), None, float(self.values[t])))
        return out


class EpisodeBuilder:
    """Accumulates a worker's in-flight episode."""

    def __init__(self):
        self.states, self.actions, self.rewards = [], [], []
        self.mu_mean, self.mu_std, self.values = [], [], []

    def __len__(self):
        return len(self.actions)

    def add(self, state, action, reward, mu_mean, mu_std, value):
        self.states.append(np.array(state, dtype=np.float64))
        self.actions.append(np.array(action, dtype=np.float64))
        self.rewards.append(float(reward))
        self.mu_mean.append(np.array(mu_mean, dtype=np.float64))
        self.mu_std.append(np.array(mu_std, dtype=np.float64))
        self.values.append(float(value))

    def close(self, state, reward, value, terminal) -> Episode:
        ep = Episode(
            states=np.vstack(self.states + [np.asarray(state, dtype=np.float64)]),
            actions=np.vstack(self.actions),
            rewards=np.array(self.rewards + [float(reward)]),
            mu_mean=np.vstack(self.mu_mean),
            mu_std=np.vstack(self.mu_std),
            values=np.array(self.values + [float(value)]),
            terminal=terminal,
        )
        self.__init__()
        return ep


@dataclass
class _EpMeta:
    uid: int
    start: int
    n: int  # action steps; occupies slots [start, start+n] inclusive of closing
    terminal: bool


class ReplayMemory:
    def __init__(self, capacity, state_dim, act_dim, max_episode_steps, gamma, warmup=0):
        if capacity < 1 or max_episode_steps < 1:
            raise ValueError("capacity and max_episode_steps must be positive")
        self.capacity = int(capacity)
        self.state_dim = int(state_dim)
        self.act_dim = int(act_dim)
        self.max_episode_steps = int(max_episode_steps)
        self.gamma = float(gamma)
        self.warmup = int(warmup)

        cap = 2 * self.capacity + 2 * (self.max_episode_steps + 2)
        self._cap_slots = cap
        self.states = np.zeros((cap, state_dim), dtype=np.float64)
        self.actions = np.zeros((cap, act_dim), dtype=np.float64)
        self.rewards = np.zeros(cap, dtype=np.float64)
        self.mu_mean = np.zeros((cap, act_dim), dtype=np.float64)
        self.mu_std = np.ones((cap, act_dim), dtype=np.float64)
        self.values = np.zeros(cap, dtype=np.float64)
        self.rho = np.ones(cap, dtype=np.float64)
        self.v_ret = np.zeros(cap, dtype=np.float64)
        self.q_ret = np.zeros(cap, dtype=np.float64)
        self.priority = np.zeros(cap, dtype=np.float64)
        self.far = np.zeros(cap, dtype=bool)
        self.closing = np.zeros(cap, dtype=bool)
        self.terminal = np.zeros(cap, dtype=bool)  # episode flag, copied per slot
        self.ep_start = np.zeros(cap, dtype=np.int64)  # owning episode's first slot
        self.ep_len = np.zeros(cap, dtype=np.int64)  # owning episode's action steps

        self.episodes: deque[_EpMeta] = deque()
        self._write = 0
        self._next_uid = 0
        self.n_obs = 0
        self.n_far = 0
        self.sigma_r: Optional[float] = None
        self.state_mean: Optional[np.ndarray] = None
        self.state_std: Optional[np.ndarray] = None
        self.max_priority = 1.0
        self._starts = np.zeros(0, dtype=np.int64)
        self._cum = np.zeros(0, dtype=np.int64)
        self._per_dirty = True
        self._per_alpha: Optional[float] = None
        self._per_order: Optional[np.ndarray] = None  # slots, highest priority first
        self._per_cum: Optional[np.ndarray] = None

    # ---- bookkeeping -----------------------------------------------------

    @property
    def far_fraction(self) -> float:
        return self.n_far / max(self.n_obs, 1)

    def _rebuild_index(self):
        self._starts = np.fromiter((m.start for m in self.episodes), dtype=np.int64, count=len(self.episodes))
        lens = np.fromiter((m.n for m in self.episodes), dtype=np.int64, count=len(self.episodes))
        self._cum = np.cumsum(lens)

    def _evict_oldest(self):
        meta = self.episodes.popleft()
        span = slice(meta.start, meta.start + meta.n)
        self.n_far -= int(self.far[span].sum())
        self.n_obs -= meta.n
        self.far[span] = False
        if not self.episodes:
            self._write = 0
        self._per_dirty = True

    def _fits(self, write, need) -> bool:
        if not self.episodes:
            return True
        head = self.episodes[0].start
        if write < head:
            return write + need <= head
        return True  # [write, cap) is free by construction (wrap pre-checked)

    def add_episode(self, ep: Episode) -> int:
        """Store a finished episode, then evict oldest whole episodes while
        n_obs exceeds capacity. Returns the number of episodes evicted."""
        t = ep.n_steps
        if t > self.max_episode_steps:
            raise ValueError(f"episode of {t} steps exceeds max_episode_steps")
        if ep.states.shape[1] != self.state_dim or ep.actions.shape[1] != self.act_dim:
            raise ValueError("episode dimensions do not match this memory")
        need = t + 1
        w = self._write
        if w + need > self._cap_slots:
            w = 0
        while not self._fits(w, need):  # safety only; sizing should prevent this
            self._evict_oldest()

        sl = slice(w, w + t)
        self.states[w : w + t + 1] = ep.states
        self.actions[sl] = ep.actions
        self.rewards[w : w + t + 1] = ep.rewards
        self.mu_mean[sl] = ep.mu_mean
        self.mu_std[sl] = ep.mu_std
        self.values[w : w + t + 1] = ep.values
        self.rho[sl] = 1.0
        self.rho[w + t] = 1.0
        self.priority[sl] = self.max_priority
        self.far[w : w + t + 1] = False
        self.closing[w : w + t + 1] = False
        self.closing[w + t] = True
        self.terminal[w : w + t + 1] = ep.terminal
        self.ep_start[w : w + t + 1] = w
        self.ep_len[w : w + t + 1] = t

        v_ret, q_ret = corrected_returns(
            ep.values[:t], np.ones(t), self.scale_reward(ep.rewards[1:]), self.gamma, ep.values[t]
        )
        self.v_ret[sl] = v_ret
        self.q_ret[sl] = q_ret
        self.v_ret[w + t] = ep.values[t]
        self.q_ret[w + t] = 0.0

        self.episodes.append(_EpMeta(self._next_uid, w, t, ep.terminal))
        self._next_uid += 1
        self._write = w + need
        self.n_obs += t
        evicted = 0
        while self.n_obs > self.capacity and len(self.episodes) > 1:
            self._evict_oldest()
            evicted += 1
        self._rebuild_index()
        self._per_dirty = True
        return evicted

    # ---- sampling --------------------------------------------------------

    def sample_uniform(self, batch, rng: np.random.Generator) -> np.ndarray:
        """Slots of `batch` iid uniform draws over action steps (with
        replacement)."""
        if self.n_obs < max(self.warmup, 1):
            raise RuntimeError("sampling before warm-up finished")
        u = rng.integers(0, self.n_obs, int(batch))
        return self._slot_of(u)

    def _slot_of(self, u):
        idx = np.searchsorted(self._cum, u, side="right")
        prev = np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0)
        return self._starts[idx] + (u - prev)

    def _refresh_per_order(self):
        elig = np.concatenate(
            [np.arange(m.start, m.start + m.n, dtype=np.int64) for m in self.episodes]
        )
        p = self.priority[elig]
        order = np.argsort(-p, kind="stable")  # insertion order breaks ties
        ordered = elig[order]
        ranks = np.arange(1, ordered.shape[0] + 1, dtype=np.float64)
        base = ranks ** (-self._per_alpha)
        # tied priorities share the mean probability of their rank block
        ps = p[order]
        boundaries = np.flatnonzero(np.diff(ps)) + 1
        group_starts = np.concatenate(([0], boundaries))
        sizes = np.diff(np.concatenate((group_starts, [ordered.shape[0]])))
        probs = np.repeat(np.add.reduceat(base, group_starts) / sizes, sizes)
        probs /= probs.sum()
        self._per_order = ordered
        self._per_probs = probs
        self._per_cum = np.cumsum(probs)
        self._per_dirty = False

    def sample_rank_per(self, batch, rng: np.random.Generator, alpha, beta_per):
        """Rank-based prioritized draw: (slots, importance weights)."""
        if self.n_obs < max(self.warmup, 1):
            raise RuntimeError("sampling before warm-up finished")
        if self._per_dirty or self._per_alpha != alpha:
            self._per_alpha = alpha
            self._refresh_per_order()
        u = rng.random(int(batch))
        idx = np.minimum(np.searchsorted(self._per_cum, u, side="right"), self._per_order.shape[0] - 1)
        slots = self._per_order[idx]
        p = self._per_probs[idx]
        w = (self.n_obs * p) ** (-beta_per)
        w /= w.max()
        return slots, w

    def update_priorities(self, slots, td_abs):
        td_abs = np.abs(np.asarray(td_abs, dtype=np.float64))
        self.priority[slots] = td_abs
        if td_abs.size:
            self.max_priority = max(self.max_priority, float(td_abs.max()))
        self._per_dirty = True

    # ---- per-step cache refresh -------------------------------------------

    def refresh_sample(self, slot, new_value, new_rho, c_max):
        self.refresh_many(
            np.asarray([slot], dtype=np.int64),
            np.asarray([new_value], dtype=np.float64),
            np.asarray([new_rho], dtype=np.float64),
            c_max,
        )

    def refresh_many(self, slots, new_values, new_rhos, c_max, rescan=True):
        """Write fresh value/ratio caches for the sampled slots, update the
        far counter, and redo the return scan of every touched episode."""
        slots = np.asarray(slots, dtype=np.int64)
        if np.any(self.closing[slots]):
            raise ValueError("closing steps cannot be refreshed")
        uniq, first = np.unique(slots, return_index=True)
        was_far = self.far[uniq]
        self.values[slots] = new_values
        self.rho[slots] = new_rhos
        now_far = ~classify(self.rho[uniq], c_max)
        self.far[uniq] = now_far
        self.n_far += int(now_far.sum()) - int(was_far.sum())
        if rescan:
            self._rescan_episodes(uniq)

    def _rescan_episodes(self, slots):
        starts = np.unique(self.ep_start[slots])
        lens = self.ep_len[starts]
        inv = 1.0 / (self.sigma_r + REWARD_EPS) if self.sigma_r is not None else 1.0
        _scan_many(
            self.values, self.rho, self.rewards, inv, self.gamma, starts, lens, self.v_ret, self.q_ret
        )

    def recount_far(self, c_max) -> int:
        """Re-classify every stored step at the current threshold."""
        n = 0
        for m in self.episodes:
            span = slice(m.start, m.start + m.n)
            flags = ~classify(self.rho[span], c_max)
            self.far[span] = flags
            n += int(flags.sum())
        self.n_far = n
        return n

    # ---- normalization statistics -----------------------------------------

    def freeze_state_stats(self):
        """Mean/std over every stored observation; called once at warm-up end."""
        if self.n_obs == 0:
            raise RuntimeError("no observations to compute statistics from")
        rows = np.concatenate(
            [self.states[m.start : m.start + m.n + 1] for m in self.episodes], axis=0
        )
        self.state_mean = rows.mean(axis=0)
        self.state_std = rows.std(axis=0)
        return self.state_mean, self.state_std

    def standardize(self, s):
        if self.state_mean is None:
            return np.asarray(s, dtype=np.float64)
        return (np.asarray(s, dtype=np.float64) - self.state_mean) / (self.state_std + STATE_EPS)

    def update_reward_scale(self) -> Optional[float]:
        """sigma_r = sqrt(mean r^2) over the rewards that followed each stored
        action. Cached return estimates are not rewritten; they converge
        through refreshes."""
        if self.n_obs == 0:
            return self.sigma_r
        total = 0.0
        for m in self.episodes:
            r = self.rewards[m.start + 1 : m.start + m.n + 1]
            total += float(r @ r)
        self.sigma_r = float(np.sqrt(total / self.n_obs))
        return self.sigma_r

    def scale_reward(self, r):
        if self.sigma_r is None:
            return np.asarray(r, dtype=np.float64)
        return np.asarray(r, dtype=np.float64) / (self.sigma_r + REWARD_EPS)

    # ---- batch gather -------------------------------------------------------

    def batch_view(self, slots):
        nxt = slots + 1
        return {
            "slots": slots,
            "states": self.states[slots],
            "actions": self.actions[slots],
            "mu_mean": self.mu_mean[slots],
            "mu_std": self.mu_std[slots],
            "values": self.values[slots],
            "rho": self.rho[slots],
            "v_ret": self.v_ret[slots],
            "q_ret": self.q_ret[slots],
            "reward_next": self.rewards[nxt],
            "next_states": self.states[nxt],
            "next_closing": self.closing[nxt],
            "terminal": self.terminal[slots],
        }

    # ---- serialization ------------------------------------------------------

    def pack(self):
        """Compact live contents, FIFO order. Returns (meta, arrays)."""
        spans = [slice(m.start, m.start + m.n + 1) for m in self.episodes]

        def cat(a):
            return np.concatenate([a[s] for s in spans], axis=0) if spans else a[:0]

        arrays = {
            "rm_states": cat(self.states),
            "rm_actions": cat(self.actions),
            "rm_rewards": cat(self.rewards),
            "rm_mu_mean": cat(self.mu_mean),
            "rm_mu_std": cat(self.mu_std),
            "rm_values": cat(self.values),
            "rm_rho": cat(self.rho),
            "rm_v_ret": cat(self.v_ret),
            "rm_q_ret": cat(self.q_ret),
            "rm_priority": cat(self.priority),
            "rm_far": cat(self.far).astype(np.uint8),
            "rm_ep_len": np.fromiter((m.n for m in self.episodes), dtype=np.int64, count=len(self.episodes)),
            "rm_ep_terminal": np.fromiter(
                (m.terminal for m in self.episodes), dtype=np.uint8, count=len(self.episodes)
            ),
        }
        meta = {
            "n_obs": self.n_obs,
            "n_far": self.n_far,
            "sigma_r": self.sigma_r,
            "max_priority": self.max_priority,
            "next_uid": self._next_uid,
            "state_mean": None if self.state_mean is None else self.state_mean.tolist(),
            "state_std": None if self.state_std is None else self.state_std.tolist(),
        }
        return meta, arrays

    def restore(self, meta, arrays):
        """Rebuild the arena from pack() output; caches verbatim."""
        self.episodes.clear()
        self._write = 0
        self.n_obs = 0
        self.n_far = 0
        pos = 0
        for n, term in zip(arrays["rm_ep_len"], arrays["rm_ep_terminal"]):
            n = int(n)
            w = self._write
            rows = slice(pos, pos + n + 1)
            self.states[w : w + n + 1] = arrays["rm_states"][rows]
            self.actions[w : w + n + 1] = arrays["rm_actions"][rows]
            self.rewards[w : w + n + 1] = arrays["rm_rewards"][rows]
            self.mu_mean[w : w + n + 1] = arrays["rm_mu_mean"][rows]
            self.mu_std[w : w + n + 1] = arrays["rm_mu_std"][rows]
            self.values[w : w + n + 1] = arrays["rm_values"][rows]
            self.rho[w : w + n + 1] = arrays["rm_rho"][rows]
            self.v_ret[w : w + n + 1] = arrays["rm_v_ret"][rows]
            self.q_ret[w : w + n + 1] = arrays["rm_q_ret"][rows]
            self.priority[w : w + n + 1] = arrays["rm_priority"][rows]
            self.far[w : w + n + 1] = arrays["rm_far"][rows].astype(bool)
            self.closing[w : w + n + 1] = False
            self.closing[w + n] = True
            self.terminal[w : w + n + 1] = bool(term)
            self.ep_start[w : w + n + 1] = w
            self.ep_len[w : w + n + 1] = n
            self.episodes.append(_EpMeta(len(self.episodes), w, n, bool(term)))
            self._write = w + n + 1
            self.n_obs += n
            pos += n + 1
        self.n_far = int(meta["n_far"])
        self.sigma_r = meta["sigma_r"]
        self.max_priority = float(meta["max_priority"])
        self._next_uid = int(meta["next_uid"])
        self.state_mean = None if meta["state_mean"] is None else np.asarray(meta["state_mean"])
        self.state_std = None if meta["state_std"] is None else np.asarray(meta["state_std"])
        self._rebuild_index()
        self._per_dirty = True
