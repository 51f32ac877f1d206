"""The training loop: workers collect experience, the learner consumes it.

Time is measured in environment steps t (warm-up included) and gradient steps
k. After warm-up ends at t0, the loop keeps t - t0 = F * k up to integer
rounding, so a run of T steps performs (T - t0) // F gradient updates. All
randomness flows from one seed through named SeedSequence children (learner
init, batch sampler, metrics probe, one per worker), which makes single-worker
runs reproducible to the byte.
"""

from __future__ import annotations

import time
from pathlib import Path
from typing import Optional

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, config_from_dict
from .envs import action_rescale, make_env
from .learners import make_learner
from .metrics import MetricsLog
from .optim import Schedule, anneal
from .policy import kl_divergence
from .replay import STATE_EPS, EpisodeBuilder, ReplayMemory, update_beta

CHECKPOINT_NAME = "checkpoint.ckpt"
METRICS_NAME = "metrics.csv"


class Worker:
    """One environment instance plus its in-flight episode."""

    def __init__(self, env, rng, act_dim, use_ou, ou_theta, explore_std):
        self.env = env
        self.rng = rng
        self.use_ou = use_ou
        self.ou_theta = float(ou_theta)
        self.explore_std = np.full(act_dim, float(explore_std))
        self.ou = np.zeros(act_dim)
        self.builder = EpisodeBuilder()
        self.state = env.reset(rng)
        self.r_prev = 0.0

    def step(self, learner, rm) -> Optional[float]:
        """Advance the environment one step; returns the episode's raw return
        when this step closes it, else None."""
        s_std = rm.standardize(self.state)
        if self.use_ou:
            mean = learner.mean_action(s_std)
            self.ou = (1.0 - self.ou_theta) * self.ou + self.explore_std * self.rng.standard_normal(mean.shape)
            action = mean + self.ou
            mu_mean, mu_std = mean, self.explore_std.copy()
            value = learner.closing_value(s_std)
        else:
            action, mu_mean, mu_std, value = learner.act(s_std, self.rng)
        spec = self.env.spec
        obs, reward, done = self.env.step(action_rescale(action, spec.act_low, spec.act_high))
        self.builder.add(self.state, action, self.r_prev, mu_mean, mu_std, value)
        self.r_prev = float(reward)
        self.state = obs
        if done is None:
            return None
        terminal = done == "terminal"
        closing = 0.0 if terminal else float(learner.closing_value(rm.standardize(obs)))
        ep = self.builder.close(obs, self.r_prev, closing, terminal)
        ret = ep.total_return
        rm.add_episode(ep)
        self.state = self.env.reset(self.rng)
        self.r_prev = 0.0
        self.ou[:] = 0.0
        return ret


class Trainer:
    def __init__(self, config: TrainConfig, out_dir):
        self.cfg = config.resolve()
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        env0 = make_env(self.cfg.env)
        spec = env0.spec
        init_ss, sampler_ss, metrics_ss, *worker_ss = np.random.SeedSequence(self.cfg.seed).spawn(
            3 + self.cfg.workers
        )
        self.learner = make_learner(
            self.cfg.algo, spec.state_dim, spec.act_dim,
            hidden=self.cfg.hidden, explore_std=self.cfg.explore_std, lr=self.cfg.lr,
            actor_lr=self.cfg.actor_lr, soft_update_rate=self.cfg.soft_update,
            critic_decay=self.cfg.critic_decay, adv_head=self.cfg.adv_head,
            seed=np.random.Generator(np.random.PCG64(init_ss)),
        )
        self.rm = ReplayMemory(self.cfg.capacity, spec.state_dim, spec.act_dim,
                               spec.max_steps, self.cfg.gamma, warmup=self.cfg.warmup)
        self.sampler_rng = np.random.Generator(np.random.PCG64(sampler_ss))
        self.metrics_rng = np.random.Generator(np.random.PCG64(metrics_ss))
        envs = [env0] + [make_env(self.cfg.env) for _ in range(self.cfg.workers - 1)]
        self.workers = [
            Worker(env, np.random.Generator(np.random.PCG64(wss)), spec.act_dim,
                   self.cfg.uses_ou, self.cfg.ou_theta, self.cfg.explore_std)
            for env, wss in zip(envs, worker_ss)
        ]
        self.schedule = Schedule(lr=self.cfg.lr, clip_width=self.cfg.clip_width,
                                 anneal=self.cfg.anneal)
        self.metrics = MetricsLog(self.out / METRICS_NAME, self.cfg.bin_width)
        self.t = 0
        self.k = 0
        self.beta = 1.0
        self.t0: Optional[int] = None
        self._warm_returns = []
        self._next_worker = 0
        self._start_time = time.monotonic()

    # ---- loop pieces ---------------------------------------------------------

    def _env_step(self) -> Optional[float]:
        w = self.workers[self._next_worker]
        self._next_worker = (self._next_worker + 1) % len(self.workers)
        ret = w.step(self.learner, self.rm)
        self.t += 1
        return ret

    def _run_warmup(self):
        while self.rm.n_obs < self.cfg.warmup and self.t < self.cfg.total_steps:
            ret = self._env_step()
            if ret is not None:
                self._warm_returns.append(ret)
        if self.rm.n_obs == 0:
            return  # step budget too small for a single episode
        self.rm.freeze_state_stats()
        self.rm.update_reward_scale()
        self.t0 = self.t
        self.metrics.seed_returns(self._warm_returns)
        self.metrics.advance_past(self.t)

    def _gradient_step(self):
        cfg = self.cfg
        c_max, eta = anneal(self.schedule, self.t)
        if cfg.uses_per:
            frac = min(1.0, self.t / cfg.total_steps) if cfg.total_steps else 1.0
            beta_per = cfg.per_beta0 + (1.0 - cfg.per_beta0) * frac
            slots, weights = self.rm.sample_rank_per(cfg.batch, self.sampler_rng,
                                                     cfg.per_alpha, beta_per)
        else:
            slots = self.rm.sample_uniform(cfg.batch, self.sampler_rng)
            weights = None
        self.learner.gradient_step(
            self.rm, slots, c_max=c_max, beta=self.beta, eta=eta,
            clip_far=cfg.clip_far, penalty_on=cfg.penalty_on,
            rho_cap=cfg.rho_cap, per_weights=weights,
        )
        self.k += 1
        if cfg.penalty_on:
            self.beta = update_beta(self.beta, self.rm.far_fraction, cfg.far_target, eta)
        if self.k % cfg.stats_every == 0:
            self.rm.update_reward_scale()
            self.rm.recount_far(c_max)

    def _avg_dkl(self) -> float:
        slots = self.rm.sample_uniform(self.cfg.metrics_sample, self.metrics_rng)
        view = self.rm.batch_view(slots)
        pi_mean, pi_std, _ = self.learner.policy_stats(self.rm.standardize(view["states"]))
        return float(np.mean(kl_divergence(view["mu_mean"], view["mu_std"], pi_mean, pi_std)))

    def _emit_row(self):
        c_max, eta = anneal(self.schedule, self.t)
        wall = 0.0 if len(self.workers) == 1 else time.monotonic() - self._start_time
        self.metrics.emit(
            time_step=self.t, grad_step=self.k, beta=self.beta, c_max=c_max, eta=eta,
            far_fraction=self.rm.far_fraction, avg_dkl=self._avg_dkl(),
            sigma_r=0.0 if self.rm.sigma_r is None else self.rm.sigma_r,
            wall_seconds=wall,
        )

    def _train_loop(self):
        cfg = self.cfg
        while self.t < cfg.total_steps:
            ret = self._env_step()
            if ret is not None:
                self.metrics.note_return(ret)
            while self.k < (self.t - self.t0) // cfg.steps_per_grad:
                self._gradient_step()
            if self.metrics.due(self.t):
                self._emit_row()
            if cfg.checkpoint_every and self.t % cfg.checkpoint_every == 0:
                self.save(self.out / CHECKPOINT_NAME)

    def run(self, resume: bool = False) -> Path:
        """Warm up (or continue), train to the step budget, save the final
        checkpoint. Returns the checkpoint path."""
        if resume:
            self.load(self.out / CHECKPOINT_NAME)
            self.metrics.open_resume()
        else:
            self.metrics.open_fresh()
        try:
            if self.t0 is None:
                self._run_warmup()
            if self.t0 is not None:
                self._train_loop()
        except FloatingPointError as exc:
            # leave a diagnostic row at the failure step, then surface the error
            self._emit_row()
            self.save(self.out / CHECKPOINT_NAME)
            self.metrics.close()
            raise RuntimeError(f"non-finite gradient at t={self.t}, k={self.k}") from exc
        path = self.out / CHECKPOINT_NAME
        self.save(path)
        self.metrics.close()
        return path

    # ---- persistence -----------------------------------------------------------

    def save(self, path):
        rm_meta, rm_arrays = self.rm.pack()
        learner_arrays = self.learner.arrays()
        arrays = dict(learner_arrays)
        arrays.update(rm_arrays)
        workers_meta = []
        ds, da = self.rm.state_dim, self.rm.act_dim
        for i, w in enumerate(self.workers):
            b = w.builder
            n = len(b)
            arrays[f"w{i}_states"] = np.array(b.states, dtype=np.float64).reshape(n, ds)
            arrays[f"w{i}_actions"] = np.array(b.actions, dtype=np.float64).reshape(n, da)
            arrays[f"w{i}_rewards"] = np.array(b.rewards, dtype=np.float64)
            arrays[f"w{i}_mu_mean"] = np.array(b.mu_mean, dtype=np.float64).reshape(n, da)
            arrays[f"w{i}_mu_std"] = np.array(b.mu_std, dtype=np.float64).reshape(n, da)
            arrays[f"w{i}_values"] = np.array(b.values, dtype=np.float64)
            arrays[f"w{i}_state"] = np.asarray(w.state, dtype=np.float64)
            arrays[f"w{i}_ou"] = w.ou
            arrays[f"w{i}_env"] = w.env.physics_state()
            workers_meta.append({"r_prev": w.r_prev, "rng": w.rng.bit_generator.state})
        header = {
            "config": self.cfg.to_dict(),
            "digest": self.cfg.digest(),
            "t": self.t,
            "k": self.k,
            "beta": self.beta,
            "t0": self.t0,
            "sigma_r": rm_meta["sigma_r"],
            "state_mean": rm_meta["state_mean"],
            "state_std": rm_meta["state_std"],
            "rm": rm_meta,
            "param_counts": {
                name: int(arr.size)
                for name, arr in learner_arrays.items()
                if "adam" not in name and not name.startswith("target")
            },
            "learner_scalars": self.learner.scalars(),
            "rng": {
                "sampler": self.sampler_rng.bit_generator.state,
                "metrics": self.metrics_rng.bit_generator.state,
            },
            "workers": workers_meta,
            "metrics": self.metrics.state(),
            "next_worker": self._next_worker,
            "warm_returns": list(self._warm_returns),
        }
        save_checkpoint(path, header, arrays)

    def load(self, path):
        header, arrays = load_checkpoint(path)
        if header.get("digest") != self.cfg.digest():
            raise ValueError("checkpoint was written by a different configuration")
        self.learner.load(arrays, header["learner_scalars"])
        self.rm.restore(header["rm"], arrays)
        self.t = int(header["t"])
        self.k = int(header["k"])
        self.beta = float(header["beta"])
        self.t0 = None if header["t0"] is None else int(header["t0"])
        self._warm_returns = [float(x) for x in header["warm_returns"]]
        self.sampler_rng.bit_generator.state = header["rng"]["sampler"]
        self.metrics_rng.bit_generator.state = header["rng"]["metrics"]
        self._next_worker = int(header["next_worker"])
        for i, (w, wm) in enumerate(zip(self.workers, header["workers"])):
            w.rng.bit_generator.state = wm["rng"]
            w.r_prev = float(wm["r_prev"])
            w.state = arrays[f"w{i}_state"].copy()
            w.ou = arrays[f"w{i}_ou"].copy()
            w.env.set_physics_state(arrays[f"w{i}_env"])
            w.builder = EpisodeBuilder()
            for j in range(arrays[f"w{i}_rewards"].shape[0]):
                w.builder.add(
                    arrays[f"w{i}_states"][j], arrays[f"w{i}_actions"][j],
                    arrays[f"w{i}_rewards"][j], arrays[f"w{i}_mu_mean"][j],
                    arrays[f"w{i}_mu_std"][j], arrays[f"w{i}_values"][j],
                )
        self.metrics.load_state(header["metrics"])


def train(config: TrainConfig, out_dir, resume: bool = False) -> Path:
    """Run training to completion; returns the final checkpoint path."""
    return Trainer(config, out_dir).run(resume=resume)


def evaluate_checkpoint(path, episodes: int, seed: int, env_name: Optional[str] = None):
    """Deterministic evaluation: play the mean action, no exploration.
    Returns (mean_return, per_episode_returns) in raw environment reward."""
    if int(episodes) < 1:
        raise ValueError("episodes must be >= 1")
    header, arrays = load_checkpoint(path)
    cfg = config_from_dict(header["config"])
    if env_name is not None and env_name != cfg.env:
        raise ValueError(f"checkpoint was trained on {cfg.env!r}, not {env_name!r}")
    env = make_env(cfg.env)
    learner = make_learner(
        cfg.algo, env.spec.state_dim, env.spec.act_dim,
        hidden=cfg.hidden, explore_std=cfg.explore_std, lr=cfg.lr, actor_lr=cfg.actor_lr,
        soft_update_rate=cfg.soft_update, critic_decay=cfg.critic_decay,
        adv_head=cfg.adv_head, seed=0,
    )
    learner.load(arrays, header["learner_scalars"])
    mean = header["state_mean"]
    std = header["state_std"]
    if mean is not None:
        mean = np.asarray(mean, dtype=np.float64)
        std = np.asarray(std, dtype=np.float64)

    def standardize(s):
        return s if mean is None else (s - mean) / (std + STATE_EPS)

    rng = np.random.Generator(np.random.PCG64(int(seed)))
    returns = []
    for _ in range(int(episodes)):
        s = env.reset(rng)
        total = 0.0
        while True:
            a = learner.mean_action(standardize(s))
            s, r, done = env.step(action_rescale(a, env.spec.act_low, env.spec.act_high))
            total += float(r)
            if done is not None:
                break
        returns.append(total)
    return float(np.mean(returns)), returns
