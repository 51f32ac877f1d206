"""Run configuration: defaults, key=value file parsing, validation, digest."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from typing import Optional

REPLAYS = ("refer", "refer1", "refer2", "er", "per")
ALGOS = ("vracer", "ddpg", "naf")
ADV_HEADS = ("none", "quad", "asym")


@dataclass(frozen=True)
class TrainConfig:
    algo: str = "vracer"
    replay: str = "refer"
    env: str = "pendulum"
    total_steps: int = 100_000
    seed: int = 0
    workers: int = 1
    capacity: int = 2**18
    warmup: Optional[int] = None  # resolved: 1024 for pendulum, else 4096
    batch: Optional[int] = None  # resolved: 128 for ddpg, else 256
    steps_per_grad: int = 1
    gamma: float = 0.995
    lr: Optional[float] = None  # resolved: 1e-4 (ddpg: critic)
    actor_lr: float = 1e-5
    clip_width: float = 4.0
    anneal: Optional[float] = None  # resolved: 5e-7; 0 for ddpg baselines
    far_target: float = 0.1
    hidden: tuple = (48, 352)
    adv_head: str = "none"
    explore_std: float = 0.2
    ou_theta: float = 0.15
    soft_update: float = 0.01
    critic_decay: float = 1e-4
    bin_width: int = 1000
    metrics_sample: int = 256
    checkpoint_every: int = 0
    stats_every: int = 1000
    per_alpha: float = 0.7
    per_beta0: float = 0.4
    rho_cap: float = 1e3

    # ---- derived flags -------------------------------------------------------

    @property
    def clip_far(self) -> bool:
        return self.replay in ("refer", "refer1")

    @property
    def penalty_on(self) -> bool:
        return self.replay in ("refer", "refer2")

    @property
    def uses_per(self) -> bool:
        return self.replay == "per"

    @property
    def uses_ou(self) -> bool:
        # the plain-replay baselines explore with OU noise; everything else
        # samples the truncated Gaussian
        return self.algo == "ddpg" and self.replay in ("er", "per")

    def resolve(self) -> "TrainConfig":
        """Fill conditional defaults and validate. Returns a new config."""
        batch = self.batch if self.batch is not None else (128 if self.algo == "ddpg" else 256)
        lr = self.lr if self.lr is not None else 1e-4
        if self.anneal is not None:
            anneal = self.anneal
        else:
            anneal = 0.0 if (self.algo == "ddpg" and self.replay in ("er", "per")) else 5e-7
        if self.warmup is not None:
            warmup = self.warmup
        else:
            # state standardization freezes at warm-up end; slow-mixing tasks
            # need more episodes before the frozen scales are trustworthy
            warmup = 1024 if self.env == "pendulum" else 4096
        cfg = dataclasses.replace(self, batch=int(batch), lr=float(lr), anneal=float(anneal),
                                  warmup=int(warmup))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algo {self.algo!r}; choose from {ALGOS}")
        if self.replay not in REPLAYS:
            raise ValueError(f"unknown replay mode {self.replay!r}; choose from {REPLAYS}")
        if self.adv_head not in ADV_HEADS:
            raise ValueError(f"unknown adv_head {self.adv_head!r}; choose from {ADV_HEADS}")
        if self.adv_head != "none" and self.algo != "vracer":
            raise ValueError("adv_head applies to the vracer algorithm only")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        for name in ("workers", "capacity", "steps_per_grad", "bin_width",
                     "metrics_sample", "stats_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("batch", "warmup"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.warmup is not None and self.warmup > self.capacity:
            raise ValueError("warmup cannot exceed capacity (warm-up would never finish)")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be >= 0")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 < self.far_target < 1.0:
            raise ValueError("far_target must be in (0, 1)")
        if self.clip_width <= 0.0:
            raise ValueError("clip_width must be positive")
        if self.anneal is not None and self.anneal < 0.0:
            raise ValueError("anneal must be >= 0")
        for name in ("explore_std", "ou_theta", "soft_update", "rho_cap", "per_alpha"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.per_beta0 <= 1.0:
            raise ValueError("per_beta0 must be in (0, 1]")
        if not self.hidden or any(int(h) < 1 for h in self.hidden):
            raise ValueError("hidden must be a non-empty tuple of positive sizes")

    # ---- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    def digest(self) -> str:
        """Identity of everything that shapes the computation. total_steps is
        excluded so a resumed run may extend the budget."""
        lines = []
        for f in sorted(dataclasses.fields(self), key=lambda f: f.name):
            if f.name == "total_steps":
                continue
            lines.append(f"{f.name}={_canon(getattr(self, f.name))}")
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def _canon(v) -> str:
    if isinstance(v, tuple) or isinstance(v, list):
        return ",".join(str(int(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(name: str, raw: str):
    raw = raw.strip()
    if name == "hidden":
        return tuple(int(p) for p in raw.replace("(", "").replace(")", "").split(",") if p.strip())
    field_types = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    if name not in field_types:
        raise ValueError(f"unknown config key {name!r}")
    t = field_types[name]
    if t == "int" or t == "Optional[int]":
        return int(raw)
    if t == "float" or t == "Optional[float]":
        return float(raw)
    return raw


def parse_config_file(path) -> dict:
    """key=value lines; # comments and blank lines ignored."""
    overrides = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value, got {line!r}")
            key, val = line.split("=", 1)
            overrides[key.strip()] = _coerce(key.strip(), val)
    return overrides


def build_config(file_path=None, cli_overrides=None) -> TrainConfig:
    """Defaults, overridden by the config file, overridden by CLI flags."""
    merged = {}
    if file_path is not None:
        merged.update(parse_config_file(file_path))
    for key, val in (cli_overrides or {}).items():
        if val is not None:
            merged[key] = _coerce(key, str(val)) if isinstance(val, str) else val
    return TrainConfig(**merged).resolve()


def config_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    if "hidden" in d:
        d["hidden"] = tuple(int(h) for h in d["hidden"])
    return TrainConfig(**d).resolve()
