"""Adam with bias correction, plus the shared hyperbolic annealing schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Schedule:
    """Annealed learning rate and importance-ratio bound.

    c_max(t) = 1 + clip_width / (1 + anneal * t)
    eta(t)   = lr / (1 + anneal * t)
    """

    lr: float
    clip_width: float = 4.0
    anneal: float = 5e-7

    def __post_init__(self):
        if self.lr <= 0 or self.clip_width <= 0 or self.anneal < 0:
            raise ValueError("lr and clip_width must be positive, anneal non-negative")


def anneal(schedule: Schedule, t: int):
    """(c_max, eta) at time step t >= 0."""
    if t < 0:
        raise ValueError("t must be non-negative")
    damp = 1.0 + schedule.anneal * t
    return 1.0 + schedule.clip_width / damp, schedule.lr / damp


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(params), v=np.zeros_like(params))


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState, eta: float) -> None:
    """One in-place descent step on `params`. Rejects non-finite gradients."""
    if not np.all(np.isfinite(grad)):
        bad = int(np.sum(~np.isfinite(grad)))
        raise FloatingPointError(f"{bad} non-finite gradient component(s)")
    state.t += 1
    state.m += (1.0 - state.beta1) * (grad - state.m)
    state.v += (1.0 - state.beta2) * (grad * grad - state.v)
    mhat = state.m / (1.0 - state.beta1 ** state.t)
    vhat = state.v / (1.0 - state.beta2 ** state.t)
    params -= eta * mhat / (np.sqrt(vhat) + state.eps)
