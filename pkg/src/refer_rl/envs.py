"""Two small continuous-control tasks with fixed-step integrators.

Rewards are evaluated at the pre-step state together with the action just
applied; the harness stores each reward on the following observation, so an
episode's first stored reward is always zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    act_dim: int
    act_low: float
    act_high: float
    max_steps: int


def action_rescale(a, low, high):
    """Map a policy-space action to the env's torque/force range:
    a * (high-low)/2, clamped to [low, high]."""
    a = np.asarray(a, dtype=np.float64)
    return np.clip(a * (high - low) / 2.0, low, high)


def wrap_angle(theta: float) -> float:
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


class Pendulum:
    """Torque-limited swing-up. Angle is measured from the upright position,
    so hanging rest is theta = +-pi and the cost peaks there."""

    spec = EnvSpec("pendulum", 3, 1, -2.0, 2.0, 200)
    GRAVITY = 9.81  # m = l = 1
    DT = 0.05
    SPEED_LIMIT = 8.0

    def __init__(self):
        self.theta = 0.0
        self.theta_dot = 0.0
        self.steps = 0

    def reset(self, rng: np.random.Generator):
        self.theta = math.pi - rng.uniform(0.0, 2.0 * math.pi)  # (-pi, pi]
        self.theta_dot = rng.uniform(-1.0, 1.0)
        self.steps = 0
        return self.observe()

    def observe(self):
        return np.array([math.cos(self.theta), math.sin(self.theta), self.theta_dot])

    def step(self, action):
        tau = float(np.asarray(action).reshape(-1)[0])
        th = wrap_angle(self.theta)
        reward = -(th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * tau * tau)
        # semi-implicit Euler: velocity first, then position with the new velocity
        self.theta_dot += self.DT * (self.GRAVITY * math.sin(self.theta) + tau)
        self.theta_dot = min(max(self.theta_dot, -self.SPEED_LIMIT), self.SPEED_LIMIT)
        self.theta += self.DT * self.theta_dot
        self.steps += 1
        done = "truncated" if self.steps >= self.spec.max_steps else None
        return self.observe(), reward, done

    def physics_state(self):
        return np.array([self.theta, self.theta_dot, float(self.steps)])

    def set_physics_state(self, s):
        self.theta, self.theta_dot = float(s[0]), float(s[1])
        self.steps = int(s[2])


class PointMass:
    """Double integrator on the plane; drifting out of the arena ends the
    episode with a -100 penalty."""

    spec = EnvSpec("pointmass", 4, 2, -1.0, 1.0, 400)
    DT = 0.05
    ARENA_RADIUS = 5.0
    EXIT_REWARD = -100.0

    def __init__(self):
        self.x = np.zeros(2)
        self.v = np.zeros(2)
        self.steps = 0

    def reset(self, rng: np.random.Generator):
        self.x = rng.uniform(-1.0, 1.0, 2)
        self.v = np.zeros(2)
        self.steps = 0
        return self.observe()

    def observe(self):
        return np.concatenate([self.x, self.v])

    def step(self, action):
        f = np.asarray(action, dtype=np.float64).reshape(2)
        reward = -(float(self.x @ self.x) + 0.01 * float(f @ f))
        # explicit Euler: position advances with the old velocity
        self.x = self.x + self.DT * self.v
        self.v = self.v + self.DT * f
        self.steps += 1
        if float(np.linalg.norm(self.x)) > self.ARENA_RADIUS:
            return self.observe(), self.EXIT_REWARD, "terminal"
        done = "truncated" if self.steps >= self.spec.max_steps else None
        return self.observe(), reward, done

    def physics_state(self):
        return np.concatenate([self.x, self.v, [float(self.steps)]])

    def set_physics_state(self, s):
        self.x = np.array(s[0:2], dtype=np.float64)
        self.v = np.array(s[2:4], dtype=np.float64)
        self.steps = int(s[4])


_REGISTRY = {"pendulum": Pendulum, "pointmass": PointMass}


def make_env(name: str):
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown env '{name}' (have: {sorted(_REGISTRY)})") from None


def env_names():
    return sorted(_REGISTRY)
