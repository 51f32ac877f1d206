import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from refer_rl.envs import Pendulum, PointMass, action_rescale, env_names, make_env, wrap_angle


# ---------------------------------------------------------------- rescale

def test_rescale_unit_action_hits_bound():
    assert action_rescale(1.0, -2.0, 2.0) == 2.0


def test_rescale_zero_is_zero():
    assert action_rescale(0.0, -2.0, 2.0) == 0.0


def test_rescale_clamps_overflow():
    assert action_rescale(10.0, -2.0, 2.0) == 2.0
    assert action_rescale(-10.0, -2.0, 2.0) == -2.0


def test_rescale_is_componentwise():
    out = action_rescale(np.array([0.5, -3.0]), -1.0, 1.0)
    assert np.allclose(out, [0.5, -1.0])


@given(st.floats(-50, 50))
def test_rescale_stays_in_bounds(a):
    out = float(action_rescale(a, -2.0, 2.0))
    assert -2.0 <= out <= 2.0


# ------------------------------------------------------------- wrap angle

@given(st.floats(-100.0, 100.0))
def test_wrap_angle_range_and_identity(theta):
    w = wrap_angle(theta)
    assert -math.pi <= w <= math.pi
    # same point on the circle
    assert math.cos(w) == pytest.approx(math.cos(theta), abs=1e-9)
    assert math.sin(w) == pytest.approx(math.sin(theta), abs=1e-9)


# --------------------------------------------------------------- pendulum

def test_pendulum_upright_is_fixed_point():
    env = Pendulum()
    env.set_physics_state([0.0, 0.0, 0])
    obs, reward, done = env.step(0.0)
    assert reward == 0.0
    assert done is None
    assert env.theta == 0.0 and env.theta_dot == 0.0
    assert np.allclose(obs, [1.0, 0.0, 0.0])


def test_pendulum_hanging_reward():
    # hanging rest: maximal angle cost, pi^2
    env = Pendulum()
    env.set_physics_state([math.pi, 0.0, 0])
    _, reward, _ = env.step(0.0)
    assert reward == pytest.approx(-math.pi**2, abs=1e-12)
    assert abs(env.theta_dot) < 1e-14


def test_pendulum_reward_charges_torque():
    env = Pendulum()
    env.set_physics_state([0.0, 0.0, 0])
    _, reward, _ = env.step(2.0)
    assert reward == pytest.approx(-0.001 * 4.0, abs=1e-15)


def test_pendulum_speed_limit():
    env = Pendulum()
    env.set_physics_state([math.pi / 2, 7.9, 0])
    for _ in range(50):
        env.step(2.0)
        assert abs(env.theta_dot) <= 8.0


def test_pendulum_energy_drift_is_integrator_error():
    # Torque-free energy E = thdot^2/2 + g*cos(theta) is exact-dynamics
    # invariant; one env step may move it only O(dt^2) relative to a
    # high-resolution reference (the constant is ~g^2). The start angle keeps
    # the speed below the clamp.
    g, dt = Pendulum.GRAVITY, Pendulum.DT

    def energy(th, thd):
        return 0.5 * thd * thd + g * math.cos(th)

    def reference(th, thd, n=4096):
        h = dt / n
        for _ in range(n):
            thd += h * g * math.sin(th)
            th += h * thd
        return th, thd

    env = Pendulum()
    env.set_physics_state([2.0, 0.0, 0])
    e0 = energy(env.theta, env.theta_dot)
    for _ in range(400):
        ref = reference(env.theta, env.theta_dot)
        env.step(0.0)
        assert abs(env.theta_dot) < env.SPEED_LIMIT
        step_err = abs(energy(env.theta, env.theta_dot) - energy(*ref))
        assert step_err <= 100.0 * dt * dt
        # symplectic update: the error oscillates instead of accumulating
        assert abs(energy(env.theta, env.theta_dot) - e0) < 1.0


def test_pendulum_truncates_never_terminal():
    env = Pendulum()
    env.reset(np.random.default_rng(3))
    for t in range(1, 201):
        _, _, done = env.step(0.5)
        assert done == ("truncated" if t == 200 else None)


def test_pendulum_reset_ranges():
    env = Pendulum()
    rng = np.random.default_rng(7)
    thetas, thdots = [], []
    for _ in range(500):
        env.reset(rng)
        thetas.append(env.theta)
        thdots.append(env.theta_dot)
    assert -math.pi < min(thetas) and max(thetas) <= math.pi
    assert -1.0 <= min(thdots) and max(thdots) <= 1.0
    # both halves of the circle are visited
    assert min(thetas) < -math.pi / 2 and max(thetas) > math.pi / 2


def test_pendulum_observation_on_unit_circle():
    env = Pendulum()
    rng = np.random.default_rng(11)
    obs = env.reset(rng)
    for _ in range(200):
        assert obs[0] ** 2 + obs[1] ** 2 == pytest.approx(1.0, abs=1e-12)
        obs, _, done = env.step(float(rng.uniform(-2, 2)))
        if done:
            break


# -------------------------------------------------------------- pointmass

def test_pointmass_origin_is_fixed_point():
    env = PointMass()
    env.set_physics_state([0, 0, 0, 0, 0])
    obs, reward, done = env.step([0.0, 0.0])
    assert reward == 0.0
    assert done is None
    assert np.all(obs == 0.0)


def test_pointmass_offset_costs_distance():
    env = PointMass()
    env.set_physics_state([1.0, 0.0, 0.0, 0.0, 0])
    obs, reward, done = env.step([0.0, 0.0])
    assert reward == -1.0
    assert done is None
    assert np.allclose(obs, [1.0, 0.0, 0.0, 0.0])


def test_pointmass_force_cost():
    env = PointMass()
    env.set_physics_state([0.0, 0.0, 0.0, 0.0, 0])
    _, reward, _ = env.step([1.0, 1.0])
    assert reward == pytest.approx(-0.02, abs=1e-15)


def test_pointmass_exit_is_terminal():
    env = PointMass()
    env.set_physics_state([4.99, 0.0, 1.0, 0.0, 0])
    obs, reward, done = env.step([0.0, 0.0])
    assert done == "terminal"
    assert reward == -100.0
    assert np.linalg.norm(obs[:2]) > 5.0


def test_pointmass_truncates_at_limit():
    env = PointMass()
    env.set_physics_state([0.5, 0.0, 0.0, 0.0, 0])
    for t in range(1, 401):
        _, _, done = env.step([0.0, 0.0])
        assert done == ("truncated" if t == 400 else None)


def test_pointmass_euler_order():
    # position moves with the pre-step velocity, velocity with the force
    env = PointMass()
    env.set_physics_state([0.0, 0.0, 1.0, 0.0, 0])
    env.step([0.0, 2.0])
    assert np.allclose(env.x, [0.05, 0.0])
    assert np.allclose(env.v, [1.0, 0.1])


# ----------------------------------------------------- shared plumbing

@pytest.mark.parametrize("name", ["pendulum", "pointmass"])
def test_trajectories_are_deterministic(name):
    def rollout(seed):
        env = make_env(name)
        rng = np.random.default_rng(seed)
        obs = [env.reset(np.random.default_rng(seed))]
        rewards = []
        for _ in range(50):
            a = rng.uniform(-1, 1, env.spec.act_dim)
            o, r, done = env.step(action_rescale(a, env.spec.act_low, env.spec.act_high))
            obs.append(o)
            rewards.append(r)
            if done:
                break
        return np.array(obs), np.array(rewards)

    o1, r1 = rollout(5)
    o2, r2 = rollout(5)
    assert np.array_equal(o1, o2) and np.array_equal(r1, r2)


@pytest.mark.parametrize("name", ["pendulum", "pointmass"])
def test_physics_state_round_trip(name):
    env = make_env(name)
    rng = np.random.default_rng(13)
    env.reset(rng)
    for _ in range(7):
        env.step(np.full(env.spec.act_dim, 0.3))
    snap = env.physics_state()

    clone = make_env(name)
    clone.set_physics_state(snap)
    a = np.full(env.spec.act_dim, -0.8)
    assert np.array_equal(env.step(a)[0], clone.step(a)[0])


def test_registry():
    assert env_names() == ["pendulum", "pointmass"]
    assert isinstance(make_env("pendulum"), Pendulum)
    with pytest.raises(ValueError):
        make_env("cartpole")


def test_spec_fields():
    p = make_env("pendulum").spec
    assert (p.state_dim, p.act_dim, p.max_steps) == (3, 1, 200)
    assert (p.act_low, p.act_high) == (-2.0, 2.0)
    q = make_env("pointmass").spec
    assert (q.state_dim, q.act_dim, q.max_steps) == (4, 2, 400)
    assert (q.act_low, q.act_high) == (-1.0, 1.0)
