import numpy as np
import pytest
from hypothesis import given, strategies as st

from refer_rl.learners import soft_update
from refer_rl.optim import AdamState, Schedule, adam_step, anneal


def test_anneal_at_zero():
    c_max, eta = anneal(Schedule(lr=1e-4, clip_width=4.0, anneal=5e-7), 0)
    assert c_max == 5.0
    assert eta == 1e-4


def test_anneal_halves_at_two_million():
    # anneal * t = 1, so the width halves and eta halves
    c_max, eta = anneal(Schedule(lr=1e-4, clip_width=4.0, anneal=5e-7), 2_000_000)
    assert c_max == pytest.approx(3.0, abs=1e-12)
    assert eta == pytest.approx(5e-5, abs=1e-18)


def test_anneal_disabled():
    sched = Schedule(lr=1e-3, clip_width=4.0, anneal=0.0)
    for t in (0, 10**6, 10**9):
        assert anneal(sched, t) == (5.0, 1e-3)


def test_anneal_rejects_negative_time():
    with pytest.raises(ValueError):
        anneal(Schedule(lr=1e-4), -1)


def test_schedule_validates():
    with pytest.raises(ValueError):
        Schedule(lr=0.0)
    with pytest.raises(ValueError):
        Schedule(lr=1e-4, anneal=-1e-9)


def test_adam_zero_gradient_leaves_params():
    p = np.array([1.0, -2.0, 3.0])
    st_ = AdamState.for_params(p)
    adam_step(p, np.zeros(3), st_, 1e-2)
    assert np.array_equal(p, [1.0, -2.0, 3.0])
    assert st_.t == 1


def test_adam_first_step_magnitude():
    # with bias correction the first step is eta * g/(|g| + ~eps), ~eta exactly
    p = np.zeros(4)
    g = np.array([3.0, -0.5, 1e-3, 10.0])
    adam_step(p, g, AdamState.for_params(p), 1e-2)
    assert np.all(np.abs(p) <= 1e-2)
    assert np.max(np.abs(np.abs(p[[0, 1, 3]]) - 1e-2)) < 1e-9
    assert np.all(np.sign(p) == -np.sign(g))


def test_adam_three_step_hand_trace():
    p = np.array([0.5, -1.0])
    state = AdamState.for_params(p)
    grads = [np.array([1.0, 2.0]), np.array([-0.5, 0.0]), np.array([0.25, -4.0])]
    eta = 1e-3
    for g in grads:
        adam_step(p, g, state, eta)

    # independent replay of the update equations
    q = np.array([0.5, -1.0])
    m = np.zeros(2)
    v = np.zeros(2)
    for t, g in enumerate(grads, start=1):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        mhat = m / (1 - 0.9**t)
        vhat = v / (1 - 0.999**t)
        q -= eta * mhat / (np.sqrt(vhat) + 1e-8)
    assert np.max(np.abs(p - q)) < 1e-12


def test_adam_rejects_non_finite():
    p = np.zeros(2)
    state = AdamState.for_params(p)
    with pytest.raises(FloatingPointError):
        adam_step(p, np.array([1.0, np.nan]), state, 1e-3)
    with pytest.raises(FloatingPointError):
        adam_step(p, np.array([np.inf, 0.0]), state, 1e-3)


def test_adam_constant_gradient_step_norm():
    # constant gradient: bias-corrected ratio is exactly +-1 per component,
    # so each step moves by eta and the 2-norm is eta*sqrt(n)
    n, eta = 6, 1e-3
    p = np.zeros(n)
    state = AdamState.for_params(p)
    g = np.linspace(0.5, 3.0, n)
    prev = p.copy()
    for _ in range(50):
        adam_step(p, g, state, eta)
        step = p - prev
        prev = p.copy()
        assert np.linalg.norm(step) <= eta * np.sqrt(n) * (1 + 1e-6)


def test_adam_worst_case_step_bound():
    # adversarial gradients: per-component steps stay within the
    # (1-beta1)/sqrt(1-beta2) envelope of eta
    rng = np.random.Generator(np.random.PCG64(12))
    p = np.zeros(8)
    state = AdamState.for_params(p)
    eta = 1e-2
    bound = eta * 0.1 / np.sqrt(0.001) * (1 + 1e-9)
    prev = p.copy()
    for _ in range(200):
        g = rng.normal(size=8) * 10.0 ** rng.integers(-3, 4)
        adam_step(p, g, state, eta)
        assert np.max(np.abs(p - prev)) <= bound
        prev = p.copy()


def test_soft_update_examples():
    t = np.zeros(3)
    s = np.ones(3)
    soft_update(t, s, 0.01)
    assert np.allclose(t, 0.01, atol=1e-15)

    t = np.array([1.0, 2.0])
    soft_update(t, np.array([5.0, 5.0]), 1.0)
    assert np.array_equal(t, [5.0, 5.0])

    t2 = np.array([1.0, 2.0])
    soft_update(t2, np.array([9.0, 9.0]), 0.0)
    assert np.array_equal(t2, [1.0, 2.0])


def test_soft_update_geometric_convergence():
    t = np.zeros(1)
    s = np.ones(1)
    for _ in range(25):
        soft_update(t, s, 0.1)
    assert t[0] == pytest.approx(1 - 0.9**25, abs=1e-12)


@given(st.floats(min_value=0, max_value=1), st.floats(-10, 10), st.floats(-10, 10))
def test_soft_update_convex(alpha, a, b):
    t = np.array([a])
    soft_update(t, np.array([b]), alpha)
    assert t[0] == pytest.approx((1 - alpha) * a + alpha * b, abs=1e-9)
