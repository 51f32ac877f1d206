import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from refer_rl.nncore import (
    MlpParams,
    mlp_backward,
    mlp_forward,
    mlp_init,
    param_count,
    softplus,
    softplus_deriv,
    softplus_inv,
    softsign,
    softsign_deriv,
)

from conftest import fd_gradient, rel_err

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def test_softsign_values():
    assert softsign(0.0) == 0.0
    assert softsign(1.0) == 0.5
    assert softsign(-3.0) == -0.75


@given(finite)
def test_softsign_bounded_and_odd(x):
    y = softsign(x)
    assert -1.0 < y < 1.0 or abs(x) > 1e15
    assert softsign(-x) == -y


@given(finite, finite)
def test_softsign_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert softsign(lo) <= softsign(hi)


def test_softsign_deriv_matches_fd():
    for x in (-2.0, -0.3, 0.5, 4.0):
        h = 1e-6
        num = (softsign(x + h) - softsign(x - h)) / (2 * h)
        assert softsign_deriv(x) == pytest.approx(num, rel=1e-8)


def test_softplus_values():
    assert softplus(0.0) == pytest.approx(math.log(2.0), abs=1e-15)
    # large positive: identity to machine precision, no overflow
    assert softplus(50.0) == pytest.approx(50.0, abs=1e-12)
    # large negative: ln(1+e^x) rounds to e^x itself in float64
    assert softplus(-50.0) == pytest.approx(math.exp(-50.0), rel=1e-60)
    assert np.isfinite(softplus(1e4))


@given(st.floats(min_value=-700, max_value=700))
def test_softplus_positive_and_increasing(x):
    assert softplus(x) > 0.0
    assert softplus(x + 1.0) > softplus(x)


def test_softplus_deriv_is_sigmoid():
    assert softplus_deriv(0.0) == pytest.approx(0.5, abs=1e-15)
    for x in (-3.0, 0.7, 12.0):
        h = 1e-6
        num = (softplus(x + h) - softplus(x - h)) / (2 * h)
        assert softplus_deriv(x) == pytest.approx(num, rel=1e-9)


@given(st.floats(min_value=1e-8, max_value=1e6))
def test_softplus_inv_round_trip(y):
    assert softplus(softplus_inv(y)) == pytest.approx(y, rel=1e-9)


def test_param_count():
    assert param_count((3, 4, 2)) == 3 * 4 + 4 + 4 * 2 + 2
    assert param_count((5, 1)) == 6


def test_init_bounds_and_determinism():
    p = mlp_init((128, 128, 4), seed=3)
    w0 = p.weights(0)
    bound = 6.0 / math.sqrt(128 + 128)
    assert bound == 0.375
    assert np.all(np.abs(w0) <= bound)
    assert np.max(np.abs(w0)) > 0.9 * bound  # actually spans the range
    w1 = p.weights(1)
    out_bound = 0.1 / math.sqrt(128)
    assert out_bound == pytest.approx(0.008839, abs=5e-7)
    assert np.all(np.abs(w1) <= out_bound)
    assert np.all(p.biases(0) == 0.0) and np.all(p.biases(1) == 0.0)

    q = mlp_init((128, 128, 4), seed=3)
    assert np.array_equal(p.theta, q.theta)
    r = mlp_init((128, 128, 4), seed=4)
    assert not np.array_equal(p.theta, r.theta)


def test_forward_zero_params_zero_output():
    p = MlpParams((3, 4, 2), np.zeros(param_count((3, 4, 2))))
    out, _ = mlp_forward(p, np.ones(3))
    assert np.array_equal(out, np.zeros(2))


def test_forward_matches_hand_rolled_oracle():
    rng = np.random.Generator(np.random.PCG64(7))
    p = mlp_init((3, 4, 2), seed=9)
    x = rng.normal(size=(6, 3))
    out, _ = mlp_forward(p, x)

    h = x
    for layer in range(2):
        z = h @ p.weights(layer).T + p.biases(layer)
        h = z / (1.0 + np.abs(z)) if layer == 0 else z
    assert np.max(np.abs(out - h)) < 1e-12


def test_forward_single_vector_matches_batch_row():
    p = mlp_init((3, 5, 2), seed=2)
    x = np.array([0.3, -1.0, 2.0])
    out1, _ = mlp_forward(p, x)
    out2, _ = mlp_forward(p, x[None, :])
    assert out1.shape == (2,)
    assert np.array_equal(out1, out2[0])


def test_backward_one_by_one_net():
    # single linear unit: y = w*x + b, so dy/dw = x and dy/db = 1
    p = MlpParams((1, 1), np.array([1.7, 0.2]))
    x = np.array([[3.0]])
    _, tape = mlp_forward(p, x)
    g, _ = mlp_backward(p, tape, np.ones((1, 1)))
    assert g == pytest.approx([3.0, 1.0], abs=1e-15)


def test_backward_matches_finite_differences():
    rng = np.random.Generator(np.random.PCG64(4))
    p = mlp_init((3, 4, 2), seed=1)
    x = rng.normal(size=(5, 3))
    og = rng.normal(size=(5, 2))
    _, tape = mlp_forward(p, x)
    analytic, _ = mlp_backward(p, tape, og)

    def f():
        out, _ = mlp_forward(p, x)
        return float(np.sum(out * og))

    numeric = fd_gradient(f, p.theta, h=1e-5)
    assert rel_err(analytic, numeric) < 1e-6


def test_backward_sums_over_batch():
    p = mlp_init((2, 3, 1), seed=5)
    x = np.array([[0.5, -0.2], [1.5, 0.3]])
    og = np.ones((2, 1))
    _, tape = mlp_forward(p, x)
    g_all, _ = mlp_backward(p, tape, og)
    g_rows = np.zeros_like(g_all)
    for i in range(2):
        _, tape_i = mlp_forward(p, x[i : i + 1])
        g_i, _ = mlp_backward(p, tape_i, og[i : i + 1])
        g_rows += g_i
    assert np.max(np.abs(g_all - g_rows)) < 1e-12


def test_backward_input_gradient():
    p = mlp_init((3, 4, 2), seed=8)
    x = np.array([0.2, -0.7, 1.1])
    og = np.array([1.0, -0.5])
    _, tape = mlp_forward(p, x)
    _, gx = mlp_backward(p, tape, og)

    gx_num = np.empty(3)
    h = 1e-6
    for i in range(3):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fp, _ = mlp_forward(p, xp)
        fm, _ = mlp_forward(p, xm)
        gx_num[i] = (np.dot(fp, og) - np.dot(fm, og)) / (2 * h)
    assert gx == pytest.approx(gx_num, rel=1e-6)


def test_forward_rejects_wrong_width():
    p = mlp_init((3, 4, 2), seed=0)
    with pytest.raises(ValueError):
        mlp_forward(p, np.ones(5))
