"""Optional analytic advantage heads for the actor-critic learner.

Both parameterizations produce an advantage with zero mean under the current
policy: a raw shape function f minus its closed-form expectation over
a ~ N(mean, diag(std^2)). Network outputs are mapped through softplus where
positivity is required. Gradients here are with respect to the raw network
outputs only; the policy's mean/std are treated as constants of the head.
"""

from __future__ import annotations

import numpy as np

from ..nncore import softplus, softplus_deriv


def quad_n_raw(d: int) -> int:
    return d * (d + 1) // 2


def asym_n_raw(d: int) -> int:
    return 1 + 2 * d


def quad_matrices(raw, d):
    """(B, n_raw) raw rows -> (L, diag_deriv) with softplus'd diagonal."""
    raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
    b = raw.shape[0]
    rows, cols = np.tril_indices(d)
    L = np.zeros((b, d, d))
    L[:, rows, cols] = raw
    diag = np.arange(d)
    dderiv = softplus_deriv(L[:, diag, diag])
    L[:, diag, diag] = softplus(L[:, diag, diag])
    return L, dderiv


def quad_value(L, u):
    """f = -1/2 u^T L L^T u, batched."""
    ltu = np.einsum("bij,bi->bj", L, u)
    return -0.5 * np.sum(ltu * ltu, axis=-1)


def quad_expectation(L, std):
    """E[f] over u ~ N(0, diag(std^2)) = -1/2 Tr[L L^T diag(std^2)]."""
    sig2 = np.asarray(std, dtype=np.float64) ** 2
    return -0.5 * np.einsum("bij,bi->b", L * L, np.broadcast_to(sig2, L.shape[:2]))


def quad_advantage(raw, u, std):
    """Advantage value and its gradient w.r.t. the raw head outputs.

    Returns (adv (B,), grad (B, n_raw)).
    """
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    d = u.shape[1]
    L, dderiv = quad_matrices(raw, d)
    ltu = np.einsum("bij,bi->bj", L, u)
    f = -0.5 * np.sum(ltu * ltu, axis=-1)
    e = quad_expectation(L, std)
    sig2 = np.broadcast_to(np.asarray(std, dtype=np.float64) ** 2, u.shape)
    # d f/dL = -u (L^T u)^T ; d E/dL = -L * std_row^2
    dl = -u[:, :, None] * ltu[:, None, :] + L * sig2[:, :, None]
    diag = np.arange(d)
    dl[:, diag, diag] *= dderiv
    rows, cols = np.tril_indices(d)
    return f - e, dl[:, rows, cols]


def asym_params(raw, d):
    raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
    k = softplus(raw[:, 0])
    lp = softplus(raw[:, 1 : 1 + d])
    lm = softplus(raw[:, 1 + d :])
    return k, lp, lm


def asym_value(k, lp, lm, u):
    """f = K exp(-1/2 sum_i u_i^2 / L_i) with L_i chosen by the sign of u_i."""
    scale = np.where(u > 0.0, lp, lm)
    return k * np.exp(-0.5 * np.sum(u * u / scale, axis=-1))


def asym_expectation(k, lp, lm, std):
    """E[f] over u ~ N(0, diag(std^2)): K prod_i (c+_i + c-_i) with
    c+- = 1/2 sqrt(L / (L + std^2))."""
    sig2 = np.asarray(std, dtype=np.float64) ** 2
    cp = 0.5 * np.sqrt(lp / (lp + sig2))
    cm = 0.5 * np.sqrt(lm / (lm + sig2))
    return k * np.prod(cp + cm, axis=-1)


def asym_advantage(raw, u, std):
    """Advantage value and gradient w.r.t. raw outputs [k, l+, l-]."""
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    d = u.shape[1]
    raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
    k, lp, lm = asym_params(raw, d)
    sig2 = np.broadcast_to(np.asarray(std, dtype=np.float64) ** 2, u.shape)

    scale = np.where(u > 0.0, lp, lm)
    f = k * np.exp(-0.5 * np.sum(u * u / scale, axis=-1))
    cp = 0.5 * np.sqrt(lp / (lp + sig2))
    cm = 0.5 * np.sqrt(lm / (lm + sig2))
    c = cp + cm
    e = k * np.prod(c, axis=-1)

    grad = np.zeros_like(raw)
    # K enters both f and E linearly
    grad[:, 0] = (f / k - e / k) * softplus_deriv(raw[:, 0])

    fl = f[:, None]
    half_u2 = 0.5 * u * u
    df_lp = np.where(u > 0.0, fl * half_u2 / (lp * lp), 0.0)
    df_lm = np.where(u < 0.0, fl * half_u2 / (lm * lm), 0.0)
    prod_rest = np.where(c > 0.0, (e / k)[:, None] / c, 0.0)
    dcp = 0.25 * np.sqrt((lp + sig2) / lp) * sig2 / ((lp + sig2) ** 2)
    dcm = 0.25 * np.sqrt((lm + sig2) / lm) * sig2 / ((lm + sig2) ** 2)
    de_lp = k[:, None] * prod_rest * dcp
    de_lm = k[:, None] * prod_rest * dcm
    grad[:, 1 : 1 + d] = (df_lp - de_lp) * softplus_deriv(raw[:, 1 : 1 + d])
    grad[:, 1 + d :] = (df_lm - de_lm) * softplus_deriv(raw[:, 1 + d :])
    return f - e, grad
