"""Pieces shared by every learner: the clipped-trace return scan, the
two-case gradient combiner, and polyak target updates."""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def _scan_episode(values, rhos, rewards_next, gamma, tail, out_v, out_q):
    nxt = tail
    for i in range(values.shape[0] - 1, -1, -1):
        clipped = rhos[i] if rhos[i] < 1.0 else 1.0
        q = rewards_next[i] + gamma * nxt
        vt = values[i] + clipped * (q - values[i])
        out_q[i] = q
        out_v[i] = vt
        nxt = vt
    return out_v, out_q


@njit(cache=True)
def _scan_many(values, rhos, rewards, inv_scale, gamma, starts, lengths, out_v, out_q):
    # In-place over arena-resident arrays; each episode occupies contiguous
    # slots [start, start+length] with the closing slot last. The closing
    # slot's value is the scan tail (0 for terminal episodes, the stored
    # bootstrap for truncated ones); rewards are scaled on the fly.
    for j in range(starts.shape[0]):
        s = starts[j]
        nxt = values[s + lengths[j]]
        for i in range(s + lengths[j] - 1, s - 1, -1):
            clipped = rhos[i] if rhos[i] < 1.0 else 1.0
            q = rewards[i + 1] * inv_scale + gamma * nxt
            vt = values[i] + clipped * (q - values[i])
            out_q[i] = q
            out_v[i] = vt
            nxt = vt


def corrected_returns(values, rhos, rewards_next, gamma, tail):
    """Backward recursion for one episode's value and return estimates.

    values[i]       state value of step i (length T, action steps only)
    rhos[i]         importance ratio of step i; min(1, rho) enters the scan
    rewards_next[i] scaled reward received after step i's action
    tail            value estimate at the closing step: 0 if terminal,
                    the stored bootstrap if truncated

    Returns (v_ret, q_ret), each length T, where
        q_ret[i] = rewards_next[i] + gamma * v_ret[i+1]
        v_ret[i] = values[i] + min(1, rhos[i]) * (q_ret[i] - values[i])
    and v_ret[T] is `tail`.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    rhos = np.ascontiguousarray(rhos, dtype=np.float64)
    rewards_next = np.ascontiguousarray(rewards_next, dtype=np.float64)
    if not (values.shape == rhos.shape == rewards_next.shape):
        raise ValueError("values, rhos, rewards_next must share a shape")
    out_v = np.empty_like(values)
    out_q = np.empty_like(values)
    _scan_episode(values, rhos, rewards_next, float(gamma), float(tail), out_v, out_q)
    return out_v, out_q


def refer_combine(g_task, g_kl, beta, near):
    """beta * g_task - (1-beta) * g_kl for near samples, -(1-beta) * g_kl
    for far ones. Gradients are in ascent orientation; rows broadcast when
    `near` is a batch mask."""
    g_task = np.asarray(g_task, dtype=np.float64)
    g_kl = np.asarray(g_kl, dtype=np.float64)
    nearf = np.asarray(near, dtype=np.float64)
    if nearf.ndim == g_task.ndim - 1:
        nearf = nearf[..., None]
    return beta * nearf * g_task - (1.0 - beta) * g_kl


def soft_update(target: np.ndarray, online: np.ndarray, alpha: float) -> None:
    """Polyak blend, in place: target <- (1-alpha) target + alpha online."""
    target += alpha * (online - target)
