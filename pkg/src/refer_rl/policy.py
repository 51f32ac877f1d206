"""Diagonal Gaussian policies truncated at three standard deviations.

Actions live in the open box mean +- 3*std (componentwise). Because the cut
sits at a fixed multiple of std, the retained mass Z3 = erf(3/sqrt(2)) is a
constant, so log densities and their mean/std derivatives are exact closed
forms. Divergences between policies use the untruncated diagonal-Gaussian
formula, which is what the penalty gradients differentiate.

All functions broadcast over a leading batch axis; vectors (d,) and batches
(B, d) both work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z3 = math.erf(3.0 / math.sqrt(2.0))
LOG_Z3 = math.log(Z3)
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
# per-component constant in the log density
_LOG_NORM = HALF_LOG_2PI + LOG_Z3


@dataclass(frozen=True)
class GaussianPolicy:
    """Mean/stddev pair; also the record of the behavior that acted."""

    mean: np.ndarray
    std: np.ndarray


def sample(mean, std, rng: np.random.Generator):
    """Draw an action strictly inside the 3-sigma box.

    Procedure (fixed for reproducibility): one standard_normal draw per
    component, then whole-vector passes redrawing only the components with
    |z| >= 3 until none remain.
    """
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    z = rng.standard_normal(mean.shape[-1] if mean.ndim else 1)
    bad = np.abs(z) >= 3.0
    while np.any(bad):
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) >= 3.0
    return mean + std * z


def log_density(mean, std, action):
    """Log density of the truncated Gaussian; -inf outside the box."""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    z = (action - mean) / std
    inside = np.all(np.abs(z) < 3.0, axis=-1)
    d = z.shape[-1]
    lp = np.sum(-0.5 * z * z - np.log(std) - _LOG_NORM, axis=-1)
    return np.where(inside, lp, -np.inf) if lp.ndim else (lp if inside else -np.inf)


def importance_weight(pi_mean, pi_std, mu_mean, mu_std, action):
    """rho = pi(a) / mu(a); 0 when a is outside pi's box."""
    lp_pi = np.atleast_1d(log_density(pi_mean, pi_std, action))
    lp_mu = np.atleast_1d(log_density(mu_mean, mu_std, action))
    rho = np.zeros_like(lp_pi)
    ok = lp_pi > -np.inf
    rho[ok & (lp_mu == -np.inf)] = np.inf
    both = ok & (lp_mu > -np.inf)
    rho[both] = np.exp(lp_pi[both] - lp_mu[both])
    return rho if rho.shape != (1,) else float(rho[0])


def kl_divergence(mu_mean, mu_std, pi_mean, pi_std):
    """D_KL(mu || pi) between diagonal Gaussians (untruncated closed form)."""
    mu_mean = np.asarray(mu_mean, dtype=np.float64)
    mu_std = np.asarray(mu_std, dtype=np.float64)
    pi_mean = np.asarray(pi_mean, dtype=np.float64)
    pi_std = np.asarray(pi_std, dtype=np.float64)
    var_pi = pi_std * pi_std
    dm = pi_mean - mu_mean
    terms = np.log(pi_std / mu_std) + (mu_std * mu_std + dm * dm) / (2.0 * var_pi) - 0.5
    return np.sum(terms, axis=-1)


def kl_gradient(mu_mean, mu_std, pi_mean, pi_std):
    """(d/d pi_mean, d/d pi_std) of D_KL(mu || pi)."""
    mu_mean = np.asarray(mu_mean, dtype=np.float64)
    mu_std = np.asarray(mu_std, dtype=np.float64)
    pi_mean = np.asarray(pi_mean, dtype=np.float64)
    pi_std = np.asarray(pi_std, dtype=np.float64)
    var_pi = pi_std * pi_std
    dm = pi_mean - mu_mean
    g_mean = dm / var_pi
    g_std = 1.0 / pi_std - (mu_std * mu_std + dm * dm) / (var_pi * pi_std)
    return g_mean, g_std


def logprob_gradient(mean, std, action):
    """(d/d mean, d/d std) of the log density at `action` (inside the box).

    The truncation constant Z3 does not depend on mean or std, so these are
    the plain Gaussian score expressions.
    """
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    u = action - mean
    var = std * std
    g_mean = u / var
    g_std = (u * u - var) / (var * std)
    return g_mean, g_std
