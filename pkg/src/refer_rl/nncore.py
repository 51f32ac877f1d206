"""Small dense networks on flat float64 parameter vectors.

Everything here is deliberately reproducible: parameters live in one flat
vector with a fixed layout (per layer: weight matrix in C order, then biases),
and initialization draws come from numpy's PCG64 generator seeded directly
with the given integer. Draw order is one `rng.uniform(-b, b, (fan_out,
fan_in))` call per layer, first layer first; biases are zeros and consume no
draws.

Hidden activations are softsign x/(1+|x|); outputs are linear. Hidden weights
are initialized U[-6/sqrt(fan_in+fan_out), +6/sqrt(fan_in+fan_out)], the
output layer U[-0.1/sqrt(fan_in), +0.1/sqrt(fan_in)].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def softsign(x):
    return x / (1.0 + np.abs(x))


def softsign_deriv(x):
    d = 1.0 + np.abs(x)
    return 1.0 / (d * d)


def softplus(x):
    # ln(1+e^x), evaluated as x + log1p(e^-x) for x > 0 so large inputs
    # neither overflow nor lose the identity softplus(x) ~ x.
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, x + np.log1p(np.exp(-np.abs(x))), np.log1p(np.exp(np.minimum(x, 0.0))))


def softplus_deriv(x):
    # d/dx ln(1+e^x) = sigmoid(x)
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus_inv(y):
    """x such that softplus(x) = y, for y > 0."""
    y = np.asarray(y, dtype=np.float64)
    return y + np.log(-np.expm1(-y))


def param_count(layer_sizes) -> int:
    return int(sum((fi + 1) * fo for fi, fo in zip(layer_sizes[:-1], layer_sizes[1:])))


@dataclass
class MlpParams:
    """Flat parameter vector plus the layer shape that interprets it."""

    layer_sizes: tuple
    theta: np.ndarray
    _slices: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if any(s <= 0 for s in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if self.theta.shape != (param_count(self.layer_sizes),):
            raise ValueError(
                f"theta has {self.theta.shape} entries, layout wants {param_count(self.layer_sizes)}"
            )
        off = 0
        self._slices = []
        for fi, fo in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            self._slices.append((off, off + fi * fo, off + fi * fo + fo, fi, fo))
            off = self._slices[-1][2]

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def weights(self, layer: int) -> np.ndarray:
        w0, w1, _, fi, fo = self._slices[layer]
        return self.theta[w0:w1].reshape(fo, fi)

    def biases(self, layer: int) -> np.ndarray:
        _, w1, b1, _, _ = self._slices[layer]
        return self.theta[w1:b1]


def mlp_init(layer_sizes, seed) -> MlpParams:
    """Fresh parameters; `seed` is an int or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        rng = seed
    else:
        rng = np.random.Generator(np.random.PCG64(int(seed)))
    sizes = tuple(int(s) for s in layer_sizes)
    theta = np.zeros(param_count(sizes), dtype=np.float64)
    params = MlpParams(sizes, theta)
    last = params.n_layers - 1
    for layer in range(params.n_layers):
        fi, fo = sizes[layer], sizes[layer + 1]
        if layer == last:
            bound = 0.1 / np.sqrt(fi)
        else:
            bound = 6.0 / np.sqrt(fi + fo)
        params.weights(layer)[...] = rng.uniform(-bound, bound, (fo, fi))
        # biases stay zero
    return params


def mlp_forward(params: MlpParams, x):
    """Forward pass. Returns (output, tape) where the tape carries the
    per-layer inputs and hidden pre-activations needed by mlp_backward.

    `x` may be a single vector (d,) or a batch (B, d); the output matches.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x.reshape(1, -1) if single else x
    if h.shape[1] != params.layer_sizes[0]:
        raise ValueError(f"input width {h.shape[1]} != {params.layer_sizes[0]}")
    xs = [h]
    zs = []
    last = params.n_layers - 1
    for layer in range(params.n_layers):
        z = xs[-1] @ params.weights(layer).T + params.biases(layer)
        if layer == last:
            y = z
        else:
            zs.append(z)
            xs.append(softsign(z))
    tape = (xs, zs, single)
    return (y[0] if single else y), tape


def mlp_backward(params: MlpParams, tape, output_grad):
    """Exact gradient of sum_batch output_b . output_grad_b.

    Returns (theta_grad, input_grad) with input_grad shaped like the forward
    input. Gradients are summed over the batch; callers average if they want
    a mean.
    """
    xs, zs, single = tape
    g = np.asarray(output_grad, dtype=np.float64)
    if single:
        g = g.reshape(1, -1)
    theta_grad = np.zeros_like(params.theta)
    grads = MlpParams(params.layer_sizes, theta_grad)
    last = params.n_layers - 1
    for layer in range(last, -1, -1):
        if layer != last:
            g = g * softsign_deriv(zs[layer])
        grads.weights(layer)[...] = g.T @ xs[layer]
        grads.biases(layer)[...] = g.sum(axis=0)
        g = g @ params.weights(layer)
    return theta_grad, (g[0] if single else g)
