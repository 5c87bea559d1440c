"""Small fully-connected networks with exact reverse-mode gradients.

Pure numpy substrate for the actors and critics: rectifier hidden layers,
a bounded tanh output for actors or an identity output for critics, an
Adam optimiser and the soft target-tracking update. backward() returns
gradients with respect to the parameters and with respect to the input
vector, the latter feeding the deterministic policy gradient chain.
"""

from __future__ import annotations

import numpy as np


class Mlp:
    """Feed-forward net y = f(W_L ... relu(W_1 x + b_1) ... + b_L).

    Weights initialise uniformly at +-1/sqrt(fan_in) from the supplied
    generator, so construction order fully determines the parameters.
    """

    def __init__(self, layer_sizes, out_activation: str = "identity",
                 rng: np.random.Generator | None = None,
                 dtype=np.float64, final_scale: float = 1.0):
        if len(layer_sizes) < 2:
            raise ValueError("need at least an input and an output size")
        if out_activation not in ("identity", "tanh"):
            raise ValueError(f"unknown output activation {out_activation!r}")
        rng = rng or np.random.default_rng(0)
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.out_activation = out_activation
        self.dtype = dtype
        self.weights = []
        self.biases = []
        last = len(self.layer_sizes) - 2
        for i, (fan_in, fan_out) in enumerate(zip(self.layer_sizes[:-1],
                                                  self.layer_sizes[1:])):
            # a shrunk output layer keeps bounded heads in their active region
            bound = (final_scale if i == last else 1.0) / np.sqrt(fan_in)
            self.weights.append(
                rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype))
            self.biases.append(
                rng.uniform(-bound, bound, size=fan_out).astype(dtype))

    # forward ---------------------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cached(x)
        return y

    def forward_cached(self, x: np.ndarray):
        """Forward pass retaining pre-activations for backward()."""
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 1
        h = np.atleast_2d(x)
        if h.shape[1] != self.layer_sizes[0]:
            raise ValueError(
                f"input width {h.shape[1]} != expected {self.layer_sizes[0]}")
        pre = []
        post = [h]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            if i < last:
                h = np.maximum(z, 0.0)
            elif self.out_activation == "tanh":
                h = np.tanh(z)
            else:
                h = z
            post.append(h)
        y = h[0] if squeeze else h
        return y, (pre, post, squeeze)

    # backward --------------------------------------------------------------

    def backward(self, cache, upstream: np.ndarray, output_preact_grad=None):
        """Gradients of sum(output * upstream) w.r.t. parameters and input.

        upstream has the output's shape; batched rows accumulate by
        summation, so callers scale upstream (e.g. by 1/batch) to realise
        a mean loss. output_preact_grad, when given, is added to the
        gradient at the output layer's pre-activation (regularisers that
        act before the squashing function enter here).
        """
        pre, post, squeeze = cache
        delta = np.atleast_2d(np.asarray(upstream, dtype=self.dtype))
        if delta.shape != pre[-1].shape:
            raise ValueError(
                f"upstream shape {delta.shape} != output shape {pre[-1].shape}")
        if self.out_activation == "tanh":
            delta = delta * (1.0 - np.tanh(pre[-1]) ** 2)
        if output_preact_grad is not None:
            delta = delta + output_preact_grad
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = post[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (pre[i - 1] > 0.0)
            else:
                delta = delta @ self.weights[i].T
        dx = delta[0] if squeeze else delta
        return list(zip(grads_w, grads_b)), dx

    # parameter plumbing ------------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.layer_sizes = self.layer_sizes
        clone.out_activation = self.out_activation
        clone.dtype = self.dtype
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def load_from(self, other: "Mlp") -> None:
        for dst, src in zip(self.parameters(), other.parameters()):
            dst[...] = src


def soft_update(target: Mlp, main: Mlp, tau: float) -> None:
    """target <- tau*main + (1-tau)*target, elementwise.

    Computed as target += tau*(main - target): tau=1 copies exactly and
    equal parameters stay bit-identical (no last-ulp drift).
    """
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    for t, m in zip(target.parameters(), main.parameters()):
        if tau == 1.0:
            t[...] = m
        else:
            t += tau * (m - t)


class Adam:
    """Adaptive-moment optimiser over a parameter list."""

    def __init__(self, params: list[np.ndarray], lr: float,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """In-place descent step along grads."""
        if self.lr == 0.0:
            return
        self.t += 1
        b1t = 1.0 - self.b1 ** self.t
        b2t = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def flatten_grads(grads) -> list[np.ndarray]:
    """[(dW, db), ...] -> [dW, db, dW, db, ...] matching parameters()."""
    out = []
    for gw, gb in grads:
        out.extend((gw, gb))
    return out
