"""Small fully connected networks with hand-written backprop, plus Adam."""
from __future__ import annotations

import numpy as np

from ..errors import UsageError

ACTIVATIONS = ("relu", "tanh", "linear")


def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _act_grad(z, y, kind):
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    if kind == "tanh":
        return 1.0 - y * y
    return np.ones_like(z)


class Mlp:
    """Affine layers with elementwise activations.

    ``weights[i]`` has shape (fan_in, fan_out) so a batch is ``X @ W + b``.
    Gradients from the last ``backward`` call live in ``grad_weights`` and
    ``grad_biases``, paired one-to-one with the parameters.
    """

    def __init__(self, sizes, activations, rng=None, final_scale=1.0):
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        for a in activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.activations = tuple(activations)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights = []
        self.biases = []
        for i, (n_in, n_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = 1.0 / np.sqrt(n_in)
            W = rng.uniform(-bound, bound, size=(n_in, n_out))
            b = rng.uniform(-bound, bound, size=n_out)
            if i == len(self.sizes) - 2:
                W *= final_scale
                b *= final_scale
            self.weights.append(W)
            self.biases.append(b)
        self.grad_weights = [np.zeros_like(W) for W in self.weights]
        self.grad_biases = [np.zeros_like(b) for b in self.biases]
        self._cache = None

    @property
    def params(self):
        return self.weights + self.biases

    @property
    def grads(self):
        return self.grad_weights + self.grad_biases

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> "Mlp":
        new = Mlp.__new__(Mlp)
        new.sizes = self.sizes
        new.activations = self.activations
        new.weights = [W.copy() for W in self.weights]
        new.biases = [b.copy() for b in self.biases]
        new.grad_weights = [np.zeros_like(W) for W in self.weights]
        new.grad_biases = [np.zeros_like(b) for b in self.biases]
        new._cache = None
        return new

    def same_shape(self, other: "Mlp") -> bool:
        return self.sizes == other.sizes and self.activations == other.activations

    def forward(self, X, keep=True):
        """Return (output, last pre-activation); caches layer values for backward."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        xs, zs, ys = [], [], []
        h = X
        z = None
        for W, b, kind in zip(self.weights, self.biases, self.activations):
            z = h @ W + b
            y = _act(z, kind)
            xs.append(h)
            zs.append(z)
            ys.append(y)
            h = y
        if keep:
            self._cache = (xs, zs, ys)
        return h, z

    def __call__(self, X):
        return self.forward(X, keep=False)[0]

    def backward(self, grad_out):
        """Backprop ``dL/d(output)``; fills the gradient buffers, returns ``dL/d(input)``."""
        if self._cache is None:
            raise UsageError("backward() needs a preceding forward()")
        xs, zs, ys = self._cache
        g = np.asarray(grad_out, dtype=float)
        for i in range(len(self.weights) - 1, -1, -1):
            g = g * _act_grad(zs[i], ys[i], self.activations[i])
            self.grad_weights[i][...] = xs[i].T @ g
            self.grad_biases[i][...] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return g

    def soft_update_from(self, source: "Mlp", tau: float) -> None:
        if not self.same_shape(source):
            raise UsageError("soft update between networks of different architecture")
        for dst, src in zip(self.params, source.params):
            dst *= (1.0 - tau)
            dst += tau * src

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat_params(self, flat) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_params:
            raise ValueError("parameter vector has the wrong length")
        i = 0
        for p in self.params:
            p[...] = flat[i:i + p.size].reshape(p.shape)
            i += p.size

    def flat_grads(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.grads])


def soft_update(target: Mlp, source: Mlp, tau: float) -> Mlp:
    """target <- tau * source + (1 - tau) * target, in place."""
    target.soft_update_from(source, tau)
    return target


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
