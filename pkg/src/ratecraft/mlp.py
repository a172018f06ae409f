"""Small fully connected networks with hand-rolled reverse-mode gradients.

Everything is float64 numpy: two nets built from the same seed are
bit-identical, and updates are deterministic given data order. Hidden
layers use tanh, the output layer is linear.
"""

from __future__ import annotations

import json

import numpy as np


class MLP:
    """Tanh-hidden, linear-output network over row-batched inputs."""

    def __init__(self, in_dim: int, hidden: tuple[int, ...], out_dim: int, seed: int):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.seed = int(seed)
        sizes = [self.in_dim, *self.hidden, self.out_dim]
        rng = np.random.default_rng(self.seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out))
            self.weights.append(np.ascontiguousarray(w))
            self.biases.append(np.zeros(fan_out))

    @property
    def layer_sizes(self) -> list[int]:
        return [self.in_dim, *self.hidden, self.out_dim]

    def copy(self) -> "MLP":
        dup = MLP.__new__(MLP)
        dup.in_dim, dup.out_dim = self.in_dim, self.out_dim
        dup.hidden, dup.seed = self.hidden, self.seed
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Batched forward pass: x of shape (N, in_dim) -> (N, out_dim)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"expected input of shape (N, {self.in_dim}), got {x.shape}")
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                h = np.tanh(h)
        return h

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass keeping per-layer activations for backward()."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"expected input of shape (N, {self.in_dim}), got {x.shape}")
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(self, acts: list[np.ndarray], grad_out: np.ndarray) -> "Grads":
        """Reverse-mode gradients of sum(grad_out * output) w.r.t. parameters.

        acts is the activation list from forward_cached; grad_out has the
        output's shape (N, out_dim).
        """
        grad_out = np.asarray(grad_out, dtype=np.float64)
        if grad_out.shape != acts[-1].shape:
            raise ValueError(f"grad_out shape {grad_out.shape} != output shape {acts[-1].shape}")
        d_w = [None] * len(self.weights)
        d_b = [None] * len(self.biases)
        gz = grad_out
        for i in range(len(self.weights) - 1, -1, -1):
            if i != len(self.weights) - 1:
                # activation at layer i+1 is tanh(z); d tanh = 1 - tanh^2
                gz = gz * (1.0 - acts[i + 1] ** 2)
            d_w[i] = acts[i].T @ gz
            d_b[i] = gz.sum(axis=0)
            if i > 0:
                gz = gz @ self.weights[i].T
        return Grads(d_w, d_b)

    # -- flat parameter views, used by checkpoints and finite differences --

    def get_flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        offset = 0
        for w, b in zip(self.weights, self.biases):
            w[...] = flat[offset : offset + w.size].reshape(w.shape)
            offset += w.size
            b[...] = flat[offset : offset + b.size]
            offset += b.size
        if offset != flat.size:
            raise ValueError(f"flat vector has {flat.size} values, net needs {offset}")


class Grads:
    """Per-parameter gradients aligned with an MLP's weights and biases."""

    def __init__(self, d_weights: list[np.ndarray], d_biases: list[np.ndarray]):
        self.d_weights = d_weights
        self.d_biases = d_biases

    def __iadd__(self, other: "Grads") -> "Grads":
        for a, b in zip(self.d_weights, other.d_weights):
            a += b
        for a, b in zip(self.d_biases, other.d_biases):
            a += b
        return self

    def scale(self, factor: float) -> "Grads":
        for a in self.d_weights:
            a *= factor
        for a in self.d_biases:
            a *= factor
        return self

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.d_weights, self.d_biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def all_finite(self) -> bool:
        return all(np.isfinite(g).all() for g in self.d_weights) and all(
            np.isfinite(g).all() for g in self.d_biases
        )

    @staticmethod
    def zeros_like(net: MLP) -> "Grads":
        return Grads(
            [np.zeros_like(w) for w in net.weights],
            [np.zeros_like(b) for b in net.biases],
        )


class Sgd:
    """Plain gradient descent. Refuses non-finite gradients."""

    def __init__(self, lr: float):
        self.lr = float(lr)

    def step(self, net: MLP, grads: Grads) -> None:
        if not grads.all_finite():
            raise ValueError("refusing SGD step: gradient contains NaN or inf")
        for w, g in zip(net.weights, grads.d_weights):
            w -= self.lr * g
        for b, g in zip(net.biases, grads.d_biases):
            b -= self.lr * g


class Adam:
    """Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8 defaults)."""

    def __init__(self, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None

    def step(self, net: MLP, grads: Grads) -> None:
        if not grads.all_finite():
            raise ValueError("refusing Adam step: gradient contains NaN or inf")
        flat_params = [*net.weights, *net.biases]
        flat_grads = [*grads.d_weights, *grads.d_biases]
        if self._m is None:
            self._m = [np.zeros_like(p) for p in flat_params]
            self._v = [np.zeros_like(p) for p in flat_params]
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(flat_params, flat_grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


class AdamVector:
    """Adam for a single flat parameter vector (e.g. a policy's log-std)."""

    def __init__(self, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = float(lr), float(beta1), float(beta2), float(eps)
        self.t = 0
        self._m: np.ndarray | None = None
        self._v: np.ndarray | None = None

    def step(self, param: np.ndarray, grad: np.ndarray) -> None:
        if not np.isfinite(grad).all():
            raise ValueError("refusing Adam step: gradient contains NaN or inf")
        if self._m is None:
            self._m = np.zeros_like(param)
            self._v = np.zeros_like(param)
        self.t += 1
        self._m = self.beta1 * self._m + (1.0 - self.beta1) * grad
        self._v = self.beta2 * self._v + (1.0 - self.beta2) * grad * grad
        m_hat = self._m / (1.0 - self.beta1**self.t)
        v_hat = self._v / (1.0 - self.beta2**self.t)
        param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def save_params(path, net: MLP) -> None:
    """Checkpoint: one JSON header line, then little-endian float64 raw bytes."""
    header = {"layer_sizes": net.layer_sizes, "count": int(net.get_flat().size)}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(net.get_flat().astype("<f8").tobytes())


def load_params(path, net: MLP) -> None:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header["layer_sizes"] != net.layer_sizes:
            raise ValueError(
                f"checkpoint layer sizes {header['layer_sizes']} != net {net.layer_sizes}"
            )
        flat = np.frombuffer(fh.read(), dtype="<f8")
    if flat.size != header["count"]:
        raise ValueError(f"checkpoint holds {flat.size} values, header says {header['count']}")
    net.set_flat(flat.astype(np.float64))
