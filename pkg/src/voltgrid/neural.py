"""Minimal feed-forward network engine: dense layers, backprop, Adam, normalization.

Just enough machinery for small actor/critic networks: fixed MLP topology,
float64 throughout, fully deterministic given a seeded generator. Inputs are
row vectors; batches stack along axis 0. Standardization is applied to
network inputs only; per-hidden-layer normalization is intentionally out of
scope.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "tanh", "identity")


_TANH_LIMIT = np.nextafter(1.0, 0.0)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        # outputs must stay strictly inside (-1, 1) even where tanh rounds
        # to exactly +/-1 in float64
        return np.clip(np.tanh(z), -_TANH_LIMIT, _TANH_LIMIT)
    return z


def _activate_grad(name: str, z: np.ndarray, h: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(float)
    if name == "tanh":
        return 1.0 - h**2
    return np.ones_like(z)


@dataclass
class Layer:
    w: np.ndarray  # (in_dim, out_dim)
    b: np.ndarray  # (out_dim,)
    activation: str

    def __post_init__(self) -> None:
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[1],):
            raise ValueError(f"layer shapes do not chain: {self.w.shape}, {self.b.shape}")


@dataclass
class Cache:
    """Forward-pass tape for one input batch, consumed by backward()."""

    x: np.ndarray
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    post: list[np.ndarray]


class Mlp:
    def __init__(self, layers: Sequence[Layer]):
        if not layers:
            raise ValueError("an Mlp needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.w.shape[1] != nxt.w.shape[0]:
                raise ValueError(
                    f"layer dimensions do not chain: {prev.w.shape} -> {nxt.w.shape}"
                )
        self.layers = list(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].w.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].w.shape[1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Deterministic inference; no side effects."""
        squeeze = x.ndim == 1
        h = np.atleast_2d(np.asarray(x, dtype=float))
        if h.shape[1] != self.in_dim:
            raise ValueError(f"input width {h.shape[1]} != in_dim {self.in_dim}")
        for layer in self.layers:
            h = _activate(layer.activation, h @ layer.w + layer.b)
        return h[0] if squeeze else h

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, Cache]:
        h = np.atleast_2d(np.asarray(x, dtype=float))
        if h.shape[1] != self.in_dim:
            raise ValueError(f"input width {h.shape[1]} != in_dim {self.in_dim}")
        cache = Cache(x=h, inputs=[], pre=[], post=[])
        for layer in self.layers:
            cache.inputs.append(h)
            z = h @ layer.w + layer.b
            h = _activate(layer.activation, z)
            cache.pre.append(z)
            cache.post.append(h)
        return h, cache

    def backward(
        self, cache: Optional[Cache], upstream: np.ndarray
    ) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
        """Chain-rule gradients of a scalar objective.

        ``upstream`` holds the objective's partials w.r.t. the network output
        (including any 1/batch factor). Returns per-layer (dW, db) plus the
        gradient w.r.t. the input batch.
        """
        if cache is None:
            raise ValueError("backward() needs the cache from forward_cached()")
        grad = np.atleast_2d(np.asarray(upstream, dtype=float))
        if grad.shape != cache.post[-1].shape:
            raise ValueError(
                f"upstream shape {grad.shape} != output shape {cache.post[-1].shape}"
            )
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)  # type: ignore[list-item]
        for idx in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[idx]
            dz = grad * _activate_grad(layer.activation, cache.pre[idx], cache.post[idx])
            dw = cache.inputs[idx].T @ dz
            db = dz.sum(axis=0)
            grads[idx] = (dw, db)
            grad = dz @ layer.w.T
        return grads, grad

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend((layer.w, layer.b))
        return out

    def copy(self) -> "Mlp":
        return Mlp(
            [Layer(l.w.copy(), l.b.copy(), l.activation) for l in self.layers]
        )

    def assert_finite(self) -> None:
        for p in self.parameters():
            if not np.all(np.isfinite(p)):
                raise FloatingPointError("non-finite network parameter")


def make_mlp(
    dims: Sequence[int],
    activations: Sequence[str],
    rng: np.random.Generator,
    final_scale: Optional[float] = None,
) -> Mlp:
    """Uniform fan-in initialization; optionally a small uniform final layer
    so initial outputs sit near zero."""
    if len(activations) != len(dims) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for i, act in enumerate(activations):
        fan_in, fan_out = dims[i], dims[i + 1]
        bound = 1.0 / np.sqrt(fan_in)
        if final_scale is not None and i == len(activations) - 1:
            bound = final_scale
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = rng.uniform(-bound, bound, size=fan_out)
        layers.append(Layer(w=w, b=b, activation=act))
    return Mlp(layers)


class Adam:
    """Standard Adam with bias correction; rejects non-finite gradients."""

    def __init__(
        self,
        net: Mlp,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.net = net
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in net.parameters()]
        self.v = [np.zeros_like(p) for p in net.parameters()]

    def step(self, grads: Sequence[tuple[np.ndarray, np.ndarray]]) -> bool:
        """Apply one update; returns False (and leaves parameters untouched)
        if any gradient is non-finite."""
        flat: list[np.ndarray] = []
        for dw, db in grads:
            flat.extend((dw, db))
        params = self.net.parameters()
        if len(flat) != len(params):
            raise ValueError("gradient structure does not match the network")
        for grad in flat:
            if not np.all(np.isfinite(grad)):
                logger.warning("rejecting update: non-finite gradient")
                return False
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, flat, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        return True


class Normalizer:
    """Streaming per-dimension standardization of heterogeneous inputs.

    Statistics accumulate with a numerically stable parallel-merge update.
    With no data yet, normalize() is the identity.
    """

    EPS = 1e-5

    def __init__(self, dim: int):
        self.dim = dim
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = 0

    def update(self, batch: np.ndarray) -> None:
        batch = np.atleast_2d(np.asarray(batch, dtype=float))
        if batch.shape[1] != self.dim:
            raise ValueError(f"batch width {batch.shape[1]} != dim {self.dim}")
        n_b = batch.shape[0]
        mean_b = batch.mean(axis=0)
        var_b = batch.var(axis=0)
        if self.count == 0:
            self.mean, self.var, self.count = mean_b, var_b, n_b
            return
        n_a = self.count
        delta = mean_b - self.mean
        total = n_a + n_b
        self.mean = self.mean + delta * (n_b / total)
        m_a = self.var * n_a
        m_b = var_b * n_b
        self.var = (m_a + m_b + delta**2 * n_a * n_b / total) / total
        self.count = total

    def normalize(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.count == 0:
            return x.copy()
        return (x - self.mean) / np.sqrt(self.var + self.EPS)
