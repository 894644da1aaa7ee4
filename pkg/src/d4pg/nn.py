"""Minimal dense network engine: forward, exact reverse-mode gradients, Adam.

Networks are plain float64 weight/bias lists, small enough that everything
runs through numpy matmuls. Inputs may be single vectors (shape ``(in,)``)
or batches (shape ``(B, in)``). Parameter gradients for a batch are summed
over the batch; input gradients keep the per-sample shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError

HIDDEN_ACTIVATIONS = ("relu", "identity")
OUTPUT_ACTIVATIONS = ("identity", "tanh")


@dataclass(frozen=True)
class NetSpec:
    """Layer sizes plus activation tags. First size is the input dim, last the output."""

    layer_sizes: tuple
    activation: str = "relu"
    output_activation: str = "identity"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ConfigError(f"need at least input and output sizes, got {sizes}")
        if any(s < 1 for s in sizes):
            raise ConfigError(f"all layer sizes must be >= 1, got {sizes}")
        if self.activation not in HIDDEN_ACTIVATIONS:
            raise ConfigError(f"unknown hidden activation {self.activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ConfigError(f"unknown output activation {self.output_activation!r}")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes) - 1


@dataclass
class DenseNet:
    """Feed-forward net. weights[l] has shape (out_l, in_l), biases[l] shape (out_l,)."""

    spec: NetSpec
    weights: list
    biases: list

    def copy(self) -> "DenseNet":
        return DenseNet(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def num_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def all_finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights) and all(
            np.isfinite(b).all() for b in self.biases
        )


@dataclass
class Gradients:
    """Shape-congruent with the owning net, plus the gradient w.r.t. the input."""

    weights: list
    biases: list
    input_grad: np.ndarray

    def scaled(self, factor: float) -> "Gradients":
        return Gradients(
            [factor * w for w in self.weights],
            [factor * b for b in self.biases],
            factor * self.input_grad,
        )

    def global_norm(self) -> float:
        total = sum(float(np.sum(w * w)) for w in self.weights)
        total += sum(float(np.sum(b * b)) for b in self.biases)
        return float(np.sqrt(total))

    def all_finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights) and all(
            np.isfinite(b).all() for b in self.biases
        )


@dataclass
class AdamState:
    m_weights: list
    m_biases: list
    v_weights: list
    v_biases: list
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    @classmethod
    def for_net(cls, net: DenseNet, beta1=0.9, beta2=0.999, eps_adam=1e-8) -> "AdamState":
        return cls(
            m_weights=[np.zeros_like(w) for w in net.weights],
            m_biases=[np.zeros_like(b) for b in net.biases],
            v_weights=[np.zeros_like(w) for w in net.weights],
            v_biases=[np.zeros_like(b) for b in net.biases],
            beta1=beta1,
            beta2=beta2,
            eps_adam=eps_adam,
        )


class ForwardCache:
    """Intermediate values from one forward pass, consumed by backward."""

    __slots__ = ("x", "preacts", "output", "single")

    def __init__(self, x, preacts, output, single):
        self.x = x
        self.preacts = preacts
        self.output = output
        self.single = single


def init_net(spec: NetSpec, seed: int) -> DenseNet:
    """Uniform weights in [-1/sqrt(fan_in), +1/sqrt(fan_in)], zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return DenseNet(spec, weights, biases)


def _as_batch(x, dim, what):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise ShapeError(f"{what} length {x.shape[0]} != expected {dim}")
        return x[None, :], True
    if x.ndim == 2:
        if x.shape[1] != dim:
            raise ShapeError(f"{what} width {x.shape[1]} != expected {dim}")
        return x, False
    raise ShapeError(f"{what} must be 1-D or 2-D, got ndim={x.ndim}")


def forward(net: DenseNet, x) -> tuple:
    """Run the net. Returns (output, cache); output shape mirrors the input shape."""
    spec = net.spec
    h, single = _as_batch(x, spec.input_dim, "input")
    preacts = []
    n = spec.num_layers
    for l in range(n):
        z = h @ net.weights[l].T + net.biases[l]
        preacts.append(z)
        if l < n - 1:
            h = np.maximum(z, 0.0) if spec.activation == "relu" else z
        else:
            h = np.tanh(z) if spec.output_activation == "tanh" else z
    out = h[0] if single else h
    return out, ForwardCache(np.asarray(x, dtype=np.float64), preacts, h, single)


def backward(net: DenseNet, cache: ForwardCache, output_grad) -> Gradients:
    """Exact gradients of sum(output * output_grad) w.r.t. parameters and input.

    For batched caches, parameter gradients are summed over the batch and
    input_grad is per-sample (B, in).
    """
    spec = net.spec
    g, g_single = _as_batch(output_grad, spec.output_dim, "output_grad")
    if g_single != cache.single or g.shape[0] != cache.preacts[-1].shape[0]:
        raise ShapeError("output_grad does not match the cached forward pass")
    n = spec.num_layers
    if spec.output_activation == "tanh":
        dz = g * (1.0 - cache.output ** 2)
    else:
        dz = g
    gw = [None] * n
    gb = [None] * n
    x0, _ = _as_batch(cache.x, spec.input_dim, "cached input")
    for l in range(n - 1, -1, -1):
        if l == 0:
            h_in = x0
        elif spec.activation == "relu":
            h_in = np.maximum(cache.preacts[l - 1], 0.0)
        else:
            h_in = cache.preacts[l - 1]
        gw[l] = dz.T @ h_in
        gb[l] = dz.sum(axis=0)
        dx = dz @ net.weights[l]
        if l > 0:
            if spec.activation == "relu":
                dz = dx * (cache.preacts[l - 1] > 0.0)
            else:
                dz = dx
    input_grad = dx[0] if cache.single else dx
    return Gradients(gw, gb, input_grad)


def adam_update(net: DenseNet, grads: Gradients, state: AdamState, lr: float) -> None:
    """One Adam step with bias correction, minimizing. Mutates net and state."""
    if not grads.all_finite():
        raise NumericalError("non-finite gradient passed to adam_update")
    state.step_count += 1
    t = state.step_count
    b1, b2, eps = state.beta1, state.beta2, state.eps_adam
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for params, gs, ms, vs in (
        (net.weights, grads.weights, state.m_weights, state.v_weights),
        (net.biases, grads.biases, state.m_biases, state.v_biases),
    ):
        for p, g, m, v in zip(params, gs, ms, vs):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
