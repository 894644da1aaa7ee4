"""Shared numeric helpers for the test suite.

The oracles here are deliberately independent of the library internals:
finite differences, direct double sums, and hand-rolled recursions that a
reviewer can check on paper.
"""

import numpy as np
import pytest

from d4pg.nn import DenseNet

FD_STEP = 1e-6


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def fd_gradient(f, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central finite differences of a scalar function of a vector."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for i in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi.flat[i] += h
        lo.flat[i] -= h
        out.flat[i] = (f(hi) - f(lo)) / (2.0 * h)
    return out


def flatten_params(net: DenseNet) -> np.ndarray:
    return np.concatenate([w.ravel() for w in net.weights]
                          + [b.ravel() for b in net.biases])


def set_params(net: DenseNet, vec: np.ndarray) -> None:
    offset = 0
    for w in net.weights:
        w[...] = vec[offset:offset + w.size].reshape(w.shape)
        offset += w.size
    for b in net.biases:
        b[...] = vec[offset:offset + b.size]
        offset += b.size


def flatten_grads(grads) -> np.ndarray:
    return np.concatenate([w.ravel() for w in grads.weights]
                          + [b.ravel() for b in grads.biases])


def fd_param_gradient(loss_fn, net: DenseNet, h: float = FD_STEP) -> np.ndarray:
    """Central finite differences of loss_fn() w.r.t. every net parameter.

    loss_fn takes no arguments; it reads the (mutated) net each call.
    """
    base = flatten_params(net)
    out = np.zeros_like(base)
    try:
        for i in range(base.size):
            hi = base.copy()
            hi[i] += h
            set_params(net, hi)
            up = loss_fn()
            lo = base.copy()
            lo[i] -= h
            set_params(net, lo)
            down = loss_fn()
            out[i] = (up - down) / (2.0 * h)
    finally:
        set_params(net, base)
    return out


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float((np.abs(analytic - numeric) / denom).max())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
