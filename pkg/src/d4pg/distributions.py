"""Parameterized return distributions and their losses.

Three critic heads share one interface: a categorical distribution over a
fixed atom support (trained by cross-entropy against a projected target),
a mixture of Gaussians (trained by sampled negative log-likelihood of the
shifted target), and a plain scalar value (squared TD error, the
non-distributional ablation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, NumericalError

PRIORITY_FLOOR = 1e-3
SIGMA_FLOOR = 1e-4
DENSITY_FLOOR = 1e-300

HEAD_CATEGORICAL = "categorical"
HEAD_MOG = "mog"
HEAD_SCALAR = "scalar"
HEAD_KINDS = (HEAD_CATEGORICAL, HEAD_MOG, HEAD_SCALAR)


@dataclass(frozen=True)
class Support:
    """Fixed atom locations z_i = v_min + i*delta, i in [0, num_atoms)."""

    num_atoms: int
    v_min: float
    v_max: float
    delta: float
    atoms: np.ndarray


def make_support(num_atoms: int, v_min: float, v_max: float) -> Support:
    if num_atoms < 2:
        raise ConfigError(f"need at least 2 atoms, got {num_atoms}")
    if not v_min < v_max:
        raise ConfigError(f"need v_min < v_max, got [{v_min}, {v_max}]")
    delta = (v_max - v_min) / (num_atoms - 1)
    atoms = np.linspace(v_min, v_max, num_atoms)
    atoms.setflags(write=False)
    return Support(num_atoms, float(v_min), float(v_max), delta, atoms)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def project_categorical(target_atoms, target_probs, support: Support) -> np.ndarray:
    """Project an arbitrary finite distribution onto the support atoms.

    Mass at a point between two atoms is split linearly between them; mass
    outside [v_min, v_max] is clamped to the boundary atom. Accepts a
    single distribution (1-D atoms and probs) or a batch (2-D, one
    distribution per row with the same shape probs).
    """
    atoms = np.asarray(target_atoms, dtype=np.float64)
    probs = np.asarray(target_probs, dtype=np.float64)
    if atoms.shape != probs.shape:
        raise ContractError(f"atoms shape {atoms.shape} != probs shape {probs.shape}")
    if np.any(probs < 0):
        raise ContractError("target probabilities must be non-negative")
    sums = probs.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise ContractError("target probabilities must sum to 1")

    single = atoms.ndim == 1
    if single:
        atoms = atoms[None, :]
        probs = probs[None, :]
    n, m = atoms.shape
    ell = support.num_atoms
    b = np.clip((atoms - support.v_min) / support.delta, 0.0, ell - 1.0)
    lo = np.floor(b)
    frac = b - lo
    lo_idx = lo.astype(np.int64)
    hi_idx = np.minimum(lo_idx + 1, ell - 1)
    row = (np.arange(n, dtype=np.int64) * ell)[:, None]
    flat_lo = (row + lo_idx).ravel()
    flat_hi = (row + hi_idx).ravel()
    out = np.bincount(flat_lo, weights=(probs * (1.0 - frac)).ravel(), minlength=n * ell)
    out += np.bincount(flat_hi, weights=(probs * frac).ravel(), minlength=n * ell)
    out = out.reshape(n, ell)
    return out[0] if single else out


def bellman_shift(support: Support, cumulative_reward: float, effective_discount: float):
    """Atoms of the shifted distribution: reward + discount * z_i."""
    return cumulative_reward + effective_discount * support.atoms


def categorical_cross_entropy(target_probs, logits) -> tuple:
    """Cross-entropy of softmax(logits) against fixed target probabilities.

    Returns (loss, grad wrt logits); the gradient is softmax(logits) - target.
    Batched inputs give per-row losses and a matching gradient array.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(logits).all():
        raise NumericalError("non-finite logits")
    target = np.asarray(target_probs, dtype=np.float64)
    z = logits - logits.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    log_p = z - log_norm
    loss = -(target * log_p).sum(axis=-1)
    grad = np.exp(log_p) - target
    return loss, grad


def categorical_mean(probs, support: Support):
    """E[Z] = sum_i p_i z_i. Batched probs give per-row means."""
    return np.asarray(probs, dtype=np.float64) @ support.atoms


@dataclass
class MoGParams:
    """Raw mixture parameters. Weights are softmaxed, scales pass through
    softplus plus a small floor, so any real-valued raw vector is valid."""

    raw_weights: np.ndarray
    means: np.ndarray
    raw_scales: np.ndarray

    @property
    def size(self) -> int:
        return len(self.means)


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.logaddexp(0.0, x)


def mog_weights(params: MoGParams) -> np.ndarray:
    return softmax(params.raw_weights)


def mog_sigmas(params: MoGParams) -> np.ndarray:
    return softplus(params.raw_scales) + SIGMA_FLOOR


def mog_density(params: MoGParams, z: float) -> float:
    """Density of the normalized mixture at z."""
    w = mog_weights(params)
    sig = mog_sigmas(params)
    t = (z - params.means) / sig
    comp = np.exp(-0.5 * t * t) / (np.sqrt(2.0 * np.pi) * sig)
    return float(np.dot(w, comp))


def mog_mean(params: MoGParams) -> float:
    return float(np.dot(mog_weights(params), params.means))


def mog_sample(params: MoGParams, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw count samples: component by mixture weight, then a Gaussian."""
    if count < 1:
        raise ContractError("count must be >= 1")
    w = mog_weights(params)
    comp = rng.choice(len(w), size=count, p=w / w.sum())
    return params.means[comp] + mog_sigmas(params)[comp] * rng.standard_normal(count)


@dataclass
class MoGGrads:
    d_raw_weights: np.ndarray
    d_means: np.ndarray
    d_raw_scales: np.ndarray


def mog_cross_entropy(params: MoGParams, cumulative_reward: float, effective_discount: float,
                      target_samples) -> tuple:
    """Sampled negative log-likelihood of the shifted target under the mixture.

    loss = -(1/J) sum_j log p(reward + discount * z_j). Returns
    (loss, MoGGrads, underflow_count); samples whose density hits the
    1e-300 clamp contribute a flat (zero-gradient) term and are counted.
    """
    z = np.asarray(target_samples, dtype=np.float64)
    y = cumulative_reward + effective_discount * z
    w = mog_weights(params)
    sig = mog_sigmas(params)
    mu = params.means
    J = len(y)

    t = (y[:, None] - mu[None, :]) / sig[None, :]
    comp = np.exp(-0.5 * t * t) / (np.sqrt(2.0 * np.pi) * sig[None, :])
    dens = comp @ w
    under = dens < DENSITY_FLOOR
    underflows = int(under.sum())
    dens_c = np.maximum(dens, DENSITY_FLOOR)
    loss = -float(np.mean(np.log(dens_c)))

    # d loss / d dens_j = -1/(J * dens_j); zero where clamped
    dl_ddens = np.where(under, 0.0, -1.0 / (J * dens_c))
    # weights: d dens / d omega_i = w_i (comp_i - dens)
    d_raw_w = ((comp - dens[:, None]) * w[None, :] * dl_ddens[:, None]).sum(axis=0)
    # means: d dens / d mu_i = w_i comp_i (y - mu_i) / sig_i^2
    dcomp_dmu = comp * t / sig[None, :]
    d_mu = (w[None, :] * dcomp_dmu * dl_ddens[:, None]).sum(axis=0)
    # scales: d dens / d sig_i = w_i comp_i ((t^2 - 1)/sig_i), chain softplus
    dcomp_dsig = comp * (t * t - 1.0) / sig[None, :]
    dsig_ds = 1.0 / (1.0 + np.exp(-params.raw_scales))
    d_raw_s = (w[None, :] * dcomp_dsig * dl_ddens[:, None]).sum(axis=0) * dsig_ds

    return loss, MoGGrads(d_raw_w, d_mu, d_raw_s), underflows


def scalar_td_loss(q: float, target: float) -> tuple:
    """Half squared TD error and its gradient w.r.t. q."""
    diff = q - target
    return 0.5 * diff * diff, diff


def priority_of(loss_or_td: float, head_kind: str) -> float:
    """Replay priority for one sample, floored so nothing becomes unsampleable."""
    if head_kind == HEAD_SCALAR:
        value = abs(loss_or_td)
    else:
        value = max(loss_or_td, 0.0)
    return max(value, PRIORITY_FLOOR)
