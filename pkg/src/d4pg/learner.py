"""The learner loop: targets, importance-weighted critic updates,
distributional policy-gradient actor updates, periodic hard target sync.

All three critic heads go through the same three hooks: target
construction, per-sample loss with gradient w.r.t. the raw head outputs,
and expected value with gradient w.r.t. the raw head outputs (for the
actor chain). Everything else is head-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from .errors import ConfigError, NumericalError
from .nn import AdamState, DenseNet, NetSpec, adam_update, backward, forward, init_net
from .replay import PrioritizedReplay, SampledBatch

DEFAULT_HIDDEN = (256, 256)


@dataclass
class LearnerConfig:
    batch_size: int = 64
    nstep: int = 5
    gamma: float = 0.99
    actor_lr: float = 1e-4
    critic_lr: float = 1e-4
    t_target: int = 100
    t_actors: int = 10
    head_kind: str = dist.HEAD_CATEGORICAL
    prioritized: bool = True
    num_atoms: int = 51
    v_min: float = 0.0
    v_max: float = 100.0
    mixture_size: int = 5
    target_samples: int = 16
    max_grad_norm: float = 0.0
    stratified: bool = True

    def __post_init__(self):
        if self.batch_size < 1 or self.nstep < 1:
            raise ConfigError("batch size and trajectory length must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"discount must lie in (0, 1), got {self.gamma}")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ConfigError("learning rates must be positive")
        if self.t_target < 1 or self.t_actors < 1:
            raise ConfigError("sync periods must be positive")
        if self.head_kind not in dist.HEAD_KINDS:
            raise ConfigError(f"unknown head kind {self.head_kind!r}")

    def head_size(self) -> int:
        if self.head_kind == dist.HEAD_CATEGORICAL:
            return self.num_atoms
        if self.head_kind == dist.HEAD_MOG:
            return 3 * self.mixture_size
        return 1


@dataclass
class NetworkQuad:
    actor: DenseNet
    critic: DenseNet
    target_actor: DenseNet
    target_critic: DenseNet
    action_scale: np.ndarray
    support: dist.Support = None
    obs_dim: int = 0

    def sync_targets(self) -> None:
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()


@dataclass
class OptimizerPair:
    actor: AdamState
    critic: AdamState


@dataclass
class StepMetrics:
    critic_loss_mean: float = float("nan")
    actor_objective_mean: float = float("nan")
    critic_grad_norm: float = 0.0
    actor_grad_norm: float = 0.0
    priorities: np.ndarray = field(default_factory=lambda: np.zeros(0))
    density_underflows: int = 0


def build_networks(obs_dim: int, act_dim: int, action_scale, cfg: LearnerConfig,
                   actor_hidden=DEFAULT_HIDDEN, critic_hidden=DEFAULT_HIDDEN,
                   actor_seed: int = 0, critic_seed: int = 1) -> NetworkQuad:
    actor_spec = NetSpec((obs_dim, *actor_hidden, act_dim), output_activation="tanh")
    critic_spec = NetSpec((obs_dim + act_dim, *critic_hidden, cfg.head_size()))
    actor = init_net(actor_spec, actor_seed)
    critic = init_net(critic_spec, critic_seed)
    support = None
    if cfg.head_kind == dist.HEAD_CATEGORICAL:
        support = dist.make_support(cfg.num_atoms, cfg.v_min, cfg.v_max)
    quad = NetworkQuad(
        actor=actor,
        critic=critic,
        target_actor=actor.copy(),
        target_critic=critic.copy(),
        action_scale=np.asarray(action_scale, dtype=np.float64),
        support=support,
        obs_dim=obs_dim,
    )
    return quad


def make_optimizers(nets: NetworkQuad) -> OptimizerPair:
    return OptimizerPair(AdamState.for_net(nets.actor), AdamState.for_net(nets.critic))


def policy_forward(net: DenseNet, x, action_scale):
    """Actions of the deterministic policy: action_scale * tanh-net(x)."""
    raw, cache = forward(net, x)
    return raw * action_scale, cache


def _stack(batch: SampledBatch, attr: str) -> np.ndarray:
    return np.stack([getattr(t, attr) for t in batch.transitions])


def _scalars(batch: SampledBatch, attr: str) -> np.ndarray:
    return np.array([getattr(t, attr) for t in batch.transitions])


def build_targets(batch: SampledBatch, nets: NetworkQuad, cfg: LearnerConfig,
                  rng: np.random.Generator = None):
    """Per-sample bootstrap targets from the target networks.

    Targets are plain arrays; no gradient ever flows back through them.
    Categorical: projected probabilities (B, atoms). Scalar: values (B,).
    Mixture: shifted target samples (B, J).
    """
    bx = _stack(batch, "bootstrap_x")
    rbar = _scalars(batch, "cumulative_reward")
    disc = _scalars(batch, "effective_discount")
    pi_t, _ = policy_forward(nets.target_actor, bx, nets.action_scale)
    out_t, _ = forward(nets.target_critic, np.concatenate([bx, pi_t], axis=1))
    if cfg.head_kind == dist.HEAD_CATEGORICAL:
        shifted = rbar[:, None] + disc[:, None] * nets.support.atoms[None, :]
        return dist.project_categorical(shifted, dist.softmax(out_t), nets.support)
    if cfg.head_kind == dist.HEAD_SCALAR:
        return rbar + disc * out_t[:, 0]
    z = _mog_batch_sample(out_t, cfg.mixture_size, rng, cfg.target_samples)
    return rbar[:, None] + disc[:, None] * z


def _split_mog(out: np.ndarray, k: int):
    return out[:, :k], out[:, k:2 * k], out[:, 2 * k:]


def _mog_batch_sample(out: np.ndarray, k: int, rng: np.random.Generator, count: int):
    raw_w, mu, raw_s = _split_mog(out, k)
    w = dist.softmax(raw_w)
    sig = dist.softplus(raw_s) + dist.SIGMA_FLOOR
    cdf = np.cumsum(w, axis=1)
    u = rng.random((out.shape[0], count))
    comp = np.minimum((u[:, :, None] >= cdf[:, None, :]).sum(axis=2), k - 1)
    rows = np.arange(out.shape[0])[:, None]
    return mu[rows, comp] + sig[rows, comp] * rng.standard_normal((out.shape[0], count))


def _mog_batch_loss(out: np.ndarray, k: int, targets: np.ndarray):
    """Per-row sampled NLL and gradient w.r.t. the raw head outputs."""
    raw_w, mu, raw_s = _split_mog(out, k)
    w = dist.softmax(raw_w)
    sig = dist.softplus(raw_s) + dist.SIGMA_FLOOR
    y = targets  # (B, J)
    t = (y[:, :, None] - mu[:, None, :]) / sig[:, None, :]
    comp = np.exp(-0.5 * t * t) / (np.sqrt(2.0 * np.pi) * sig[:, None, :])
    dens = np.einsum("bjk,bk->bj", comp, w)
    under = dens < dist.DENSITY_FLOOR
    dens_c = np.maximum(dens, dist.DENSITY_FLOOR)
    J = y.shape[1]
    losses = -np.log(dens_c).mean(axis=1)
    dl_ddens = np.where(under, 0.0, -1.0 / (J * dens_c))
    d_raw_w = np.einsum("bj,bjk->bk", dl_ddens, comp - dens[:, :, None]) * w
    d_mu = np.einsum("bj,bjk->bk", dl_ddens, comp * t / sig[:, None, :]) * w
    dsig_ds = 1.0 / (1.0 + np.exp(-raw_s))
    d_raw_s = np.einsum("bj,bjk->bk", dl_ddens, comp * (t * t - 1.0) / sig[:, None, :]) \
        * w * dsig_ds
    return losses, np.concatenate([d_raw_w, d_mu, d_raw_s], axis=1), int(under.sum())


def _mog_batch_mean(out: np.ndarray, k: int):
    raw_w, mu, _ = _split_mog(out, k)
    w = dist.softmax(raw_w)
    means = (w * mu).sum(axis=1)
    d_raw_w = w * (mu - means[:, None])
    d_mu = w
    d_raw_s = np.zeros_like(mu)
    return means, np.concatenate([d_raw_w, d_mu, d_raw_s], axis=1)


def head_losses(out: np.ndarray, targets, cfg: LearnerConfig, support):
    """Per-sample loss, gradient w.r.t. raw outputs, TD/priority basis, underflows."""
    if cfg.head_kind == dist.HEAD_CATEGORICAL:
        losses, grad = dist.categorical_cross_entropy(targets, out)
        return losses, grad, losses, 0
    if cfg.head_kind == dist.HEAD_SCALAR:
        diff = out[:, 0] - targets
        losses = 0.5 * diff * diff
        return losses, diff[:, None], diff, 0
    losses, grad, underflows = _mog_batch_loss(out, cfg.mixture_size, targets)
    return losses, grad, losses, underflows


def head_means(out: np.ndarray, cfg: LearnerConfig, support):
    """Expected value per sample and its gradient w.r.t. raw outputs."""
    if cfg.head_kind == dist.HEAD_CATEGORICAL:
        p = dist.softmax(out)
        means = p @ support.atoms
        return means, p * (support.atoms[None, :] - means[:, None])
    if cfg.head_kind == dist.HEAD_SCALAR:
        return out[:, 0], np.ones_like(out)
    return _mog_batch_mean(out, cfg.mixture_size)


def _maybe_clip(grads, max_norm: float) -> float:
    norm = grads.global_norm()
    if max_norm > 0.0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.weights:
            g *= scale
        for g in grads.biases:
            g *= scale
    return norm


def critic_gradients(batch: SampledBatch, targets, nets: NetworkQuad,
                     cfg: LearnerConfig):
    """Gradient of the importance-weighted mean loss w.r.t. critic params.

    Returns (grads, per-sample losses, td basis for priorities, underflow
    count). Targets enter as constants; nothing flows back through them.
    """
    x = _stack(batch, "x")
    a = _stack(batch, "a")
    out, cache = forward(nets.critic, np.concatenate([x, a], axis=1))
    losses, dout, td_basis, underflows = head_losses(out, targets, cfg, nets.support)
    if not np.isfinite(losses).all():
        raise NumericalError("non-finite critic loss; aborting step")
    upstream = dout * (batch.weights / cfg.batch_size)[:, None]
    return backward(nets.critic, cache, upstream), losses, td_basis, underflows


def critic_step(batch: SampledBatch, targets, nets: NetworkQuad, cfg: LearnerConfig,
                opt: OptimizerPair) -> StepMetrics:
    """One importance-weighted critic update; returns per-sample priorities."""
    grads, losses, td_basis, underflows = critic_gradients(batch, targets, nets, cfg)
    norm = _maybe_clip(grads, cfg.max_grad_norm)
    adam_update(nets.critic, grads, opt.critic, cfg.critic_lr)
    priorities = np.array([dist.priority_of(v, cfg.head_kind) for v in td_basis])
    return StepMetrics(
        critic_loss_mean=float(losses.mean()),
        critic_grad_norm=norm,
        priorities=priorities,
        density_underflows=underflows,
    )


def actor_gradients(batch: SampledBatch, nets: NetworkQuad, cfg: LearnerConfig):
    """Ascent direction for the actor: gradient of the batch-mean expected
    value of the critic distribution at a = pi(x).

    The chain runs: head outputs -> expected value -> gradient w.r.t. the
    action input of the critic -> through the actor. Returns (grads, means)
    where grads point uphill.
    """
    x = _stack(batch, "x")
    actions, cache_a = policy_forward(nets.actor, x, nets.action_scale)
    out, cache_c = forward(nets.critic, np.concatenate([x, actions], axis=1))
    means, dmean = head_means(out, cfg, nets.support)
    action_grad = backward(nets.critic, cache_c, dmean).input_grad[:, nets.obs_dim:]
    upstream = action_grad * nets.action_scale / cfg.batch_size
    grads = backward(nets.actor, cache_a, upstream)
    if not grads.all_finite():
        raise NumericalError("non-finite actor gradient; aborting step")
    return grads, means


def actor_step(batch: SampledBatch, nets: NetworkQuad, cfg: LearnerConfig,
               opt: OptimizerPair) -> StepMetrics:
    """Gradient-ascent step on the mean of the critic distribution at pi(x).

    Critic parameters are read but never modified.
    """
    grads, means = actor_gradients(batch, nets, cfg)
    norm = _maybe_clip(grads, cfg.max_grad_norm)
    adam_update(nets.actor, grads.scaled(-1.0), opt.actor, cfg.actor_lr)
    return StepMetrics(actor_objective_mean=float(means.mean()), actor_grad_norm=norm)


def maybe_sync(nets: NetworkQuad, t: int, cfg: LearnerConfig) -> bool:
    if t % cfg.t_target == 0:
        nets.sync_targets()
        return True
    return False


def train_step(t: int, replay: PrioritizedReplay, nets: NetworkQuad, cfg: LearnerConfig,
               opt: OptimizerPair, sample_rng: np.random.Generator,
               target_rng: np.random.Generator = None,
               snapshot_store=None) -> StepMetrics:
    """One full loop body: sample, targets, critic, actor, priorities, syncs."""
    batch = replay.sample(cfg.batch_size, sample_rng, stratified=cfg.stratified)
    targets = build_targets(batch, nets, cfg, rng=target_rng)
    metrics = critic_step(batch, targets, nets, cfg, opt)
    actor_metrics = actor_step(batch, nets, cfg, opt)
    metrics.actor_objective_mean = actor_metrics.actor_objective_mean
    metrics.actor_grad_norm = actor_metrics.actor_grad_norm
    if cfg.prioritized:
        replay.update_priorities(batch.indices, metrics.priorities, batch.generations)
    maybe_sync(nets, t, cfg)
    if snapshot_store is not None and t % cfg.t_actors == 0:
        snapshot_store.publish(nets.actor)
    return metrics
