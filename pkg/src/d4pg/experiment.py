"""Training orchestration: wiring config into envs, nets, replay and
actors, then driving the learner with periodic noise-free evaluation,
CSV metrics rows and checkpoints.

Two drivers share all of that plumbing. The threaded driver runs K actor
threads against the learner. The deterministic driver runs everything on
one thread with a fixed interleave (each actor takes one env step per
learner step, in actor index order) and stamps rows with a virtual clock,
so identical seeds give byte-identical CSV files.
"""

from __future__ import annotations

import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from .actors import Actor, ActorConfig, select_action, start_actor_threads
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, config_hash, resolve_support
from .envs import make_env
from .errors import CheckpointError, UsageError
from .learner import (LearnerConfig, NetworkQuad, build_networks, make_optimizers,
                      train_step)
from .nn import AdamState, NetSpec
from .replay import PrioritizedReplay, Transition
from .seeding import generator_state, restore_generator, substream
from .transport import SnapshotStore, net_from_layers

CSV_HEADER = ("wall_time_s,learner_steps,actor_steps,eval_return_mean,"
              "eval_return_std,critic_loss_mean,actor_objective_mean,snapshot_version")

# seconds credited per learner step by the deterministic-mode virtual clock
VIRTUAL_STEP_SECONDS = 1e-3


@dataclass
class RunState:
    cfg: ExperimentConfig
    lcfg: LearnerConfig
    nets: NetworkQuad
    opt: object
    replay: PrioritizedReplay
    store: SnapshotStore
    actors: list
    env_spec: object
    replay_rng: np.random.Generator
    target_rng: np.random.Generator
    t: int = 0
    eval_index: int = 0
    wall_offset: float = 0.0
    wall_start: float = field(default_factory=time.monotonic)
    agg: dict = field(default_factory=lambda: dict(
        loss_sum=0.0, obj_sum=0.0, count=0, underflows=0))

    def wall_time(self) -> float:
        if self.cfg.deterministic:
            return self.t * VIRTUAL_STEP_SECONDS
        return self.wall_offset + (time.monotonic() - self.wall_start)

    def actor_steps(self) -> int:
        return sum(a.metrics.env_steps for a in self.actors)


def to_learner_config(cfg: ExperimentConfig, v_min: float, v_max: float) -> LearnerConfig:
    return LearnerConfig(
        batch_size=cfg.batch,
        nstep=cfg.nstep,
        gamma=cfg.gamma,
        actor_lr=cfg.actor_lr,
        critic_lr=cfg.critic_lr,
        t_target=cfg.t_target,
        t_actors=cfg.t_actors,
        head_kind=cfg.head,
        prioritized=cfg.prioritized,
        num_atoms=cfg.atoms,
        v_min=v_min,
        v_max=v_max,
        mixture_size=cfg.mixture_size,
        target_samples=cfg.target_samples,
        max_grad_norm=cfg.max_grad_norm,
    )


def build_run(cfg: ExperimentConfig) -> RunState:
    probe = make_env(cfg.env)
    env_spec = probe.spec
    v_min, v_max = resolve_support(cfg, env_spec.episode_limit)
    lcfg = to_learner_config(cfg, v_min, v_max)
    nets = build_networks(
        env_spec.observation_dim, env_spec.action_dim, env_spec.action_scale, lcfg,
        actor_hidden=cfg.actor_hidden, critic_hidden=cfg.critic_hidden,
        actor_seed=substream(cfg.seed, "init-actor"),
        critic_seed=substream(cfg.seed, "init-critic"))
    opt = make_optimizers(nets)
    replay = PrioritizedReplay(cfg.replay, prioritized=cfg.prioritized)
    store = SnapshotStore()
    acfg = ActorConfig(count=cfg.actors, epsilon=cfg.epsilon, nstep=cfg.nstep,
                       gamma=cfg.gamma, fetch_interval=cfg.fetch_interval)
    actors = [
        Actor(i, make_env(cfg.env), acfg, substream(cfg.seed, "actor", str(i)), store)
        for i in range(cfg.actors)
    ]
    return RunState(
        cfg=cfg, lcfg=lcfg, nets=nets, opt=opt, replay=replay, store=store,
        actors=actors, env_spec=env_spec,
        replay_rng=substream(cfg.seed, "replay"),
        target_rng=substream(cfg.seed, "targets"))


def evaluate_policy(params, env_name: str, episodes: int, rng) -> np.ndarray:
    """Noise-free rollouts; returns the undiscounted return of each episode."""
    env = make_env(env_name)
    returns = np.zeros(episodes)
    for e in range(episodes):
        obs = env.reset(rng)
        total = 0.0
        while True:
            a = select_action(params, obs, rng, 0.0, env.spec)
            res = env.step(a)
            total += res.reward
            if res.terminal or res.truncated:
                break
            obs = res.observation
        returns[e] = total
    return returns


def _format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        raise TypeError("no boolean metrics in the CSV schema")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def append_csv_row(path: str, values) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(",".join(_format_value(v) for v in values) + "\n")


def ensure_csv(path: str) -> None:
    if not os.path.exists(path) or os.path.getsize(path) == 0:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(CSV_HEADER + "\n")


def _eval_and_log(state: RunState, csv_path: str) -> None:
    cfg = state.cfg
    rng = substream(cfg.seed, "eval", str(state.eval_index))
    frozen = state.nets.actor.copy()
    returns = evaluate_policy(frozen, cfg.env, cfg.eval_episodes, rng)
    count = max(state.agg["count"], 1)
    append_csv_row(csv_path, (
        state.wall_time(),
        state.t,
        state.actor_steps(),
        float(returns.mean()),
        float(returns.std()),
        state.agg["loss_sum"] / count,
        state.agg["obj_sum"] / count,
        state.store.version,
    ))
    state.eval_index += 1
    state.agg.update(loss_sum=0.0, obj_sum=0.0, count=0)


def _learner_iteration(state: RunState) -> None:
    state.t += 1
    metrics = train_step(
        state.t, state.replay, state.nets, state.lcfg, state.opt,
        state.replay_rng, state.target_rng, snapshot_store=state.store)
    state.agg["loss_sum"] += metrics.critic_loss_mean
    state.agg["obj_sum"] += metrics.actor_objective_mean
    state.agg["count"] += 1
    state.agg["underflows"] += metrics.density_underflows


def run_train(cfg: ExperimentConfig, resume_path: str = None, force: bool = False) -> int:
    if not cfg.out:
        raise UsageError("missing required key `out` (training needs an output directory)")
    os.makedirs(cfg.out, exist_ok=True)
    csv_path = os.path.join(cfg.out, "metrics.csv")
    ckpt_path = os.path.join(cfg.out, "checkpoint.bin")
    state = build_run(cfg)
    if resume_path is not None:
        apply_checkpoint(state, load_checkpoint(resume_path), force=force)
    else:
        state.store.publish(state.nets.actor)
    ensure_csv(csv_path)
    state.wall_start = time.monotonic()
    # rows are flushed as they are written, so an abort keeps the partial CSV
    if cfg.deterministic:
        _drive_deterministic(state, csv_path, ckpt_path)
    else:
        _drive_threaded(state, csv_path, ckpt_path)
    # rows land only on eval_every boundaries so a resumed run and an
    # unbroken run write the same row sequence; the final checkpoint still
    # captures any trailing partial interval
    write_run_checkpoint(state, ckpt_path)
    return 0


def _drive_deterministic(state: RunState, csv_path: str, ckpt_path: str) -> None:
    cfg = state.cfg
    while state.t < cfg.steps:
        for actor in state.actors:
            actor.step_once(state.replay)
        if len(state.replay) < cfg.batch:
            continue
        _learner_iteration(state)
        if state.t % cfg.eval_every == 0:
            _eval_and_log(state, csv_path)
            write_run_checkpoint(state, ckpt_path)


def _drive_threaded(state: RunState, csv_path: str, ckpt_path: str) -> None:
    cfg = state.cfg
    stop = threading.Event()
    threads = start_actor_threads(state.actors, state.replay, stop)
    try:
        while state.t < cfg.steps:
            if len(state.replay) < cfg.batch:
                time.sleep(0.001)
                continue
            _learner_iteration(state)
            if state.t % cfg.eval_every == 0:
                _eval_and_log(state, csv_path)
                write_run_checkpoint(state, ckpt_path)
    finally:
        stop.set()
        for th in threads:
            th.join(timeout=5.0)


def run_eval(cfg: ExperimentConfig, ckpt_path: str):
    """Load a checkpoint's policy and report noise-free eval statistics."""
    data = load_checkpoint(ckpt_path)
    env = make_env(cfg.env)
    spec = NetSpec((env.spec.observation_dim, *cfg.actor_hidden, env.spec.action_dim),
                   output_activation="tanh")
    if "actor" not in data.nets:
        raise CheckpointError("checkpoint holds no actor network")
    params = net_from_layers(spec, data.nets["actor"])
    rng = substream(cfg.seed, "eval", "0")
    returns = evaluate_policy(params, cfg.env, cfg.eval_episodes, rng)
    return {
        "episodes": len(returns),
        "mean": float(returns.mean()),
        "std": float(returns.std()),
        "min": float(returns.min()),
        "max": float(returns.max()),
        "learner_steps": data.t,
    }


def _adam_arrays(opt_state: AdamState) -> list:
    return (list(opt_state.m_weights) + list(opt_state.m_biases)
            + list(opt_state.v_weights) + list(opt_state.v_biases))


def _restore_adam(opt_state: AdamState, step_count: int, arrays: list) -> None:
    layers = len(opt_state.m_weights)
    if len(arrays) != 4 * layers:
        raise CheckpointError(
            f"optimizer section holds {len(arrays)} arrays, expected {4 * layers}")
    groups = [arrays[i * layers:(i + 1) * layers] for i in range(4)]
    for name, saved in zip(("m_weights", "m_biases", "v_weights", "v_biases"), groups):
        current = getattr(opt_state, name)
        for i, arr in enumerate(saved):
            if arr.shape != current[i].shape:
                raise CheckpointError(
                    f"optimizer {name}[{i}] shape {arr.shape} != {current[i].shape}")
            current[i][...] = arr
    opt_state.step_count = step_count


def _replay_sections(replay: PrioritizedReplay, obs_dim: int, act_dim: int):
    snap = replay.state_arrays()
    size = snap["size"]
    xs = np.zeros((size, obs_dim))
    acts = np.zeros((size, act_dim))
    rewards = np.zeros(size)
    bxs = np.zeros((size, obs_dim))
    discs = np.zeros(size)
    for i, tr in enumerate(snap["transitions"]):
        xs[i] = tr.x
        acts[i] = tr.a
        rewards[i] = tr.cumulative_reward
        bxs[i] = tr.bootstrap_x
        discs[i] = tr.effective_discount
    scalars = {k: snap[k] for k in
               ("size", "cursor", "max_priority_seen", "insert_count",
                "stale_update_skips")}
    arrays = {
        "xs": xs, "acts": acts, "rewards": rewards, "bxs": bxs, "discs": discs,
        "priorities": snap["priorities"], "generations": snap["generations"],
    }
    return scalars, arrays


def _restore_replay(replay: PrioritizedReplay, scalars: dict, arrays: dict) -> None:
    size = scalars["size"]
    transitions = [
        Transition(
            x=arrays["xs"][i].copy(),
            a=arrays["acts"][i].copy(),
            cumulative_reward=float(arrays["rewards"][i]),
            bootstrap_x=arrays["bxs"][i].copy(),
            effective_discount=float(arrays["discs"][i]),
        )
        for i in range(size)
    ]
    replay.restore({
        **scalars,
        "transitions": transitions,
        "priorities": arrays["priorities"],
        "generations": arrays["generations"],
    })


def _actor_record(actor: Actor) -> dict:
    window = [[list(map(float, x)), list(map(float, a)), r]
              for x, a, r in actor.accumulator._window]
    return {
        "rng": generator_state(actor.rng),
        "version": actor.version,
        "steps_since_fetch": actor._steps_since_fetch,
        "obs": None if actor.obs is None else [float(v) for v in actor.obs],
        "episode_return": actor._episode_return,
        "acc_window": window,
        "acc_closed": actor.accumulator._closed,
        "env_state": [float(v) for v in actor.env.get_state()],
        "metrics": {
            "env_steps": actor.metrics.env_steps,
            "episodes": actor.metrics.episodes,
            "transitions": actor.metrics.transitions,
            "env_faults": actor.metrics.env_faults,
            "last_episode_return": actor.metrics.last_episode_return,
        },
    }


def write_run_checkpoint(state: RunState, path: str) -> None:
    scalars, arrays = _replay_sections(
        state.replay, state.env_spec.observation_dim, state.env_spec.action_dim)
    latest = state.store.fetch()
    save_checkpoint(
        path,
        config_hash=config_hash(state.cfg),
        t=state.t,
        store_version=state.store.version,
        eval_index=state.eval_index,
        wall_elapsed=state.wall_time(),
        agg=state.agg,
        nets={
            "actor": state.nets.actor,
            "critic": state.nets.critic,
            "target_actor": state.nets.target_actor,
            "target_critic": state.nets.target_critic,
        },
        adam={
            "actor": (state.opt.actor.step_count, _adam_arrays(state.opt.actor)),
            "critic": (state.opt.critic.step_count, _adam_arrays(state.opt.critic)),
        },
        rng_states={
            "replay": generator_state(state.replay_rng),
            "targets": generator_state(state.target_rng),
        },
        replay_scalars=scalars,
        replay_arrays=arrays,
        actors=[_actor_record(a) for a in state.actors],
        actor_params=[
            None if a.params is None else (a.version, a.params) for a in state.actors
        ],
        store_latest=None if latest is None else (latest.version, latest.params),
    )


def apply_checkpoint(state: RunState, data, force: bool = False) -> None:
    """Overwrite a freshly built RunState with checkpointed training state."""
    expected = config_hash(state.cfg)
    if data.config_hash != expected:
        message = (f"checkpoint config hash {data.config_hash:#x} does not match "
                   f"current config {expected:#x}")
        if not force:
            raise UsageError(message + "; pass --force to resume anyway")
        print(f"warning: {message}; resuming under --force", flush=True)
    for name in ("actor", "critic", "target_actor", "target_critic"):
        if name not in data.nets:
            raise CheckpointError(f"checkpoint is missing network {name!r}")
    state.nets.actor = net_from_layers(state.nets.actor.spec, data.nets["actor"])
    state.nets.critic = net_from_layers(state.nets.critic.spec, data.nets["critic"])
    state.nets.target_actor = net_from_layers(
        state.nets.target_actor.spec, data.nets["target_actor"])
    state.nets.target_critic = net_from_layers(
        state.nets.target_critic.spec, data.nets["target_critic"])
    _restore_adam(state.opt.actor, *data.adam["actor"])
    _restore_adam(state.opt.critic, *data.adam["critic"])
    state.replay_rng = restore_generator(data.rng_states["replay"])
    state.target_rng = restore_generator(data.rng_states["targets"])
    _restore_replay(state.replay, data.replay_scalars, data.replay_arrays)
    if len(data.actors) != len(state.actors):
        raise CheckpointError(
            f"checkpoint has {len(data.actors)} actors, config asks for "
            f"{len(state.actors)}")
    actor_spec = state.nets.actor.spec
    for actor, record, entry in zip(state.actors, data.actors, data.actor_params):
        _restore_actor_with_spec(actor, record, entry, actor_spec)
    if data.store_latest is None:
        state.store.restore(data.store_version, None)
    else:
        version, layers = data.store_latest
        state.store.restore(data.store_version, net_from_layers(actor_spec, layers))
    state.t = data.t
    state.eval_index = data.eval_index
    state.wall_offset = data.wall_elapsed
    state.agg = dict(data.agg)


def _restore_actor_with_spec(actor: Actor, record: dict, params_entry, spec) -> None:
    actor.rng = restore_generator(record["rng"])
    actor.version = record["version"]
    actor._steps_since_fetch = record["steps_since_fetch"]
    actor.obs = None if record["obs"] is None else np.asarray(record["obs"])
    actor._episode_return = record["episode_return"]
    actor.accumulator._window = deque(
        (np.asarray(x), np.asarray(a), float(r)) for x, a, r in record["acc_window"])
    actor.accumulator._closed = record["acc_closed"]
    actor.env.set_state(record["env_state"])
    for key, value in record["metrics"].items():
        setattr(actor.metrics, key, value)
    if params_entry is None:
        actor.params = None
    else:
        _, layers = params_entry
        actor.params = net_from_layers(spec, layers)
