"""Experience collection: K actors running the noisy behavior policy
against private env instances, writing N-step transitions into shared
replay, and picking up fresh weights from the snapshot store.

The same Actor object drives both execution modes. Threaded mode wraps
step_once in a loop per actor; deterministic mode has the experiment
driver call step_once round-robin so the interleaving is fixed.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import numpy as np

from .nn import DenseNet, forward
from .replay import NStepAccumulator

FETCH_INTERVAL = 50  # env steps between mid-episode snapshot polls


@dataclass
class ActorConfig:
    count: int = 4
    epsilon: float = 0.3
    nstep: int = 5
    gamma: float = 0.99
    fetch_interval: int = FETCH_INTERVAL


@dataclass
class ActorMetrics:
    env_steps: int = 0
    episodes: int = 0
    transitions: int = 0
    env_faults: int = 0
    last_episode_return: float = 0.0


def select_action(actor_params: DenseNet, x, rng, epsilon: float, env_spec):
    """Behavior policy: pi(x) plus spherical Gaussian noise, clipped to bounds."""
    raw, _ = forward(actor_params, x)
    a = raw * env_spec.action_scale
    if epsilon > 0.0:
        a = a + epsilon * rng.standard_normal(env_spec.action_dim)
    return np.clip(a, env_spec.action_low, env_spec.action_high)


class Actor:
    """One experience stream: env, exploration rng, N-step window, weights."""

    def __init__(self, index: int, env, cfg: ActorConfig, rng, store=None):
        self.index = index
        self.env = env
        self.cfg = cfg
        self.rng = rng
        self.store = store
        self.accumulator = NStepAccumulator(cfg.nstep, cfg.gamma)
        self.params = None
        self.version = 0
        self.obs = None
        self.metrics = ActorMetrics()
        self._episode_return = 0.0
        self._steps_since_fetch = 0

    def maybe_fetch(self, force: bool = False) -> None:
        if self.store is None:
            return
        if force or self._steps_since_fetch >= self.cfg.fetch_interval:
            snap = self.store.fetch_newer(self.version)
            self._steps_since_fetch = 0
            if snap is not None:
                self.params = snap.params
                self.version = snap.version

    def begin_episode(self) -> None:
        self.obs = self.env.reset(self.rng)
        self.accumulator.reset()
        self._episode_return = 0.0
        self.maybe_fetch(force=True)

    def step_once(self, replay) -> int:
        """Advance one env step; returns transitions written (0 while waiting
        for the first snapshot)."""
        if self.params is None:
            self.maybe_fetch(force=True)
            if self.params is None:
                return 0
        if self.obs is None:
            self.begin_episode()
        else:
            self.maybe_fetch()
        a = select_action(self.params, self.obs, self.rng, self.cfg.epsilon, self.env.spec)
        try:
            res = self.env.step(a)
        except Exception:
            self.metrics.env_faults += 1
            self.obs = None
            return 0
        emitted = self.accumulator.push(self.obs, a, res.reward, res.observation, res.terminal)
        if res.truncated and not res.terminal:
            emitted = emitted + self.accumulator.flush_truncated(res.observation)
        for tr in emitted:
            replay.insert(tr)
        self._episode_return += res.reward
        self.metrics.env_steps += 1
        self.metrics.transitions += len(emitted)
        self._steps_since_fetch += 1
        if res.terminal or res.truncated:
            self.metrics.episodes += 1
            self.metrics.last_episode_return = self._episode_return
            self.obs = None
        else:
            self.obs = res.observation
        return len(emitted)


def run_actor_thread(actor: Actor, replay, stop_event: threading.Event,
                     idle_sleep: float = 0.001) -> None:
    """Thread body: step until told to stop; exits within one env step."""
    while not stop_event.is_set():
        wrote = actor.step_once(replay)
        if wrote == 0 and actor.params is None:
            time.sleep(idle_sleep)


def start_actor_threads(actors, replay, stop_event):
    threads = []
    for actor in actors:
        t = threading.Thread(target=run_actor_thread, args=(actor, replay, stop_event),
                             daemon=True)
        t.start()
        threads.append(t)
    return threads
