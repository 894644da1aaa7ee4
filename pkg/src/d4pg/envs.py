"""Self-contained continuous-control tasks.

Three deterministic, finite-horizon environments stand in for a physics
suite: a torque-limited pendulum swing-up, a 2-D point mass chasing a
target, and a 1-D double integrator used as a ground-truth value oracle.
All rewards live in [0, 1]. Episodes end only by time limit (truncation),
never by true termination, and truncation is reported separately so the
replay pipeline can keep its bootstrap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# tanh^-1(sqrt(0.95)); pins soft_indicator(margin) = 0.05 exactly
_PSI_W = float(np.arctanh(np.sqrt(0.95)))


def soft_indicator(eps_value: float, c: float, m: float) -> float:
    """Soft tolerance reward: 1 inside the tolerance c, then a smooth
    falloff with characteristic margin m (value 0.05 at eps_value = m)."""
    if m <= 0:
        raise ConfigError(f"margin must be positive, got {m}")
    if eps_value <= c:
        return 1.0
    t = np.tanh(_PSI_W * eps_value / m)
    return float(1.0 - t * t)


@dataclass(frozen=True)
class EnvSpec:
    observation_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    episode_limit: int

    @property
    def action_scale(self) -> np.ndarray:
        return self.action_high


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminal: bool
    truncated: bool


class Pendulum:
    """Torque-limited rigid-rod swing-up.

    theta is measured from upright; gravity makes the upright position an
    unstable equilibrium. theta'' = (3g / 2l) sin(theta) + 3a / (m l^2),
    semi-implicit Euler at dt = 0.05, angular velocity clipped to [-8, 8].
    Reward (1 + cos(theta)) / 2. Episodes run exactly 1000 steps; resets
    start hanging nearly straight down at rest.
    """

    GRAVITY = 10.0
    LENGTH = 1.0
    MASS = 1.0
    DT = 0.05
    MAX_SPEED = 8.0
    MAX_TORQUE = 2.0
    LIMIT = 1000

    spec = EnvSpec(
        observation_dim=3,
        action_dim=1,
        action_low=np.array([-2.0]),
        action_high=np.array([2.0]),
        episode_limit=LIMIT,
    )

    def __init__(self):
        self.theta = np.pi
        self.theta_dot = 0.0
        self.step_count = 0
        self.clip_events = 0

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.theta = rng.uniform(np.pi - 0.1, np.pi + 0.1)
        self.theta_dot = 0.0
        self.step_count = 0
        return self._obs()

    def _obs(self) -> np.ndarray:
        return np.array([np.cos(self.theta), np.sin(self.theta), self.theta_dot])

    def step(self, action) -> StepResult:
        a = float(np.asarray(action).reshape(-1)[0])
        if a < -self.MAX_TORQUE or a > self.MAX_TORQUE:
            a = float(np.clip(a, -self.MAX_TORQUE, self.MAX_TORQUE))
            self.clip_events += 1
        accel = (3.0 * self.GRAVITY / (2.0 * self.LENGTH)) * np.sin(self.theta) \
            + 3.0 * a / (self.MASS * self.LENGTH ** 2)
        self.theta_dot = float(np.clip(self.theta_dot + accel * self.DT,
                                       -self.MAX_SPEED, self.MAX_SPEED))
        self.theta = self._wrap(self.theta + self.theta_dot * self.DT)
        self.step_count += 1
        reward = (1.0 + np.cos(self.theta)) / 2.0
        return StepResult(self._obs(), float(reward), terminal=False,
                          truncated=self.step_count >= self.LIMIT)

    @staticmethod
    def _wrap(theta: float) -> float:
        return float((theta + np.pi) % (2.0 * np.pi) - np.pi)

    def energy(self) -> float:
        """Kinetic plus potential energy of the rod (zero at the pivot height)."""
        inertia = self.MASS * self.LENGTH ** 2 / 3.0
        return 0.5 * inertia * self.theta_dot ** 2 \
            + self.MASS * self.GRAVITY * (self.LENGTH / 2.0) * np.cos(self.theta)

    def get_state(self) -> np.ndarray:
        return np.array([self.theta, self.theta_dot, float(self.step_count)])

    def set_state(self, state) -> None:
        self.theta, self.theta_dot = float(state[0]), float(state[1])
        self.step_count = int(state[2])


class PointMass:
    """Damped 2-D double integrator steering to a random target.

    vel += a dt - 0.1 vel dt, pos += vel dt inside the [-1, 1]^2 arena;
    hitting a wall clamps the position and zeroes that velocity component.
    Reward is the soft indicator of distance to target (c=0.05, m=0.2).
    """

    DT = 0.05
    DRAG = 0.1
    LIMIT = 500
    TOLERANCE = 0.05
    MARGIN = 0.2

    spec = EnvSpec(
        observation_dim=6,
        action_dim=2,
        action_low=np.array([-1.0, -1.0]),
        action_high=np.array([1.0, 1.0]),
        episode_limit=LIMIT,
    )

    def __init__(self):
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)
        self.target = np.zeros(2)
        self.step_count = 0
        self.clip_events = 0

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.pos = rng.uniform(-1.0, 1.0, size=2)
        self.target = rng.uniform(-1.0, 1.0, size=2)
        self.vel = np.zeros(2)
        self.step_count = 0
        return self._obs()

    def _obs(self) -> np.ndarray:
        return np.concatenate([self.pos, self.vel, self.target])

    def step(self, action) -> StepResult:
        a = np.asarray(action, dtype=np.float64).reshape(2)
        if np.any(np.abs(a) > 1.0):
            a = np.clip(a, -1.0, 1.0)
            self.clip_events += 1
        self.vel = self.vel + a * self.DT - self.DRAG * self.vel * self.DT
        self.pos = self.pos + self.vel * self.DT
        for i in range(2):
            if self.pos[i] < -1.0:
                self.pos[i] = -1.0
                self.vel[i] = 0.0
            elif self.pos[i] > 1.0:
                self.pos[i] = 1.0
                self.vel[i] = 0.0
        self.step_count += 1
        dist = float(np.linalg.norm(self.pos - self.target))
        reward = soft_indicator(dist, self.TOLERANCE, self.MARGIN)
        return StepResult(self._obs(), reward, terminal=False,
                          truncated=self.step_count >= self.LIMIT)

    def get_state(self) -> np.ndarray:
        return np.concatenate([self.pos, self.vel, self.target, [float(self.step_count)]])

    def set_state(self, state) -> None:
        state = np.asarray(state, dtype=np.float64)
        self.pos = state[0:2].copy()
        self.vel = state[2:4].copy()
        self.target = state[4:6].copy()
        self.step_count = int(state[6])


class LinearTrack:
    """1-D damped double integrator holding position at the origin.

    Same integrator as PointMass on a single axis; reward is the soft
    indicator of |pos| with c=0.05, m=0.4. Deterministic dynamics make it
    an exact ground-truth task for value estimates.
    """

    DT = 0.05
    DRAG = 0.1
    LIMIT = 200
    TOLERANCE = 0.05
    MARGIN = 0.4

    spec = EnvSpec(
        observation_dim=2,
        action_dim=1,
        action_low=np.array([-1.0]),
        action_high=np.array([1.0]),
        episode_limit=LIMIT,
    )

    def __init__(self):
        self.pos = 0.0
        self.vel = 0.0
        self.step_count = 0
        self.clip_events = 0

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.pos = float(rng.uniform(-1.0, 1.0))
        self.vel = float(rng.uniform(-1.0, 1.0))
        self.step_count = 0
        return self._obs()

    def _obs(self) -> np.ndarray:
        return np.array([self.pos, self.vel])

    def step(self, action) -> StepResult:
        a = float(np.asarray(action).reshape(-1)[0])
        if a < -1.0 or a > 1.0:
            a = float(np.clip(a, -1.0, 1.0))
            self.clip_events += 1
        self.vel = self.vel + a * self.DT - self.DRAG * self.vel * self.DT
        self.pos = self.pos + self.vel * self.DT
        if self.pos < -1.0:
            self.pos, self.vel = -1.0, 0.0
        elif self.pos > 1.0:
            self.pos, self.vel = 1.0, 0.0
        self.step_count += 1
        reward = soft_indicator(abs(self.pos), self.TOLERANCE, self.MARGIN)
        return StepResult(self._obs(), reward, terminal=False,
                          truncated=self.step_count >= self.LIMIT)

    def get_state(self) -> np.ndarray:
        return np.array([self.pos, self.vel, float(self.step_count)])

    def set_state(self, state) -> None:
        self.pos, self.vel = float(state[0]), float(state[1])
        self.step_count = int(state[2])


def monte_carlo_q(policy, x, a, gamma: float, horizon: int, episodes: int = 1) -> float:
    """Empirical discounted return on LinearTrack: take a at state x, then
    follow the policy for `horizon` steps (past any episode limit, matching
    the infinite-horizon value the critic bootstraps toward)."""
    total = 0.0
    for _ in range(episodes):
        env = LinearTrack()
        env.set_state([x[0], x[1], 0.0])
        ret = 0.0
        discount = 1.0
        res = env.step(a)
        ret += discount * res.reward
        discount *= gamma
        for _ in range(horizon - 1):
            res = env.step(policy(res.observation))
            ret += discount * res.reward
            discount *= gamma
        total += ret
    return total / episodes


ENV_REGISTRY = {
    "pendulum": Pendulum,
    "point_mass": PointMass,
    "linear_track": LinearTrack,
}


def make_env(name: str):
    if name not in ENV_REGISTRY:
        raise ConfigError(f"unknown env {name!r}; choose from {sorted(ENV_REGISTRY)}")
    return ENV_REGISTRY[name]()


def scripted_pendulum_controller(obs) -> np.ndarray:
    """Reference swing-up: bang-bang energy pumping, then PD balance.

    Test fixture used to calibrate what return a competent policy reaches.
    """
    cos_t, sin_t, theta_dot = float(obs[0]), float(obs[1]), float(obs[2])
    theta = float(np.arctan2(sin_t, cos_t))
    inertia = Pendulum.MASS * Pendulum.LENGTH ** 2 / 3.0
    energy = 0.5 * inertia * theta_dot ** 2 \
        + Pendulum.MASS * Pendulum.GRAVITY * (Pendulum.LENGTH / 2.0) * cos_t
    target_energy = Pendulum.MASS * Pendulum.GRAVITY * Pendulum.LENGTH / 2.0
    if abs(theta) < 0.35 and abs(theta_dot) < 4.0:
        torque = -10.0 * theta - 2.0 * theta_dot
    else:
        drive = theta_dot if abs(theta_dot) > 1e-3 else 1.0
        torque = Pendulum.MAX_TORQUE * np.sign(drive * (target_energy - energy))
    return np.array([float(np.clip(torque, -Pendulum.MAX_TORQUE, Pendulum.MAX_TORQUE))])
