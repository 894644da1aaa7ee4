"""Experiment configuration: a flat `key = value` text format merged with
command-line overrides (flag wins), strict about unknown keys.

Keys that only make sense for one critic head are tracked as provided or
not, so `head = categorical` plus an explicit `mixture_size` can be
rejected instead of silently ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from . import distributions as dist
from .envs import ENV_REGISTRY
from .errors import UsageError


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected true/false, got {raw!r}")


def _parse_sizes(raw) -> tuple:
    if isinstance(raw, (tuple, list)):
        return tuple(int(v) for v in raw)
    parts = [p for p in str(raw).replace(",", " ").split() if p]
    if not parts:
        raise ValueError("expected a comma-separated list of layer widths")
    return tuple(int(p) for p in parts)


@dataclass
class ExperimentConfig:
    env: str = "pendulum"
    head: str = dist.HEAD_CATEGORICAL
    prioritized: bool = True
    nstep: int = 5
    actors: int = 4
    atoms: int = 51
    vmin: float = None
    vmax: float = None
    mixture_size: int = 5
    target_samples: int = 16
    gamma: float = 0.99
    actor_lr: float = 1e-4
    critic_lr: float = 1e-4
    batch: int = 64
    replay: int = 100_000
    epsilon: float = 0.3
    seed: int = 0
    steps: int = 0
    eval_every: int = 500
    eval_episodes: int = 10
    t_target: int = 100
    t_actors: int = 10
    actor_hidden: tuple = (256, 256)
    critic_hidden: tuple = (256, 256)
    fetch_interval: int = 50
    max_grad_norm: float = 0.0
    deterministic: bool = False
    out: str = ""
    provided: frozenset = frozenset()

    def was_provided(self, key: str) -> bool:
        return key in self.provided


# key -> parser from raw string; config files and CLI share this table
_PARSERS = {
    "env": str,
    "head": str,
    "prioritized": _parse_bool,
    "nstep": int,
    "actors": int,
    "atoms": int,
    "vmin": float,
    "vmax": float,
    "mixture_size": int,
    "target_samples": int,
    "gamma": float,
    "actor_lr": float,
    "critic_lr": float,
    "batch": int,
    "replay": int,
    "epsilon": float,
    "seed": int,
    "steps": int,
    "eval_every": int,
    "eval_episodes": int,
    "t_target": int,
    "t_actors": int,
    "actor_hidden": _parse_sizes,
    "critic_hidden": _parse_sizes,
    "fetch_interval": int,
    "max_grad_norm": float,
    "deterministic": _parse_bool,
    "out": str,
}

# keys tied to a particular critic head; providing one for another head is
# treated as a config mistake, not ignored
_HEAD_KEYS = {
    "atoms": dist.HEAD_CATEGORICAL,
    "vmin": dist.HEAD_CATEGORICAL,
    "vmax": dist.HEAD_CATEGORICAL,
    "mixture_size": dist.HEAD_MOG,
    "target_samples": dist.HEAD_MOG,
}


def read_config_file(path: str) -> dict:
    """Parse the flat text format into raw string values."""
    raw = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{lineno}: expected `key = value`, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _PARSERS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        raw[key] = value
    return raw


def build_config(file_values: dict = None, overrides: dict = None) -> ExperimentConfig:
    """Merge file values and already-typed CLI overrides into a validated config."""
    cfg = ExperimentConfig()
    provided = set()
    for key, raw in (file_values or {}).items():
        if key not in _PARSERS:
            raise UsageError(f"unknown config key {key!r}")
        try:
            setattr(cfg, key, _PARSERS[key](raw))
        except ValueError as exc:
            raise UsageError(f"config key {key!r}: {exc}") from exc
        provided.add(key)
    for key, value in (overrides or {}).items():
        if key not in _PARSERS:
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(value, str):
            try:
                value = _PARSERS[key](value)
            except ValueError as exc:
                raise UsageError(f"flag --{key.replace('_', '-')}: {exc}") from exc
        if key in ("actor_hidden", "critic_hidden"):
            value = _parse_sizes(value)
        setattr(cfg, key, value)
        provided.add(key)
    cfg.provided = frozenset(provided)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.env not in ENV_REGISTRY:
        raise UsageError(f"unknown env {cfg.env!r}; choose from {sorted(ENV_REGISTRY)}")
    if cfg.head not in dist.HEAD_KINDS:
        raise UsageError(f"unknown head {cfg.head!r}; choose from {sorted(dist.HEAD_KINDS)}")
    for key, wanted_head in _HEAD_KEYS.items():
        if cfg.was_provided(key) and cfg.head != wanted_head:
            raise UsageError(
                f"config key {key!r} only applies to head = {wanted_head}, "
                f"but head = {cfg.head}")
    if not 0.0 < cfg.gamma < 1.0:
        raise UsageError(f"gamma must lie in (0, 1), got {cfg.gamma}")
    if cfg.atoms < 2:
        raise UsageError(f"atoms must be >= 2, got {cfg.atoms}")
    if (cfg.vmin is None) != (cfg.vmax is None):
        raise UsageError("vmin and vmax must be given together")
    if cfg.vmin is not None and cfg.vmin >= cfg.vmax:
        raise UsageError(f"vmin must be < vmax, got [{cfg.vmin}, {cfg.vmax}]")
    if cfg.mixture_size < 1 or cfg.target_samples < 1:
        raise UsageError("mixture_size and target_samples must be >= 1")
    if cfg.nstep < 1:
        raise UsageError(f"nstep must be >= 1, got {cfg.nstep}")
    if cfg.actors < 1:
        raise UsageError(f"actors must be >= 1, got {cfg.actors}")
    if cfg.batch < 1:
        raise UsageError(f"batch must be >= 1, got {cfg.batch}")
    if cfg.replay < cfg.batch:
        raise UsageError(f"replay capacity {cfg.replay} smaller than batch {cfg.batch}")
    if cfg.epsilon < 0.0:
        raise UsageError(f"epsilon must be >= 0, got {cfg.epsilon}")
    if cfg.actor_lr <= 0.0 or cfg.critic_lr <= 0.0:
        raise UsageError("learning rates must be positive")
    if cfg.steps < 0:
        raise UsageError(f"steps must be >= 0, got {cfg.steps}")
    if cfg.eval_every < 1 or cfg.eval_episodes < 1:
        raise UsageError("eval_every and eval_episodes must be >= 1")
    if cfg.t_target < 1 or cfg.t_actors < 1:
        raise UsageError("t_target and t_actors must be >= 1")
    if cfg.fetch_interval < 1:
        raise UsageError("fetch_interval must be >= 1")
    if cfg.max_grad_norm < 0.0:
        raise UsageError("max_grad_norm must be >= 0 (0 disables clipping)")
    if not all(w > 0 for w in cfg.actor_hidden + cfg.critic_hidden):
        raise UsageError("hidden layer widths must be positive")


def resolve_support(cfg: ExperimentConfig, episode_limit: int, r_max: float = 1.0):
    """Fill in default value bounds for the categorical support.

    The ceiling is the smaller of the discounted infinite-horizon bound and
    the largest achievable episode return.
    """
    if cfg.vmin is not None:
        return cfg.vmin, cfg.vmax
    return 0.0, min(r_max / (1.0 - cfg.gamma), episode_limit * r_max)


def config_hash(cfg: ExperimentConfig) -> int:
    """Stable digest of the fields that define training dynamics.

    `out` and `steps` are excluded on purpose: resuming into a new
    directory or extending a run is legitimate and should not trip the
    mismatch guard.
    """
    from .transport import fnv1a64

    skip = {"out", "steps", "provided"}
    parts = []
    for f in sorted(fields(ExperimentConfig), key=lambda f: f.name):
        if f.name in skip:
            continue
        parts.append(f"{f.name}={getattr(cfg, f.name)!r}")
    return fnv1a64(";".join(parts).encode("utf-8"))
