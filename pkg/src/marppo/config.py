"""Experiment configuration: defaults, validation, and the config-file parser.

Config files are plain ``key=value`` lines; ``#`` starts a comment and blank
lines are ignored. Every key must name a known field and every value must
parse and pass its range check, otherwise the offending key is reported.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Mapping

from marppo.envs import ENV_NAMES
from marppo.nn import ContractError

VARIANTS = ("ff-nic", "ff-ica", "lstm-nic", "lstm-ica", "lstm-icf")


@dataclass
class ExperimentConfig:
    """Everything a training run needs. Defaults follow the reference
    hyperparameter set for the navigation task, at desk scale (4 envs,
    100-step windows)."""

    env: str = "coopnav"
    variant: str = "lstm-icf"
    n_agents: int = 3
    n_envs: int = 4
    horizon: int = 100
    iterations: int = 100
    beta: float = 1.0
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    entropy_coef: float = 0.01
    lr: float = 0.005
    epochs: int = 10
    batch_size: int = 1500
    chunk_len: int = 3
    actor_hidden: int = 128
    critic_hidden: int = 128
    max_grad_norm: float = 1.0
    normalize_advantages: bool = True
    critic_include_prev_action: bool = False
    seed: int = 0
    eval_episodes: int = 100
    checkpoint_interval: int = 10
    rollout_workers: int = 1

    # -- variant structure ----------------------------------------------
    @property
    def recurrent(self) -> bool:
        return self.variant.startswith("lstm")

    @property
    def weighted_estimator(self) -> bool:
        """False for the no-combination ablations, which never read beta."""
        return not self.variant.endswith("nic")

    @property
    def interleaved_critic(self) -> bool:
        return self.variant == "lstm-icf"

    def chunks_per_batch(self) -> int:
        return max(1, self.batch_size // (self.chunk_len * self.n_agents))

    def num_minibatches(self, total_chunks: int) -> int:
        per = self.chunks_per_batch()
        return (total_chunks + per - 1) // per

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def validate(self) -> "ExperimentConfig":
        def bad(key, why):
            raise ContractError(f"config key {key!r} {why}")

        if self.env not in ENV_NAMES:
            bad("env", f"must be one of {ENV_NAMES}, got {self.env!r}")
        if self.variant not in VARIANTS:
            bad("variant", f"must be one of {VARIANTS}, got {self.variant!r}")
        if self.n_agents < 1:
            bad("n_agents", f"must be >= 1, got {self.n_agents}")
        if self.env == "diagnostic" and self.n_agents != 2:
            bad("n_agents", "must be 2 for the diagnostic game")
        for key in ("n_envs", "horizon", "epochs", "batch_size", "chunk_len",
                    "actor_hidden", "critic_hidden", "eval_episodes", "checkpoint_interval",
                    "rollout_workers"):
            if getattr(self, key) < 1:
                bad(key, f"must be >= 1, got {getattr(self, key)}")
        # iterations = 0 is a valid no-op run (header-only CSV).
        if self.iterations < 0:
            bad("iterations", f"must be >= 0, got {self.iterations}")
        if not 0.0 <= self.beta <= 1.0:
            bad("beta", f"must lie in [0, 1], got {self.beta}")
        if not 0.0 < self.gamma <= 1.0:
            bad("gamma", f"must lie in (0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            bad("lam", f"must lie in [0, 1], got {self.lam}")
        if not 0.0 < self.clip_eps < 1.0:
            bad("clip_eps", f"must lie in (0, 1), got {self.clip_eps}")
        if self.entropy_coef < 0.0:
            bad("entropy_coef", f"must be >= 0, got {self.entropy_coef}")
        if self.lr <= 0.0:
            bad("lr", f"must be > 0, got {self.lr}")
        if self.max_grad_norm <= 0.0:
            bad("max_grad_norm", f"must be > 0, got {self.max_grad_norm}")
        if not 0 <= self.seed < 2 ** 64:
            bad("seed", f"must be an unsigned 64-bit integer, got {self.seed}")
        return self


def _parse_bool(key: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ContractError(f"config key {key!r} expects a boolean, got {raw!r}")


_FIELD_TYPES = {f.name: type(f.default) for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key: str, value) -> object:
    if key not in _FIELD_TYPES:
        raise ContractError(f"unknown config key {key!r}")
    want = _FIELD_TYPES[key]
    if isinstance(value, str):
        raw = value.strip()
        try:
            if want is bool:
                return _parse_bool(key, raw)
            if want is int:
                return int(raw)
            if want is float:
                return float(raw)
            return raw
        except ValueError as exc:
            raise ContractError(f"config key {key!r}: cannot parse {raw!r} as {want.__name__}") from exc
    if want is bool:
        if not isinstance(value, bool):
            raise ContractError(f"config key {key!r} expects a boolean, got {value!r}")
        return value
    if want is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, want):
        raise ContractError(f"config key {key!r} expects {want.__name__}, got {value!r}")
    return value


def parse_config(path: str | None = None, overrides: Mapping[str, object] | None = None) -> ExperimentConfig:
    """Builds a validated config from an optional file plus overrides."""
    values: dict[str, object] = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise ContractError(f"{path}:{lineno}: expected key=value, got {line.strip()!r}")
                key, _, raw = text.partition("=")
                key = key.strip()
                values[key] = _coerce(key, raw)
    for key, value in (overrides or {}).items():
        values[key] = _coerce(key, value)
    return ExperimentConfig(**values).validate()
