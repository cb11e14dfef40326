"""Run configuration: one flat namespace shared by training, sessions and serving.

Config files are plain ``key = value`` text, one pair per line, ``#`` starts a
comment. Keys must match a known field; unknown keys are rejected so typos do
not silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError


@dataclass
class RunConfig:
    # model geometry
    embedding_dim: int = 40
    num_trees: int = 10
    # 0 means "resolve to ceil(0.8 * n_attributes) at build time"
    max_attributes_per_tree: int = 0
    max_depth: int = 7
    gini_threshold: float = 0.996
    min_node_records: int = 2

    # optimizer
    learning_rate: float = 0.05
    epochs_search: int = 20
    epochs_commit: int = 100
    negatives_per_positive: int = 5
    lambda_bpr: float = 1e-3
    lambda_embedding: float = 1e-2
    lambda_items: float = 1e-4
    init_scale: float = 0.01
    joint_refinement: bool = False

    # conversation protocol
    top_k: int = 10
    max_turns: int = 10
    early_rec_threshold: int = 10
    alpha_promote: float = 1e-3
    alpha_penalize: float = 1e-2
    exclude_rejected: bool = True

    # simulated user
    simulator_mode: str = "recorded"
    sampled_inclusion_rate: float = 0.5

    # misc
    seed: int = 0

    # session service
    session_idle_timeout: float = 1800.0
    session_log_path: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive_ints = (
            "embedding_dim", "num_trees", "max_depth", "min_node_records",
            "epochs_search", "epochs_commit", "negatives_per_positive",
            "top_k", "max_turns", "early_rec_threshold",
        )
        for name in positive_ints:
            if name == "max_depth":
                continue
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.max_depth < 0:
            raise ConfigError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.max_attributes_per_tree < 0:
            raise ConfigError("max_attributes_per_tree must be >= 0 (0 = auto)")
        nonnegative = (
            "learning_rate", "lambda_bpr", "lambda_embedding", "lambda_items",
            "init_scale", "alpha_promote", "alpha_penalize",
            "session_idle_timeout",
        )
        for name in nonnegative:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.learning_rate == 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0.0 <= self.sampled_inclusion_rate <= 1.0:
            raise ConfigError("sampled_inclusion_rate must lie in [0, 1]")
        if not 0.0 <= self.gini_threshold <= 1.0:
            raise ConfigError("gini_threshold must lie in [0, 1]")
        if self.simulator_mode not in ("recorded", "sampled"):
            raise ConfigError(
                f"simulator_mode must be 'recorded' or 'sampled', got {self.simulator_mode!r}")

    # ------------------------------------------------------------------
    # file round-trip

    def to_text(self) -> str:
        lines = []
        for field in dataclasses.fields(self):
            lines.append(f"{field.name} = {getattr(self, field.name)}")
        return "\n".join(lines) + "\n"

    def replace(self, **kwargs) -> "RunConfig":
        return dataclasses.replace(self, **kwargs)


_FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _parse_value(key: str, raw: str):
    kind = _FIELDS[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            lowered = raw.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_overrides(pairs: dict[str, str]) -> dict:
    """Validate raw key/value strings against the known fields."""
    parsed = {}
    for key, raw in pairs.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key: {key!r}")
        parsed[key] = _parse_value(key, raw)
    return parsed


def parse_config_text(text: str, base: RunConfig | None = None,
                      where: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines on top of ``base`` (defaults when omitted)."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{where}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"{where}:{lineno}: unknown config key: {key!r}")
        raw[key] = value
    base = base if base is not None else RunConfig()
    return base.replace(**parse_overrides(raw))


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    """Read a ``key = value`` file on top of ``base`` (defaults when omitted)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), base, where=str(path))
