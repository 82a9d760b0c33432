"""Run configuration and its flat ``key = value`` text form."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from typing import Dict, Optional

TASKS = {"sentiment-binary": 2, "sentiment-fine": 5, "relatedness": None}

# name -> (encoder, layers, bidirectional)
VARIANTS = {
    "lstm": ("sequence", 1, False),
    "bilstm": ("sequence", 1, True),
    "lstm-2layer": ("sequence", 2, False),
    "bilstm-2layer": ("sequence", 2, True),
    "childsum-dep": ("childsum", 1, False),
    "nary-const": ("nary", 1, False),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    task: str = "sentiment-fine"
    variant: str = "nary-const"
    d: int = 150
    e: int = 300
    K: int = 5
    sim_hidden: int = 50
    lr: float = 0.05
    emb_lr: Optional[float] = None  # None: 0.1 for sentiment, 0 (fixed) for relatedness
    l2: float = 1e-4
    dropout: Optional[float] = None  # None: 0.5 for sentiment, 0 for relatedness
    batch_size: int = 25
    epochs: int = 50
    patience: int = 10
    target: Optional[float] = None  # stop once the dev metric reaches this
    seed: int = 1
    init_scale: float = 0.05
    forget_bias: float = 1.0
    emb_init_scale: float = 0.05
    offdiag: bool = True
    log_time: bool = False
    train: Optional[str] = None
    dev: Optional[str] = None
    train_labels: Optional[str] = None
    dev_labels: Optional[str] = None
    parses: Optional[str] = None
    embeddings: Optional[str] = None
    out: Optional[str] = None

    @property
    def n_classes(self) -> Optional[int]:
        return TASKS[self.task]

    @property
    def is_sentiment(self) -> bool:
        return self.task != "relatedness"

    @property
    def encoder(self) -> str:
        return VARIANTS[self.variant][0]

    @property
    def layers(self) -> int:
        return VARIANTS[self.variant][1]

    @property
    def bidirectional(self) -> bool:
        return VARIANTS[self.variant][2]

    @property
    def tree_kind(self) -> Optional[str]:
        return {"childsum": "dependency", "nary": "constituency"}.get(self.encoder)

    def resolved(self) -> "RunConfig":
        """Validate and fill task-dependent defaults."""
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; choose from {', '.join(TASKS)}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        c = dataclasses.replace(self)
        if c.emb_lr is None:
            c.emb_lr = 0.1 if c.is_sentiment else 0.0
        if c.dropout is None:
            c.dropout = 0.5 if c.is_sentiment else 0.0
        for name in ("d", "e", "K", "sim_hidden", "batch_size"):
            if getattr(c, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if c.K < 2:
            raise ConfigError("K must be at least 2")
        if c.epochs < 0 or c.patience < 0:
            raise ConfigError("epochs and patience must be non-negative")
        for name in ("lr", "emb_lr", "l2"):
            if not 0.0 <= getattr(c, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not 0.0 <= c.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        return c

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {'' if v is None else v}")
        return "\n".join(lines) + "\n"


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def coerce(name: str, raw: str):
    if name not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    typ = FIELD_TYPES[name]
    raw = raw.strip()
    if raw == "" and "Optional" in typ:
        return None
    try:
        if "bool" in typ:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in typ:
            return int(raw)
        if "float" in typ:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {name}") from None
    return raw


def parse_config_text(text: str) -> Dict[str, object]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        out[key] = coerce(key, value)
    return out


def from_text(text: str) -> RunConfig:
    return RunConfig(**parse_config_text(text))
