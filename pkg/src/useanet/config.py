"""Run configuration: model and loss settings plus paths, stored as JSON."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .losses import LossConfig
from .model import ModelConfig

PRESETS = {"full": ModelConfig, "tiny": ModelConfig.tiny, "micro": ModelConfig.micro}


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    weights: str | None = None
    input: str | None = None
    output: str | None = None
    threshold: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        self.model.validate()
        self.loss.validate()
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigurationError(f"threshold must lie in [0, 1], got {self.threshold}")

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "loss": self.loss.to_dict(), "weights": self.weights,
                "input": self.input, "output": self.output, "threshold": self.threshold, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("run config must be a JSON object")
        known = {"model", "loss", "weights", "input", "output", "threshold", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown run config keys: {sorted(unknown)}")
        data = dict(data)
        try:
            model = ModelConfig.from_dict(data.pop("model", {}))
            loss = LossConfig.from_dict(data.pop("loss", {}))
            cfg = cls(model=model, loss=loss, **data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        """Read a JSON run config; a relative ``weights`` path is taken relative to the file."""
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigurationError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
        cfg = cls.from_dict(data)
        if cfg.weights and not Path(cfg.weights).is_absolute():
            cfg.weights = str(Path(path).parent / cfg.weights)
        return cfg

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")
