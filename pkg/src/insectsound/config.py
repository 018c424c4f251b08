"""Run configuration shared by the CLI commands and the evaluation grid."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import __version__
from .classifiers import MODEL_VARIANTS

_PRESETS = ("wide", "narrow", "none")
_AGGREGATIONS = ("mean", "flatten")


@dataclass
class RunConfig:
    w_seconds: float = 0.1
    sample_rate: int = 22050
    balanced_i: list = field(default_factory=lambda: [30, 145])
    top_k: list = field(default_factory=lambda: [10, 20, 30, 40])
    models: list = field(default_factory=lambda: list(MODEL_VARIANTS))
    augmentation: str = "narrow"
    aggregation: str = "flatten"
    seed: int = 0

    def validate(self) -> None:
        """Check every field up front; raises with the first offending value."""
        if self.w_seconds <= 0:
            raise ValueError(f"w_seconds must be positive, got {self.w_seconds}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not self.balanced_i or any(int(i) < 1 for i in self.balanced_i):
            raise ValueError(f"balanced_i must be positive counts, got {self.balanced_i}")
        if not self.top_k:
            raise ValueError("top_k must not be empty")
        for k in self.top_k:
            if k not in ("full", None) and int(k) < 1:
                raise ValueError(f"top_k entries must be positive or 'full', got {k!r}")
        for name in self.models:
            if name not in MODEL_VARIANTS:
                raise ValueError(f"unknown model {name!r} (expected one of {MODEL_VARIANTS})")
        if self.augmentation not in _PRESETS:
            raise ValueError(f"augmentation must be one of {_PRESETS}, got {self.augmentation!r}")
        if self.aggregation not in _AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {_AGGREGATIONS}, got {self.aggregation!r}")

    def echo(self) -> dict:
        """Provenance block written next to every output."""
        return {
            "tool": "insectsound",
            "tool_version": __version__,
            "w_seconds": self.w_seconds,
            "sample_rate": self.sample_rate,
            "balanced_i": list(self.balanced_i),
            "top_k": list(self.top_k),
            "models": list(self.models),
            "augmentation": self.augmentation,
            "aggregation": self.aggregation,
            "seed": self.seed,
        }

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields in {path}: {sorted(unknown)}")
        return cls(**data)
