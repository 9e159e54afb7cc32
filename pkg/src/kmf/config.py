"""Run configuration: hyperparameters, ablation toggles, and split settings.

Configs serialize to a ``key=value`` text format (one pair per line, ``#``
comments allowed).  Serialization is deterministic, so a config embedded in
a checkpoint round-trips byte for byte.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

__all__ = ["TrainConfig", "parse_config_text", "load_config"]


@dataclass(frozen=True)
class TrainConfig:
    # topic neighborhoods
    radius: int = 2
    keep_percent: float = 25.0
    attenuation: float = 0.8
    # facet composition
    temperature: float = 10.0
    dim: int = 1024
    # message passing
    layers: int = 2
    neighbor_cap: int = 10
    # contrastive learning
    negatives: int = 5
    mask_strength: float = 0.3
    mask_cutoff: float = 0.5
    # geometric constraints
    distance_margin: float = 0.3
    direction_margin: float = 0.3
    geometric_hinge: bool = False
    # joint objective
    contrastive_weight: float = 0.3
    geometric_weight: float = 0.3
    # optimization
    lr: float = 0.001
    epochs: int = 100
    seed: int = 0
    # corpus preparation
    min_count: int = 20
    # class split
    split_mode: str = "I"
    split_train: int = 3
    split_val: int = 0
    split_test: int = 4
    val_fraction: float = 0.0
    # recommendation evaluation
    neg_pool: str = "all"
    # ablation toggles
    use_kg_csd: bool = True
    use_facets: bool = True
    use_contrastive: bool = True
    use_geometric: bool = True
    use_attenuation: bool = True
    use_temperature: bool = True

    def validate(self) -> "TrainConfig":
        if not 0 <= self.radius <= 3:
            raise ValueError("radius must lie in 0..3")
        if not 0.0 < self.keep_percent <= 100.0:
            raise ValueError("keep_percent must lie in (0, 100]")
        if not 0.0 <= self.attenuation <= 1.0:
            raise ValueError("attenuation must lie in [0, 1]")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if not 0 <= self.layers <= 4:
            raise ValueError("layers must lie in 0..4")
        if self.neighbor_cap < 1:
            raise ValueError("neighbor_cap must be >= 1")
        if self.negatives < 0:
            raise ValueError("negatives must be >= 0")
        if self.mask_strength < 0.0:
            raise ValueError("mask_strength must be >= 0")
        if not self.mask_cutoff < 1.0:
            raise ValueError("mask_cutoff must be < 1")
        if self.distance_margin < 0.0 or self.direction_margin < 0.0:
            raise ValueError("margins must be >= 0")
        if self.contrastive_weight < 0.0 or self.geometric_weight < 0.0:
            raise ValueError("loss weights must be >= 0")
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.min_count < 0:
            raise ValueError("min_count must be >= 0")
        if self.split_mode not in ("I", "II"):
            raise ValueError("split_mode must be 'I' or 'II'")
        if self.split_mode == "I" and self.split_val != 0:
            raise ValueError("mode I has no validation classes")
        if min(self.split_train, self.split_val, self.split_test) < 0:
            raise ValueError("split sizes must be >= 0")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")
        if self.neg_pool not in ("all", "target-class"):
            raise ValueError("neg_pool must be 'all' or 'target-class'")
        return self

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes).validate()

    @property
    def split_ratios(self) -> tuple[int, int, int]:
        return (self.split_train, self.split_val, self.split_test)

    def to_text(self) -> str:
        lines = []
        for field in sorted(f.name for f in dataclasses.fields(self)):
            value = getattr(self, field)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{field}={text}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _coerce(field: dataclasses.Field, text: str):
    if field.type in ("bool", bool):
        lowered = text.strip().lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ValueError(f"{field.name}: expected a boolean, got {text!r}")
    if field.type in ("int", int):
        return int(text)
    if field.type in ("float", float):
        return float(text)
    return text.strip()


def parse_config_text(text: str, base: TrainConfig | None = None) -> TrainConfig:
    """Parse ``key=value`` lines into a config, overriding ``base`` defaults.

    Keys may use dots in place of underscores (``geometric.hinge``).
    """
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace(".", "_")
        if key not in fields:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(fields[key], value)
    merged = dataclasses.replace(base or TrainConfig(), **values)
    return merged.validate()


def load_config(path: str | Path, base: TrainConfig | None = None) -> TrainConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), base=base)
