"""Flat key=value run configuration shared by all pipeline commands.

Unknown keys are rejected. ``relation.<IFCTYPE>=<LABEL>:<relating>:<related>``
entries override or extend the relationship rule table; every other key maps
one-to-one onto a :class:`RunConfig` field. Command-line flags override file
values, and each command echoes the fully resolved configuration.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

from .errors import ConfigError
from .ifc_graph import DEFAULT_OBJECT_PREFIXES, RelationMapping, RelationRule
from .sgns import TrainConfig
from .walks import WalkConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    cell_size: float = 1.0
    adjacency: str = "rook"
    sensor_radius: float | None = None  # None means "one cell size"
    occupant_radius: float | None = None
    step: int = 300
    max_gap: int = 10
    strict: bool = False
    p: float = 1.0
    q: float = 1.0
    walk_length: int = 80
    walks_per_node: int = 10
    walk_seed: int = 0
    dimension: int = 128
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    initial_lr: float = 0.025
    min_lr: float = 0.0001
    train_seed: int = 0
    deterministic: bool = True
    dynamic_window: bool = True
    subsample_threshold: float = 0.0
    workers: int = 1
    flatten: str = "union"
    object_prefixes: tuple[str, ...] = DEFAULT_OBJECT_PREFIXES
    relation_overrides: dict[str, RelationRule] = field(default_factory=dict)

    def __post_init__(self):
        if self.adjacency not in ("rook", "queen"):
            raise ConfigError(f"adjacency must be rook or queen, "
                              f"got {self.adjacency!r}")
        if self.flatten != "union" and not self.flatten.startswith("slice:"):
            raise ConfigError(f"flatten must be union or slice:<t>, "
                              f"got {self.flatten!r}")

    # -- derived module configs ---------------------------------------------

    def walk_config(self) -> WalkConfig:
        return WalkConfig(self.p, self.q, self.walk_length,
                          self.walks_per_node, self.walk_seed)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            dimension=self.dimension,
            window=self.window,
            negatives=self.negatives,
            epochs=self.epochs,
            initial_lr=self.initial_lr,
            min_lr=self.min_lr,
            seed=self.train_seed,
            deterministic=self.deterministic,
            dynamic_window=self.dynamic_window,
            subsample_threshold=self.subsample_threshold,
            workers=self.workers,
        )

    def relation_mapping(self) -> RelationMapping:
        mapping = RelationMapping(object_prefixes=self.object_prefixes)
        if self.relation_overrides:
            rules = dict(mapping.rules)
            rules.update(self.relation_overrides)
            mapping = RelationMapping(rules, self.object_prefixes)
        return mapping

    def flatten_mode(self) -> tuple[str, int | None]:
        if self.flatten == "union":
            return "union", None
        try:
            return "slice", int(self.flatten.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad flatten value {self.flatten!r}") from None

    def updated(self, **overrides) -> "RunConfig":
        """New config with non-None override values applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **changes) if changes else self

    def to_lines(self) -> list[str]:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "relation_overrides":
                for type_name, rule in sorted(value.items()):
                    lines.append(
                        f"relation.{type_name}={rule.edge_label}:"
                        f"{rule.relating_index}:{rule.related_index}"
                    )
            elif f.name == "object_prefixes":
                lines.append(f"object_prefixes={','.join(value)}")
            else:
                lines.append(f"{f.name}={value}")
        return lines


_BOOL_VALUES = {"true": True, "1": True, "yes": True,
                "false": False, "0": False, "no": False}


def _parse_bool(raw: str) -> bool:
    try:
        return _BOOL_VALUES[raw.lower()]
    except KeyError:
        raise ConfigError(f"not a boolean: {raw!r}") from None


def load_config(path) -> RunConfig:
    """Parse one ``key=value`` per line; ``#`` starts a comment."""
    values: dict[str, object] = {}
    overrides: dict[str, RelationRule] = {}
    field_types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    with open(path, "r", encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key=value")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key.startswith("relation."):
                overrides[key[len("relation."):].upper()] = _parse_rule(raw)
                continue
            if key in ("relation_overrides",):
                raise ConfigError(f"{path}:{line_no}: use relation.<TYPE> keys")
            if key not in field_types:
                raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
            values[key] = _parse_value(key, field_types[key], raw)
    if overrides:
        values["relation_overrides"] = overrides
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _parse_rule(raw: str) -> RelationRule:
    parts = raw.split(":")
    if len(parts) != 3:
        raise ConfigError(f"relation rule must be LABEL:relating:related, "
                          f"got {raw!r}")
    try:
        return RelationRule(parts[0], int(parts[1]), int(parts[2]))
    except ValueError:
        raise ConfigError(f"bad relation rule indices in {raw!r}") from None


def _parse_value(key: str, type_text: str, raw: str):
    try:
        if key == "object_prefixes":
            return tuple(p.strip().upper() for p in raw.split(",") if p.strip())
        if type_text == "bool":
            return _parse_bool(raw)
        if type_text == "int":
            return int(raw)
        if type_text == "float":
            return float(raw)
        if type_text == "float | None":
            return None if raw.lower() in ("", "none") else float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
