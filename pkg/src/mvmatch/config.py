"""Model, view and training configuration."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace


@dataclass(frozen=True)
class ViewConfig:
    use_entity_pair: bool = True
    use_type_view: bool = True
    concat_relation_and_type: bool = False
    abstract_question: bool = True
    use_char: bool = True

    def __post_init__(self):
        if self.concat_relation_and_type and self.use_type_view:
            raise ValueError("concat_relation_and_type and use_type_view are alternatives; "
                             "enable at most one")

    @property
    def n_matched_views(self) -> int:
        return 2 if self.use_type_view else 1

    @classmethod
    def from_table_row(cls, row: int) -> "ViewConfig":
        """Named view presets, numbered 4-12 as in the ablation grid."""
        try:
            return TABLE_ROWS[row]
        except KeyError:
            raise ValueError(f"no view preset for row {row}; known rows {sorted(TABLE_ROWS)}") from None


def _row(ep, type_view, concat, abstract, char):
    return ViewConfig(use_entity_pair=ep, use_type_view=type_view, concat_relation_and_type=concat,
                      abstract_question=abstract, use_char=char)


TABLE_ROWS: dict[int, ViewConfig] = {
    4: _row(False, False, False, True, True),    # (Q', Relation)
    5: _row(False, False, False, True, False),
    6: _row(False, False, True, True, True),     # (Q', Relation+Type)
    7: _row(False, False, True, True, False),
    8: _row(False, True, False, False, True),    # (Q, Relation)(Q, Type)
    9: _row(False, True, False, True, True),     # (Q', Relation)(Q', Type)
    10: _row(False, True, False, True, False),
    11: _row(True, True, False, True, True),     # (Entity Pair)(Q', Relation)(Q', Type)
    12: _row(True, True, False, True, False),
}


@dataclass(frozen=True)
class ModelConfig:
    hidden: int = 300          # encoder LSTM size per direction
    perspectives: int = 20
    agg_hidden: int = 100
    mlp_hidden: int = 100
    char_dim: int = 20
    char_hidden: int = 50
    init_scale: float = 0.08
    seed: int = 0
    precision: int = 64
    views: ViewConfig = field(default_factory=ViewConfig)

    def __post_init__(self):
        for name in ("hidden", "perspectives", "agg_hidden", "mlp_hidden", "char_dim", "char_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.precision not in (32, 64):
            raise ValueError("precision must be 32 or 64")

    @property
    def dtype(self) -> str:
        return "float64" if self.precision == 64 else "float32"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        views = ViewConfig(**d.pop("views", {}))
        return cls(views=views, **d)

    def with_views(self, views: ViewConfig) -> "ModelConfig":
        return replace(self, views=views)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    epochs: int = 30
    margin: float = 0.5
    optimizer: str = "adam"
    clip_norm: float | None = None
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def field_names(cls) -> list[str]:
    return [f.name for f in fields(cls)]
