"""Training configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass

# Source strings at serve time must be rendered exactly as the exporter
# rendered the training data; this default matches the exporter's.
DEFAULT_INPUT_FORMAT = "Is the question: '{query}' answered by the document: '{passage}'?"

# base_model_id picks an architecture preset (all randomly initialized).
MODEL_PRESETS = {
    "tiny-transformer": dict(d_model=64, nhead=2, enc_layers=1, dec_layers=1, ff_dim=128),
    "small-transformer": dict(d_model=128, nhead=4, enc_layers=2, dec_layers=2, ff_dim=256),
}


@dataclass
class TrainConfig:
    learning_rate: float = 3e-5
    weight_decay: float = 0.01
    batch_size: int = 128  # balanced: half relevant + half non-relevant
    max_epochs: int = 30
    max_input_tokens: int = 512
    max_output_tokens: int = 512
    base_model_id: str = "small-transformer"
    seed: int = 0
    label_vocabulary: tuple[str, str] = ("true", "false")
    input_format: str = DEFAULT_INPUT_FORMAT

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.max_input_tokens < 1 or self.max_output_tokens < 1:
            raise ValueError("token limits must be >= 1")
        if self.batch_size < 2 or self.batch_size % 2 != 0:
            raise ValueError("batch_size must be even (balanced batching)")
        if self.base_model_id not in MODEL_PRESETS:
            raise ValueError(
                f"unknown base_model_id {self.base_model_id!r}; "
                f"choose from {sorted(MODEL_PRESETS)}"
            )

    def preset(self) -> dict:
        return dict(MODEL_PRESETS[self.base_model_id])

    def as_dict(self) -> dict:
        d = asdict(self)
        d["label_vocabulary"] = list(self.label_vocabulary)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "label_vocabulary" in d:
            d["label_vocabulary"] = tuple(d["label_vocabulary"])
        return cls(**d)
