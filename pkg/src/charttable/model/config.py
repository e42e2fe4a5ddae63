from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 32
    n_heads: int = 4
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    d_ff: int = 64
    d_region: int = 16
    n_mask: int = 32
    n_ocr: int = 64
    n_buckets: int = 16
    max_distance: int = 64
    max_regions: int = 96
    max_ocr_len: int = 64
    max_text_len: int = 256
    max_target_len: int = 96
    init_scale: float = 1.0
    embed_scale: float = 0.05

    def __post_init__(self):
        for f in ("d_model", "n_heads", "n_enc_layers", "n_dec_layers", "d_ff", "d_region",
                  "n_mask", "n_ocr", "n_buckets", "max_distance"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be >= 1")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}")
        if self.n_buckets < 4 or self.n_buckets % 2:
            raise ValueError("n_buckets must be even and >= 4")
        if self.max_ocr_len > self.n_ocr:
            raise ValueError("max_ocr_len cannot exceed the OCR sentinel count")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


MICRO_GRADCHECK = ModelConfig(d_model=16, n_heads=2, n_enc_layers=2, n_dec_layers=2, d_ff=24,
                              d_region=8, n_mask=8, n_ocr=16, n_buckets=8, max_distance=16,
                              max_ocr_len=16, embed_scale=0.5)
