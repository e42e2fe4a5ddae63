"""Model-facing OCR tokens and region features, with an optional OCR noise model."""

from __future__ import annotations

import hashlib
import string
from dataclasses import dataclass, field, fields

import numpy as np

from .synth.annotate import CATEGORY_SET, Annotation, AnnotationError, TextToken

DEFAULT_CONFUSIONS = {".": ":", ":": ".", ",": ".", "-": "_", "%": "X"}
LOOKALIKES = {
    "0": "O", "O": "0", "o": "0", "1": "l", "l": "1", "I": "1", "5": "S", "S": "5",
    "8": "B", "B": "8", "2": "Z", "Z": "2", "6": "b", "b": "6", "9": "g", "g": "9",
    "7": "T", "T": "7", "a": "o", "e": "c", "c": "e", "n": "m", "m": "n", "u": "v", "v": "u",
}
_ALPHABET = string.ascii_letters + string.digits


def location_vector(bbox, width: int, height: int) -> tuple[float, float, float, float, float]:
    """[x1/W, y1/H, x2/W, y2/H, area/(W*H)] for a pixel box."""
    x1, y1, x2, y2 = (float(v) for v in bbox)
    if not (0 <= x1 < x2 <= width and 0 <= y1 < y2 <= height):
        raise AnnotationError(f"box {list(bbox)} is degenerate or outside the {width}x{height} image")
    return (x1 / width, y1 / height, x2 / width, y2 / height,
            (y2 - y1) * (x2 - x1) / (width * height))


@dataclass(frozen=True)
class OcrToken:
    text: str
    bbox: tuple
    location_vec: tuple
    index: int


@dataclass(frozen=True)
class RegionFeature:
    category: str
    bbox: tuple
    location_vec: tuple
    color: tuple
    feature_vec: np.ndarray = field(compare=False, repr=False)


@dataclass(frozen=True)
class NoiseModel:
    char_sub_rate: float = 0.0
    char_del_rate: float = 0.0
    punct_rate: float = 0.0
    bbox_jitter: int = 0
    token_drop_rate: float = 0.0
    confusions: dict = field(default_factory=lambda: dict(DEFAULT_CONFUSIONS))

    def __post_init__(self):
        for name in ("char_sub_rate", "char_del_rate", "punct_rate", "token_drop_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.bbox_jitter < 0:
            raise ValueError("bbox_jitter must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown ocr_noise keys: {sorted(unknown)}")
        return cls(**d)

    @property
    def is_identity(self) -> bool:
        return (self.char_sub_rate == 0 and self.char_del_rate == 0 and self.punct_rate == 0
                and self.bbox_jitter == 0 and self.token_drop_rate == 0)


def reading_order(tokens) -> list:
    """Top-to-bottom, then left-to-right by the box's top-left corner."""
    return sorted(tokens, key=lambda t: (t.bbox[1], t.bbox[0]))


def _noisy_text(text: str, noise: NoiseModel, rng: np.random.Generator) -> str:
    out = []
    for ch in text:
        # fixed number of draws per character keeps decisions coupled across rates
        u_punct, u_sub, u_del, u_pick = rng.random(4)
        if ch in noise.confusions and u_punct < noise.punct_rate:
            out.append(noise.confusions[ch])
        elif u_sub < noise.char_sub_rate:
            sub = LOOKALIKES.get(ch)
            if sub is None or u_pick < 0.5:
                sub = _ALPHABET[int(u_pick * len(_ALPHABET))]
                if sub == ch:
                    sub = _ALPHABET[(int(u_pick * len(_ALPHABET)) + 1) % len(_ALPHABET)]
            out.append(sub)
        elif u_del < noise.char_del_rate:
            continue
        else:
            out.append(ch)
    return "".join(out)


def _jitter(bbox, j: int, w: int, h: int, rng: np.random.Generator):
    d = rng.integers(-j, j + 1, size=4) if j > 0 else np.zeros(4, dtype=int)
    x1, y1, x2, y2 = (int(a) + int(b) for a, b in zip(bbox, d))
    x1, x2 = sorted((min(max(x1, 0), w), min(max(x2, 0), w)))
    y1, y2 = sorted((min(max(y1, 0), h), min(max(y2, 0), h)))
    if x2 == x1:
        x1, x2 = (x1 - 1, x2) if x1 > 0 else (x1, x2 + 1)
    if y2 == y1:
        y1, y2 = (y1 - 1, y2) if y1 > 0 else (y1, y2 + 1)
    return (x1, y1, x2, y2)


def perturb_ocr(annotation: Annotation, noise: NoiseModel | None, seed: int) -> Annotation:
    """Annotation whose OCR tokens (in reading order) went through the noise model.

    Regions are untouched.  Randomness is keyed on (seed, reading-order index).
    """
    ordered = reading_order(annotation.ocr_tokens)
    if noise is None or noise.is_identity:
        return annotation.with_tokens(ordered)
    out = []
    for i, tok in enumerate(ordered):
        rng = np.random.default_rng([seed & ((1 << 64) - 1), i])
        u_drop = rng.random()
        bbox = _jitter(tok.bbox, noise.bbox_jitter, annotation.width, annotation.height, rng)
        text = _noisy_text(tok.text, noise, rng)
        if u_drop < noise.token_drop_rate or not text:
            continue
        out.append(TextToken(text, bbox))
    return annotation.with_tokens(out)


def extract_ocr(annotation: Annotation, noise: NoiseModel | None = None, seed: int = 0) -> list[OcrToken]:
    noisy = perturb_ocr(annotation, noise, seed)
    w, h = annotation.width, annotation.height
    return [OcrToken(t.text, tuple(t.bbox), location_vector(t.bbox, w, h), i)
            for i, t in enumerate(reading_order(noisy.ocr_tokens))]


def _hash_vec(key: str, d: int) -> np.ndarray:
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.standard_normal(d)


def region_feature_vec(category: str, bbox, d_region: int, seed: int = 0) -> np.ndarray:
    """Detector-feature stand-in: a class component plus an instance component.

    Both parts are hash-seeded, so identical (category, bbox) pairs always get
    identical vectors.
    """
    cls_part = _hash_vec(f"cls|{category}|{seed}", d_region)
    inst_part = _hash_vec(f"inst|{category}|{list(bbox)}|{seed}", d_region)
    return (cls_part + 0.5 * inst_part) / np.sqrt(d_region)


def build_regions(annotation: Annotation, d_region: int, seed: int = 0) -> list[RegionFeature]:
    if d_region < 1:
        raise ValueError("d_region must be >= 1")
    out = []
    w, h = annotation.width, annotation.height
    for reg in annotation.regions:
        if reg.category not in CATEGORY_SET:
            raise AnnotationError(f"unknown region category {reg.category!r}")
        out.append(RegionFeature(reg.category, tuple(reg.bbox), location_vector(reg.bbox, w, h),
                                 tuple(reg.color), region_feature_vec(reg.category, reg.bbox, d_region, seed)))
    return out
