"""Masked Header Prediction (MHP) and Masked Value Prediction (MVP) pair generation."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .ocr import NoiseModel, build_regions, extract_ocr
from .stc import StcEncoding, assign_sentinels, encode_with_copy, match_ocr_to_cells
from .table import mix64

SCHEMA = "maskedpair/1"
DEFAULT_RATE = 0.45
DEFAULT_MAX_MASKS = 32
PREFIXES = {"MHP": "predict headers:", "MVP": "predict values:"}


class ObjectiveError(ValueError):
    pass


def mask_name(k: int) -> str:
    return f"<mask_{k + 1}>"


def round_half_up(x: float) -> int:
    return int(Decimal(repr(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def masked_count(rate: float, n: int) -> int:
    return max(1, round_half_up(float(Decimal(repr(rate)) * n)))


@dataclass(frozen=True)
class MaskedPair:
    objective: str
    input: str
    target: str
    positions: tuple  # masked cell positions in sequence order
    unmasked_target: str

    @property
    def input_tokens(self) -> list:
        return self.input.split()

    @property
    def target_tokens(self) -> list:
        return self.target.split()


def _mask(stc: StcEncoding, candidates: list, objective: str, rate: float, seed: int,
          max_masks: int) -> MaskedPair:
    if not 0 < rate <= 1:
        raise ObjectiveError(f"mask rate must be in (0, 1], got {rate}")
    k = masked_count(rate, len(candidates))
    if k > max_masks:
        raise ObjectiveError(f"{k} masks exceed the mask sentinel limit {max_masks}")
    rng = np.random.default_rng(seed & ((1 << 64) - 1))
    chosen = set(rng.choice(len(candidates), size=k, replace=False).tolist())
    order = [p for i, p in enumerate(candidates) if i in chosen]
    order = sorted(order, key=_sequence_key)
    replace = {pos: mask_name(j) for j, pos in enumerate(order)}
    target = " ".join(f"{mask_name(j)} {stc.units[pos]}" for j, pos in enumerate(order))
    return MaskedPair(objective, stc.assemble(replace), target, tuple(order), stc.target)


def _sequence_key(pos):
    # order of appearance in the flat sequence: column headers, then row by row
    if pos[0] == "col":
        return (0, 0, pos[1])
    if pos[0] == "row":
        return (1, pos[1], -1)
    return (1, pos[1], pos[2])


def mask_headers(stc: StcEncoding, rate: float = DEFAULT_RATE, seed: int = 0,
                 max_masks: int = DEFAULT_MAX_MASKS) -> MaskedPair:
    cands = stc.header_positions()
    if not cands:
        raise ObjectiveError("table has no header cells")
    return _mask(stc, cands, "MHP", rate, seed, max_masks)


def mask_values(stc: StcEncoding, rate: float = DEFAULT_RATE, seed: int = 0,
                max_masks: int = DEFAULT_MAX_MASKS) -> MaskedPair:
    cands = stc.numeric_value_positions()
    if not cands:
        raise ObjectiveError("table has no numeric value cells; sample unsuitable for MVP")
    return _mask(stc, cands, "MVP", rate, seed, max_masks)


def unmask(pair: MaskedPair) -> str:
    """Put the target surfaces back into the masked input."""
    toks = pair.target.split(" ")
    fills, cur = {}, None
    for t in toks:
        if t.startswith("<mask_") and t.endswith(">"):
            cur = t
            fills[cur] = []
        else:
            fills[cur].append(t)
    out = pair.input
    for name, words in fills.items():
        out = out.replace(name, " ".join(words), 1)
    return out


def choose_objective(selector: str, index: int, seed: int = 0) -> str:
    """``alternate`` | ``mhp`` | ``mvp`` | ``weighted:<p_mhp>``."""
    sel = selector.lower()
    if sel == "alternate":
        return "MHP" if index % 2 == 0 else "MVP"
    if sel in ("mhp", "mvp"):
        return sel.upper()
    if sel.startswith("weighted:"):
        p = float(sel.split(":", 1)[1])
        if not 0 <= p <= 1:
            raise ObjectiveError(f"weighted selector probability must be in [0, 1], got {p}")
        u = np.random.default_rng([seed & ((1 << 64) - 1), index]).random()
        return "MHP" if u < p else "MVP"
    raise ObjectiveError(f"unknown objective selector {selector!r}")


def stc_for_sample(sample, prefix: str, noise: NoiseModel | None = None, seed: int = 0,
                   max_ocr: int = 64):
    """OCR tokens and STC encoding of a ChartSample."""
    ocr = extract_ocr(sample.annotation, noise, seed)
    sentinels = assign_sentinels(ocr, max_ocr)
    matching = match_ocr_to_cells(sample.table, ocr)
    return ocr, encode_with_copy(sample.table, prefix, matching, sentinels, ocr)


def make_pretraining_example(sample, selector: str = "alternate", index: int = 0,
                             noise: NoiseModel | None = None, seed: int = 0,
                             rate: float = DEFAULT_RATE, d_region: int = 16,
                             max_ocr: int = 64) -> dict:
    """Model-ready ``maskedpair/1`` record for one ChartSample."""
    try:
        objective = choose_objective(selector, index, seed)
        ocr, stc = stc_for_sample(sample, PREFIXES[objective], noise, mix64(seed ^ 0x0C12), max_ocr)
        mask_seed = mix64(seed ^ 0x3A5C)
        pair = (mask_headers if objective == "MHP" else mask_values)(stc, rate, mask_seed)
        regions = build_regions(sample.annotation, d_region)
    except ValueError as exc:
        raise ObjectiveError(f"sample {sample.id}: {exc}") from exc
    return {
        "schema": SCHEMA,
        "id": sample.id,
        "objective": objective,
        "input_tokens": pair.input_tokens,
        "target_tokens": pair.target_tokens,
        "masked_positions": [list(p) for p in pair.positions],
        "eligible": len(stc.header_positions() if objective == "MHP" else stc.numeric_value_positions()),
        "regions": [{"category": r.category, "bbox": list(r.bbox), "location": list(r.location_vec),
                     "feature": [round(float(x), 6) for x in r.feature_vec]} for r in regions],
        "ocr": [{"sentinel": s, "text": t.text, "bbox": list(t.bbox), "location": list(t.location_vec)}
                for s, t in zip(stc.input_sentinels, ocr)],
    }
