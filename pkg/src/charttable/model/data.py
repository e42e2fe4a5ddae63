"""Turn ``maskedpair/1`` records into model inputs, and build the micro corpus."""

from __future__ import annotations

import numpy as np

from ..objectives import make_pretraining_example
from ..synth.corpus import SpecGenConfig, make_sample
from ..table import TableGenConfig
from .config import ModelConfig
from .network import MultimodalInput
from .vocab import Vocab


def record_to_example(rec: dict, vocab: Vocab, cfg: ModelConfig):
    """(MultimodalInput, target ids ending in EOS) for one masked-pair record."""
    regs = rec["regions"]
    feats = np.array([r["feature"] for r in regs], dtype=np.float64).reshape(len(regs), cfg.d_region)
    rlocs = np.array([r["location"] for r in regs], dtype=np.float64).reshape(-1, 5)
    ocr = rec["ocr"]
    if len(ocr) > cfg.max_ocr_len:
        raise ValueError(f"record {rec.get('id')}: {len(ocr)} OCR tokens exceed max_ocr_len {cfg.max_ocr_len}")
    oids = [vocab.ocr_id(o["sentinel"]) for o in ocr]
    olocs = np.array([o["location"] for o in ocr], dtype=np.float64).reshape(-1, 5)
    inp = MultimodalInput(feats, rlocs, oids, olocs, vocab.encode(rec["input_tokens"]))
    inp.validate(cfg, len(vocab), (vocab.ocr_start, len(vocab)))
    target = vocab.encode(rec["target_tokens"]) + [vocab.eos]
    return inp, target


MICRO_TABLE = TableGenConfig(chart_weights={"bar": 1}, rows=(2, 3), cols=(2, 4), title_rate=0.0,
                             horizontal_weight=0.0)
MICRO_SPEC = SpecGenConfig(width=(448, 448), height=(320, 320), tick_count=(5, 5),
                           legend_top_weight=1.0, axis_title_rate=0.0, shuffle_palette=False)


def micro_records(n: int, seed: int, objective: str = "mhp", d_region: int = 16,
                  table_cfg: TableGenConfig = MICRO_TABLE, spec_cfg: SpecGenConfig = MICRO_SPEC) -> list[dict]:
    """Masked-pair records over small single-layout bar charts (the copy task)."""
    out = []
    for i in range(n):
        sample, _ = make_sample(i, seed, table_cfg, spec_cfg)
        out.append(make_pretraining_example(sample, objective, i, seed=seed ^ i, d_region=d_region))
    return out
