"""Word-piece vocabulary: specials, structure words, character pieces, sentinels."""

from __future__ import annotations

import re

from ..objectives import mask_name
from ..stc import sentinel_name

PAD, EOS, BOS, UNK = "<pad>", "</s>", "<s>", "<unk>"
SPECIALS = (PAD, EOS, BOS, UNK)
STRUCTURE = ("table:", "t:", "c:", "r:", "predict", "headers:", "values:")
_CHARS = tuple(chr(c) for c in range(33, 127))
CONT = "##"
_SENTINEL_RE = re.compile(r"<(ocr|mask)_(\d+)>")


class Vocab:
    """Disjoint partitions: base pieces, then mask sentinels, then OCR sentinels.

    Words not in the base list fall back to characters; the first character is
    a word-initial piece and the rest are ``##`` continuation pieces.
    """

    def __init__(self, n_mask: int = 32, n_ocr: int = 64):
        base = list(SPECIALS) + list(STRUCTURE) + list(_CHARS) + [CONT + c for c in _CHARS]
        self.n_base = len(base)
        self.masks = [mask_name(k) for k in range(n_mask)]
        self.ocrs = [sentinel_name(i) for i in range(n_ocr)]
        self.tokens = base + self.masks + self.ocrs
        self.ids = {t: i for i, t in enumerate(self.tokens)}
        if len(self.ids) != len(self.tokens):
            raise ValueError("vocabulary partitions overlap")
        self.pad, self.eos, self.bos, self.unk = (self.ids[t] for t in SPECIALS)
        self.mask_start = self.n_base
        self.ocr_start = self.n_base + n_mask

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def n_mask(self) -> int:
        return len(self.masks)

    @property
    def n_ocr(self) -> int:
        return len(self.ocrs)

    def is_ocr(self, i: int) -> bool:
        return self.ocr_start <= i < len(self.tokens)

    def is_mask(self, i: int) -> bool:
        return self.mask_start <= i < self.ocr_start

    def ocr_id(self, name: str) -> int:
        i = self.ids.get(name)
        if i is None or not self.is_ocr(i):
            raise ValueError(f"{name!r} is not an OCR sentinel of this vocabulary (limit {self.n_ocr})")
        return i

    def encode_word(self, w: str) -> list[int]:
        i = self.ids.get(w)
        if i is not None and w not in SPECIALS and not (w.startswith(CONT) and len(w) > len(CONT)):
            return [i]
        if _SENTINEL_RE.fullmatch(w):
            raise ValueError(f"sentinel {w} is outside the vocabulary")
        return [self.ids.get(ch if k == 0 else CONT + ch, self.unk) for k, ch in enumerate(w)]

    def encode(self, words) -> list[int]:
        out = []
        for w in words:
            out.extend(self.encode_word(w))
        return out

    def decode(self, ids, stop_at_eos: bool = True) -> str:
        words = []
        for i in ids:
            i = int(i)
            if i == self.eos and stop_at_eos:
                break
            if i in (self.pad, self.bos):
                continue
            t = self.tokens[i]
            if t.startswith(CONT) and len(t) > len(CONT) and words:
                words[-1] += t[len(CONT):]
            else:
                words.append(t)
        return " ".join(words)
