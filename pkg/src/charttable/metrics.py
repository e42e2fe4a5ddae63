"""Evaluation measures: relaxed accuracy, BLEU-4, content selection, extractive QA."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .table import Table

RELAXED_TOL = 0.05

# Numbers (with inner '.' or ',' groups) stay whole; every other punctuation
# character is its own token; words are runs of \w.
_BLEU_TOKEN_RE = re.compile(r"\d+(?:[.,]\d+)*|\w+|[^\w\s]")
_NUMBER_RE = re.compile(r"[-+]?\d+(?:,\d{3})*(?:\.\d+)?|[-+]?\.\d+")


def parse_numeric(text: str) -> float | None:
    t = text.strip().replace(",", "")
    if t.endswith("%"):
        t = t[:-1].strip()
    try:
        v = float(t)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def relaxed_accuracy(pred: str, gold: str, strict_case: bool = False) -> int:
    """1 if pred is within 5% of gold (inclusive) or equal as text, else 0."""
    g, p = parse_numeric(gold), parse_numeric(pred)
    if g is not None and p is not None:
        if g == 0:
            return int(p == 0)
        return int(abs(p - g) <= RELAXED_TOL * abs(g))
    a, b = pred.strip(), gold.strip()
    if not strict_case:
        a, b = a.casefold(), b.casefold()
    return int(a == b)


def relaxed_accuracy_set(preds, golds, strict_case: bool = False) -> float:
    preds, golds = list(preds), list(golds)
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions vs {len(golds)} gold answers")
    if not golds:
        raise ValueError("relaxed accuracy over an empty set is undefined")
    return sum(relaxed_accuracy(p, g, strict_case) for p, g in zip(preds, golds)) / len(golds)


def bleu_tokenize(text: str) -> list[str]:
    return _BLEU_TOKEN_RE.findall(text)


def _ngrams(toks, n):
    return Counter(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))


def bleu4(candidate: str, references) -> float:
    """Sentence BLEU-4 with uniform weights.

    Clipping uses the max count over references; the reference length is the
    closest one (shorter wins ties).  A zero match count for n >= 2 becomes
    (0 + 1) / (total + 1); a zero unigram match gives 0.
    """
    refs = [bleu_tokenize(r) for r in references]
    if not refs:
        raise ValueError("bleu4 needs at least one reference")
    cand = bleu_tokenize(candidate)
    if not cand:
        return 0.0
    logp = 0.0
    for n in range(1, 5):
        counts = _ngrams(cand, n)
        maxref = Counter()
        for r in refs:
            for g, c in _ngrams(r, n).items():
                maxref[g] = max(maxref[g], c)
        match = sum(min(c, maxref[g]) for g, c in counts.items())
        total = sum(counts.values())
        if match == 0:
            if n == 1:
                return 0.0
            match, total = 1, total + 1
        logp += math.log(match / total) / 4.0
    c = len(cand)
    r = min((abs(len(x) - c), len(x)) for x in refs)[1]
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return min(1.0, bp * math.exp(logp))


def _mentions_value(summary: str, summary_numbers, cell) -> bool:
    if isinstance(cell, float):
        if cell == 0:
            return any(x == 0 for x in summary_numbers)
        return any(abs(x - cell) <= RELAXED_TOL * abs(cell) for x in summary_numbers)
    return str(cell) in summary


def content_selection(summary: str, table: Table) -> float:
    """Fraction of (row, col, value) records the summary mentions.

    A record counts when its value appears (numbers within 5%, text verbatim)
    and at least one of its headers appears case-insensitively.
    """
    nr, nc = table.shape
    if nr * nc == 0:
        raise ValueError("content selection over an empty table is undefined")
    low = summary.casefold()
    nums = [float(m.replace(",", "")) for m in _NUMBER_RE.findall(summary)]
    hit = 0
    for i, rh in enumerate(table.row_headers):
        for j, ch in enumerate(table.col_headers):
            if not _mentions_value(summary, nums, table.values[i][j]):
                continue
            if rh.casefold() in low or ch.casefold() in low:
                hit += 1
    return hit / (nr * nc)


@dataclass(frozen=True)
class QaPair:
    question: str
    answer: str
    row: int
    col: int

    def to_dict(self) -> dict:
        return {"question": self.question, "answer": self.answer, "row": self.row, "col": self.col}

    @classmethod
    def from_dict(cls, d: dict) -> "QaPair":
        return cls(d["question"], d["answer"], int(d["row"]), int(d["col"]))


def qa_question(row_header: str, col_header: str) -> str:
    return f"What is the value of {row_header} in {col_header}?"


def generate_extractive_qa(table: Table, n: int, seed: int = 0) -> list[QaPair]:
    nr, nc = table.shape
    cells = nr * nc
    if cells == 0:
        raise ValueError("table has no cells")
    if n > cells:
        raise ValueError(f"asked for {n} questions but the table has only {cells} cells")
    rng = np.random.default_rng(seed & ((1 << 64) - 1))
    picks = rng.choice(cells, size=n, replace=False)
    out = []
    for k in picks.tolist():
        r, c = divmod(k, nc)
        out.append(QaPair(qa_question(table.row_headers[r], table.col_headers[c]),
                          table.cell_text(r, c), r, c))
    return out


def answer_from_table(table: Table | None, source: Table, qa: QaPair) -> tuple[str, str]:
    """Answer ``qa`` (built on ``source``) by header lookup in ``table``.

    Returns (answer, error class); the class is "ok" when the answer scores,
    otherwise one of "parse_failure", "header_miss", "value_error".
    """
    if table is None:
        return "", "parse_failure"
    rh, ch = source.row_headers[qa.row], source.col_headers[qa.col]
    key = lambda s: s.strip().casefold()  # noqa: E731
    rows = [i for i, h in enumerate(table.row_headers) if key(h) == key(rh)]
    cols = [j for j, h in enumerate(table.col_headers) if key(h) == key(ch)]
    if not rows or not cols:
        return "", "header_miss"
    ans = table.cell_text(rows[0], cols[0])
    return ans, "ok" if relaxed_accuracy(ans, qa.answer) else "value_error"
