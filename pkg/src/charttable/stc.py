"""Scene Text Copy: OCR sentinels, OCR-to-cell matching and sentinel substitution.

Table cells whose surface matches an OCR token are replaced in the target
sequence by that token's ``<ocr_i>`` sentinel, so a decoder can copy them
instead of spelling them out.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .table import Table, escape_label, format_number, is_number_text, escape_cell

DEFAULT_MAX_OCR = 64
SENTINEL_RE = re.compile(r"<ocr_(\d+)>")


class SentinelOverflowError(ValueError):
    pass


class DecodeError(ValueError):
    def __init__(self, dangling):
        self.dangling = list(dangling)
        super().__init__(f"dangling OCR sentinels: {', '.join(self.dangling)}")


def sentinel_name(i: int) -> str:
    """Sentinel for the i-th OCR token (0-based index, 1-based name)."""
    return f"<ocr_{i + 1}>"


@dataclass(frozen=True)
class SentinelVocab:
    names: tuple
    limit: int = DEFAULT_MAX_OCR

    def index_of(self, name: str) -> int | None:
        m = SENTINEL_RE.fullmatch(name)
        if m is None:
            return None
        i = int(m.group(1)) - 1
        return i if 0 <= i < len(self.names) else None


def assign_sentinels(ocr_tokens, limit: int = DEFAULT_MAX_OCR) -> SentinelVocab:
    n = len(ocr_tokens)
    if n > limit:
        raise SentinelOverflowError(f"{n} OCR tokens exceed the sentinel limit N={limit}")
    return SentinelVocab(tuple(sentinel_name(i) for i in range(n)), limit)


def normalize_surface(s: str) -> str:
    """Matching key: trimmed, case-folded, numbers in canonical shortest form."""
    t = s.strip()
    if is_number_text(t):
        return format_number(float(t))
    return t.casefold()


# Cell positions: ("col", j) column header, ("row", i) row header, ("val", i, j) value cell.

def cell_positions(table: Table) -> list[tuple]:
    nr, nc = table.shape
    pos = [("col", j) for j in range(nc)]
    for i in range(nr):
        pos.append(("row", i))
        pos.extend(("val", i, j) for j in range(nc))
    return pos


def cell_surface(table: Table, pos: tuple) -> str:
    if pos[0] == "col":
        return table.col_headers[pos[1]]
    if pos[0] == "row":
        return table.row_headers[pos[1]]
    return table.cell_text(pos[1], pos[2])


@dataclass
class CellMatching:
    pairs: list = field(default_factory=list)  # (ocr index, cell position)
    unmatched_ocr: list = field(default_factory=list)
    unmatched_cells: list = field(default_factory=list)

    def by_cell(self) -> dict:
        return {pos: i for i, pos in self.pairs}


def match_ocr_to_cells(table: Table, ocr_tokens) -> CellMatching:
    first: dict[str, int] = {}
    for i, tok in enumerate(ocr_tokens):
        first.setdefault(normalize_surface(tok.text), i)
    m = CellMatching()
    used = set()
    for pos in cell_positions(table):
        i = first.get(normalize_surface(cell_surface(table, pos)))
        if i is None:
            m.unmatched_cells.append(pos)
        else:
            m.pairs.append((i, pos))
            used.add(i)
    m.unmatched_ocr = [i for i in range(len(ocr_tokens)) if i not in used]
    return m


@dataclass
class StcEncoding:
    """Sentinel view of one sample.

    ``units`` maps every cell position to the exact substring it occupies in
    ``target`` (a sentinel name or the escaped plain surface).
    """

    prefix: str
    title: str | None
    shape: tuple
    units: dict
    numeric: frozenset
    ocr_input: list  # (sentinel, original OCR text)
    matching: CellMatching

    def assemble(self, replace: dict | None = None) -> str:
        replace = replace or {}
        u = lambda pos: replace.get(pos, self.units[pos])  # noqa: E731
        nr, nc = self.shape
        parts = [self.prefix, " table:"]
        if self.title is not None:
            parts.append(" t: " + escape_label(self.title))
        parts.append(" c: " + " | ".join(u(("col", j)) for j in range(nc)))
        for i in range(nr):
            parts.append(" r: " + u(("row", i)) + " : " + " | ".join(u(("val", i, j)) for j in range(nc)))
        return "".join(parts)

    @property
    def target(self) -> str:
        return self.assemble()

    @property
    def input_sentinels(self) -> list:
        return [s for s, _ in self.ocr_input]

    def header_positions(self) -> list:
        nr, nc = self.shape
        return [("col", j) for j in range(nc)] + [("row", i) for i in range(nr)]

    def numeric_value_positions(self) -> list:
        nr, nc = self.shape
        return [("val", i, j) for i in range(nr) for j in range(nc) if ("val", i, j) in self.numeric]


def encode_with_copy(table: Table, prefix: str, matching: CellMatching, sentinels: SentinelVocab,
                     ocr_tokens=None) -> StcEncoding:
    if not prefix:
        raise ValueError("prefix must be non-empty")
    units = {}
    for pos in cell_positions(table):
        if pos[0] == "val":
            units[pos] = escape_cell(table.values[pos[1]][pos[2]])
        else:
            units[pos] = escape_label(cell_surface(table, pos))
    for i, pos in matching.pairs:
        if i >= len(sentinels.names):
            raise ValueError(f"matching references OCR index {i} but only {len(sentinels.names)} sentinels exist")
        units[pos] = sentinels.names[i]
    texts = [t.text for t in ocr_tokens] if ocr_tokens is not None else [None] * len(sentinels.names)
    numeric = frozenset(("val", r, c) for r, c in table.numeric_cells())
    return StcEncoding(prefix, table.title, table.shape, units, numeric,
                       list(zip(sentinels.names, texts)), matching)


def copy_surface(text: str) -> str:
    """Flat-grammar form of an OCR surface substituted for its sentinel."""
    t = text.strip()
    if is_number_text(t):
        return format_number(float(t))
    return escape_label(text)


def decode_copy(sequence: str, ocr_tokens, sentinels: SentinelVocab | None = None) -> str:
    n = len(ocr_tokens) if sentinels is None else min(len(ocr_tokens), len(sentinels.names))
    dangling = [m.group(0) for m in SENTINEL_RE.finditer(sequence) if not 1 <= int(m.group(1)) <= n]
    if dangling:
        raise DecodeError(dict.fromkeys(dangling))
    return SENTINEL_RE.sub(lambda m: copy_surface(ocr_tokens[int(m.group(1)) - 1].text), sequence)


def header_match_rate(stc: StcEncoding) -> tuple[int, int]:
    """(matched header cells, total header cells)."""
    matched = {pos for _, pos in stc.matching.pairs}
    hdr = stc.header_positions()
    return sum(1 for p in hdr if p in matched), len(hdr)
