"""Table data model, canonical flat serialization and random table generation.

The flat grammar is::

    PREFIX " table:" [" t: " TITLE] " c: " H1 " | " H2 ... " r: " RH " : " V1 " | " V2 ... [" r: " ...]

Inside labels and cells the characters ``|``, ``:`` and ``\\`` are escaped with a
backslash.  A text cell whose surface would read back as a number is written
with its first character escaped, which marks it as text.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

Cell = Union[float, str]

CHART_TYPES = ("bar", "line", "pie")

# chart-type counts of the reference pre-training corpus (495235 charts)
CORPUS_TYPE_COUNTS = {"bar": 387101, "line": 88133, "pie": 20001}

_MASK64 = (1 << 64) - 1
_NUMBER_RE = re.compile(r"-?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?\Z")


class TableValidationError(ValueError):
    pass


class FlatTableParseError(ValueError):
    """Malformed flat-table text.  ``offset`` is a UTF-8 byte offset into the text."""

    def __init__(self, message: str, text: str, index: int):
        self.index = index
        self.offset = len(text[:index].encode("utf-8"))
        super().__init__(f"{message} at byte offset {self.offset}")


class ConfigError(ValueError):
    pass


def mix64(x: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit integer hash."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def sample_seed(global_seed: int, index: int) -> int:
    return mix64((global_seed ^ index) & _MASK64)


def is_number_text(s: str) -> bool:
    return bool(_NUMBER_RE.match(s))


def format_number(v: float) -> str:
    """Shortest decimal text that reads back to exactly ``v``."""
    if v == 0:
        return "0"
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _normalize_cell(v) -> Cell:
    if isinstance(v, bool):
        raise TableValidationError("boolean cells are not supported")
    if isinstance(v, (int, float, np.integer, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            raise TableValidationError(f"non-finite numeric cell {v!r}")
        return 0.0 if f == 0 else f
    if isinstance(v, str):
        if v == "":
            raise TableValidationError("empty text cell")
        return v
    raise TableValidationError(f"unsupported cell type {type(v).__name__}")


@dataclass(frozen=True)
class Table:
    col_headers: tuple
    row_headers: tuple
    values: tuple
    title: str | None = None

    def __init__(self, col_headers: Sequence[str], row_headers: Sequence[str],
                 values: Sequence[Sequence[Cell]], title: str | None = None):
        object.__setattr__(self, "col_headers", tuple(col_headers))
        object.__setattr__(self, "row_headers", tuple(row_headers))
        object.__setattr__(self, "values", tuple(tuple(_normalize_cell(c) for c in row) for row in values))
        object.__setattr__(self, "title", title)
        self._validate()

    def _validate(self):
        if not self.col_headers or not self.row_headers:
            raise TableValidationError("table needs at least one row and one column")
        for kind, headers in (("column", self.col_headers), ("row", self.row_headers)):
            for h in headers:
                if not isinstance(h, str) or h == "":
                    raise TableValidationError(f"empty {kind} header")
            if len(set(headers)) != len(headers):
                dup = sorted({h for h in headers if headers.count(h) > 1})
                raise TableValidationError(f"duplicate {kind} headers: {dup}")
        if len(self.values) != len(self.row_headers):
            raise TableValidationError(
                f"{len(self.row_headers)} row headers but {len(self.values)} rows")
        for i, row in enumerate(self.values):
            if len(row) != len(self.col_headers):
                raise TableValidationError(
                    f"row {i} has {len(row)} cells, expected {len(self.col_headers)}")
        if self.title is not None and (not isinstance(self.title, str) or self.title == ""):
            raise TableValidationError("title must be a non-empty string or None")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_headers), len(self.col_headers)

    def cell_text(self, r: int, c: int) -> str:
        v = self.values[r][c]
        return format_number(v) if isinstance(v, float) else v

    def numeric_cells(self) -> list[tuple[int, int]]:
        return [(r, c) for r, row in enumerate(self.values)
                for c, v in enumerate(row) if isinstance(v, float)]

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "col_headers": list(self.col_headers),
            "row_headers": list(self.row_headers),
            "values": [list(row) for row in self.values],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Table":
        return cls(d["col_headers"], d["row_headers"], d["values"], d.get("title"))


@dataclass(frozen=True)
class FlatTable:
    text: str
    prefix: str


def escape_label(s: str) -> str:
    return s.replace("\\", "\\\\").replace("|", "\\|").replace(":", "\\:")


def escape_cell(v: Cell) -> str:
    if isinstance(v, float):
        return format_number(v)
    out = escape_label(v)
    if is_number_text(v):
        out = "\\" + out
    return out


def flatten_table(table: Table, prefix: str) -> FlatTable:
    if not prefix:
        raise ValueError("prefix must be non-empty")
    parts = [prefix, " table:"]
    if table.title is not None:
        parts.append(" t: " + escape_label(table.title))
    parts.append(" c: " + " | ".join(escape_label(h) for h in table.col_headers))
    for rh, row in zip(table.row_headers, table.values):
        parts.append(" r: " + escape_label(rh) + " : " + " | ".join(escape_cell(v) for v in row))
    return FlatTable("".join(parts), prefix)


class _Scanner:
    def __init__(self, text: str, pos: int):
        self.text = text
        self.pos = pos

    def fail(self, msg: str, index: int | None = None):
        raise FlatTableParseError(msg, self.text, self.pos if index is None else index)

    def expect(self, lit: str):
        if not self.text.startswith(lit, self.pos):
            self.fail(f"expected {lit!r}")
        self.pos += len(lit)

    def at(self, lit: str) -> bool:
        return self.text.startswith(lit, self.pos)

    def read_item(self, terminators: tuple[str, ...], allow_end: bool) -> tuple[str, bool, str | None]:
        """Read an escaped item up to the first terminator.

        Returns (unescaped text, had_escape, terminator or None at end of text).
        """
        text, i, out, escaped = self.text, self.pos, [], False
        start = i
        while i < len(text):
            ch = text[i]
            if ch == "\\":
                if i + 1 >= len(text):
                    self.fail("dangling escape", i)
                out.append(text[i + 1])
                escaped = True
                i += 2
                continue
            for term in terminators:
                if text.startswith(term, i):
                    if i == start:
                        self.fail("empty item", i)
                    self.pos = i + len(term)
                    return "".join(out), escaped, term
            if ch in "|:":
                self.fail(f"unexpected {ch!r}", i)
            out.append(ch)
            i += 1
        if not allow_end:
            self.fail(f"missing {' or '.join(repr(t.strip()) for t in terminators)} marker", i)
        if i == start:
            self.fail("empty item", i)
        self.pos = i
        return "".join(out), escaped, None


def parse_flat_table(flat: FlatTable) -> Table:
    text = flat.text
    if not flat.prefix or not text.startswith(flat.prefix):
        raise FlatTableParseError("text does not start with the prefix", text, 0)
    sc = _Scanner(text, len(flat.prefix))
    sc.expect(" table:")
    title = None
    if sc.at(" t: "):
        sc.expect(" t: ")
        title, _, _ = sc.read_item((" c: ",), allow_end=False)
        sc.pos -= len(" c: ")
    sc.expect(" c: ")
    cols: list[str] = []
    while True:
        label, _, term = sc.read_item((" | ", " r: "), allow_end=False)
        cols.append(label)
        if term == " r: ":
            break
    rows: list[str] = []
    values: list[list[Cell]] = []
    while True:
        rh, _, _ = sc.read_item((" : ",), allow_end=False)
        rows.append(rh)
        row: list[Cell] = []
        while True:
            raw, escaped, term = sc.read_item((" | ", " r: "), allow_end=True)
            row.append(float(raw) if not escaped and is_number_text(raw) else raw)
            if term != " | ":
                break
        values.append(row)
        if term is None:
            break
    return Table(cols, rows, values, title)


def table_to_cells_text(table: Table) -> list[list[str]]:
    return [[table.cell_text(r, c) for c in range(table.shape[1])] for r in range(table.shape[0])]


# -- random generation --------------------------------------------------------

DEFAULT_CATEGORY_POOL = (
    "India", "China", "Brazil", "Japan", "Kenya", "Peru", "Chile", "Egypt", "France", "Spain",
    "Italy", "Norway", "Sweden", "Canada", "Mexico", "Ghana", "Nepal", "Iran", "Iraq", "Cuba",
    "apple", "pear", "plum", "lemon", "mango", "grape", "melon", "cherry", "peach", "lime",
    "north", "south", "east", "west", "center", "coast", "hills", "delta", "plain", "harbor",
)
DEFAULT_SERIES_POOL = (
    "sales", "profit", "cost", "revenue", "income", "exports", "imports", "output",
    "demand", "supply", "users", "visits", "votes", "growth", "share", "stock",
)
DEFAULT_SLICE_POOL = (
    "Red", "Blue", "Green", "Orange", "Purple", "Brown", "Gray", "Teal", "Olive", "Navy",
    "Gold", "Coral", "Ivory", "Khaki", "Salmon", "Violet",
)
DEFAULT_VALUE_HEADER_POOL = ("Value", "Share", "Amount", "Count", "Total")
DEFAULT_TITLE_POOL = (
    "Annual report", "Market overview", "Survey results", "Regional totals",
    "Yearly summary", "Trade balance", "Usage statistics", "Budget split",
)


@dataclass(frozen=True)
class TableGenConfig:
    chart_weights: dict = field(default_factory=lambda: dict(CORPUS_TYPE_COUNTS))
    rows: tuple[int, int] = (1, 3)
    cols: tuple[int, int] = (2, 5)
    pie_slices: tuple[int, int] = (2, 5)
    value_range: tuple[float, float] = (10.0, 100.0)
    precision: int = 1
    category_pool: tuple = DEFAULT_CATEGORY_POOL
    series_pool: tuple = DEFAULT_SERIES_POOL
    slice_pool: tuple = DEFAULT_SLICE_POOL
    value_header_pool: tuple = DEFAULT_VALUE_HEADER_POOL
    title_pool: tuple = DEFAULT_TITLE_POOL
    title_rate: float = 0.5
    horizontal_weight: float = 0.3

    def __post_init__(self):
        self.validate()

    def validate(self):
        w = self.chart_weights
        if set(w) - set(CHART_TYPES):
            raise ConfigError(f"unknown chart types {sorted(set(w) - set(CHART_TYPES))}")
        if any(v < 0 for v in w.values()) or sum(w.values()) <= 0:
            raise ConfigError("chart weights must be nonnegative and not all zero")
        for name in ("rows", "cols", "pie_slices"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise ConfigError(f"{name} range must satisfy 1 <= lo <= hi, got {(lo, hi)}")
        if self.pie_slices[0] < 1:
            raise ConfigError("pie_slices lower bound must be >= 1")
        lo, hi = self.value_range
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
            raise ConfigError(f"value_range must be finite with lo < hi, got {(lo, hi)}")
        if self.precision < 0:
            raise ConfigError("precision must be >= 0")
        if not 0 <= self.title_rate <= 1 or not 0 <= self.horizontal_weight <= 1:
            raise ConfigError("title_rate and horizontal_weight must be in [0, 1]")

    def weights(self) -> np.ndarray:
        w = np.array([float(self.chart_weights.get(t, 0)) for t in CHART_TYPES])
        return w / w.sum()


def _draw_labels(rng: np.random.Generator, pool: Sequence[str], k: int, name: str) -> list[str]:
    if len(pool) == 0:
        raise ConfigError(f"{name} vocabulary pool is empty")
    if k > len(pool):
        raise ConfigError(f"{name} pool has {len(pool)} labels, need {k}")
    idx = rng.choice(len(pool), size=k, replace=False)
    return [pool[i] for i in idx]


def generate_random_table(config: TableGenConfig, seed: int) -> tuple[Table, str]:
    rng = np.random.default_rng(seed & _MASK64)
    kind = CHART_TYPES[int(rng.choice(3, p=config.weights()))]
    lo, hi = config.value_range
    if kind == "pie":
        n = int(rng.integers(config.pie_slices[0], config.pie_slices[1] + 1))
        rows = _draw_labels(rng, config.slice_pool, n, "slice")
        cols = _draw_labels(rng, config.value_header_pool, 1, "value header")
        ncols = 1
    else:
        nrows = int(rng.integers(config.rows[0], config.rows[1] + 1))
        ncols = int(rng.integers(config.cols[0], config.cols[1] + 1))
        rows = _draw_labels(rng, config.series_pool, nrows, "series")
        cols = _draw_labels(rng, config.category_pool, ncols, "category")
    raw = rng.uniform(lo, hi, size=(len(rows), ncols))
    vals = np.round(raw, config.precision)
    title = None
    if config.title_pool and rng.random() < config.title_rate:
        title = config.title_pool[int(rng.integers(len(config.title_pool)))]
    return Table(cols, rows, vals.tolist(), title), kind


# -- comparison ---------------------------------------------------------------

@dataclass
class CloseReport:
    shape_ok: bool
    header_mismatches: list = field(default_factory=list)
    cell_mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.shape_ok and not self.header_mismatches and not self.cell_mismatches


def cell_close(a: Cell, b: Cell, rel_tol: float, abs_tol: float = 0.0) -> bool:
    """Compare candidate ``a`` against gold ``b``."""
    if isinstance(a, float) and isinstance(b, float):
        d = abs(a - b)
        if b == 0:
            return a == 0 or d <= abs_tol
        return d <= rel_tol * abs(b) or d <= abs_tol
    if isinstance(a, float) or isinstance(b, float):
        return False
    return a == b


def table_close(a: Table, b: Table, rel_tol: float, abs_tol: float = 0.0) -> tuple[bool, CloseReport]:
    """Tolerance-aware comparison of candidate ``a`` against gold ``b``.

    ``abs_tol`` (default 0) additionally accepts numeric cells within an absolute
    bound, e.g. one pixel's worth of axis value.
    """
    if rel_tol < 0 or abs_tol < 0:
        raise ValueError("tolerances must be >= 0")
    if a.shape != b.shape:
        return False, CloseReport(False)
    rep = CloseReport(True)
    for kind, ha, hb in (("col", a.col_headers, b.col_headers), ("row", a.row_headers, b.row_headers)):
        for i, (x, y) in enumerate(zip(ha, hb)):
            if x != y:
                rep.header_mismatches.append((kind, i, x, y))
    for r, (ra, rb) in enumerate(zip(a.values, b.values)):
        for c, (x, y) in enumerate(zip(ra, rb)):
            if not cell_close(x, y, rel_tol, abs_tol):
                rep.cell_mismatches.append((r, c, x, y))
    return rep.ok, rep
