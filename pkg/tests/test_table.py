import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from charttable.table import (
    CORPUS_TYPE_COUNTS,
    ConfigError,
    FlatTable,
    FlatTableParseError,
    Table,
    TableGenConfig,
    TableValidationError,
    flatten_table,
    format_number,
    generate_random_table,
    mix64,
    parse_flat_table,
    sample_seed,
    table_close,
)

label_chars = st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00")
labels = st.text(label_chars, min_size=1, max_size=8)
numbers = st.floats(allow_nan=False, allow_infinity=False, width=64)
cells = st.one_of(numbers, labels)


@st.composite
def tables(draw):
    nc = draw(st.integers(1, 4))
    nr = draw(st.integers(1, 4))
    cols = draw(st.lists(labels, min_size=nc, max_size=nc, unique=True))
    rows = draw(st.lists(labels, min_size=nr, max_size=nr, unique=True))
    vals = [[draw(cells) for _ in range(nc)] for _ in range(nr)]
    title = draw(st.one_of(st.none(), labels))
    return Table(cols, rows, vals, title)


def test_flatten_example():
    t = Table(["Year", "GDP"], ["India"], [[2020, 1.18]])
    flat = flatten_table(t, "table parse:")
    assert flat.text == "table parse: table: c: Year | GDP r: India : 2020 | 1.18"
    assert parse_flat_table(flat) == t


def test_pie_table_uses_same_grammar():
    t = Table(["Value"], ["Red", "Blue"], [[25], [75]])
    assert flatten_table(t, "p:").text == "p: table: c: Value r: Red : 25 r: Blue : 75"


def test_title_segment():
    t = Table(["a"], ["b"], [[1.5]], title="Sales: 2020")
    text = flatten_table(t, "x").text
    assert text == "x table: t: Sales\\: 2020 c: a r: b : 1.5"
    assert parse_flat_table(FlatTable(text, "x")) == t


def test_separator_labels_round_trip():
    t = Table(["a|b", "c:d", "back\\slash"], [" r: x", "p | q"], [["1:18", 3.0, "|"], [2.5, "42", "a\\"]])
    flat = flatten_table(t, "pre")
    back = parse_flat_table(flat)
    assert back == t
    # "42" stays text, not the number 42
    assert back.values[1][1] == "42"


def test_missing_row_marker_is_a_parse_error():
    text = "p table: c: Year | GDP India : 2020 | 1.18"
    with pytest.raises(FlatTableParseError) as ei:
        parse_flat_table(FlatTable(text, "p"))
    assert 0 < ei.value.offset <= len(text.encode())


def test_parse_error_offset_is_in_bytes():
    text = "p table: c: é | r: x"
    with pytest.raises(FlatTableParseError) as ei:
        parse_flat_table(FlatTable(text, "p"))
    assert ei.value.offset == len(text[:ei.value.index].encode("utf-8"))


def test_duplicate_headers_rejected_on_parse():
    with pytest.raises(TableValidationError):
        parse_flat_table(FlatTable("p table: c: a | a r: x : 1 | 2", "p"))


@pytest.mark.parametrize("bad", [
    dict(col_headers=["a"], row_headers=["x"], values=[[1, 2]]),
    dict(col_headers=["a", ""], row_headers=["x"], values=[[1, 2]]),
    dict(col_headers=["a"], row_headers=["x", "y"], values=[[1]]),
    dict(col_headers=["a"], row_headers=["x"], values=[[math.nan]]),
    dict(col_headers=["a"], row_headers=["x"], values=[[math.inf]]),
])
def test_table_invariants(bad):
    with pytest.raises(TableValidationError):
        Table(**bad)


def test_format_number_shortest():
    assert format_number(2020.0) == "2020"
    assert format_number(1.18) == "1.18"
    assert format_number(0.1 + 0.2) == "0.30000000000000004"
    assert format_number(-0.0) == "0"
    assert float(format_number(1e300)) == 1e300


@given(tables(), st.text(label_chars, min_size=1, max_size=6))
def test_round_trip_property(t, prefix):
    assert parse_flat_table(flatten_table(t, prefix)) == t


def test_round_trip_random_tables():
    cfg = TableGenConfig()
    for i in range(1000):
        t, _ = generate_random_table(cfg, sample_seed(5, i))
        assert parse_flat_table(flatten_table(t, "q:")) == t


def test_generation_deterministic_and_pie_single_column():
    cfg = TableGenConfig()
    for i in range(200):
        a = generate_random_table(cfg, i)
        assert a == generate_random_table(cfg, i)
        t, kind = a
        if kind == "pie":
            assert t.shape[1] == 1


def test_default_type_weights():
    w = TableGenConfig().weights()
    total = sum(CORPUS_TYPE_COUNTS.values())
    assert total == 495235
    assert w == pytest.approx([387101 / total, 88133 / total, 20001 / total])
    assert w[0] == pytest.approx(0.7816, abs=1e-4)
    assert w[1] == pytest.approx(0.1780, abs=1e-4)
    assert w[2] == pytest.approx(0.0404, abs=1e-4)


def test_bar_fraction_large_sample():
    cfg = TableGenConfig()
    kinds = [generate_random_table(cfg, sample_seed(77, i))[1] for i in range(10_000)]
    assert abs(kinds.count("bar") / 10_000 - 0.7816) <= 0.02


@pytest.mark.parametrize("kw", [
    dict(chart_weights={"bar": 0, "line": 0, "pie": 0}),
    dict(chart_weights={"scatter": 1}),
    dict(rows=(0, 2)),
    dict(cols=(3, 2)),
    dict(value_range=(5, 5)),
    dict(category_pool=()),
])
def test_bad_config(kw):
    with pytest.raises(ConfigError):
        cfg = TableGenConfig(**kw)
        generate_random_table(cfg, 0)


def test_mix64_known_values():
    # SplitMix64 finalizer reference values (computed with the published constants)
    assert mix64(0) == 0
    assert mix64(1) == 0x5692161D100B05E5
    assert sample_seed(3, 3) == mix64(0)


def test_table_close_examples():
    gold = Table(["a"], ["x"], [[100.0]])
    assert table_close(gold, gold, 0.0)[0]
    assert table_close(Table(["a"], ["x"], [[100.4]]), gold, 0.005)[0]
    zero = Table(["a"], ["x"], [[0.0]])
    for tol in (0.0, 0.5, 10.0):
        assert not table_close(Table(["a"], ["x"], [[0.001]]), zero, tol)[0]
    ok, rep = table_close(Table(["a", "b"], ["x"], [[1, 2]]), gold, 1.0)
    assert not ok and not rep.shape_ok
    ok, rep = table_close(Table(["A"], ["x"], [[100.0]]), gold, 0.0)
    assert not ok and rep.header_mismatches == [("col", 0, "A", "a")]


@given(tables(), st.floats(0, 1), st.floats(0, 1))
def test_table_close_reflexive_and_monotone(t, t1, t2):
    assert table_close(t, t, t1)[0]
    lo, hi = sorted((t1, t2))
    cand = Table(t.col_headers, t.row_headers,
                 [[v * 0.99 if isinstance(v, float) else v for v in row] for row in t.values], t.title)
    if table_close(cand, t, lo)[0]:
        assert table_close(cand, t, hi)[0]
