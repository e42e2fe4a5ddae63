import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from charttable.metrics import (
    QaPair,
    answer_from_table,
    bleu4,
    bleu_tokenize,
    content_selection,
    generate_extractive_qa,
    relaxed_accuracy,
    relaxed_accuracy_set,
)
from charttable.table import Table


@pytest.mark.parametrize("pred,gold,want", [
    ("1.18", "1.20", 1),
    ("105.1", "100", 0),
    ("india", "India", 1),
    (" India ", "India", 1),
    ("105", "100", 1),
    ("100", "105", 1),
    ("106", "100", 0),
    ("0", "0", 1),
    ("0.0001", "0", 0),
    ("1,000", "1000", 1),
])
def test_relaxed_anchors(pred, gold, want):
    assert relaxed_accuracy(pred, gold) == want


def test_strict_case():
    assert relaxed_accuracy("india", "India", strict_case=True) == 0


def test_relaxed_set():
    assert relaxed_accuracy_set(["a", "b"], ["a", "b"]) == 1.0
    assert relaxed_accuracy_set(["1", "x", "3", "4"], ["1", "2", "3", "4"]) == 0.75
    with pytest.raises(ValueError):
        relaxed_accuracy_set([], [])
    with pytest.raises(ValueError):
        relaxed_accuracy_set(["a"], ["a", "b"])


def test_bleu_oracles():
    assert bleu4("a b c", ["a b c d"]) == pytest.approx(math.exp(-1 / 3), abs=1e-12)
    assert bleu4("a b c", ["a b c d"]) == pytest.approx(0.7165313105737893, abs=1e-12)
    # p = 5/6, 3/5, 1/4, (0+1)/(3+1); no brevity penalty
    assert bleu4("the cat sat on the mat", ["the cat is on the mat"]) == pytest.approx(0.03125 ** 0.25, abs=1e-12)
    assert bleu4("x y z", ["a b c"]) == 0.0
    assert bleu4("", ["a"]) == 0.0
    assert bleu4("India grew 1.18 percent.", ["India grew 1.18 percent."]) == 1.0


def test_bleu_tokenize():
    assert bleu_tokenize("GDP, 1,000.5 (x)!") == ["GDP", ",", "1,000.5", "(", "x", ")", "!"]


def test_bleu_requires_reference():
    with pytest.raises(ValueError):
        bleu4("a", [])


@given(st.lists(st.sampled_from("a b c d 1 2 . ,".split()), min_size=1, max_size=12),
       st.lists(st.sampled_from("a b c d 1 2 . ,".split()), min_size=1, max_size=12))
def test_bleu_bounds(c, r):
    cand, ref = " ".join(c), " ".join(r)
    assert bleu4(cand, [cand]) == pytest.approx(1.0)
    assert 0.0 <= bleu4(cand, [ref]) <= 1.0


T = Table(["2019", "2020"], ["India", "China"], [[1.0, 2.0], [3.0, 4.0]])


def test_content_selection():
    s = "India had 1 in 2019 and 2 in 2020; China had 3 in 2019."
    assert content_selection(s, T) == 0.75
    assert content_selection("", T) == 0
    full = "India 2019 1 India 2020 2 China 2019 3 China 2020 4"
    assert content_selection(full, T) == 1.0


@given(st.text(max_size=30), st.text(max_size=30))
def test_content_selection_monotone(a, b):
    assert content_selection(a + " " + b, T) >= content_selection(a, T)


def test_qa_generation():
    t = Table(["a", "b"], ["x"], [[1.5, "yes"]])
    qas = generate_extractive_qa(t, 2, seed=1)
    assert {(q.row, q.col) for q in qas} == {(0, 0), (0, 1)}
    for q in qas:
        assert q.answer == t.cell_text(q.row, q.col)
        assert q.question.startswith("What is the value of x in ")
        assert answer_from_table(t, t, q) == (q.answer, "ok")
        assert QaPair.from_dict(q.to_dict()) == q
    assert generate_extractive_qa(t, 2, seed=1) == qas
    with pytest.raises(ValueError):
        generate_extractive_qa(t, 3)


def test_answer_error_classes():
    q = generate_extractive_qa(T, 1, seed=0)[0]
    assert answer_from_table(None, T, q)[1] == "parse_failure"
    renamed = Table(["2019", "2020"], ["Indla", "Chlna"], T.values)
    assert answer_from_table(renamed, T, q)[1] == "header_miss"
    off = Table(T.col_headers, T.row_headers, [[v * 2 for v in row] for row in T.values])
    assert answer_from_table(off, T, q)[1] == "value_error"
