import pytest
from hypothesis import given
from hypothesis import strategies as st

from charttable.objectives import (
    ObjectiveError,
    choose_objective,
    make_pretraining_example,
    mask_headers,
    mask_values,
    masked_count,
    round_half_up,
    stc_for_sample,
    unmask,
)
from charttable.stc import assign_sentinels, encode_with_copy, match_ocr_to_cells
from charttable.table import Table


def plain_stc(t, prefix="p"):
    return encode_with_copy(t, prefix, match_ocr_to_cells(t, []), assign_sentinels([]), [])


def test_counts():
    assert masked_count(0.45, 10) == 5
    assert masked_count(0.45, 1) == 1
    assert masked_count(0.45, 12) == 5
    assert round_half_up(2.5) == 3 and round_half_up(3.5) == 4


def test_header_mask_ten_headers():
    t = Table([f"c{j}" for j in range(6)], [f"r{i}" for i in range(4)], [[1.0] * 6] * 4)
    pair = mask_headers(plain_stc(t), 0.45, seed=3)
    assert len(pair.positions) == 5
    assert all(p[0] in ("col", "row") for p in pair.positions)


def test_low_rate_masks_at_least_one():
    t = Table(["v"], ["a"], [[2.0]])
    pair = mask_headers(plain_stc(t), 0.1, seed=0)
    assert len(pair.positions) == 1


def test_value_mask_3x4():
    t = Table(list("abcd"), list("xyz"), [[float(i * 4 + j) for j in range(4)] for i in range(3)])
    pair = mask_values(plain_stc(t), 0.45, seed=1)
    assert len(pair.positions) == 5
    for h in list("abcd") + list("xyz"):
        assert f" {h}" in pair.input
    assert pair == mask_values(plain_stc(t), 0.45, seed=1)


def test_errors():
    t = Table(["a"], ["x"], [["text"]])
    with pytest.raises(ObjectiveError):
        mask_values(plain_stc(t))
    for rate in (0, -0.1, 1.5):
        with pytest.raises(ObjectiveError):
            mask_headers(plain_stc(t), rate)
    with pytest.raises(ObjectiveError):
        choose_objective("sometimes", 0)


def test_alternate_selector():
    assert [choose_objective("alternate", i) for i in range(4)] == ["MHP", "MVP", "MHP", "MVP"]


def test_sentinel_header_masked_as_sentinel(samples):
    s = next(x for x in samples if x.chart_type == "bar")
    _, enc = stc_for_sample(s, "predict headers:")
    pair = mask_headers(enc, 1.0, seed=0)
    assert all(tok.startswith("<ocr_") for tok in pair.target_tokens if not tok.startswith("<mask_"))


def test_properties_over_corpus(samples):
    for i, s in enumerate(samples):
        for obj, fn in (("MHP", mask_headers), ("MVP", mask_values)):
            _, enc = stc_for_sample(s, "p")
            pair = fn(enc, 0.45, seed=i)
            kinds = {p[0] for p in pair.positions}
            assert kinds <= ({"col", "row"} if obj == "MHP" else {"val"})
            # each mask sentinel appears once in input and once in target
            for k in range(len(pair.positions)):
                name = f"<mask_{k + 1}>"
                assert pair.input.count(name) == 1 and pair.target.count(name) == 1
            # non-leakage: the masked slot holds the sentinel, not the surface
            slots = {pos: f"<mask_{k + 1}>" for k, pos in enumerate(pair.positions)}
            assert pair.input == enc.assemble(slots)
            assert all(enc.units[pos] != slots[pos] for pos in slots)
            assert unmask(pair) == enc.target


@given(st.integers(1, 40), st.floats(0.01, 1.0))
def test_masked_count_bounds(n, rate):
    k = masked_count(rate, n)
    assert 1 <= k <= n
    assert abs(k - rate * n) <= 0.5 + 1e-9 or k == 1


def test_record_shape(samples):
    s = samples[0]
    rec = make_pretraining_example(s, "alternate", index=0, seed=5)
    assert rec["schema"] == "maskedpair/1" and rec["objective"] == "MHP"
    assert len(rec["regions"]) == len(s.annotation.regions)
    assert len(rec["ocr"]) == len(s.annotation.ocr_tokens)
    assert rec == make_pretraining_example(s, "alternate", index=0, seed=5)
