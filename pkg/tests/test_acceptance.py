"""Acceptance criteria 1-8, one PASS/FAIL line each.

Run under pytest (lines are repeated in the terminal summary) or directly:
``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from charttable.harness import roundtrip_report
from charttable.metrics import bleu4, content_selection, relaxed_accuracy
from charttable.model.config import MICRO_GRADCHECK, ModelConfig
from charttable.model.data import micro_records, record_to_example
from charttable.model.gradcheck import grad_check
from charttable.model.network import MultimodalInput, init_params, make_batch
from charttable.model.train import corpus_loss, masked_cell_accuracy, train_micro
from charttable.model.vocab import Vocab
from charttable.objectives import mask_headers, mask_values, stc_for_sample
from charttable.ocr import NoiseModel
from charttable.stc import decode_copy, header_match_rate
from charttable.synth.corpus import SpecGenConfig, make_sample
from charttable.table import (
    FlatTable,
    Table,
    TableGenConfig,
    flatten_table,
    generate_random_table,
    mix64,
    parse_flat_table,
    sample_seed,
)

RESULTS = []


def report(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def corpus(n, seed):
    tc, sc = TableGenConfig(), SpecGenConfig()
    return [make_sample(i, seed, tc, sc)[0] for i in range(n)]


@pytest.fixture(scope="module")
def corpus500():
    return corpus(500, 20240)


def check_1(samples):
    t0 = time.perf_counter()
    rep = roundtrip_report(samples)
    secs = time.perf_counter() - t0
    kinds = {k: v["n"] for k, v in rep["per_type"].items()}
    ok = rep["fidelity"] == 1.0 and rep["value_accuracy"] == 1.0 and rep["header_accuracy"] == 1.0 and secs <= 120
    return report(1, ok, f"round-trip n={rep['n']} types={kinds} fidelity={rep['fidelity']:.4f} "
                         f"cell_RA={rep['value_accuracy']:.4f} headers={rep['header_accuracy']:.4f} {secs:.2f}s")


def check_2(samples):
    clean = roundtrip_report(samples, seed=1)
    noisy = roundtrip_report(samples, NoiseModel(char_sub_rate=0.1), seed=1)
    a, b = clean["qa"]["relaxed_accuracy"], noisy["qa"]["relaxed_accuracy"]
    ok = a >= 0.99 and b < a and sum(noisy["qa"]["errors"].values()) > 0
    return report(2, ok, f"QA clean={a:.4f} (n={clean['qa']['n']}) noisy={b:.4f} errors={noisy['qa']['errors']}")


def check_3():
    fails = hdr_ok = hdr_n = 0
    tc, sc = TableGenConfig(), SpecGenConfig()
    for i in range(1000):
        s, _ = make_sample(i, 777, tc, sc)
        ocr, enc = stc_for_sample(s, "predict table:")
        fails += decode_copy(enc.target, ocr) != flatten_table(s.table, "predict table:").text
        m, t = header_match_rate(enc)
        hdr_ok, hdr_n = hdr_ok + m, hdr_n + t
    ok = fails == 0 and hdr_ok == hdr_n
    return report(3, ok, f"STC 1000 samples failures={fails} header_match={hdr_ok}/{hdr_n}")


def check_4():
    tc, sc = TableGenConfig(), SpecGenConfig()
    stats = {"MHP": [0, 0], "MVP": [0, 0]}
    purity = 0
    i = 0
    while min(stats["MHP"][1], stats["MVP"][1]) < 10_000:
        s, _ = make_sample(i, 4242, tc, sc)
        _, enc = stc_for_sample(s, "p")
        for obj, fn, allowed in (("MHP", mask_headers, {"col", "row"}), ("MVP", mask_values, {"val"})):
            pair = fn(enc, 0.45, seed=mix64(i ^ len(obj)))
            stats[obj][0] += len(pair.positions)
            stats[obj][1] += len(enc.header_positions() if obj == "MHP" else enc.numeric_value_positions())
            purity += any(p[0] not in allowed for p in pair.positions)
        i += 1
    rates = {k: m / n for k, (m, n) in stats.items()}
    ok = all(abs(r - 0.45) <= 0.02 for r in rates.values()) and purity == 0
    cells = {k: n for k, (_, n) in stats.items()}
    return report(4, ok, f"mask rates MHP={rates['MHP']:.4f} MVP={rates['MVP']:.4f} cells={cells} purity={purity}")


def check_5():
    cfg = TableGenConfig()
    rng = np.random.default_rng(5)
    nasty = ["a | b", "x: y", "back\\slash", " r: ", "c: d", "|", ":", "12", "-3.5"]
    bad = n_sep = 0
    for i in range(10_000):
        t, _ = generate_random_table(cfg, sample_seed(55, i))
        if i % 4 == 0:
            # splice separator-laden labels and numeric-looking text into headers and cells
            cols = list(t.col_headers)
            cols[0] = nasty[int(rng.integers(len(nasty)))] + f"#{i}"
            vals = [list(r) for r in t.values]
            vals[0][0] = nasty[int(rng.integers(len(nasty)))]
            t = Table(cols, t.row_headers, vals, t.title)
            n_sep += 1
        flat = flatten_table(t, "predict table:")
        bad += parse_flat_table(FlatTable(flat.text, flat.prefix)) != t
    return report(5, bad == 0, f"flatten/parse 10000 tables mismatches={bad} (with separator labels: {n_sep})")


def check_6():
    cfg = MICRO_GRADCHECK
    vocab = Vocab(cfg.n_mask, cfg.n_ocr)
    rng = np.random.default_rng(0)

    def inp(lv, lo, lt):
        return MultimodalInput(rng.standard_normal((lv, cfg.d_region)), rng.random((lv, 5)),
                               rng.integers(vocab.ocr_start, len(vocab), lo), rng.random((lo, 5)),
                               rng.integers(4, vocab.n_base, lt))

    batch = make_batch([inp(3, 2, 6), inp(2, 3, 5)], cfg,
                       [[vocab.ocr_start, 20, vocab.eos], [vocab.mask_start + 1, vocab.eos]], vocab.bos)
    P = init_params(cfg, len(vocab), 1)
    for k, v in P.tensors.items():
        if k != "embed" and (v.ndim == 1 or k.endswith("rel_bias")):
            P.tensors[k] = v + rng.normal(0, 0.3, v.shape)
    good = grad_check(P, batch, 1e-5, n_coords=300)

    def corrupt(g):
        g["embed"] *= 1.5
    neg = grad_check(P, batch, 1e-5, n_coords=60, corrupt=corrupt)
    ok = good.max_rel_error < 1e-4 and neg.max_rel_error > 1e-2 and good.n_coords >= 200
    return report(6, ok, f"grad check max_rel={good.max_rel_error:.2e} over {good.n_coords} coords "
                         f"({len(good.per_param)} tensors); negative control={neg.max_rel_error:.2e}")


def check_7(steps=1500, seed=0):
    cfg = ModelConfig()
    vocab = Vocab(cfg.n_mask, cfg.n_ocr)
    t0 = time.perf_counter()
    train = [record_to_example(r, vocab, cfg) for r in micro_records(200, seed, d_region=cfg.d_region)]
    test = [record_to_example(r, vocab, cfg) for r in micro_records(50, mix64(seed ^ 0x7E57), d_region=cfg.d_region)]
    l0 = corpus_loss(init_params(cfg, len(vocab), seed), train, vocab)
    res = train_micro(train, cfg, vocab, steps, 0.1, seed=seed, batch_size=16, optimizer="momentum")
    l1 = corpus_loss(res.params, train, vocab)
    acc, cells = masked_cell_accuracy(res.params, test, vocab)
    secs = time.perf_counter() - t0
    lnv = math.log(len(vocab))
    ok = l1 / l0 <= 0.2 and acc >= 0.9 and secs <= 1800 and abs(l0 - lnv) / lnv <= 0.05
    return report(7, ok, f"micro-training loss {l0:.3f}->{l1:.4f} (ratio {l1 / l0:.4f}), ln V={lnv:.3f}, "
                         f"held-out header cells {acc:.3f} of {cells}, {secs:.0f}s")


def check_8():
    rng = np.random.default_rng(8)
    t = Table(["2019", "2020"], ["India", "China"], [[1.0, 2.0], [3.0, 4.0]])
    words = ["India", "China", "2019", "2020", "1", "2", "3", "4", "grew", "to", "in", "."]
    in_range = mono = ident = True
    for _ in range(300):
        a = " ".join(rng.choice(words, size=int(rng.integers(1, 10))))
        b = " ".join(rng.choice(words, size=int(rng.integers(1, 10))))
        ident &= bleu4(a, [a]) == pytest.approx(1.0)
        vals = [bleu4(a, [b]), content_selection(a, t), relaxed_accuracy(a, b)]
        in_range &= all(0.0 <= v <= 1.0 for v in vals)
        mono &= content_selection(a + " " + b, t) >= content_selection(a, t)
    anchors = relaxed_accuracy("1.18", "1.20") == 1 and relaxed_accuracy("105.1", "100") == 0
    ok = anchors and ident and mono and in_range
    return report(8, ok, f"metric anchors={anchors} bleu identity={ident} CS monotone={mono} ranges={in_range}")


def test_criterion_1_round_trip(corpus500):
    assert check_1(corpus500)


def test_criterion_2_qa(corpus500):
    assert check_2(corpus500)


def test_criterion_3_stc():
    assert check_3()


def test_criterion_4_masking():
    assert check_4()


def test_criterion_5_flatten_parse():
    assert check_5()


def test_criterion_6_gradcheck():
    assert check_6()


def test_criterion_7_micro_training():
    assert check_7()


def test_criterion_8_metrics():
    assert check_8()


if __name__ == "__main__":
    s = corpus(500, 20240)
    results = [check_1(s), check_2(s), check_3(), check_4(), check_5(), check_6(), check_7(), check_8()]
    raise SystemExit(0 if all(results) else 1)
