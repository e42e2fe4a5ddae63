import dataclasses
import math

import numpy as np
import pytest

from charttable.model.config import MICRO_GRADCHECK, ModelConfig
from charttable.model.data import micro_records, record_to_example
from charttable.model.gradcheck import grad_check
from charttable.model.network import (
    MultimodalInput,
    embed_inputs,
    encode,
    greedy_decode,
    init_params,
    loss,
    make_batch,
    relative_bucket,
)
from charttable.model.train import (
    TrainingDivergedError,
    load_checkpoint,
    save_checkpoint,
    train_micro,
)
from charttable.model.vocab import Vocab
from charttable.objectives import mask_values, stc_for_sample

CFG = ModelConfig()
VOCAB = Vocab(CFG.n_mask, CFG.n_ocr)
GC_VOCAB = Vocab(MICRO_GRADCHECK.n_mask, MICRO_GRADCHECK.n_ocr)


def rand_input(cfg, vocab, lv, lo, lt, seed=0):
    rng = np.random.default_rng(seed)
    locs = lambda n: np.sort(rng.random((n, 5)), axis=1)  # noqa: E731
    return MultimodalInput(rng.standard_normal((lv, cfg.d_region)), locs(lv),
                           rng.integers(vocab.ocr_start, vocab.ocr_start + vocab.n_ocr, lo), locs(lo),
                           rng.integers(4, vocab.n_base, lt))


def test_vocab_partitions():
    assert len(VOCAB) == 295
    assert VOCAB.tokens[VOCAB.ocr_start] == "<ocr_1>" and VOCAB.tokens[VOCAB.mask_start] == "<mask_1>"
    ids = VOCAB.encode(["table:", "India", "<ocr_3>", "<mask_2>"])
    assert VOCAB.decode(ids) == "table: India <ocr_3> <mask_2>"
    with pytest.raises(ValueError):
        VOCAB.encode(["<ocr_65>"])


def test_embed_lengths_and_shared_location():
    P = init_params(CFG, len(VOCAB), 0)
    inp = rand_input(CFG, VOCAB, 5, 6, 20)
    x = embed_inputs(inp, P)
    assert x.shape == (31, 32)
    # identical location for region 0 and OCR 0: same loc_proj contribution
    loc = np.array([0.1, 0.2, 0.3, 0.4, 0.02])
    rl, ol = inp.region_locs.copy(), inp.ocr_locs.copy()
    rl[0] = ol[0] = loc
    x2 = embed_inputs(dataclasses.replace(inp, region_locs=rl, ocr_locs=ol), P)
    reg_part = inp.region_feats[0] @ P["region_proj.w"] + P["region_proj.b"]
    ocr_part = P["embed"][inp.ocr_ids[0]]
    np.testing.assert_allclose(x2[0] - reg_part, x2[5] - ocr_part, atol=1e-12)
    # zero location: only the bias of loc_proj
    ol[0] = 0
    x3 = embed_inputs(dataclasses.replace(inp, ocr_locs=ol), P)
    np.testing.assert_allclose(x3[5] - ocr_part, P["loc_proj.b"], atol=1e-12)
    np.testing.assert_allclose(x[11:], P["embed"][inp.text_ids])


def test_input_validation():
    P = init_params(CFG, len(VOCAB), 0)
    with pytest.raises(ValueError):
        embed_inputs(rand_input(dataclasses.replace(CFG, d_region=8), VOCAB, 2, 1, 3), P)
    with pytest.raises(ValueError):
        MultimodalInput(np.zeros((2, 16)), np.zeros((3, 5)), [], np.zeros((0, 5)), [4])
    with pytest.raises(ValueError):
        ModelConfig(d_model=30, n_heads=4)


def _perturbed(cfg, vocab, seed):
    P = init_params(cfg, len(vocab), seed)
    rng = np.random.default_rng(seed + 100)
    for k in P.tensors:
        if k.endswith("rel_bias"):
            P.tensors[k] = rng.normal(0, 0.5, P.tensors[k].shape)
    return P


def test_encoder_shape_and_region_equivariance():
    P = _perturbed(CFG, VOCAB, 1)
    inp = rand_input(CFG, VOCAB, 5, 4, 12, seed=3)
    ts = 9
    out = encode(embed_inputs(inp, P), P, ts)
    assert out.shape == (21, 32)
    perm = np.array([3, 0, 4, 1, 2])
    inp2 = dataclasses.replace(inp, region_feats=inp.region_feats[perm], region_locs=inp.region_locs[perm])
    out2 = encode(embed_inputs(inp2, P), P, ts)
    np.testing.assert_allclose(out2[:5], out[perm], atol=1e-10)
    np.testing.assert_allclose(out2[5:], out[5:], atol=1e-10)


def _reference_encoder(P, x):
    """Plain pre-norm transformer encoder with no position bias at all."""
    cfg = P.cfg

    def rms(v, g):
        return v / np.sqrt((v ** 2).mean(-1, keepdims=True) + 1e-6) * g

    H, dh = cfg.n_heads, cfg.d_head
    for i in range(cfg.n_enc_layers):
        p = f"enc.{i}"
        h = rms(x, P[p + ".ln1"])
        heads = []
        for j in range(H):
            sl = slice(j * dh, (j + 1) * dh)
            q = h @ P[p + ".attn.q"][:, sl]
            k = h @ P[p + ".attn.k"][:, sl]
            v = h @ P[p + ".attn.v"][:, sl]
            s = q @ k.T / math.sqrt(dh)
            a = np.exp(s - s.max(1, keepdims=True))
            heads.append((a / a.sum(1, keepdims=True)) @ v)
        x = x + np.concatenate(heads, 1) @ P[p + ".attn.o"]
        h = rms(x, P[p + ".ln2"])
        x = x + np.maximum(h @ P[p + ".ff.w1"] + P[p + ".ff.b1"], 0) @ P[p + ".ff.w2"] + P[p + ".ff.b2"]
    return rms(x, P["enc.ln_f"])


def test_zero_bias_equals_plain_transformer():
    P = init_params(CFG, len(VOCAB), 2)
    inp = rand_input(CFG, VOCAB, 3, 3, 10, seed=4)
    x = embed_inputs(inp, P)
    np.testing.assert_allclose(encode(x, P, 6), _reference_encoder(P, x), atol=1e-10)
    P2 = _perturbed(CFG, VOCAB, 2)
    P2.tensors = {k: (P2[k] if k.endswith("rel_bias") else P[k]) for k in P.tensors}
    assert not np.allclose(encode(x, P2, 6), _reference_encoder(P, x))


def test_relative_buckets():
    b = relative_bucket(np.arange(-70, 71), True, 16, 64)
    assert b.min() >= 0 and b.max() < 16
    assert relative_bucket(0, True, 16, 64) == 0
    u = relative_bucket(-np.arange(0, 100), False, 16, 64)
    assert (np.diff(u) >= 0).all() and u.max() == 15


def test_uniform_logits_give_ln_v():
    P = init_params(CFG, len(VOCAB), 0)
    P.tensors["embed"] = np.zeros_like(P["embed"])
    inp = rand_input(CFG, VOCAB, 2, 2, 5)
    assert loss(inp, [5, 6, VOCAB.eos], P) == pytest.approx(math.log(len(VOCAB)), abs=1e-12)
    with pytest.raises(ValueError):
        loss(inp, [], P)


def test_initial_loss_near_ln_v_and_nonnegative():
    P = init_params(CFG, len(VOCAB), 0)
    for s in range(3):
        inp = rand_input(CFG, VOCAB, 4, 3, 8, seed=s)
        val = loss(inp, [7, 8, 9, VOCAB.eos], P)
        assert val >= 0
        assert abs(val - math.log(len(VOCAB))) / math.log(len(VOCAB)) < 0.05


def _gc_batch():
    cfg = MICRO_GRADCHECK
    inps = [rand_input(cfg, GC_VOCAB, 3, 2, 6, seed=1), rand_input(cfg, GC_VOCAB, 2, 3, 4, seed=2)]
    tgts = [[GC_VOCAB.ocr_start + 1, 9, GC_VOCAB.eos], [GC_VOCAB.mask_start, GC_VOCAB.eos]]
    return make_batch(inps, cfg, tgts, GC_VOCAB.bos)


def _gc_params():
    P = init_params(MICRO_GRADCHECK, len(GC_VOCAB), 7)
    rng = np.random.default_rng(8)
    for k, v in P.tensors.items():
        if k != "embed" and (v.ndim == 1 or k.endswith("rel_bias")):
            P.tensors[k] = v + rng.normal(0, 0.3, v.shape)
    return P


def test_grad_check_passes():
    res = grad_check(_gc_params(), _gc_batch(), 1e-5, n_coords=240)
    assert res.n_coords >= 200
    assert len(res.per_param) == len(_gc_params().tensors)
    assert res.max_rel_error < 1e-4


def test_grad_check_negative_control():
    def corrupt(g):
        g["embed"] *= 1.5
    res = grad_check(_gc_params(), _gc_batch(), 1e-5, n_coords=60, corrupt=corrupt)
    assert res.max_rel_error > 1e-2


def test_grad_check_rejects_epsilon():
    with pytest.raises(ValueError):
        grad_check(_gc_params(), _gc_batch(), 0.0)


def test_greedy_decode_deterministic_and_halts():
    P = init_params(CFG, len(VOCAB), 0)
    inp = rand_input(CFG, VOCAB, 3, 3, 6)
    a = greedy_decode(inp, P, 7)
    assert a == greedy_decode(inp, P, 7)
    assert len(a) <= 7 and (len(a) < 7 or VOCAB.eos not in a[:-1])
    # an embedding where only EOS scores nonzero: ties among the rest go to id 0,
    # so the first step yields EOS when its logit is positive and <pad> otherwise
    P.tensors["embed"] = np.zeros_like(P["embed"])
    P.tensors["embed"][VOCAB.eos] = 1.0
    out = greedy_decode(inp, P, 7)
    assert out == [VOCAB.eos] or set(out) == {VOCAB.pad}


def test_overfit_one_example_drives_loss_to_zero():
    cfg = MICRO_GRADCHECK
    inp = rand_input(cfg, GC_VOCAB, 3, 3, 5, seed=9)
    tgt = [GC_VOCAB.ocr_start + 2, 11, GC_VOCAB.eos]
    res = train_micro([(inp, tgt)], cfg, GC_VOCAB, 150, 1e-2, seed=0, batch_size=1, optimizer="adam")
    assert loss(inp, tgt, res.params) < 0.05
    assert greedy_decode(inp, res.params, 5, GC_VOCAB.bos, GC_VOCAB.eos) == tgt


def _micro_examples(n, seed=0):
    return [record_to_example(r, VOCAB, CFG) for r in micro_records(n, seed, d_region=CFG.d_region)]


def test_training_deterministic():
    ex = _micro_examples(8)
    a = train_micro(ex, CFG, VOCAB, 4, 0.1, seed=3, batch_size=4)
    b = train_micro(ex, CFG, VOCAB, 4, 0.1, seed=3, batch_size=4)
    assert a.losses == b.losses
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params.tensors)


def test_training_divergence_reported():
    ex = _micro_examples(2)
    P = init_params(CFG, len(VOCAB), 0)
    P.tensors["embed"] = P["embed"] * np.inf
    with pytest.raises((TrainingDivergedError, FloatingPointError)):
        with np.errstate(all="ignore"):
            train_micro(ex, CFG, VOCAB, 2, 0.1, params=P, batch_size=2)
    with pytest.raises(ValueError):
        train_micro([], CFG, VOCAB, 1, 0.1)


def test_masked_cell_non_leakage(samples):
    P = _perturbed(CFG, VOCAB, 5)
    s = next(x for x in samples if x.chart_type == "bar")
    _, enc = stc_for_sample(s, "predict values:")
    pair = mask_values(enc, 0.45, seed=1)
    altered = dataclasses.replace(enc, units={**enc.units, **{p: "999999" for p in pair.positions}})
    pair2 = mask_values(altered, 0.45, seed=1)
    assert pair2.input == pair.input and pair2.target != pair.target
    ids1, ids2 = VOCAB.encode(pair.input_tokens), VOCAB.encode(pair2.input_tokens)
    inp = lambda ids: MultimodalInput(np.zeros((0, 16)), np.zeros((0, 5)), [], np.zeros((0, 5)), ids)  # noqa: E731
    np.testing.assert_array_equal(encode(embed_inputs(inp(ids1), P), P), encode(embed_inputs(inp(ids2), P), P))


def test_checkpoint_round_trip(tmp_path):
    P = _perturbed(CFG, VOCAB, 4)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, P, {"steps": 3})
    Q, meta = load_checkpoint(path)
    assert meta == {"steps": 3} and Q.cfg == CFG and Q.vocab_size == len(VOCAB)
    assert all(np.array_equal(P[k], Q[k]) for k in P.tensors)
    assert path.read_bytes().startswith(b"microckpt/1\n")
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"nope")
    with pytest.raises(ValueError):
        load_checkpoint(bad)
