"""Encoder-decoder transformer in float64 numpy with hand-written backprop.

Encoder input is [regions ; OCR ; text].  Text-text pairs get a bucketed
relative position bias; any pair touching a region or OCR position uses one
extra cross-modal bucket.  The output layer is tied to the word embedding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig

NEG = -1e9


@dataclass
class MultimodalInput:
    region_feats: np.ndarray  # (lv, d_region)
    region_locs: np.ndarray  # (lv, 5)
    ocr_ids: np.ndarray  # (lo,) vocabulary ids of OCR sentinels
    ocr_locs: np.ndarray  # (lo, 5)
    text_ids: np.ndarray  # (lt,)

    def __post_init__(self):
        rf = np.asarray(self.region_feats, dtype=np.float64)
        self.region_feats = rf if rf.ndim == 2 else rf.reshape(len(rf), -1)
        self.region_locs = np.asarray(self.region_locs, dtype=np.float64).reshape(-1, 5)
        self.ocr_ids = np.asarray(self.ocr_ids, dtype=np.int64).reshape(-1)
        self.ocr_locs = np.asarray(self.ocr_locs, dtype=np.float64).reshape(-1, 5)
        self.text_ids = np.asarray(self.text_ids, dtype=np.int64).reshape(-1)
        if len(self.region_feats) != len(self.region_locs):
            raise ValueError("region features and locations differ in length")
        if len(self.ocr_ids) != len(self.ocr_locs):
            raise ValueError("OCR ids and locations differ in length")

    @property
    def lengths(self) -> tuple[int, int, int]:
        return len(self.region_locs), len(self.ocr_ids), len(self.text_ids)

    def validate(self, cfg: ModelConfig, vocab_size: int, ocr_range: tuple[int, int] | None = None):
        lv, lo, lt = self.lengths
        if lv + lo + lt == 0:
            raise ValueError("empty encoder input")
        if lv and self.region_feats.shape[1] != cfg.d_region:
            raise ValueError(f"region features have width {self.region_feats.shape[1]}, expected {cfg.d_region}")
        if lv > cfg.max_regions or lo > cfg.max_ocr_len or lt > cfg.max_text_len:
            raise ValueError(f"input lengths {(lv, lo, lt)} exceed the configured maxima")
        ids = np.concatenate([self.ocr_ids, self.text_ids])
        if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
            raise ValueError("token id outside the vocabulary")
        if ocr_range is not None and lo:
            if self.ocr_ids.min() < ocr_range[0] or self.ocr_ids.max() >= ocr_range[1]:
                raise ValueError("OCR slot holds a non-sentinel id")


@dataclass
class MicroModelParams:
    cfg: ModelConfig
    vocab_size: int
    tensors: dict = field(default_factory=dict)

    def copy(self) -> "MicroModelParams":
        return MicroModelParams(self.cfg, self.vocab_size, {k: v.copy() for k, v in self.tensors.items()})

    def __getitem__(self, k):
        return self.tensors[k]

    def check_finite(self):
        for k, v in self.tensors.items():
            if not np.all(np.isfinite(v)):
                raise FloatingPointError(f"parameter {k} is not finite")


def param_shapes(cfg: ModelConfig, vocab_size: int) -> dict:
    d, f, H = cfg.d_model, cfg.d_ff, cfg.n_heads
    s = {"embed": (vocab_size, d), "region_proj.w": (cfg.d_region, d), "region_proj.b": (d,),
         "loc_proj.w": (5, d), "loc_proj.b": (d,), "enc.rel_bias": (H, cfg.n_buckets + 1),
         "dec.rel_bias": (H, cfg.n_buckets)}

    def attn(p):
        for m in "qkvo":
            s[f"{p}.{m}"] = (d, d)

    def ffn(p):
        s.update({f"{p}.w1": (d, f), f"{p}.b1": (f,), f"{p}.w2": (f, d), f"{p}.b2": (d,)})

    for i in range(cfg.n_enc_layers):
        p = f"enc.{i}"
        s[f"{p}.ln1"] = (d,)
        attn(f"{p}.attn")
        s[f"{p}.ln2"] = (d,)
        ffn(f"{p}.ff")
    s["enc.ln_f"] = (d,)
    for i in range(cfg.n_dec_layers):
        p = f"dec.{i}"
        s[f"{p}.ln1"] = (d,)
        attn(f"{p}.self")
        s[f"{p}.ln2"] = (d,)
        attn(f"{p}.cross")
        s[f"{p}.ln3"] = (d,)
        ffn(f"{p}.ff")
    s["dec.ln_f"] = (d,)
    return s


def init_params(cfg: ModelConfig, vocab_size: int, seed: int = 0) -> MicroModelParams:
    """Scaled-uniform init: U(-a, a) with a = init_scale * sqrt(3 / fan_in).

    Norm gains start at 1, biases and relative-bias tables at 0, the embedding
    at U(-embed_scale, embed_scale) so the initial output is near uniform.
    """
    rng = np.random.default_rng(seed)
    t = {}
    for name, shape in param_shapes(cfg, vocab_size).items():
        last = name.rsplit(".", 1)[-1]
        if name == "embed":
            t[name] = rng.uniform(-cfg.embed_scale, cfg.embed_scale, shape)
        elif last.startswith("ln"):
            t[name] = np.ones(shape)
        elif last in ("b", "b1", "b2") or name.endswith("rel_bias"):
            t[name] = np.zeros(shape)
        else:
            a = cfg.init_scale * math.sqrt(3.0 / shape[0])
            t[name] = rng.uniform(-a, a, shape)
    return MicroModelParams(cfg, vocab_size, t)


def relative_bucket(rel, bidirectional: bool, n_buckets: int, max_distance: int) -> np.ndarray:
    """T5-style bucket of relative position ``rel = key - query``."""
    rel = np.asarray(rel, dtype=np.int64)
    n = -rel
    ret = np.zeros_like(n)
    nb = n_buckets
    if bidirectional:
        nb //= 2
        ret += (n < 0).astype(np.int64) * nb
        n = np.abs(n)
    else:
        n = np.maximum(n, 0)
    max_exact = nb // 2
    large = max_exact + (np.log(np.maximum(n, 1) / max_exact) / math.log(max_distance / max_exact)
                         * (nb - max_exact)).astype(np.int64)
    large = np.minimum(large, nb - 1)
    return ret + np.where(n < max_exact, n, large)


def encoder_buckets(cfg: ModelConfig, L: int, text_start: int, text_len: int) -> np.ndarray:
    idx = np.full((L, L), cfg.n_buckets, dtype=np.int64)
    if text_len:
        pos = np.arange(text_len)
        rel = pos[None, :] - pos[:, None]
        sl = slice(text_start, text_start + text_len)
        idx[sl, sl] = relative_bucket(rel, True, cfg.n_buckets, cfg.max_distance)
    return idx


def decoder_buckets(cfg: ModelConfig, T: int) -> np.ndarray:
    pos = np.arange(T)
    return relative_bucket(pos[None, :] - pos[:, None], False, cfg.n_buckets, cfg.max_distance)


# -- batch packing -----------------------------------------------------------

@dataclass
class Batch:
    inputs: list
    enc_valid: np.ndarray  # (B, L) bool
    enc_idx: np.ndarray  # (B, L, L) bucket ids
    dec_in: np.ndarray | None = None  # (B, T)
    dec_out: np.ndarray | None = None
    dec_valid: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.inputs)


def make_batch(inputs, cfg: ModelConfig, targets=None, bos: int = 2, pad: int = 0) -> Batch:
    """Pack inputs (and optional target id lists, EOS included) with end padding."""
    lens = [sum(x.lengths) for x in inputs]
    L = max(lens)
    B = len(inputs)
    valid = np.zeros((B, L), dtype=bool)
    idx = np.empty((B, L, L), dtype=np.int64)
    for b, x in enumerate(inputs):
        lv, lo, lt = x.lengths
        valid[b, :lens[b]] = True
        idx[b] = encoder_buckets(cfg, L, lv + lo, lt)
    batch = Batch(list(inputs), valid, idx)
    if targets is not None:
        if len(targets) != B:
            raise ValueError("targets and inputs differ in count")
        T = max(len(t) for t in targets)
        if min(len(t) for t in targets) == 0:
            raise ValueError("empty target sequence")
        if T > cfg.max_target_len:
            raise ValueError(f"target length {T} exceeds max_target_len {cfg.max_target_len}")
        dec_in = np.full((B, T), pad, dtype=np.int64)
        dec_out = np.full((B, T), pad, dtype=np.int64)
        dv = np.zeros((B, T), dtype=bool)
        for b, t in enumerate(targets):
            t = list(t)
            dec_out[b, :len(t)] = t
            dec_in[b, 0] = bos
            dec_in[b, 1:len(t)] = t[:-1]
            dv[b, :len(t)] = True
        batch.dec_in, batch.dec_out, batch.dec_valid = dec_in, dec_out, dv
    return batch


# -- layers ------------------------------------------------------------------

EPS = 1e-6


def rms_fwd(x, g):
    r = 1.0 / np.sqrt((x * x).mean(-1, keepdims=True) + EPS)
    xh = x * r
    return xh * g, (xh, r, g)


def rms_bwd(dy, cache):
    xh, r, g = cache
    dg = (dy * xh).reshape(-1, xh.shape[-1]).sum(0)
    dxh = dy * g
    return r * (dxh - xh * (dxh * xh).mean(-1, keepdims=True)), dg


def ffn_fwd(P, p, x):
    z = x @ P[p + ".w1"] + P[p + ".b1"]
    r = np.maximum(z, 0.0)
    return r @ P[p + ".w2"] + P[p + ".b2"], (x, z, r)


def ffn_bwd(dy, P, p, cache, G):
    x, z, r = cache
    d = dy.shape[-1]
    G[p + ".w2"] += r.reshape(-1, r.shape[-1]).T @ dy.reshape(-1, d)
    G[p + ".b2"] += dy.reshape(-1, d).sum(0)
    dz = (dy @ P[p + ".w2"].T) * (z > 0)
    G[p + ".w1"] += x.reshape(-1, d).T @ dz.reshape(-1, dz.shape[-1])
    G[p + ".b1"] += dz.reshape(-1, dz.shape[-1]).sum(0)
    return dz @ P[p + ".w1"].T


def _heads(x, H):
    B, L, d = x.shape
    return x.reshape(B, L, H, d // H).transpose(0, 2, 1, 3)


def _merge(x):
    B, H, L, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, L, H * dh)


def mha_fwd(P, p, xq, xkv, H, add):
    """``add`` is broadcast onto the (B, H, Lq, Lk) scores (bias plus mask)."""
    dh = xq.shape[-1] // H
    sc = 1.0 / math.sqrt(dh)
    q = _heads(xq @ P[p + ".q"], H)
    k = _heads(xkv @ P[p + ".k"], H)
    v = _heads(xkv @ P[p + ".v"], H)
    s = q @ k.transpose(0, 1, 3, 2) * sc + add
    s = s - s.max(-1, keepdims=True)
    a = np.exp(s)
    a /= a.sum(-1, keepdims=True)
    oc = _merge(a @ v)
    return oc @ P[p + ".o"], (xq, xkv, q, k, v, a, oc, sc)


def mha_bwd(dy, P, p, cache, G, H):
    """Returns (dxq, dxkv, dscores)."""
    xq, xkv, q, k, v, a, oc, sc = cache
    d = dy.shape[-1]
    G[p + ".o"] += oc.reshape(-1, d).T @ dy.reshape(-1, d)
    do = _heads(dy @ P[p + ".o"].T, H)
    da = do @ v.transpose(0, 1, 3, 2)
    dv = a.transpose(0, 1, 3, 2) @ do
    ds = a * (da - (da * a).sum(-1, keepdims=True))
    dq = _merge(ds @ k * sc)
    dk = _merge(ds.transpose(0, 1, 3, 2) @ q * sc)
    dv = _merge(dv)
    G[p + ".q"] += xq.reshape(-1, d).T @ dq.reshape(-1, d)
    G[p + ".k"] += xkv.reshape(-1, d).T @ dk.reshape(-1, d)
    G[p + ".v"] += xkv.reshape(-1, d).T @ dv.reshape(-1, d)
    dxq = dq @ P[p + ".q"].T
    dxkv = dk @ P[p + ".k"].T + dv @ P[p + ".v"].T
    return dxq, dxkv, ds


def _bias_grad(ds, idx, n):
    """Scatter (B, H, Lq, Lk) score grads into an (H, n) bucket table."""
    H = ds.shape[1]
    idx = np.broadcast_to(idx, (ds.shape[0],) + ds.shape[2:]).ravel()
    return np.stack([np.bincount(idx, weights=ds[:, h].ravel(), minlength=n) for h in range(H)])


# -- embedding ---------------------------------------------------------------

def embed_batch(P: MicroModelParams, batch: Batch):
    cfg = P.cfg
    B, L = batch.enc_valid.shape
    x = np.zeros((B, L, cfg.d_model))
    E = P["embed"]
    Wl, bl = P["loc_proj.w"], P["loc_proj.b"]
    for b, inp in enumerate(batch.inputs):
        lv, lo, lt = inp.lengths
        if lv:
            x[b, :lv] = inp.region_feats @ P["region_proj.w"] + P["region_proj.b"] + inp.region_locs @ Wl + bl
        if lo:
            x[b, lv:lv + lo] = E[inp.ocr_ids] + inp.ocr_locs @ Wl + bl
        x[b, lv + lo:lv + lo + lt] = E[inp.text_ids]
    return x


def embed_batch_bwd(dx, P: MicroModelParams, batch: Batch, G):
    for b, inp in enumerate(batch.inputs):
        lv, lo, lt = inp.lengths
        dr, do, dt = dx[b, :lv], dx[b, lv:lv + lo], dx[b, lv + lo:lv + lo + lt]
        if lv:
            G["region_proj.w"] += inp.region_feats.T @ dr
            G["region_proj.b"] += dr.sum(0)
            G["loc_proj.w"] += inp.region_locs.T @ dr
            G["loc_proj.b"] += dr.sum(0)
        if lo:
            G["loc_proj.w"] += inp.ocr_locs.T @ do
            G["loc_proj.b"] += do.sum(0)
            np.add.at(G["embed"], inp.ocr_ids, do)
        np.add.at(G["embed"], inp.text_ids, dt)


def embed_inputs(inp: MultimodalInput, params: MicroModelParams) -> np.ndarray:
    """(l^v + l^o + l^t, d_model) input vectors for one sample."""
    inp.validate(params.cfg, params.vocab_size)
    return embed_batch(params, make_batch([inp], params.cfg))[0]


# -- encoder / decoder -------------------------------------------------------

def _enc_add(P, batch):
    bias = P["enc.rel_bias"][:, batch.enc_idx].transpose(1, 0, 2, 3)
    mask = np.where(batch.enc_valid, 0.0, NEG)[:, None, None, :]
    return bias + mask


def encoder_fwd(P: MicroModelParams, x, batch: Batch):
    cfg = P.cfg
    add = _enc_add(P, batch)
    caches = []
    for i in range(cfg.n_enc_layers):
        p = f"enc.{i}"
        h, c1 = rms_fwd(x, P[p + ".ln1"])
        a, ca = mha_fwd(P, p + ".attn", h, h, cfg.n_heads, add)
        x = x + a
        h, c2 = rms_fwd(x, P[p + ".ln2"])
        f, cf = ffn_fwd(P, p + ".ff", h)
        x = x + f
        caches.append((c1, ca, c2, cf))
    out, cfin = rms_fwd(x, P["enc.ln_f"])
    return out, (caches, cfin)


def encoder_bwd(dout, P: MicroModelParams, cache, batch: Batch, G):
    cfg = P.cfg
    caches, cfin = cache
    dx, dg = rms_bwd(dout, cfin)
    G["enc.ln_f"] += dg
    for i in reversed(range(cfg.n_enc_layers)):
        p = f"enc.{i}"
        c1, ca, c2, cf = caches[i]
        dh = ffn_bwd(dx, P, p + ".ff", cf, G)
        d2, dg = rms_bwd(dh, c2)
        G[p + ".ln2"] += dg
        dx = dx + d2
        dq, dkv, ds = mha_bwd(dx, P, p + ".attn", ca, G, cfg.n_heads)
        G["enc.rel_bias"] += _bias_grad(ds, batch.enc_idx, cfg.n_buckets + 1)
        d1, dg = rms_bwd(dq + dkv, c1)
        G[p + ".ln1"] += dg
        dx = dx + d1
    return dx


def encode(embedded: np.ndarray, params: MicroModelParams, text_start: int | None = None) -> np.ndarray:
    """Encoder hidden states for one embedded sequence.

    Positions from ``text_start`` on are text; everything before is region or
    OCR.  ``None`` treats the whole sequence as text.
    """
    x = np.asarray(embedded, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] != params.cfg.d_model:
        raise ValueError(f"expected a nonempty (L, {params.cfg.d_model}) sequence, got {x.shape}")
    L = x.shape[0]
    ts = 0 if text_start is None else text_start
    batch = Batch([], np.ones((1, L), dtype=bool), encoder_buckets(params.cfg, L, ts, L - ts)[None])
    return encoder_fwd(params, x[None], batch)[0][0]


def decoder_fwd(P: MicroModelParams, dec_in, enc_out, enc_valid):
    cfg = P.cfg
    B, T = dec_in.shape
    didx = decoder_buckets(cfg, T)
    causal = np.where(np.tril(np.ones((T, T), dtype=bool)), 0.0, NEG)
    self_add = (P["dec.rel_bias"][:, didx] + causal)[None]
    cross_add = np.where(enc_valid, 0.0, NEG)[:, None, None, :]
    x = P["embed"][dec_in]
    caches = []
    for i in range(cfg.n_dec_layers):
        p = f"dec.{i}"
        h, c1 = rms_fwd(x, P[p + ".ln1"])
        a, cs = mha_fwd(P, p + ".self", h, h, cfg.n_heads, self_add)
        x = x + a
        h, c2 = rms_fwd(x, P[p + ".ln2"])
        a, cc = mha_fwd(P, p + ".cross", h, enc_out, cfg.n_heads, cross_add)
        x = x + a
        h, c3 = rms_fwd(x, P[p + ".ln3"])
        f, cf = ffn_fwd(P, p + ".ff", h)
        x = x + f
        caches.append((c1, cs, c2, cc, c3, cf))
    h, cfin = rms_fwd(x, P["dec.ln_f"])
    logits = h @ P["embed"].T
    return logits, (caches, cfin, h, didx)


def decoder_bwd(dlogits, P: MicroModelParams, cache, dec_in, G):
    """Returns the gradient w.r.t. the encoder output."""
    cfg = P.cfg
    caches, cfin, h, didx = cache
    d = cfg.d_model
    G["embed"] += dlogits.reshape(-1, dlogits.shape[-1]).T @ h.reshape(-1, d)
    dx, dg = rms_bwd(dlogits @ P["embed"], cfin)
    G["dec.ln_f"] += dg
    denc = 0.0
    for i in reversed(range(cfg.n_dec_layers)):
        p = f"dec.{i}"
        c1, cs, c2, cc, c3, cf = caches[i]
        dh = ffn_bwd(dx, P, p + ".ff", cf, G)
        d3, dg = rms_bwd(dh, c3)
        G[p + ".ln3"] += dg
        dx = dx + d3
        dq, dkv, _ = mha_bwd(dx, P, p + ".cross", cc, G, cfg.n_heads)
        denc = denc + dkv
        d2, dg = rms_bwd(dq, c2)
        G[p + ".ln2"] += dg
        dx = dx + d2
        dq, dkv, ds = mha_bwd(dx, P, p + ".self", cs, G, cfg.n_heads)
        G["dec.rel_bias"] += _bias_grad(ds, didx[None], cfg.n_buckets)
        d1, dg = rms_bwd(dq + dkv, c1)
        G[p + ".ln1"] += dg
        dx = dx + d1
    np.add.at(G["embed"], dec_in, dx)
    return denc


# -- loss --------------------------------------------------------------------

def _log_softmax(z):
    z = z - z.max(-1, keepdims=True)
    return z - np.log(np.exp(z).sum(-1, keepdims=True))


def forward_backward(P: MicroModelParams, batch: Batch, need_grad: bool = True):
    """Mean token cross-entropy over valid target positions (and its gradients)."""
    if batch.dec_in is None:
        raise ValueError("batch carries no targets")
    x = embed_batch(P, batch)
    enc, ecache = encoder_fwd(P, x, batch)
    logits, dcache = decoder_fwd(P, batch.dec_in, enc, batch.enc_valid)
    lp = _log_softmax(logits)
    n = batch.dec_valid.sum()
    picked = np.take_along_axis(lp, batch.dec_out[..., None], -1)[..., 0]
    loss = float(-(picked * batch.dec_valid).sum() / n)
    if not need_grad:
        return loss, None
    G = {k: np.zeros_like(v) for k, v in P.tensors.items()}
    dl = np.exp(lp)
    np.put_along_axis(dl, batch.dec_out[..., None],
                      np.take_along_axis(dl, batch.dec_out[..., None], -1) - 1.0, -1)
    dl *= (batch.dec_valid / n)[..., None]
    denc = decoder_bwd(dl, P, dcache, batch.dec_in, G)
    dx = encoder_bwd(denc, P, ecache, batch, G)
    embed_batch_bwd(dx, P, batch, G)
    return loss, G


def loss(inp: MultimodalInput, target_ids, params: MicroModelParams, bos: int = 2) -> float:
    """Teacher-forced mean cross-entropy of ``target_ids`` for one input."""
    target_ids = list(target_ids)
    if not target_ids:
        raise ValueError("empty target")
    if min(target_ids) < 0 or max(target_ids) >= params.vocab_size:
        raise ValueError("target id outside the vocabulary")
    inp.validate(params.cfg, params.vocab_size)
    return forward_backward(params, make_batch([inp], params.cfg, [target_ids], bos), need_grad=False)[0]


def greedy_decode(inp: MultimodalInput, params: MicroModelParams, max_len: int,
                  bos: int = 2, eos: int = 1) -> list[int]:
    """Argmax decoding (smallest id wins ties); stops at EOS or ``max_len`` tokens."""
    inp.validate(params.cfg, params.vocab_size)
    batch = make_batch([inp], params.cfg)
    enc, _ = encoder_fwd(params, embed_batch(params, batch), batch)
    out: list[int] = []
    for _ in range(max_len):
        dec_in = np.array([[bos] + out], dtype=np.int64)
        logits, _ = decoder_fwd(params, dec_in, enc, batch.enc_valid)
        nxt = int(np.argmax(logits[0, -1]))
        out.append(nxt)
        if nxt == eos:
            break
    return out
