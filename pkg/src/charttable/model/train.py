"""Training loop, masked-cell evaluation and the ``microckpt/1`` checkpoint format."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..stc import decode_copy
from .config import ModelConfig
from .network import MicroModelParams, forward_backward, greedy_decode, init_params, make_batch
from .vocab import Vocab

log = logging.getLogger(__name__)

CKPT_MAGIC = "microckpt/1"
OPTIMIZERS = ("sgd", "momentum", "adam")


class TrainingDivergedError(FloatingPointError):
    def __init__(self, step: int, value: float):
        self.step = step
        super().__init__(f"loss became {value} at step {step}")


@dataclass
class TrainResult:
    params: MicroModelParams
    losses: list = field(default_factory=list)
    seconds: float = 0.0


def _clip(grads: dict, max_norm: float):
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm and norm > max_norm:
        s = max_norm / norm
        for g in grads.values():
            g *= s
    return norm


def corpus_loss(params: MicroModelParams, examples, vocab: Vocab, batch_size: int = 32) -> float:
    """Token-weighted mean loss over a whole example list."""
    tot, n = 0.0, 0
    for i in range(0, len(examples), batch_size):
        chunk = examples[i:i + batch_size]
        b = make_batch([e[0] for e in chunk], params.cfg, [e[1] for e in chunk], vocab.bos, vocab.pad)
        k = int(b.dec_valid.sum())
        tot += forward_backward(params, b, need_grad=False)[0] * k
        n += k
    return tot / n


def train_micro(examples, cfg: ModelConfig, vocab: Vocab, steps: int, lr: float, seed: int = 0,
                batch_size: int = 16, optimizer: str = "momentum", momentum: float = 0.9,
                clip: float = 1.0, warmup: int = 0, params: MicroModelParams | None = None,
                log_every: int = 0) -> TrainResult:
    """Minibatch training on (input, target) pairs; deterministic given ``seed``."""
    if not examples:
        raise ValueError("training corpus is empty")
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {optimizer!r}")
    if steps < 0 or not lr > 0:
        raise ValueError("steps must be >= 0 and lr > 0")
    P = params.copy() if params is not None else init_params(cfg, len(vocab), seed)
    rng = np.random.default_rng([seed, 1])
    m = {k: np.zeros_like(v) for k, v in P.tensors.items()}
    s = {k: np.zeros_like(v) for k, v in P.tensors.items()}
    b1, b2 = 0.9, 0.999
    order, pos = rng.permutation(len(examples)), 0
    res = TrainResult(P)
    t0 = time.perf_counter()
    for step in range(steps):
        if pos + batch_size > len(order):
            order, pos = rng.permutation(len(examples)), 0
        idx = order[pos:pos + batch_size]
        pos += batch_size
        chunk = [examples[i] for i in idx]
        batch = make_batch([e[0] for e in chunk], cfg, [e[1] for e in chunk], vocab.bos, vocab.pad)
        loss, G = forward_backward(P, batch)
        if not math.isfinite(loss):
            raise TrainingDivergedError(step, loss)
        res.losses.append(loss)
        _clip(G, clip)
        rate = lr * min(1.0, (step + 1) / warmup) if warmup else lr
        for k, w in P.tensors.items():
            g = G[k]
            if optimizer == "sgd":
                w -= rate * g
            elif optimizer == "momentum":
                m[k] = momentum * m[k] + g
                w -= rate * m[k]
            else:
                m[k] = b1 * m[k] + (1 - b1) * g
                s[k] = b2 * s[k] + (1 - b2) * g * g
                mh = m[k] / (1 - b1 ** (step + 1))
                sh = s[k] / (1 - b2 ** (step + 1))
                w -= rate * mh / (np.sqrt(sh) + 1e-8)
        if log_every and step % log_every == 0:
            log.info("step %d loss %.4f", step, loss)
    try:
        P.check_finite()
    except FloatingPointError as exc:
        raise TrainingDivergedError(steps, float("nan")) from exc
    res.seconds = time.perf_counter() - t0
    return res


def masked_cell_accuracy(params: MicroModelParams, examples, vocab: Vocab, max_len: int | None = None):
    """Fraction of masked cells whose decoded unit equals the gold unit.

    Units are read per mask sentinel from the decoded and gold token strings.
    """
    hit = tot = 0
    for inp, target in examples:
        gold = _units(vocab.decode(target))
        pred = _units(vocab.decode(greedy_decode(inp, params, max_len or len(target) + 8, vocab.bos, vocab.eos)))
        for k, unit in gold.items():
            tot += 1
            hit += int(pred.get(k) == unit)
    return hit / tot if tot else float("nan"), tot


def _units(text: str) -> dict:
    out, cur = {}, None
    for w in text.split(" "):
        if w.startswith("<mask_") and w.endswith(">"):
            cur = w
            out[cur] = []
        elif cur is not None:
            out[cur].append(w)
    return {k: " ".join(v) for k, v in out.items()}


def decode_to_text(ids, vocab: Vocab, ocr_tokens) -> str:
    """Token ids to text with OCR sentinels replaced by their scene text."""
    return decode_copy(vocab.decode(ids), ocr_tokens)


# -- checkpoint --------------------------------------------------------------

def save_checkpoint(path, params: MicroModelParams, meta: dict | None = None):
    """Text header (config, one line per tensor: name dtype shape offset) then raw float64 LE."""
    names = sorted(params.tensors)
    lines = [CKPT_MAGIC, "config " + json.dumps(params.cfg.to_dict(), sort_keys=True),
             f"vocab_size {params.vocab_size}", "meta " + json.dumps(meta or {}, sort_keys=True)]
    off = 0
    for n in names:
        t = params.tensors[n]
        lines.append(f"tensor {n} <f8 {'x'.join(map(str, t.shape))} {off}")
        off += t.size * 8
    lines.append("end")
    with open(path, "wb") as f:
        f.write(("\n".join(lines) + "\n").encode("ascii"))
        for n in names:
            f.write(np.ascontiguousarray(params.tensors[n], dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[MicroModelParams, dict]:
    with open(path, "rb") as f:
        raw = f.read()
    header_end = raw.find(b"\nend\n")
    if not raw.startswith(CKPT_MAGIC.encode() + b"\n") or header_end < 0:
        raise ValueError(f"{path}: not a {CKPT_MAGIC} checkpoint")
    body = raw[header_end + 5:]
    cfg = vsize = None
    meta, tensors = {}, {}
    for line in raw[:header_end].decode("ascii").split("\n")[1:]:
        kind, _, rest = line.partition(" ")
        if kind == "config":
            cfg = ModelConfig.from_dict(json.loads(rest))
        elif kind == "vocab_size":
            vsize = int(rest)
        elif kind == "meta":
            meta = json.loads(rest)
        elif kind == "tensor":
            name, dtype, shape, off = rest.split(" ")
            shp = tuple(int(x) for x in shape.split("x")) if shape else ()
            size = int(np.prod(shp)) * 8
            off = int(off)
            if dtype != "<f8" or off + size > len(body):
                raise ValueError(f"{path}: bad tensor entry {name}")
            tensors[name] = np.frombuffer(body[off:off + size], dtype="<f8").reshape(shp).copy()
        else:
            raise ValueError(f"{path}: unknown header line {kind!r}")
    if cfg is None or vsize is None:
        raise ValueError(f"{path}: header lacks config or vocab_size")
    P = MicroModelParams(cfg, vsize, tensors)
    from .network import param_shapes
    expect = param_shapes(cfg, vsize)
    if {k: v.shape for k, v in tensors.items()} != expect:
        raise ValueError(f"{path}: tensor set does not match the config")
    return P, meta
