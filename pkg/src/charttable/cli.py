"""Command-line entry point.

Exit codes: 0 success, 1 runtime or I/O failure, 2 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
from contextlib import contextmanager
from dataclasses import fields, replace
from pathlib import Path

from .config import PipelineConfig, load_config
from .geomparse import ParseError, parse_chart
from .harness import roundtrip_report
from .metrics import QaPair, bleu4, content_selection, generate_extractive_qa, relaxed_accuracy
from .objectives import PREFIXES, ObjectiveError, make_pretraining_example, stc_for_sample
from .ocr import NoiseModel, perturb_ocr
from .stc import header_match_rate
from .synth.corpus import chart_type_counts, dumps_line, read_manifest, synth_corpus
from .table import FlatTable, flatten_table, mix64, parse_flat_table

log = logging.getLogger("charttable")

STC_SCHEMA = "stcrecord/1"
PARSED_SCHEMA = "parsedtable/1"
QA_SCHEMA = "qapair/1"
DEFAULT_STC_PREFIX = "predict table:"


class UsageError(ValueError):
    pass


def parse_noise(spec: str | None, base: NoiseModel) -> NoiseModel:
    """``p=0.1`` sets the character substitution rate; otherwise ``key=value`` pairs."""
    if spec is None:
        return base
    kw = {}
    names = {f.name for f in fields(NoiseModel)} - {"confusions"}
    for part in spec.split(","):
        key, sep, val = part.partition("=")
        key = key.strip()
        if not sep:
            raise UsageError(f"--ocr-noise item {part!r} is not key=value")
        if key == "p":
            key = "char_sub_rate"
        if key not in names:
            raise UsageError(f"unknown --ocr-noise key {key!r}")
        kw[key] = int(val) if key == "bbox_jitter" else float(val)
    return replace(base, **kw)


@contextmanager
def _writer(path, force: bool):
    """Atomic line writer that refuses to clobber without ``force``."""
    p = Path(path)
    if p.exists() and not force:
        raise FileExistsError(f"{p} exists (use --force to overwrite)")
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True)
    tmp = p.with_name(p.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        yield fh
    os.replace(tmp, p)


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


def _json_default(o):
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _finite(x):
    return None if isinstance(x, float) and not math.isfinite(x) else x


# -- commands ----------------------------------------------------------------

def cmd_synth(cfg: PipelineConfig, args) -> int:
    out = Path(args.out or Path(cfg.output_root) / "corpus")
    manifest = synth_corpus(cfg.table, cfg.chart, args.n, cfg.seed, out,
                            render_images=not args.no_images, force=args.force)
    samples = read_manifest(manifest)
    _emit({"manifest": str(manifest), "n": len(samples), "chart_types": chart_type_counts(samples)})
    return 0


def cmd_preprocess(cfg: PipelineConfig, args) -> int:
    samples = read_manifest(args.manifest)
    noise = parse_noise(args.ocr_noise, cfg.ocr_noise)
    out = args.out or str(Path(args.manifest).with_name("stc.jsonl"))
    matched = total = 0
    rates = []
    with _writer(out, args.force) as fh:
        for i, s in enumerate(samples):
            ocr, stc = stc_for_sample(s, args.prefix, noise, mix64(cfg.seed ^ i), cfg.objectives.max_ocr)
            m, t = header_match_rate(stc)
            matched, total = matched + m, total + t
            rates.append(m / t)
            fh.write(dumps_line({
                "schema": STC_SCHEMA, "id": s.id, "prefix": args.prefix, "target": stc.target,
                "plain": flatten_table(s.table, args.prefix).text,
                "ocr": [{"sentinel": n, "text": tok.text, "bbox": list(tok.bbox)}
                        for n, tok in zip(stc.input_sentinels, ocr)],
                "header_match": [m, t], "unmatched_cells": len(stc.matching.unmatched_cells),
            }) + "\n")
    _emit({"records": len(samples), "output": out, "header_match_rate": matched / total if total else None,
           "min_sample_match_rate": min(rates) if rates else None})
    return 0


def cmd_mask(cfg: PipelineConfig, args) -> int:
    rate = cfg.objectives.rate if args.rate is None else args.rate
    if not 0 < rate <= 1:
        raise UsageError(f"--rate must be in (0, 1], got {rate}")
    selector = args.objective or cfg.objectives.selector
    samples = read_manifest(args.manifest)
    noise = parse_noise(args.ocr_noise, cfg.ocr_noise)
    out = args.out or str(Path(args.manifest).with_name("masked.jsonl"))
    stats = {k: {"records": 0, "masked": 0, "eligible": 0} for k in PREFIXES}
    purity = skipped = 0
    with _writer(out, args.force) as fh:
        for i, s in enumerate(samples):
            try:
                rec = make_pretraining_example(s, selector, i, noise, mix64(cfg.seed ^ i), rate,
                                               cfg.model.d_region, cfg.objectives.max_ocr)
            except ObjectiveError as exc:
                if "unsuitable" in str(exc):
                    skipped += 1
                    log.warning("%s", exc)
                    continue
                raise
            st = stats[rec["objective"]]
            st["records"] += 1
            st["masked"] += len(rec["masked_positions"])
            st["eligible"] += rec["eligible"]
            kinds = {p[0] for p in rec["masked_positions"]}
            purity += int(kinds - ({"col", "row"} if rec["objective"] == "MHP" else {"val"}) != set())
            fh.write(dumps_line(rec) + "\n")
    for st in stats.values():
        st["rate"] = st["masked"] / st["eligible"] if st["eligible"] else None
    _emit({"output": out, "rate": rate, "selector": selector, "objectives": stats,
           "purity_violations": purity, "skipped": skipped})
    return 0


def cmd_parse(cfg: PipelineConfig, args) -> int:
    samples = read_manifest(args.manifest)
    noise = parse_noise(args.ocr_noise, cfg.ocr_noise)
    out = args.out or str(Path(args.manifest).with_name("parsed.jsonl"))
    ok = 0
    with _writer(out, args.force) as fh:
        for i, s in enumerate(samples):
            ann = s.annotation if noise.is_identity else perturb_ocr(s.annotation, noise, mix64(cfg.seed ^ i))
            try:
                table, rep = parse_chart(ann)
                rec = {"table": table.to_dict(), "report": rep.to_dict(), "error": None}
                ok += 1
            except (ParseError, ValueError) as exc:
                rec = {"table": None, "report": None, "error": str(exc)}
            fh.write(dumps_line({"schema": PARSED_SCHEMA, "id": s.id} | rec) + "\n")
    _emit({"output": out, "parsed": ok, "failed": len(samples) - ok})
    return 0


def cmd_roundtrip_report(cfg: PipelineConfig, args) -> int:
    samples = read_manifest(args.manifest)
    noise = parse_noise(args.ocr_noise, cfg.ocr_noise)
    rep = roundtrip_report(samples, noise, cfg.seed, cfg.eval.qa_per_table, cfg.eval.strict_case)
    rows = rep.pop("samples")
    if args.out:
        with _writer(args.out, args.force) as fh:
            fh.write(json.dumps(rep | {"samples": rows}, sort_keys=True) + "\n")
    _emit({k: _finite(v) for k, v in rep.items()})
    return 0


def cmd_qa_gen(cfg: PipelineConfig, args) -> int:
    samples = read_manifest(args.manifest)
    out = args.out or str(Path(args.manifest).with_name("qa.jsonl"))
    n = 0
    with _writer(out, args.force) as fh:
        for i, s in enumerate(samples):
            k = min(args.n, s.table.shape[0] * s.table.shape[1])
            for j, qa in enumerate(generate_extractive_qa(s.table, k, mix64(cfg.seed ^ i))):
                fh.write(dumps_line({"schema": QA_SCHEMA, "id": f"{s.id}-{j}", "sample_id": s.id}
                                    | qa.to_dict()) + "\n")
                n += 1
    _emit({"output": out, "questions": n})
    return 0


def _read_jsonl(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except ValueError as exc:
                    raise ValueError(f"{path} line {lineno}: {exc}") from exc
    return out


_TABLE_MARK = re.compile(r" table:(?= [ct]: )")


def _flat_prefix(text: str) -> str:
    m = _TABLE_MARK.search(text)
    return text[:m.start()] if m else ""


def cmd_eval(cfg: PipelineConfig, args) -> int:
    """Score {id, pred} lines against QA records or a chart-sample manifest.

    QA gold: relaxed accuracy and BLEU-4 of answers.  Manifest gold: the pred
    is read as a flattened table (cell-level relaxed accuracy by header
    lookup), BLEU-4 is taken against the flattened gold table and content
    selection against the gold table.
    """
    strict = args.strict_case or cfg.eval.strict_case
    preds = {}
    for d in _read_jsonl(args.pred):
        if "id" not in d or "pred" not in d:
            raise ValueError("prediction lines need 'id' and 'pred'")
        preds[str(d["id"])] = str(d["pred"])
    first = _read_jsonl(args.gold)[:1]
    ra, bl, cs = [], [], []
    missing = 0
    if first and first[0].get("schema") == QA_SCHEMA:
        for d in _read_jsonl(args.gold):
            qa = QaPair.from_dict(d)
            p = preds.get(str(d["id"]))
            if p is None:
                missing += 1
                p = ""
            ra.append(relaxed_accuracy(p, qa.answer, strict))
            bl.append(bleu4(p, [qa.answer]))
    else:
        for s in read_manifest(args.gold):
            p = preds.get(s.id)
            if p is None:
                missing += 1
                p = ""
            gold = s.table
            pref = _flat_prefix(p)
            bl.append(bleu4(p, [flatten_table(gold, pref or "table").text]))
            cs.append(content_selection(p, gold))
            try:
                pt = parse_flat_table(FlatTable(p, pref))
            except ValueError:
                pt = None
            for r, rh in enumerate(gold.row_headers):
                for c, ch in enumerate(gold.col_headers):
                    ans = ""
                    if pt is not None and rh in pt.row_headers and ch in pt.col_headers:
                        ans = pt.cell_text(pt.row_headers.index(rh), pt.col_headers.index(ch))
                    ra.append(relaxed_accuracy(ans, gold.cell_text(r, c), strict))
    if not ra:
        raise ValueError("gold file holds no items")
    rep = {"relaxed_accuracy": sum(ra) / len(ra), "bleu4": sum(bl) / len(bl),
           "content_selection": sum(cs) / len(cs) if cs else None, "n": len(bl),
           "missing_predictions": missing, "strict_case": strict}
    if args.out:
        with _writer(args.out, args.force) as fh:
            fh.write(json.dumps(rep, sort_keys=True) + "\n")
    _emit(rep)
    return 0


def cmd_train_micro(cfg: PipelineConfig, args) -> int:
    import numpy as np

    from .model.data import micro_records, record_to_example
    from .model.network import init_params
    from .model.train import corpus_loss, masked_cell_accuracy, save_checkpoint, train_micro
    from .model.vocab import Vocab

    tc = cfg.train
    steps = tc.steps if args.steps is None else args.steps
    lr = tc.lr if args.lr is None else args.lr
    mc = cfg.model
    vocab = Vocab(mc.n_mask, mc.n_ocr)
    train = [record_to_example(r, vocab, mc) for r in micro_records(tc.n_train, cfg.seed, d_region=mc.d_region)]
    test = [record_to_example(r, vocab, mc)
            for r in micro_records(tc.n_test, mix64(cfg.seed ^ 0x7E57), d_region=mc.d_region)]
    init = init_params(mc, len(vocab), cfg.seed)
    l0 = corpus_loss(init, train, vocab)
    res = train_micro(train, mc, vocab, steps, lr, cfg.seed, tc.batch_size, tc.optimizer, tc.momentum, tc.clip)
    l1 = corpus_loss(res.params, train, vocab)
    acc, ncells = masked_cell_accuracy(res.params, test, vocab)
    rep = {"vocab_size": len(vocab), "ln_vocab": float(np.log(len(vocab))), "initial_loss": l0,
           "final_loss": l1, "loss_ratio": l1 / l0, "heldout_cell_accuracy": acc, "heldout_cells": ncells,
           "steps": steps, "lr": lr, "optimizer": tc.optimizer, "train_seconds": res.seconds}
    out = Path(args.out or Path(cfg.output_root) / "micro.ckpt")
    if out.exists() and not args.force:
        raise FileExistsError(f"{out} exists (use --force to overwrite)")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, res.params, {"seed": cfg.seed, "steps": steps})
    with _writer(str(out) + ".report.json", True) as fh:
        fh.write(json.dumps(rep | {"losses": res.losses}, sort_keys=True) + "\n")
    _emit(rep | {"checkpoint": str(out)})
    return 0


def cmd_import(cfg: PipelineConfig, args) -> int:
    samples = read_manifest(args.input)
    with _writer(args.out, args.force) as fh:
        for s in samples:
            fh.write(dumps_line(s.to_dict()) + "\n")
    _emit({"accepted": len(samples), "output": args.out, "chart_types": chart_type_counts(samples)})
    return 0


# -- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="charttable", description="Chart/table corpus, parsing and evaluation tools.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML pipeline config")
    common.add_argument("--seed", type=int, help="global seed (overrides the config)")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--no-images", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", parents=[common], help="STC-encode a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.add_argument("--prefix", default=DEFAULT_STC_PREFIX)
    p.add_argument("--ocr-noise")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("mask", parents=[common], help="build MHP/MVP masked pairs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.add_argument("--objective", help="alternate | mhp | mvp | weighted:<p_mhp>")
    p.add_argument("--rate", type=float)
    p.add_argument("--ocr-noise")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("parse", parents=[common], help="parse annotations back into tables")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.add_argument("--ocr-noise")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("roundtrip-report", parents=[common], help="parse and score against the truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="also write the full per-sample report here")
    p.add_argument("--ocr-noise")
    p.set_defaults(func=cmd_roundtrip_report)

    p = sub.add_parser("qa-gen", parents=[common], help="templated extractive QA pairs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--n", type=int, default=2, help="questions per table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_qa_gen)

    p = sub.add_parser("eval", parents=[common], help="score predictions")
    p.add_argument("--gold", required=True, help="qa-gen output or chart-sample manifest")
    p.add_argument("--pred", required=True, help="JSONL of {id, pred}")
    p.add_argument("--strict-case", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train-micro", parents=[common], help="train the micro model on the copy task")
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--out", help="checkpoint path")
    p.set_defaults(func=cmd_train_micro)

    p = sub.add_parser("import", parents=[common], help="validate an external manifest")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_import)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig()
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        return args.func(cfg, args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
