"""Round-trip and extractive-QA evaluation over a sample list."""

from __future__ import annotations

import time

from .geomparse import ParseError, parse_chart
from .metrics import answer_from_table, generate_extractive_qa, relaxed_accuracy
from .ocr import NoiseModel, perturb_ocr
from .table import CHART_TYPES, mix64, table_close

ERROR_CLASSES = ("parse_failure", "header_miss", "value_error")


def pixel_bound(report) -> float:
    """Half a pixel in axis units: the rounding bound of the rasterizer."""
    if report.value_per_px is None:
        return 0.0
    return 0.5 * report.value_per_px * (1 + 1e-9)


def roundtrip_report(samples, noise: NoiseModel | None = None, seed: int = 0,
                     qa_per_table: int = 2, strict_case: bool = False) -> dict:
    """Parse every sample's annotation back into a table and score it.

    Headers are compared exactly, numbers against the half-pixel bound; value
    accuracy is relaxed accuracy over position-aligned cells.  QA questions
    come from the gold table and are answered by header lookup in the parse.
    """
    t0 = time.perf_counter()
    per_type = {k: {"n": 0, "exact": 0, "parse_failures": 0} for k in CHART_TYPES}
    hdr_ok = hdr_n = val_ok = val_n = 0
    qa_ok = qa_n = 0
    errors = {k: 0 for k in ERROR_CLASSES}
    flagged = 0
    max_residual = 0.0
    rows = []
    for idx, s in enumerate(samples):
        gold = s.table
        pt = per_type[s.chart_type]
        pt["n"] += 1
        ann = s.annotation
        if noise is not None and not noise.is_identity:
            ann = perturb_ocr(ann, noise, mix64(seed ^ idx))
        try:
            parsed, rep = parse_chart(ann)
            err = None
        except (ParseError, ValueError) as exc:
            parsed, rep, err = None, None, str(exc)
        nr, nc = gold.shape
        hdr_n += nr + nc
        val_n += nr * nc
        exact = False
        if parsed is not None:
            pt_bound = pixel_bound(rep)
            exact = table_close(parsed, gold, 0.0, pt_bound)[0]
            hdr_ok += sum(a == b for a, b in zip(parsed.col_headers, gold.col_headers))
            hdr_ok += sum(a == b for a, b in zip(parsed.row_headers, gold.row_headers))
            if parsed.shape == gold.shape:
                val_ok += sum(relaxed_accuracy(parsed.cell_text(r, c), gold.cell_text(r, c), strict_case)
                              for r in range(nr) for c in range(nc))
            flagged += bool(rep.flags)
            if rep.residual is not None:
                max_residual = max(max_residual, rep.residual)
        else:
            pt["parse_failures"] += 1
        pt["exact"] += exact
        qas = generate_extractive_qa(gold, min(qa_per_table, nr * nc), mix64(seed ^ idx ^ 0x9A))
        for qa in qas:
            _, cls = answer_from_table(parsed, gold, qa)
            qa_n += 1
            if cls == "ok":
                qa_ok += 1
            else:
                errors[cls] += 1
        rows.append({"id": s.id, "chart_type": s.chart_type, "exact": exact, "error": err,
                     "report": rep.to_dict() if rep is not None else None})
    n = len(samples)
    return {
        "n": n,
        "noise": None if noise is None or noise.is_identity else vars(noise) | {"confusions": None},
        "fidelity": sum(r["exact"] for r in rows) / n if n else float("nan"),
        "per_type": {k: v | {"fidelity": v["exact"] / v["n"] if v["n"] else None} for k, v in per_type.items()},
        "header_accuracy": hdr_ok / hdr_n if hdr_n else float("nan"),
        "value_accuracy": val_ok / val_n if val_n else float("nan"),
        "qa": {"n": qa_n, "relaxed_accuracy": qa_ok / qa_n if qa_n else float("nan"), "errors": errors},
        "flagged": flagged,
        "max_residual": max_residual,
        "seconds": time.perf_counter() - t0,
        "samples": rows,
    }
