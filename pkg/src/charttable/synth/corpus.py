"""Synthetic chart-table corpus generation and the ``chartsample/1`` manifest."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..table import CHART_TYPES, ConfigError, Table, TableGenConfig, generate_random_table, mix64, sample_seed
from .annotate import Annotation, emit_annotations
from .layout import DEFAULT_PALETTE, ChartSpec, layout_chart
from .render import render

SCHEMA = "chartsample/1"

DEFAULT_X_TITLES = ("Category", "Region", "Country", "Item")
DEFAULT_Y_TITLES = ("Value", "Amount", "Percent", "Units")


@dataclass(frozen=True)
class SpecGenConfig:
    width: tuple[int, int] = (416, 480)
    height: tuple[int, int] = (304, 352)
    tick_count: tuple[int, int] = (4, 6)
    font_size: int = 12
    margins: int = 10
    legend_top_weight: float = 0.25
    axis_title_rate: float = 0.5
    shuffle_palette: bool = True
    palette: tuple = DEFAULT_PALETTE
    x_title_pool: tuple = DEFAULT_X_TITLES
    y_title_pool: tuple = DEFAULT_Y_TITLES

    def __post_init__(self):
        for name in ("width", "height", "tick_count"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ConfigError(f"{name} range is empty: {(lo, hi)}")
        if self.width[0] < 128 or self.height[0] < 128:
            raise ConfigError("image dimensions must be >= 128")
        if self.tick_count[0] < 2:
            raise ConfigError("tick_count must be >= 2")
        if not 0 <= self.legend_top_weight <= 1 or not 0 <= self.axis_title_rate <= 1:
            raise ConfigError("legend_top_weight and axis_title_rate must be in [0, 1]")


def sample_chart_spec(kind: str, table: Table, table_cfg: TableGenConfig, cfg: SpecGenConfig,
                      rng: np.random.Generator) -> ChartSpec:
    orientation = "vertical"
    if kind == "bar" and rng.random() < table_cfg.horizontal_weight:
        orientation = "horizontal"
    palette = list(cfg.palette)
    if cfg.shuffle_palette:
        palette = [palette[i] for i in rng.permutation(len(palette))]
    x_title = y_title = None
    if kind != "pie" and rng.random() < cfg.axis_title_rate:
        x_title = cfg.x_title_pool[int(rng.integers(len(cfg.x_title_pool)))]
        y_title = cfg.y_title_pool[int(rng.integers(len(cfg.y_title_pool)))]
    return ChartSpec(
        chart_type=kind,
        orientation=orientation,
        width=int(rng.integers(cfg.width[0], cfg.width[1] + 1)),
        height=int(rng.integers(cfg.height[0], cfg.height[1] + 1)),
        palette=tuple(palette),
        tick_count=int(rng.integers(cfg.tick_count[0], cfg.tick_count[1] + 1)),
        font_size=cfg.font_size,
        legend_position="top" if rng.random() < cfg.legend_top_weight else "right",
        margins=cfg.margins,
        x_title=x_title,
        y_title=y_title,
    )


@dataclass
class ChartSample:
    id: str
    chart_type: str
    table: Table
    spec: ChartSpec
    annotation: Annotation
    image_path: str | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        ann = self.annotation
        return {
            "schema": SCHEMA,
            "id": self.id,
            "chart_type": self.chart_type,
            "table": self.table.to_dict(),
            "spec": self.spec.to_dict(),
            "image_path": self.image_path,
            "width": ann.width,
            "height": ann.height,
            "ocr_tokens": [{"text": t.text, "bbox": list(t.bbox)} for t in ann.ocr_tokens],
            "regions": [r.to_dict() for r in ann.regions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChartSample":
        spec = ChartSpec.from_dict(d["spec"])
        ann = Annotation.from_dict({
            "width": d.get("width", spec.width), "height": d.get("height", spec.height),
            "ocr_tokens": d["ocr_tokens"], "regions": d["regions"],
        })
        return cls(d["id"], d["chart_type"], Table.from_dict(d["table"]), spec, ann, d.get("image_path"))


def make_sample(index: int, global_seed: int, table_cfg: TableGenConfig,
                spec_cfg: SpecGenConfig) -> tuple[ChartSample, object]:
    """Build sample ``index``; returns (sample, layout)."""
    s = sample_seed(global_seed, index)
    table, kind = generate_random_table(table_cfg, s)
    spec = sample_chart_spec(kind, table, table_cfg, spec_cfg, np.random.default_rng([s, 1]))
    layout = layout_chart(table, spec, mix64(s ^ 2))
    ann = emit_annotations(layout)
    return ChartSample(f"{index:06d}", kind, table, spec, ann), layout


def _write_png(path: Path, img: np.ndarray):
    from PIL import Image
    Image.fromarray(img, mode="RGB").save(path, format="PNG", optimize=False)


def dumps_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def synth_corpus(table_cfg: TableGenConfig, spec_cfg: SpecGenConfig, n: int, global_seed: int,
                 out_dir, render_images: bool = True, force: bool = False) -> Path:
    """Write ``n`` samples under ``out_dir``; returns the manifest path."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = Path(out_dir)
    manifest = out / "manifest.jsonl"
    if manifest.exists() and not force:
        raise FileExistsError(f"{manifest} exists (pass force to overwrite)")
    img_dir = out / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    tmp = manifest.with_suffix(".jsonl.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for i in range(n):
            try:
                sample, layout = make_sample(i, global_seed, table_cfg, spec_cfg)
                if render_images:
                    rel = f"images/{sample.id}.png"
                    _write_png(out / rel, render(layout, sample.spec))
                    sample.image_path = rel
            except OSError as exc:
                raise OSError(f"sample {i}: {exc}") from exc
            except ValueError as exc:
                raise ValueError(f"sample {i}: {exc}") from exc
            fh.write(dumps_line(sample.to_dict()) + "\n")
    os.replace(tmp, manifest)
    return manifest


def read_manifest(path) -> list[ChartSample]:
    """Load and validate a manifest; errors name the offending line."""
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                if not isinstance(d, dict) or d.get("schema") != SCHEMA:
                    got = d.get("schema") if isinstance(d, dict) else None
                    raise ValueError(f"expected schema {SCHEMA!r}, got {got!r}")
                if d.get("chart_type") not in CHART_TYPES:
                    raise ValueError(f"unknown chart_type {d.get('chart_type')!r}")
                sample = ChartSample.from_dict(d)
                sample.annotation.validate()
            except (KeyError, TypeError, ValueError) as exc:
                what = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
                raise ValueError(f"line {lineno}: {what}") from exc
            samples.append(sample)
    return samples


def chart_type_counts(samples) -> dict:
    counts = {k: 0 for k in CHART_TYPES}
    for s in samples:
        counts[s.chart_type] += 1
    return counts
