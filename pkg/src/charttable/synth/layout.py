"""Deterministic chart geometry shared by the renderer, the annotator and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..table import Table, format_number
from .font import CELL_H, CELL_W
from .ticks import choose_tick_values

Box = tuple  # (x1, y1, x2, y2) integer pixels, x2/y2 exclusive

DEFAULT_PALETTE = (
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40), (148, 103, 189),
    (140, 86, 75), (227, 119, 194), (127, 127, 127), (188, 189, 34), (23, 190, 207),
)
BACKGROUND = (255, 255, 255)
TEXT_COLOR = (0, 0, 0)
AXIS_COLOR = (64, 64, 64)
GRID_COLOR = (225, 225, 225)

LABEL_GAP = 4


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class ChartSpec:
    chart_type: str
    orientation: str = "vertical"
    width: int = 448
    height: int = 320
    palette: tuple = DEFAULT_PALETTE
    tick_count: int = 5
    font_size: int = 12
    legend_position: str = "right"
    margins: int = 10
    x_title: str | None = None
    y_title: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "palette", tuple(tuple(int(c) for c in rgb) for rgb in self.palette))
        if self.chart_type not in ("bar", "line", "pie"):
            raise LayoutError(f"unknown chart type {self.chart_type!r}")
        if self.orientation not in ("vertical", "horizontal"):
            raise LayoutError(f"unknown orientation {self.orientation!r}")
        if self.orientation == "horizontal" and self.chart_type != "bar":
            raise LayoutError("horizontal orientation applies to bar charts only")
        if self.width < 128 or self.height < 128:
            raise LayoutError("width and height must be >= 128")
        if self.tick_count < 2:
            raise LayoutError("tick_count must be >= 2")
        if not self.palette or any(len(c) != 3 or not all(0 <= v <= 255 for v in c) for c in self.palette):
            raise LayoutError("palette must be a non-empty list of RGB triples")
        if len(set(self.palette)) != len(self.palette):
            raise LayoutError("palette colors must be distinct")
        if self.legend_position not in ("right", "top"):
            raise LayoutError(f"unknown legend position {self.legend_position!r}")
        if self.font_size < 6 or self.margins < 0:
            raise LayoutError("font_size must be >= 6 and margins >= 0")

    @property
    def scale(self) -> int:
        return max(1, int(round(self.font_size / CELL_H)))

    def to_dict(self) -> dict:
        return {
            "chart_type": self.chart_type, "orientation": self.orientation,
            "width": self.width, "height": self.height,
            "palette": [list(c) for c in self.palette], "tick_count": self.tick_count,
            "font_size": self.font_size, "legend_position": self.legend_position,
            "margins": self.margins, "x_title": self.x_title, "y_title": self.y_title,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChartSpec":
        return cls(**d)


@dataclass(frozen=True)
class TextItem:
    text: str
    box: Box
    category: str | None  # None: text without a region of its own (pie legend heading)


@dataclass(frozen=True)
class Mark:
    kind: str  # bar | line | pieSlice
    series: int
    category: int | None
    box: Box
    color: tuple
    points: tuple | None = None  # line vertices
    angles: tuple | None = None  # pie slice (start, end) degrees, counter-clockwise


@dataclass(frozen=True)
class ValueAxis:
    direction: str  # "y" (vertical charts) or "x" (horizontal bars)
    ticks: tuple
    tick_px: tuple
    axis_min: float
    axis_max: float


@dataclass
class LayoutPlan:
    width: int
    height: int
    chart_type: str
    orientation: str
    plot_area: Box
    axis: ValueAxis | None
    marks: list = field(default_factory=list)
    texts: list = field(default_factory=list)
    legend_box: Box | None = None
    previews: list = field(default_factory=list)  # (series index, box, color)
    pie_center: tuple | None = None
    pie_radius: float | None = None


def _rpx(v: float) -> int:
    return int(math.floor(v + 0.5))


def _text_box_at(text: str, x1: int, y1: int, s: int) -> Box:
    return (x1, y1, x1 + CELL_W * s * len(text), y1 + CELL_H * s)


def _text_box_centered(text: str, cx: int, cy: int, s: int) -> Box:
    w, h = CELL_W * s * len(text), CELL_H * s
    return (cx - w // 2, cy - h // 2, cx - w // 2 + w, cy - h // 2 + h)


def _inside(box: Box, w: int, h: int) -> bool:
    x1, y1, x2, y2 = box
    return 0 <= x1 < x2 <= w and 0 <= y1 < y2 <= h


def value_to_px(v: float, axis: ValueAxis, lo_px: int, hi_px: int) -> float:
    """Affine value->pixel map.  For the y axis lo_px is the plot bottom."""
    frac = (v - axis.axis_min) / (axis.axis_max - axis.axis_min)
    return lo_px + frac * (hi_px - lo_px)


def layout_chart(table: Table, spec: ChartSpec, seed: int) -> LayoutPlan:
    rng = np.random.default_rng(seed & ((1 << 64) - 1))
    nrows, ncols = table.shape
    for r, c in ((r, c) for r in range(nrows) for c in range(ncols)):
        if not isinstance(table.values[r][c], float):
            raise LayoutError(f"cell ({r}, {c}) is not numeric")
    if spec.chart_type == "pie":
        if ncols != 1:
            raise LayoutError(f"pie chart needs exactly one value column, table has {ncols}")
        if nrows > len(spec.palette):
            raise LayoutError(f"{nrows} slices exceed palette of {len(spec.palette)} colors")
        plan = _layout_pie(table, spec, rng)
    else:
        if nrows > len(spec.palette):
            raise LayoutError(f"{nrows} series exceed palette of {len(spec.palette)} colors")
        plan = _layout_xy(table, spec, rng)
    for item in plan.texts:
        if not _inside(item.box, spec.width, spec.height):
            raise LayoutError(f"text {item.text!r} at {item.box} falls outside the image")
    for m in plan.marks:
        if not _inside(m.box, spec.width, spec.height):
            raise LayoutError(f"{m.kind} mark at {m.box} falls outside the image")
    return plan


def _legend(labels, palette, spec: ChartSpec, anchor_x2: int, anchor_y1: int, heading: str | None,
            horizontal: bool, anchor_x1: int | None = None):
    """Lay out a legend; returns (legend box, previews, text items)."""
    s = spec.scale
    ch = CELL_H * s
    pad = 4
    texts, previews = [], []
    if horizontal:
        x = anchor_x1 + pad
        y = anchor_y1 + pad
        if heading is not None:
            b = _text_box_at(heading, x, y, s)
            texts.append(TextItem(heading, b, None))
            x = b[2] + 3 * pad
        for i, lab in enumerate(labels):
            pb = (x, y, x + ch, y + ch)
            lb = _text_box_at(lab, x + ch + pad, y, s)
            previews.append((i, pb, palette[i]))
            texts.append(TextItem(lab, lb, "LegendLabel"))
            x = lb[2] + 3 * pad
        box = (anchor_x1, anchor_y1, x - 2 * pad, y + ch + pad)
        return box, previews, texts
    width = max([len(lab) for lab in labels] + [0]) * CELL_W * s + ch + 3 * pad
    if heading is not None:
        width = max(width, len(heading) * CELL_W * s + 2 * pad)
    x1 = anchor_x2 - width
    y = anchor_y1 + pad
    if heading is not None:
        b = _text_box_at(heading, x1 + pad, y, s)
        texts.append(TextItem(heading, b, None))
        y = b[3] + pad
    for i, lab in enumerate(labels):
        pb = (x1 + pad, y, x1 + pad + ch, y + ch)
        lb = _text_box_at(lab, pb[2] + pad, y, s)
        previews.append((i, pb, palette[i]))
        texts.append(TextItem(lab, lb, "LegendLabel"))
        y = lb[3] + pad
    return (x1, anchor_y1, anchor_x2, y), previews, texts


def _header_block(table: Table, spec: ChartSpec):
    """Title and legend-on-top rows; returns (texts, next free y)."""
    s, m = spec.scale, spec.margins
    texts = []
    top = m
    if table.title is not None:
        b = _text_box_centered(table.title, spec.width // 2, top + CELL_H * s // 2, s)
        texts.append(TextItem(table.title, b, "ChartTitle"))
        top = b[3] + 6
    return texts, top


def _layout_xy(table: Table, spec: ChartSpec, rng) -> LayoutPlan:
    s, m = spec.scale, spec.margins
    ch, cw = CELL_H * s, CELL_W * s
    W, H = spec.width, spec.height
    nrows, ncols = table.shape
    horizontal = spec.chart_type == "bar" and spec.orientation == "horizontal"
    texts, top = _header_block(table, spec)

    legend_top = spec.legend_position == "top"
    right = W - m
    legend_box = previews = None
    if legend_top:
        legend_box, previews, ltexts = _legend(table.row_headers, spec.palette, spec, 0, top, None,
                                               True, anchor_x1=m)
        texts += ltexts
        top = legend_box[3] + 6
    if spec.y_title is not None:
        b = _text_box_at(spec.y_title, m, top, s)
        texts.append(TextItem(spec.y_title, b, "yAxisTitle"))
        top = b[3] + 4
    bottom = H - m
    if spec.x_title is not None:
        b = _text_box_centered(spec.x_title, W // 2, bottom - ch // 2, s)
        texts.append(TextItem(spec.x_title, b, "xAxisTitle"))
        bottom = b[1] - 4

    vals = np.array([[float(v) for v in row] for row in table.values])
    lo, hi = min(float(vals.min()), 0.0), max(float(vals.max()), 0.0)
    ticks = choose_tick_values(lo, hi, spec.tick_count)
    nt = len(ticks)
    tick_txt = [format_number(t) for t in ticks]
    max_tick_w = max(len(t) for t in tick_txt) * cw

    if horizontal:
        cat_w = max(len(c) for c in table.col_headers) * cw
        plot_left = m + cat_w + 2 * LABEL_GAP
        plot_bottom = bottom - ch - LABEL_GAP
        plot_top = top + 2
    else:
        plot_left = m + max_tick_w + 2 * LABEL_GAP
        plot_bottom = bottom - ch - LABEL_GAP
        plot_top = top + ch // 2 + 2
    if not legend_top:
        lbox, previews, ltexts = _legend(table.row_headers, spec.palette, spec, right, plot_top, None,
                                         False)
        legend_box = lbox
        texts += ltexts
        right = lbox[0] - 2 * LABEL_GAP
    plot_right = right - (max_tick_w // 2 + 2 if horizontal else 0)

    if horizontal:
        avail = plot_right - plot_left
    else:
        avail = plot_bottom - plot_top
    unit = avail // (nt - 1)
    if unit < 4 or plot_right - plot_left < 8 * ncols or plot_bottom - plot_top < 8 * ncols:
        raise LayoutError("image too small for this table")
    span_px = unit * (nt - 1)
    if horizontal:
        plot_right = plot_left + span_px
        tick_px = tuple(plot_left + i * unit for i in range(nt))
    else:
        plot_top = plot_bottom - span_px
        tick_px = tuple(plot_bottom - i * unit for i in range(nt))
    axis = ValueAxis("x" if horizontal else "y", tuple(ticks), tick_px, ticks[0], ticks[-1])
    plot = (plot_left, plot_top, plot_right, plot_bottom)

    for t, px in zip(tick_txt, tick_px):
        if horizontal:
            b = _text_box_centered(t, px, plot_bottom + LABEL_GAP + ch // 2, s)
            texts.append(TextItem(t, b, "xAxisLabel"))
        else:
            w = len(t) * cw
            b = (plot_left - LABEL_GAP - w, px - ch // 2, plot_left - LABEL_GAP, px - ch // 2 + ch)
            texts.append(TextItem(t, b, "yAxisLabel"))

    cat_extent = (plot_bottom - plot_top) if horizontal else (plot_right - plot_left)
    cat_origin = plot_top if horizontal else plot_left
    band = cat_extent / ncols
    centers = [_rpx(cat_origin + (c + 0.5) * band) for c in range(ncols)]
    for c, label in enumerate(table.col_headers):
        if horizontal:
            w = len(label) * cw
            b = (plot_left - LABEL_GAP - w, centers[c] - ch // 2, plot_left - LABEL_GAP,
                 centers[c] - ch // 2 + ch)
            texts.append(TextItem(label, b, "yAxisLabel"))
        else:
            b = _text_box_centered(label, centers[c], plot_bottom + LABEL_GAP + ch // 2, s)
            texts.append(TextItem(label, b, "xAxisLabel"))

    marks = []
    if spec.chart_type == "bar":
        frac = float(rng.uniform(0.6, 0.8))
        group = band * frac
        bar_w = group / nrows
        if bar_w < 1.0:
            raise LayoutError("bars narrower than one pixel")
        for c in range(ncols):
            start = cat_origin + c * band + (band - group) / 2
            edges = [_rpx(start + k * bar_w) for k in range(nrows + 1)]
            for r in range(nrows):
                v = vals[r, c]
                color = spec.palette[r]
                if horizontal:
                    xe = _rpx(value_to_px(v, axis, plot_left, plot_right))
                    x1 = plot_left if xe > plot_left else xe - 1
                    box = (x1, edges[r], xe, edges[r + 1])
                else:
                    yt = _rpx(value_to_px(v, axis, plot_bottom, plot_top))
                    y2 = plot_bottom if yt < plot_bottom else yt + 1
                    box = (edges[r], yt, edges[r + 1], y2)
                marks.append(Mark("bar", r, c, box, color))
    else:
        half = 1
        for r in range(nrows):
            pts = tuple((centers[c], _rpx(value_to_px(vals[r, c], axis, plot_bottom, plot_top)))
                        for c in range(ncols))
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            box = (min(xs) - half - 1, min(ys) - half - 1, max(xs) + half + 1, max(ys) + half + 1)
            marks.append(Mark("line", r, None, box, spec.palette[r], points=pts))
    return LayoutPlan(W, H, spec.chart_type, spec.orientation, plot, axis, marks, texts,
                      legend_box, previews)


def _layout_pie(table: Table, spec: ChartSpec, rng) -> LayoutPlan:
    s, m = spec.scale, spec.margins
    ch, cw = CELL_H * s, CELL_W * s
    W, H = spec.width, spec.height
    texts, top = _header_block(table, spec)
    heading = table.col_headers[0]
    right = W - m
    if spec.legend_position == "top":
        lbox, previews, ltexts = _legend(table.row_headers, spec.palette, spec, 0, top, heading, True,
                                         anchor_x1=m)
        top = lbox[3] + 6
    else:
        lbox, previews, ltexts = _legend(table.row_headers, spec.palette, spec, right, top, heading,
                                         False)
        right = lbox[0] - 2 * LABEL_GAP
    texts += ltexts
    plot = (m, top, right, H - m)
    vals = [float(row[0]) for row in table.values]
    if any(v <= 0 for v in vals):
        raise LayoutError("pie values must be positive")
    total = sum(vals)
    labels = [table.cell_text(r, 0) for r in range(len(vals))]
    lw = max(len(t) for t in labels) * cw
    half_diag = math.hypot(lw / 2, ch / 2)
    cx = (plot[0] + plot[2]) // 2
    cy = (plot[1] + plot[3]) // 2
    radius = min(plot[2] - plot[0], plot[3] - plot[1]) / 2 - LABEL_GAP - half_diag - 1
    if radius < 16:
        raise LayoutError("image too small for the pie and its labels")
    radius = float(math.floor(radius))
    start = 90.0
    marks = []
    for i, v in enumerate(vals):
        sweep = 360.0 * v / total
        a0, a1 = start, start + sweep
        if i == len(vals) - 1:
            a1 = 450.0
        box = _wedge_box(cx, cy, radius, a0, a1)
        marks.append(Mark("pieSlice", i, None, box, spec.palette[i], angles=(a0, a1)))
        mid = math.radians((a0 + a1) / 2)
        dist = radius + LABEL_GAP + half_diag
        lx = _rpx(cx + dist * math.cos(mid))
        ly = _rpx(cy - dist * math.sin(mid))
        texts.append(TextItem(labels[i], _text_box_centered(labels[i], lx, ly, s), "PieLabel"))
        start = a1
    return LayoutPlan(W, H, "pie", "vertical", plot, None, marks, texts, lbox, previews,
                      pie_center=(cx, cy), pie_radius=radius)


def _wedge_box(cx, cy, r, a0, a1) -> Box:
    angles = [a0, a1] + [k * 90.0 for k in range(int(math.ceil(a0 / 90.0)), int(math.floor(a1 / 90.0)) + 1)]
    xs = [cx] + [cx + r * math.cos(math.radians(a)) for a in angles]
    ys = [cy] + [cy - r * math.sin(math.radians(a)) for a in angles]
    return (int(math.floor(min(xs))), int(math.floor(min(ys))),
            int(math.ceil(max(xs))) + 1, int(math.ceil(max(ys))) + 1)
