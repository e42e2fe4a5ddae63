"""Geometric chart-to-table oracle working on annotations (regions + OCR tokens)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .synth.annotate import Annotation, Region
from .table import Table

log = logging.getLogger(__name__)


class ParseError(ValueError):
    pass


class CalibrationError(ParseError):
    pass


class AmbiguousSeriesError(ParseError):
    pass


class UnsupportedChartError(ParseError):
    pass


@dataclass(frozen=True)
class AxisMap:
    """v = a * p + b, fitted exactly in rational arithmetic."""

    a: float
    b: float
    residual: float
    n_ticks: int
    _a: Fraction = field(repr=False, compare=False, default=Fraction(0))
    _b: Fraction = field(repr=False, compare=False, default=Fraction(0))

    def __call__(self, p) -> float:
        if float(p).is_integer() and self._a != 0:
            return float(self._a * int(p) + self._b)
        return self.a * float(p) + self.b


@dataclass
class ParseReport:
    chart_type: str = ""
    orientation: str | None = None
    residual: float | None = None
    n_ticks: int | None = None
    value_per_px: float | None = None
    flags: list = field(default_factory=list)
    unmatched: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"chart_type": self.chart_type, "orientation": self.orientation,
                "residual": self.residual, "n_ticks": self.n_ticks,
                "value_per_px": self.value_per_px,
                "flags": list(self.flags), "unmatched": list(self.unmatched)}


def parse_number(text: str) -> float | None:
    """Numeric reading of a label: trims, drops thousands commas and a trailing '%'."""
    t = text.strip().replace(",", "")
    if t.endswith("%"):
        t = t[:-1].strip()
    try:
        v = float(t)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _center(b):
    return ((b[0] + b[2]) / 2.0, (b[1] + b[3]) / 2.0)


def _iou(a, b) -> float:
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter)


def region_text(region: Region, tokens) -> str | None:
    """Text of the OCR token that best overlaps a text region (None if nothing overlaps)."""
    best, best_iou = None, 0.0
    for t in tokens:
        v = _iou(region.bbox, t.bbox)
        if v > best_iou:
            best, best_iou = t, v
    return best.text if best is not None and best_iou >= 0.3 else None


def calibrate_axis(ticks, orientation: str) -> AxisMap:
    """Least-squares affine fit of tick value against tick-center pixel coordinate.

    ``ticks`` is a list of (text, bbox); ``orientation`` is "y" (vertical value
    axis, centers along y) or "x".
    """
    if orientation not in ("x", "y"):
        raise ValueError(f"orientation must be 'x' or 'y', got {orientation!r}")
    pts = []
    for text, bbox in ticks:
        v = parse_number(text) if text is not None else None
        if v is None:
            log.warning("skipping non-numeric tick label %r", text)
            continue
        c = _center(bbox)[1 if orientation == "y" else 0]
        pts.append((Fraction(c), Fraction(repr(v))))
    if len(pts) < 2:
        raise CalibrationError(f"need >= 2 numeric tick labels, got {len(pts)}")
    n = len(pts)
    pm = sum(p for p, _ in pts) / n
    vm = sum(v for _, v in pts) / n
    sxx = sum((p - pm) ** 2 for p, _ in pts)
    if sxx == 0:
        raise CalibrationError("tick centers are not distinct")
    a = sum((p - pm) * (v - vm) for p, v in pts) / sxx
    if a == 0:
        raise CalibrationError("tick values are constant")
    b = vm - a * pm
    sse = sum((v - (a * p + b)) ** 2 for p, v in pts)
    return AxisMap(float(a), float(b), math.sqrt(float(sse / n)), n, a, b)


def _rgb_dist2(a, b) -> int:
    return sum((int(x) - int(y)) ** 2 for x, y in zip(a, b))


def associate_series(marks, previews) -> list[int]:
    """Series index for each mark: the preview with the nearest RGB color.

    ``marks`` carry ``.color``; ``previews`` is a list of (color, label) in
    legend order.  Without previews every mark belongs to series 0.
    """
    if not previews:
        return [0] * len(marks)
    seen = {}
    for i, (color, label) in enumerate(previews):
        key = tuple(color)
        if key in seen:
            raise AmbiguousSeriesError(
                f"legend entries {previews[seen[key]][1]!r} and {label!r} share color {list(key)}")
        seen[key] = i
    out = []
    for m in marks:
        d = [_rgb_dist2(m.color, c) for c, _ in previews]
        best = min(d)
        tied = [previews[i][1] for i, x in enumerate(d) if x == best]
        if len(tied) > 1:
            raise AmbiguousSeriesError(f"mark color {list(m.color)} is equidistant from series {tied}")
        out.append(d.index(best))
    return out


def _dedupe(labels, report: ParseReport, what: str) -> list[str]:
    out, seen = [], {}
    for i, lab in enumerate(labels):
        if lab is None or lab == "":
            lab = f"?{what}{i}"
            report.flags.append(f"missing {what} label #{i}")
        if lab in seen:
            report.flags.append(f"duplicate {what} label {lab!r}")
            seen[lab] += 1
            lab = f"{lab}#{seen[lab]}"
        seen.setdefault(lab, 1)
        out.append(lab)
    return out


def _legend(ann: Annotation, report: ParseReport):
    """Legend entries in reading order: list of (color, label text)."""
    previews = sorted(ann.regions_of("LegendPreview"), key=lambda r: (r.bbox[1], r.bbox[0]))
    labels = ann.regions_of("LegendLabel")
    entries = []
    for p in previews:
        py = _center(p.bbox)[1]
        cands = [lab for lab in labels if lab.bbox[0] >= p.bbox[2] - 1 and abs(_center(lab.bbox)[1] - py) <= (p.bbox[3] - p.bbox[1])]
        if not cands:
            report.unmatched.append({"LegendPreview": list(p.bbox)})
            entries.append((p.color, None))
            continue
        lab = min(cands, key=lambda r: r.bbox[0] - p.bbox[2])
        entries.append((p.color, region_text(lab, ann.ocr_tokens)))
    names = _dedupe([e[1] for e in entries], report, "series")
    return [(e[0], n) for e, n in zip(entries, names)]


def _title(ann: Annotation) -> str | None:
    t = ann.regions_of("ChartTitle")
    return region_text(t[0], ann.ocr_tokens) if t else None


def _mode_count(vals) -> int:
    counts = {}
    for v in vals:
        counts[v] = counts.get(v, 0) + 1
    return max(counts.values()) if counts else 0


def _bar_orientation(ann: Annotation, bars) -> str:
    sv = _mode_count([b.bbox[3] for b in bars])
    sh = _mode_count([b.bbox[0] for b in bars])
    if sv != sh:
        return "vertical" if sv > sh else "horizontal"
    ynum = sum(parse_number(region_text(r, ann.ocr_tokens) or "") is not None for r in ann.regions_of("yAxisLabel"))
    xnum = sum(parse_number(region_text(r, ann.ocr_tokens) or "") is not None for r in ann.regions_of("xAxisLabel"))
    return "horizontal" if xnum > ynum else "vertical"


def _categories(ann: Annotation, category: str, axis: int, report: ParseReport):
    """Category labels ordered along ``axis`` (0 = x, 1 = y): list of (center, text)."""
    regs = sorted(ann.regions_of(category), key=lambda r: _center(r.bbox)[axis])
    centers = [_center(r.bbox)[axis] for r in regs]
    texts = _dedupe([region_text(r, ann.ocr_tokens) for r in regs], report, "category")
    return centers, texts


def _nearest_category(c: float, centers, bbox) -> int:
    if not centers:
        raise ParseError(f"mark {list(bbox)} has no category labels to bind to")
    d = [abs(c - x) for x in centers]
    j = d.index(min(d))
    if len(centers) > 1:
        spacing = min(b - a for a, b in zip(centers, centers[1:]))
        limit = spacing / 2.0
    else:
        limit = max(bbox[2] - bbox[0], bbox[3] - bbox[1]) + 64
    if d[j] > limit + 1e-9:
        raise ParseError(f"mark {list(bbox)} has no nearby category label")
    return j


def _value_ticks(ann: Annotation, category: str):
    return [(region_text(r, ann.ocr_tokens), r.bbox) for r in ann.regions_of(category)]


def _fill(nrows, ncols, cells, report: ParseReport, what: str):
    grid = [[None] * ncols for _ in range(nrows)]
    for r, c, v in cells:
        if grid[r][c] is not None:
            raise ParseError(f"two {what} marks for series {r}, category {c}")
        grid[r][c] = v
    for r in range(nrows):
        for c in range(ncols):
            if grid[r][c] is None:
                raise ParseError(f"no {what} mark for series {r}, category {c}")
    return grid


def parse_bar_chart(ann: Annotation, report: ParseReport | None = None) -> Table:
    report = report if report is not None else ParseReport()
    bars = ann.regions_of("bar")
    if not bars:
        raise ParseError("no bar regions")
    orient = _bar_orientation(ann, bars)
    report.chart_type, report.orientation = "bar", orient
    vertical = orient == "vertical"
    axis = calibrate_axis(_value_ticks(ann, "yAxisLabel" if vertical else "xAxisLabel"),
                          "y" if vertical else "x")
    report.residual, report.n_ticks, report.value_per_px = axis.residual, axis.n_ticks, abs(axis.a)
    centers, cols = _categories(ann, "xAxisLabel" if vertical else "yAxisLabel", 0 if vertical else 1, report)
    legend = _legend(ann, report)
    series = associate_series(bars, legend)
    cells = []
    for bar, s in zip(bars, series):
        c = _nearest_category(_center(bar.bbox)[0 if vertical else 1], centers, bar.bbox)
        v = axis(bar.bbox[1]) if vertical else axis(bar.bbox[2])
        cells.append((s, c, v))
    rows = [name for _, name in legend] or ["Value"]
    grid = _fill(len(rows), len(cols), cells, report, "bar")
    return Table(cols, rows, grid, _title(ann))


def _polyline_y(points, x: float):
    pts = sorted(points)
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if x0 <= x <= x1:
            if x1 == x0:
                return y0
            t = Fraction(x - x0) / Fraction(x1 - x0)
            return y0 + t * (y1 - y0)
    if len(pts) == 1 and abs(pts[0][0] - x) < 1e-9:
        return pts[0][1]
    return None


def parse_line_chart(ann: Annotation, report: ParseReport | None = None) -> Table:
    report = report if report is not None else ParseReport()
    lines = ann.regions_of("line", "dotLine")
    if not lines:
        raise ParseError("no line regions")
    report.chart_type, report.orientation = "line", "vertical"
    axis = calibrate_axis(_value_ticks(ann, "yAxisLabel"), "y")
    report.residual, report.n_ticks, report.value_per_px = axis.residual, axis.n_ticks, abs(axis.a)
    centers, cols = _categories(ann, "xAxisLabel", 0, report)
    legend = _legend(ann, report)
    series = associate_series(lines, legend)
    cells = []
    for line, s in zip(lines, series):
        if not line.points:
            raise ParseError(f"line region {list(line.bbox)} carries no vertices")
        for c, x in enumerate(centers):
            y = _polyline_y([tuple(p) for p in line.points], x)
            if y is None:
                raise ParseError(f"line {list(line.bbox)} does not span category x={x}")
            cells.append((s, c, axis(y)))
    rows = [name for _, name in legend] or ["Value"]
    grid = _fill(len(rows), len(cols), cells, report, "line")
    return Table(cols, rows, grid, _title(ann))


def _angle_of(pt, center) -> float:
    return math.degrees(math.atan2(center[1] - pt[1], pt[0] - center[0])) % 360.0


def _ang_dist(a: float, b: float) -> float:
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def parse_pie_chart(ann: Annotation, report: ParseReport | None = None) -> Table:
    report = report if report is not None else ParseReport()
    slices = ann.regions_of("pieSlice")
    if not slices:
        raise ParseError("no pieSlice regions")
    report.chart_type = "pie"
    pies = ann.regions_of("pie")
    if pies:
        center = _center(pies[0].bbox)
    else:
        xs = [v for s in slices for v in (s.bbox[0], s.bbox[2])]
        ys = [v for s in slices for v in (s.bbox[1], s.bbox[3])]
        center = ((min(xs) + max(xs)) / 2.0, (min(ys) + max(ys)) / 2.0)
    labels = [(region_text(r, ann.ocr_tokens), _angle_of(_center(r.bbox), center), r)
              for r in ann.regions_of("PieLabel")]
    legend = _legend(ann, report)
    series = associate_series(slices, legend)
    values, spans = {}, {}
    for sl, s in zip(slices, series):
        if sl.angles is None:
            raise ParseError(f"pieSlice {list(sl.bbox)} carries no angles")
        a0, a1 = sl.angles
        mid = ((a0 + a1) / 2.0) % 360.0
        if not labels:
            raise ParseError(f"pieSlice {list(sl.bbox)} has no numeric label")
        text, _, reg = min(labels, key=lambda lab: _ang_dist(lab[1], mid))
        v = parse_number(text) if text is not None else None
        if v is None:
            raise ParseError(f"pieSlice {list(sl.bbox)} has no numeric label (got {text!r})")
        if s in values:
            raise ParseError(f"two slices for series {s}")
        values[s] = v
        spans[s] = a1 - a0
    rows = [name for _, name in legend] or [f"slice{i}" for i in range(len(slices))]
    if set(values) != set(range(len(rows))):
        raise ParseError("slices and legend entries do not pair up")
    total = sum(values.values())
    for s in range(len(rows)):
        expect = 360.0 * values[s] / total if total else 0.0
        if abs(expect - spans[s]) > 2.0:
            report.flags.append(f"slice {rows[s]!r}: angle {spans[s]:.2f} vs value share {expect:.2f} deg")
    heading = _pie_heading(ann)
    if heading is None:
        report.flags.append("missing value column heading")
        heading = "Value"
    return Table([heading], rows, [[values[s]] for s in range(len(rows))], _title(ann))


def _pie_heading(ann: Annotation) -> str | None:
    boxes = ann.regions_of("Legends")
    if not boxes:
        return None
    lb = boxes[0].bbox
    label_boxes = [r.bbox for r in ann.regions_of("LegendLabel")]
    cands = []
    for t in ann.ocr_tokens:
        cx, cy = _center(t.bbox)
        if not (lb[0] <= cx <= lb[2] and lb[1] <= cy <= lb[3]):
            continue
        if any(_iou(t.bbox, b) >= 0.3 for b in label_boxes):
            continue
        cands.append(t)
    if not cands:
        return None
    return min(cands, key=lambda t: (t.bbox[1], t.bbox[0])).text


def parse_chart(ann: Annotation) -> tuple[Table, ParseReport]:
    report = ParseReport()
    cats = {r.category for r in ann.regions}
    if "pieSlice" in cats:
        table = parse_pie_chart(ann, report)
    elif "line" in cats or "dotLine" in cats:
        table = parse_line_chart(ann, report)
    elif "bar" in cats:
        table = parse_bar_chart(ann, report)
    else:
        raise UnsupportedChartError("no bar, line or pieSlice regions in annotation")
    return table, report
