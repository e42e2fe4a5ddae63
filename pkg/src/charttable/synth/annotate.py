"""Ground-truth annotations: scene-text tokens and chart-object regions."""

from __future__ import annotations

from dataclasses import dataclass, field

from .layout import BACKGROUND, TEXT_COLOR, LayoutPlan

CATEGORIES = (
    "Legends", "yAxisTitle", "ChartTitle", "xAxisTitle", "LegendPreview", "PlotArea",
    "yAxisLabel", "xAxisLabel", "LegendLabel", "PieLabel", "bar", "pie", "pieSlice",
    "line", "dotLine",
)
CATEGORY_SET = frozenset(CATEGORIES)
MARK_CATEGORIES = ("bar", "line", "dotLine", "pieSlice")


class AnnotationError(ValueError):
    pass


def check_bbox(bbox, what: str = "bbox", width: int | None = None, height: int | None = None):
    if len(bbox) != 4:
        raise AnnotationError(f"{what} must have 4 coordinates, got {len(bbox)}")
    x1, y1, x2, y2 = bbox
    if not (x1 < x2 and y1 < y2):
        raise AnnotationError(f"{what} {list(bbox)} needs x1 < x2 and y1 < y2")
    if width is not None and (x1 < 0 or y1 < 0 or x2 > width or y2 > height):
        raise AnnotationError(f"{what} {list(bbox)} lies outside the {width}x{height} image")


@dataclass(frozen=True)
class TextToken:
    text: str
    bbox: tuple


@dataclass(frozen=True)
class Region:
    category: str
    bbox: tuple
    color: tuple
    points: tuple | None = None
    angles: tuple | None = None

    def to_dict(self) -> dict:
        d = {"category": self.category, "bbox": list(self.bbox), "color": list(self.color)}
        if self.points is not None:
            d["points"] = [list(p) for p in self.points]
        if self.angles is not None:
            d["angles"] = list(self.angles)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Region":
        pts = d.get("points")
        ang = d.get("angles")
        return cls(d["category"], tuple(d["bbox"]), tuple(int(c) for c in d["color"]),
                   tuple(tuple(p) for p in pts) if pts is not None else None,
                   tuple(ang) if ang is not None else None)


@dataclass(frozen=True)
class Annotation:
    width: int
    height: int
    ocr_tokens: tuple = field(default_factory=tuple)
    regions: tuple = field(default_factory=tuple)

    def validate(self):
        for t in self.ocr_tokens:
            check_bbox(t.bbox, f"ocr token {t.text!r} bbox", self.width, self.height)
        for reg in self.regions:
            if reg.category not in CATEGORY_SET:
                raise AnnotationError(f"unknown region category {reg.category!r}")
            check_bbox(reg.bbox, f"{reg.category} bbox", self.width, self.height)
            if len(reg.color) != 3 or not all(0 <= c <= 255 for c in reg.color):
                raise AnnotationError(f"{reg.category} color {list(reg.color)} is not RGB 0-255")

    def regions_of(self, *categories: str) -> list:
        return [r for r in self.regions if r.category in categories]

    def with_tokens(self, tokens) -> "Annotation":
        return Annotation(self.width, self.height, tuple(tokens), self.regions)

    def to_dict(self) -> dict:
        return {
            "width": self.width, "height": self.height,
            "ocr_tokens": [{"text": t.text, "bbox": list(t.bbox)} for t in self.ocr_tokens],
            "regions": [r.to_dict() for r in self.regions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Annotation":
        return cls(int(d["width"]), int(d["height"]),
                   tuple(TextToken(t["text"], tuple(t["bbox"])) for t in d["ocr_tokens"]),
                   tuple(Region.from_dict(r) for r in d["regions"]))


def emit_annotations(layout: LayoutPlan) -> Annotation:
    regions = [Region("PlotArea", layout.plot_area, BACKGROUND)]
    for m in layout.marks:
        regions.append(Region(m.kind, m.box, m.color, m.points, m.angles))
    if layout.pie_center is not None:
        cx, cy = layout.pie_center
        r = layout.pie_radius
        largest = max(layout.marks, key=lambda m: m.angles[1] - m.angles[0])
        regions.append(Region("pie", (int(cx - r), int(cy - r), int(cx + r) + 1, int(cy + r) + 1),
                              largest.color))
    if layout.legend_box is not None:
        regions.append(Region("Legends", layout.legend_box, BACKGROUND))
    for _, box, color in layout.previews:
        regions.append(Region("LegendPreview", box, color))
    tokens = []
    for item in layout.texts:
        tokens.append(TextToken(item.text, item.box))
        if item.category is not None:
            regions.append(Region(item.category, item.box, TEXT_COLOR))
    return Annotation(layout.width, layout.height, tuple(tokens), tuple(regions))
