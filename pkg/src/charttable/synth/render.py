import numpy as np

from . import raster
from .layout import AXIS_COLOR, BACKGROUND, GRID_COLOR, TEXT_COLOR, ChartSpec, LayoutPlan


def render(layout: LayoutPlan, spec: ChartSpec) -> np.ndarray:
    """Rasterize a layout to an (H, W, 3) uint8 RGB image."""
    img = np.empty((spec.height, spec.width, 3), dtype=np.uint8)
    img[:] = BACKGROUND
    x1, y1, x2, y2 = layout.plot_area
    if layout.axis is not None:
        for px in layout.axis.tick_px:
            if layout.axis.direction == "y":
                raster.fill_rect(img, (x1, px, x2, px + 1), GRID_COLOR)
            else:
                raster.fill_rect(img, (px, y1, px + 1, y2), GRID_COLOR)
    for mark in layout.marks:
        if mark.kind == "bar":
            raster.fill_rect(img, mark.box, mark.color)
        elif mark.kind == "line":
            raster.draw_polyline(img, [(x + 0.5, y + 0.5) for x, y in mark.points], 2.5, mark.color)
        elif mark.kind == "pieSlice":
            cx, cy = layout.pie_center
            raster.fill_wedge(img, (cx + 0.5, cy + 0.5), layout.pie_radius, mark.angles[0],
                              mark.angles[1], mark.color)
    if layout.axis is not None:
        raster.fill_rect(img, (x1 - 1, y1, x1, y2 + 1), AXIS_COLOR)
        raster.fill_rect(img, (x1 - 1, y2, x2, y2 + 1), AXIS_COLOR)
    for _, box, color in layout.previews:
        raster.fill_rect(img, box, color)
    for item in layout.texts:
        raster.blit_text(img, item.text, item.box[0], item.box[1], spec.scale, TEXT_COLOR)
    return img
