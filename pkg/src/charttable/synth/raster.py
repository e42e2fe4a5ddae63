"""Raster kernels for the chart renderer.

Every kernel has a numba loop form (``*_jit``) and a numpy form (``*_np``)
that write byte-identical pixels; the public names dispatch on
``charttable._accel.USE_NUMBA``.  Pixel (row i, col j) is sampled at its center
(j + 0.5, i + 0.5).  Kernels mutate ``img`` (H x W x 3 uint8) in place.
"""

import numpy as np

from .. import _accel
from .._accel import njit
from .font import CELL_H, CELL_W, GLYPHS


# -- rectangles -----------------------------------------------------------------

@njit
def fill_rect_jit(img, x1, y1, x2, y2, r, g, b):
    h, w = img.shape[0], img.shape[1]
    for i in range(max(y1, 0), min(y2, h)):
        for j in range(max(x1, 0), min(x2, w)):
            img[i, j, 0] = r
            img[i, j, 1] = g
            img[i, j, 2] = b


def fill_rect_np(img, x1, y1, x2, y2, r, g, b):
    h, w = img.shape[:2]
    img[max(y1, 0):min(y2, h), max(x1, 0):min(x2, w)] = (r, g, b)


# -- thick polylines ------------------------------------------------------------

@njit
def draw_polyline_jit(img, pts, half_width, r, g, b):
    h, w = img.shape[0], img.shape[1]
    n = pts.shape[0]
    xmin = pts[0, 0]
    xmax = pts[0, 0]
    ymin = pts[0, 1]
    ymax = pts[0, 1]
    for k in range(n):
        xmin = min(xmin, pts[k, 0])
        xmax = max(xmax, pts[k, 0])
        ymin = min(ymin, pts[k, 1])
        ymax = max(ymax, pts[k, 1])
    i0 = max(int(np.floor(ymin - half_width)) - 1, 0)
    i1 = min(int(np.ceil(ymax + half_width)) + 1, h)
    j0 = max(int(np.floor(xmin - half_width)) - 1, 0)
    j1 = min(int(np.ceil(xmax + half_width)) + 1, w)
    hw2 = half_width * half_width
    for i in range(i0, i1):
        py = i + 0.5
        for j in range(j0, j1):
            px = j + 0.5
            best = np.inf
            for k in range(max(n - 1, 1)):
                ax = pts[k, 0]
                ay = pts[k, 1]
                kb = min(k + 1, n - 1)
                dx = pts[kb, 0] - ax
                dy = pts[kb, 1] - ay
                ll = dx * dx + dy * dy
                t = 0.0
                if ll > 0.0:
                    t = ((px - ax) * dx + (py - ay) * dy) / ll
                    t = min(max(t, 0.0), 1.0)
                qx = ax + t * dx - px
                qy = ay + t * dy - py
                d2 = qx * qx + qy * qy
                if d2 < best:
                    best = d2
            if best <= hw2:
                img[i, j, 0] = r
                img[i, j, 1] = g
                img[i, j, 2] = b


def draw_polyline_np(img, pts, half_width, r, g, b):
    h, w = img.shape[:2]
    n = pts.shape[0]
    i0 = max(int(np.floor(pts[:, 1].min() - half_width)) - 1, 0)
    i1 = min(int(np.ceil(pts[:, 1].max() + half_width)) + 1, h)
    j0 = max(int(np.floor(pts[:, 0].min() - half_width)) - 1, 0)
    j1 = min(int(np.ceil(pts[:, 0].max() + half_width)) + 1, w)
    if i0 >= i1 or j0 >= j1:
        return
    py = (np.arange(i0, i1) + 0.5)[:, None]
    px = (np.arange(j0, j1) + 0.5)[None, :]
    best = np.full((i1 - i0, j1 - j0), np.inf)
    for k in range(max(n - 1, 1)):
        ax, ay = pts[k]
        kb = min(k + 1, n - 1)
        dx = pts[kb, 0] - ax
        dy = pts[kb, 1] - ay
        ll = dx * dx + dy * dy
        if ll > 0.0:
            t = np.clip(((px - ax) * dx + (py - ay) * dy) / ll, 0.0, 1.0)
        else:
            t = np.zeros_like(best)
        qx = ax + t * dx - px
        qy = ay + t * dy - py
        np.minimum(best, qx * qx + qy * qy, out=best)
    img[i0:i1, j0:j1][best <= half_width * half_width] = (r, g, b)


# -- pie wedges -----------------------------------------------------------------
# Angles are handled through unit direction vectors (y axis pointing up), so
# both forms share the exact same arithmetic and no transcendental calls.

@njit
def fill_wedge_jit(img, cx, cy, radius, sx, sy, ex, ey, wide, r, g, b):
    h, w = img.shape[0], img.shape[1]
    i0 = max(int(np.floor(cy - radius)) - 1, 0)
    i1 = min(int(np.ceil(cy + radius)) + 1, h)
    j0 = max(int(np.floor(cx - radius)) - 1, 0)
    j1 = min(int(np.ceil(cx + radius)) + 1, w)
    r2 = radius * radius
    for i in range(i0, i1):
        vy = cy - (i + 0.5)
        for j in range(j0, j1):
            vx = (j + 0.5) - cx
            if vx * vx + vy * vy > r2:
                continue
            after_start = sx * vy - sy * vx >= 0.0
            before_end = vx * ey - vy * ex > 0.0
            if wide:
                inside = after_start or before_end
            else:
                inside = after_start and before_end
            if inside:
                img[i, j, 0] = r
                img[i, j, 1] = g
                img[i, j, 2] = b


def fill_wedge_np(img, cx, cy, radius, sx, sy, ex, ey, wide, r, g, b):
    h, w = img.shape[:2]
    i0 = max(int(np.floor(cy - radius)) - 1, 0)
    i1 = min(int(np.ceil(cy + radius)) + 1, h)
    j0 = max(int(np.floor(cx - radius)) - 1, 0)
    j1 = min(int(np.ceil(cx + radius)) + 1, w)
    if i0 >= i1 or j0 >= j1:
        return
    vy = (cy - (np.arange(i0, i1) + 0.5))[:, None]
    vx = ((np.arange(j0, j1) + 0.5) - cx)[None, :]
    in_disc = vx * vx + vy * vy <= radius * radius
    after_start = sx * vy - sy * vx >= 0.0
    before_end = vx * ey - vy * ex > 0.0
    inside = (after_start | before_end) if wide else (after_start & before_end)
    img[i0:i1, j0:j1][in_disc & inside] = (r, g, b)


# -- text -----------------------------------------------------------------------

@njit
def blit_text_jit(img, glyphs, codes, x, y, scale, r, g, b):
    h, w = img.shape[0], img.shape[1]
    gh = glyphs.shape[1]
    gw = glyphs.shape[2]
    for c in range(codes.shape[0]):
        gx = x + c * gw * scale
        for u in range(gh * scale):
            i = y + u
            if i < 0 or i >= h:
                continue
            for v in range(gw * scale):
                j = gx + v
                if j < 0 or j >= w:
                    continue
                if glyphs[codes[c], u // scale, v // scale]:
                    img[i, j, 0] = r
                    img[i, j, 1] = g
                    img[i, j, 2] = b


def blit_text_np(img, glyphs, codes, x, y, scale, r, g, b):
    if codes.shape[0] == 0:
        return
    h, w = img.shape[:2]
    strip = np.concatenate([glyphs[c] for c in codes], axis=1).astype(bool)
    if scale > 1:
        strip = np.repeat(np.repeat(strip, scale, axis=0), scale, axis=1)
    i0, j0 = max(y, 0), max(x, 0)
    i1, j1 = min(y + strip.shape[0], h), min(x + strip.shape[1], w)
    if i0 >= i1 or j0 >= j1:
        return
    sub = strip[i0 - y:i1 - y, j0 - x:j1 - x]
    img[i0:i1, j0:j1][sub] = (r, g, b)


# -- dispatch -------------------------------------------------------------------

def _pick(jit_fn, np_fn):
    return jit_fn if _accel.USE_NUMBA else np_fn


def fill_rect(img, box, color):
    x1, y1, x2, y2 = (int(v) for v in box)
    _pick(fill_rect_jit, fill_rect_np)(img, x1, y1, x2, y2, *(int(c) for c in color))


def draw_polyline(img, points, thickness, color):
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    _pick(draw_polyline_jit, draw_polyline_np)(img, pts, float(thickness) / 2.0,
                                              *(int(c) for c in color))


def wedge_vectors(start_deg: float, end_deg: float):
    """Direction vectors and the >180 degree flag for a counter-clockwise wedge."""
    a0, a1 = np.deg2rad(start_deg), np.deg2rad(end_deg)
    return (float(np.cos(a0)), float(np.sin(a0)), float(np.cos(a1)), float(np.sin(a1)),
            bool(end_deg - start_deg > 180.0))


def fill_wedge(img, center, radius, start_deg, end_deg, color):
    if end_deg - start_deg >= 360.0 - 1e-9:
        # full disc: two half wedges
        mid = start_deg + 180.0
        fill_wedge(img, center, radius, start_deg, mid, color)
        fill_wedge(img, center, radius, mid, start_deg + 360.0, color)
        return
    sx, sy, ex, ey, wide = wedge_vectors(start_deg, end_deg)
    _pick(fill_wedge_jit, fill_wedge_np)(img, float(center[0]), float(center[1]), float(radius),
                                        sx, sy, ex, ey, wide, *(int(c) for c in color))


def text_codes(text: str) -> np.ndarray:
    from .font import glyph_index
    return np.array([glyph_index(ch) for ch in text], dtype=np.int64)


def blit_text(img, text, x, y, scale, color):
    _pick(blit_text_jit, blit_text_np)(img, GLYPHS, text_codes(text), int(x), int(y), int(scale),
                                      *(int(c) for c in color))


def text_size(text: str, scale: int) -> tuple[int, int]:
    return CELL_W * scale * len(text), CELL_H * scale
