import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from charttable import _accel
from charttable.synth import raster
from charttable.synth.render import render


def _both(monkeypatch, fn):
    out = []
    for flag in (True, False):
        monkeypatch.setattr(_accel, "USE_NUMBA", flag)
        out.append(fn())
    return out


def test_render_paths_identical(monkeypatch, samples_with_layout):
    for sample, plan in samples_with_layout:
        a, b = _both(monkeypatch, lambda: render(plan, sample.spec))
        assert a.tobytes() == b.tobytes(), sample.id


def _canvas():
    return np.full((60, 80, 3), 255, dtype=np.uint8)


@given(st.lists(st.tuples(st.floats(-10, 90), st.floats(-10, 70)), min_size=2, max_size=6),
       st.floats(0.5, 6))
def test_polyline_paths_identical(pts, thick):
    outs = []
    for fn in (raster.draw_polyline_jit, raster.draw_polyline_np):
        img = _canvas()
        fn(img, np.array(pts, dtype=np.float64), thick / 2, 10, 20, 30)
        outs.append(img)
    assert outs[0].tobytes() == outs[1].tobytes()


@given(st.floats(0, 359), st.floats(1, 359), st.floats(3, 30))
def test_wedge_paths_identical(start, span, radius):
    sx, sy, ex, ey, wide = raster.wedge_vectors(start, min(start + span, start + 359.9))
    outs = []
    for fn in (raster.fill_wedge_jit, raster.fill_wedge_np):
        img = _canvas()
        fn(img, 40.5, 30.5, radius, sx, sy, ex, ey, wide, 1, 2, 3)
        outs.append(img)
    assert outs[0].tobytes() == outs[1].tobytes()


@pytest.mark.parametrize("box", [(0, 0, 80, 60), (-5, -5, 10, 10), (70, 50, 95, 99), (10, 10, 11, 11)])
def test_rect_paths_identical(box):
    outs = []
    for fn in (raster.fill_rect_jit, raster.fill_rect_np):
        img = _canvas()
        fn(img, *box, 9, 8, 7)
        outs.append(img)
    assert outs[0].tobytes() == outs[1].tobytes()


def test_text_paths_identical(monkeypatch):
    def draw():
        img = _canvas()
        raster.blit_text(img, "Ab 1.5%|", 2, 3, 1, (0, 0, 0))
        raster.blit_text(img, "zz", 70, 50, 2, (0, 0, 0))  # clipped at the border
        return img
    a, b = _both(monkeypatch, draw)
    assert a.tobytes() == b.tobytes()
    assert (a != 255).any()


def test_env_flag(monkeypatch):
    monkeypatch.setenv(_accel.DISABLE_ENV, "1")
    assert _accel._env_disabled()
    monkeypatch.setenv(_accel.DISABLE_ENV, "0")
    assert not _accel._env_disabled()
