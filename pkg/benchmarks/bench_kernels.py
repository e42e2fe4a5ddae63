"""Compare the numba and numpy raster paths.

    python benchmarks/bench_kernels.py [--repeat 20] [--samples 50]

Each kernel runs on a representative workload under both paths; the full
renderer is timed on a small corpus.  Outputs are checked to be identical.
"""

import argparse
import time

import numpy as np

from charttable import _accel
from charttable.synth import raster
from charttable.synth.corpus import SpecGenConfig, make_sample
from charttable.synth.render import render
from charttable.table import TableGenConfig


def _time(fn, repeat):
    fn()  # warm-up (jit compile / cache load)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernels():
    pts = np.array([[20.5, 300.5], [120.5, 80.5], [220.5, 200.5], [320.5, 40.5], [420.5, 250.5]])
    sx, sy, ex, ey, wide = raster.wedge_vectors(30.0, 250.0)
    glyph_codes = raster.text_codes("Revenue 2020: 1,234.5")
    return {
        "fill_rect": lambda f, img: f(img, 40, 30, 400, 290, 10, 20, 30),
        "draw_polyline": lambda f, img: f(img, pts, 1.25, 10, 20, 30),
        "fill_wedge": lambda f, img: f(img, 224.5, 160.5, 120.0, sx, sy, ex, ey, wide, 10, 20, 30),
        "blit_text": lambda f, img: f(img, raster.GLYPHS, glyph_codes, 30, 30, 2, 0, 0, 0),
    }


PAIRS = {
    "fill_rect": (raster.fill_rect_jit, raster.fill_rect_np),
    "draw_polyline": (raster.draw_polyline_jit, raster.draw_polyline_np),
    "fill_wedge": (raster.fill_wedge_jit, raster.fill_wedge_np),
    "blit_text": (raster.blit_text_jit, raster.blit_text_np),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--samples", type=int, default=50)
    args = ap.parse_args(argv)

    print(f"{'kernel':<16}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, work in kernels().items():
        jit_fn, np_fn = PAIRS[name]
        outs, times = [], []
        for fn in (jit_fn, np_fn):
            img = np.full((320, 448, 3), 255, dtype=np.uint8)
            times.append(_time(lambda: work(fn, img), args.repeat))
            outs.append(img)
        assert outs[0].tobytes() == outs[1].tobytes(), name
        print(f"{name:<16}{times[0] * 1e3:>10.3f}{times[1] * 1e3:>10.3f}{times[1] / times[0]:>8.1f}x")

    tc, sc = TableGenConfig(), SpecGenConfig()
    plans = [make_sample(i, 3, tc, sc) for i in range(args.samples)]
    res = {}
    for flag in (True, False):
        _accel.USE_NUMBA = flag
        res[flag] = _time(lambda: [render(p, s.spec) for s, p in plans], max(1, args.repeat // 5))
    print(f"{'render x' + str(args.samples):<16}{res[True] * 1e3:>10.1f}{res[False] * 1e3:>10.1f}"
          f"{res[False] / res[True]:>8.1f}x")


if __name__ == "__main__":
    main()
