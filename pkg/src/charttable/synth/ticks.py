import math

_MANTISSAS = (1.0, 2.0, 2.5, 5.0)


def _decimals(step: float) -> int:
    # enough digits to represent multiples of step exactly (step = m * 10^k, m in {1, 2, 2.5, 5})
    return max(0, -int(math.floor(math.log10(step))) + 1)


def _ticks_for_step(vmin: float, vmax: float, step: float) -> list[float]:
    lo = math.floor(vmin / step + 1e-9)
    hi = math.ceil(vmax / step - 1e-9)
    nd = _decimals(step)
    return [round(i * step, nd) + 0.0 for i in range(lo, hi + 1)]


def choose_tick_values(vmin: float, vmax: float, n: int) -> list[float]:
    """Nice ticks covering [vmin, vmax] with step in {1, 2, 2.5, 5} x 10^k.

    The tick count lands in [n - 1, n + 2] when some nice step allows it; among
    candidate steps the one whose count is closest to ``n`` wins, larger step on
    ties.  Because consecutive nice steps can differ by a factor of two, some
    ranges have no admissible step (0..25001 with n=9 gives 12 or 6 ticks); then
    the closest count is used anyway.  A degenerate interval (vmin == vmax) is
    widened to [vmin, vmin + 1].
    """
    if n < 2:
        raise ValueError("need n >= 2 ticks")
    if not (math.isfinite(vmin) and math.isfinite(vmax)):
        raise ValueError("tick range must be finite")
    if vmin > vmax:
        vmin, vmax = vmax, vmin
    if vmin == vmax:
        vmax = vmin + 1.0
    raw = (vmax - vmin) / (n - 1)
    k = math.floor(math.log10(raw))
    best = None
    for e in range(k - 1, k + 2):
        for m in _MANTISSAS:
            step = m * 10.0 ** e
            ticks = _ticks_for_step(vmin, vmax, step)
            cnt = len(ticks)
            key = (not n - 1 <= cnt <= n + 2, abs(cnt - n), -step)
            if best is None or key < best[0]:
                best = (key, ticks)
    return best[1]
