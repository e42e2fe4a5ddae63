from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Batch, MicroModelParams, forward_backward


@dataclass
class GradCheckResult:
    max_rel_error: float
    n_coords: int
    worst: tuple  # (param name, flat index, analytic, numeric)
    per_param: dict


def grad_check(params: MicroModelParams, batch: Batch, epsilon: float = 1e-5, n_coords: int = 240,
               seed: int = 0, floor: float = 1e-7, corrupt=None) -> GradCheckResult:
    """Compare backprop gradients with central differences on sampled coordinates.

    Every parameter tensor contributes at least one coordinate.  The relative
    error is |a - n| / max(|a| + |n|, floor).  ``corrupt`` may rewrite the
    analytic gradient dict in place (negative controls).
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _, grads = forward_backward(params, batch)
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {k}")
    if corrupt is not None:
        corrupt(grads)
    names = sorted(params.tensors)
    rng = np.random.default_rng(seed)
    per = max(1, -(-n_coords // len(names)))
    work = params.copy()
    worst, max_err, per_param, count = None, 0.0, {}, 0
    for name in names:
        t = work.tensors[name]
        flat = t.reshape(-1)
        g = grads[name].reshape(-1)
        picks = rng.choice(flat.size, size=min(per, flat.size), replace=False)
        # the embedding rows that actually carry gradient are the interesting ones
        if name == "embed":
            live = np.flatnonzero(g)
            if live.size:
                picks = rng.choice(live, size=min(per, live.size), replace=False)
        errs = []
        for j in picks.tolist():
            orig = flat[j]
            flat[j] = orig + epsilon
            lp = forward_backward(work, batch, need_grad=False)[0]
            flat[j] = orig - epsilon
            lm = forward_backward(work, batch, need_grad=False)[0]
            flat[j] = orig
            num = (lp - lm) / (2 * epsilon)
            err = abs(g[j] - num) / max(abs(g[j]) + abs(num), floor)
            errs.append(err)
            count += 1
            if err >= max_err:
                max_err, worst = err, (name, j, float(g[j]), float(num))
        per_param[name] = max(errs)
    return GradCheckResult(max_err, count, worst, per_param)
