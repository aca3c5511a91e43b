"""Slow reference computations used to cross-check the fast paths.

Nothing here calls into the code it checks beyond reading shapes.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def brute_force_aggregate(
    global_layers: Sequence[tuple[np.ndarray, np.ndarray]],
    clients: Sequence[tuple[Sequence[tuple[np.ndarray, np.ndarray]], int]],
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-coordinate weighted mean with scalar Python loops.

    ``clients`` holds ``(layers, data_size)`` pairs already in summation order;
    a client covers coordinate ``(i, j)`` of a layer when its array for that
    layer is large enough to hold it.
    """
    out = []
    for k, (gw, gb) in enumerate(global_layers):
        w = np.empty_like(gw)
        for i in range(gw.shape[0]):
            for j in range(gw.shape[1]):
                num = 0.0
                den = 0
                for layers, n in clients:
                    cw = layers[k][0]
                    if i < cw.shape[0] and j < cw.shape[1]:
                        num += float(cw[i, j]) * n
                        den += n
                w[i, j] = num / den if den > 0 else gw[i, j]
        b = np.empty_like(gb)
        for i in range(gb.shape[0]):
            num = 0.0
            den = 0
            for layers, n in clients:
                cb = layers[k][1]
                if i < cb.shape[0]:
                    num += float(cb[i]) * n
                    den += n
            b[i] = num / den if den > 0 else gb[i]
        out.append((w, b))
    return out


def central_differences(
    f: Callable[[], float], arrays: Sequence[np.ndarray], h: float = 1e-5
) -> list[np.ndarray]:
    """d f / d x for every entry of every array, perturbing in place and restoring."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = a[idx]
            a[idx] = old + h
            fp = f()
            a[idx] = old - h
            fm = f()
            a[idx] = old
            g[idx] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Max entrywise ``|a - n| / max(|a|, |n|, floor)``."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0
