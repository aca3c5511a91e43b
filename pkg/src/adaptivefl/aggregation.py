"""Heterogeneous aggregation of width-pruned client models into the global model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .nn import ModelSpec, ParamSet
from .pruning import PruneConfig, kept_shapes


@dataclass
class ReturnedModel:
    params: ParamSet
    cfg: PruneConfig
    data_size: int
    client_id: int = 0


def aggregate(global_params: ParamSet, returned: Sequence[ReturnedModel], spec: ModelSpec) -> ParamSet:
    """Data-size weighted mean per global coordinate.

    Each client contributes to the leading slice it holds. Coordinates that no
    client covers keep their previous global value. Clients are summed in
    ascending ``client_id`` order, so results are bit-reproducible.
    """
    if global_params.shapes() != spec.layer_shapes():
        raise ValueError("global parameters do not match the model spec")
    ordered = sorted(returned, key=lambda r: r.client_id)
    for r in ordered:
        if r.data_size < 1:
            raise ValueError(f"client {r.client_id}: data size must be >= 1")
        if r.params.shapes() != kept_shapes(spec, r.cfg):
            raise ValueError(
                f"client {r.client_id}: shapes {r.params.shapes()} do not match "
                f"{r.cfg.label} ({kept_shapes(spec, r.cfg)})"
            )

    layers = []
    for k, (gw, gb) in enumerate(global_params):
        acc_w, acc_b = np.zeros_like(gw), np.zeros_like(gb)
        wt_w, wt_b = np.zeros_like(gw), np.zeros_like(gb)
        # how many clients cover each coordinate, and the last value written there
        n_w, n_b = np.zeros(gw.shape, dtype=int), np.zeros(gb.shape, dtype=int)
        solo_w, solo_b = gw.copy(), gb.copy()
        for r in ordered:
            w, b = r.params[k]
            rows, cols = w.shape
            acc_w[:rows, :cols] += w * r.data_size
            wt_w[:rows, :cols] += r.data_size
            n_w[:rows, :cols] += 1
            solo_w[:rows, :cols] = w
            acc_b[:rows] += b * r.data_size
            wt_b[:rows] += r.data_size
            n_b[:rows] += 1
            solo_b[:rows] = b
        layers.append((_mean_or_keep(acc_w, wt_w, n_w, solo_w), _mean_or_keep(acc_b, wt_b, n_b, solo_b)))
    return ParamSet(layers)


def _mean_or_keep(acc: np.ndarray, weight: np.ndarray, count: np.ndarray, solo: np.ndarray) -> np.ndarray:
    # A coordinate held by one client takes its value as is; (w * n) / n can be off by an ulp.
    # Uncovered coordinates still hold the global value in ``solo``.
    out = solo.copy()
    shared = count > 1
    out[shared] = acc[shared] / weight[shared]
    return out


def fedavg(models: Sequence[ParamSet], sizes: Sequence[int]) -> ParamSet:
    """Plain weighted mean of identically shaped models."""
    if not models:
        raise ValueError("nothing to average")
    total = float(sum(sizes))
    out = []
    for k in range(len(models[0])):
        if len(models) == 1:
            out.append((models[0][k][0].copy(), models[0][k][1].copy()))
            continue
        w = sum(m[k][0] * s for m, s in zip(models, sizes)) / total
        b = sum(m[k][1] * s for m, s in zip(models, sizes)) / total
        out.append((w, b))
    return ParamSet(out)
