"""Fast invariant checks runnable from an installed package (``adaptivefl selftest``)."""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from .aggregation import ReturnedModel, aggregate
from .nn import Batch, ModelSpec, TrainConfig, init_params, local_train, loss_and_grads
from .oracles import brute_force_aggregate, central_differences, relative_error
from .pruning import PruneConfig, build_pool, param_count, prune_params, vgg16_shape
from .selection import Tables, curiosity_reward, resource_reward, update_tables


def check_vgg16_counts() -> str:
    shape = vgg16_shape()
    full = param_count(shape)
    assert abs(full - 33.65e6) / 33.65e6 < 0.005, full
    m1 = param_count(shape, 0.66, 8) / full
    s1 = param_count(shape, 0.40, 8) / full
    assert abs(m1 - 0.50) <= 0.03 and abs(s1 - 0.25) <= 0.03, (m1, s1)
    return f"full={full} M_1={m1:.3f} S_1={s1:.3f}"


def check_gradients(n: int = 20) -> str:
    worst = 0.0
    for s in range(n):
        rng = np.random.default_rng(s)
        dims = [int(d) for d in rng.integers(1, 9, size=int(rng.integers(3, 6)))]
        params = init_params(ModelSpec(dims, 1), s)
        batch = Batch(rng.normal(size=(4, dims[0])), rng.integers(0, dims[-1], size=4))
        _, grads = loss_and_grads(params, batch)
        arrays = [a for layer in params for a in layer]
        numeric = central_differences(lambda: loss_and_grads(params, batch)[0], arrays)
        analytic = [a for layer in grads for a in layer]
        worst = max(worst, max(relative_error(a, b) for a, b in zip(analytic, numeric)))
    assert worst < 1e-4, worst
    return f"max relative error {worst:.2e} over {n} networks"


def check_aggregation(n: int = 100) -> str:
    rng = np.random.default_rng(0)
    for _ in range(n):
        depth = int(rng.integers(4, 6))
        dims = [int(d) for d in rng.integers(2, 9, size=depth)]
        spec = ModelSpec(dims, 1)
        g = init_params(spec, int(rng.integers(1 << 30)))
        returned = []
        for cid in range(int(rng.integers(1, 7))):
            cfg = PruneConfig("S", 1, float(rng.uniform(0.05, 1.0)), int(rng.integers(1, depth)))
            local = prune_params(init_params(spec, int(rng.integers(1 << 30))), cfg, spec)
            returned.append(ReturnedModel(local, cfg, int(rng.integers(1, 100)), cid))
        got = aggregate(g, returned, spec)
        ref = brute_force_aggregate(g.layers, [(r.params.layers, r.data_size) for r in returned])
        for (w, b), (rw, rb) in zip(got, ref):
            assert np.allclose(w, rw, rtol=1e-12, atol=0) and np.allclose(b, rb, rtol=1e-12, atol=0)
    return f"{n} random instances match the per-coordinate oracle"


def _p2_pool():
    return build_pool(ModelSpec((4, 4, 4, 8, 16, 4), 2), {"S": 0.4, "M": 0.7}, (3, 2))


def check_tables() -> str:
    pool = _p2_pool()
    t = Tables.create(1, 2)
    update_tables(3, 3, 0, t, pool)
    assert t.resource[:, 0].tolist() == [1, 1, 1, 2, 3]
    t = Tables.create(1, 2)
    update_tables(3, 1, 0, t, pool)
    assert t.resource[:, 0].tolist() == [1, 3, 0, 0, 0]
    return "hand-traced resource columns reproduced"


def check_rewards() -> str:
    pool = _p2_pool()
    ones = np.ones((5, 1), dtype=np.int64)
    got = [resource_reward(pool.find(lbl), 0, ones, pool) for lbl in ("S_1", "M_1", "L_1")]
    assert got == [0.9, 0.5, 0.1], got
    counts = np.array([[1], [4], [100]])
    assert [curiosity_reward(lvl, 0, counts) for lvl in "SML"] == [1.0, 0.5, 0.1]
    return "resource 0.9/0.5/0.1, curiosity 1/0.5/0.1"


def check_zero_lr_identity() -> str:
    spec = ModelSpec((3, 5, 2), 1)
    p = init_params(spec, 3)
    rng = np.random.default_rng(0)
    shard = Batch(rng.normal(size=(17, 3)), rng.integers(0, 2, size=17))
    assert local_train(p, shard, TrainConfig(learning_rate=0.0, seed=1)).equals(p)
    return "learning_rate 0 leaves parameters unchanged"


CHECKS: list[tuple[str, Callable[[], str]]] = [
    ("vgg16 parameter counts", check_vgg16_counts),
    ("gradient check", check_gradients),
    ("aggregation oracle", check_aggregation),
    ("table update traces", check_tables),
    ("reward formulas", check_rewards),
    ("zero learning rate", check_zero_lr_identity),
]


def run_selftest(echo: Callable[[str], None] = print) -> bool:
    ok = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            detail = fn()
            echo(f"PASS  {name:<24} {detail} ({time.perf_counter() - t0:.2f}s)")
        except Exception as exc:  # noqa: BLE001 - report every failure, keep going
            ok = False
            echo(f"FAIL  {name:<24} {type(exc).__name__}: {exc}")
    return ok
