import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptivefl.nn import ModelSpec, forward, init_params
from adaptivefl.pruning import (
    ModelPool,
    PruneConfig,
    build_pool,
    config_param_count,
    fit_to_budget,
    identity_config,
    kept_mask,
    kept_shapes,
    model_size,
    param_count,
    parse_shape_spec,
    prune_params,
    vgg16_shape,
)

SPEC_4884 = ModelSpec((4, 8, 8, 4), tau=1)


class TestPruneParams:
    @pytest.mark.parametrize("start", [1, 2, 3])
    def test_full_width_is_identity(self, start):
        g = init_params(SPEC_4884, 0)
        out = prune_params(g, PruneConfig("S", 1, 1.0, start), SPEC_4884)
        assert out.equals(g)

    def test_prunes_after_start_layer(self):
        out = prune_params(init_params(SPEC_4884, 0), PruneConfig("S", 1, 0.5, 1), SPEC_4884)
        assert out.shapes() == [(8, 4), (4, 8), (4, 4)]

    def test_input_cols_follow_previous_rows(self):
        # layer 2 is kept whole, so the class layer still reads all 8 of its outputs
        out = prune_params(init_params(SPEC_4884, 0), PruneConfig("S", 1, 0.5, 2), SPEC_4884)
        assert out.shapes() == [(8, 4), (8, 8), (4, 8)]

    def test_values_are_top_left_slices(self):
        g = init_params(SPEC_4884, 3)
        out = prune_params(g, PruneConfig("S", 1, 0.5, 1), SPEC_4884)
        for (w, b), (gw, gb) in zip(out, g):
            r, c = w.shape
            assert np.array_equal(w, gw[:r, :c])
            assert np.array_equal(b, gb[:r])

    def test_output_is_a_copy(self):
        g = init_params(SPEC_4884, 3)
        out = prune_params(g, PruneConfig("S", 1, 0.5, 1), SPEC_4884)
        out[1][0][:] = 0
        assert np.any(g[1][0][:4, :8] != 0)

    def test_rejects_start_below_tau(self):
        spec = ModelSpec((4, 8, 8, 4), tau=2)
        with pytest.raises(ValueError):
            kept_shapes(spec, PruneConfig("S", 1, 0.5, 1))

    def test_rejects_mismatched_params(self):
        with pytest.raises(ValueError):
            prune_params(init_params(ModelSpec((4, 8, 4), 1), 0), identity_config(SPEC_4884), SPEC_4884)

    @settings(max_examples=60, deadline=None)
    @given(
        dims=st.lists(st.integers(1, 12), min_size=3, max_size=6),
        r_w=st.floats(0.05, 1.0),
        data=st.data(),
    )
    def test_pruned_model_runs_forward(self, dims, r_w, data):
        spec = ModelSpec(dims, 1)
        start = data.draw(st.integers(1, spec.n_layers))
        sub = prune_params(init_params(spec, 0), PruneConfig("S", 1, r_w, start), spec)
        probs = forward(sub, np.ones((2, dims[0])))
        assert probs.shape == (2, dims[-1])

    @settings(max_examples=60, deadline=None)
    @given(
        dims=st.lists(st.integers(1, 12), min_size=3, max_size=6),
        r_small=st.floats(0.05, 1.0),
        r_big=st.floats(0.05, 1.0),
        data=st.data(),
    )
    def test_nested_configs_give_nested_masks(self, dims, r_small, r_big, data):
        spec = ModelSpec(dims, 1)
        r_small, r_big = sorted((r_small, r_big))
        i_small = data.draw(st.integers(1, spec.n_layers))
        i_big = data.draw(st.integers(i_small, spec.n_layers))
        small = PruneConfig("S", 1, r_small, i_small)
        big = PruneConfig("M", 1, r_big, i_big)
        assert big.contains(small)
        for ms, mb in zip(kept_mask(spec, small), kept_mask(spec, big)):
            assert not np.any(ms & ~mb)
        assert model_size(spec, small) <= model_size(spec, big)


class TestBuildPool:
    def test_three_variant_layout(self):
        spec = ModelSpec((16, 16, 24, 32, 48, 64, 64, 64, 8), tau=2)
        pool = build_pool(spec, {"S": 0.40, "M": 0.66}, (4, 3, 2))
        assert pool.labels() == ["S_3", "S_2", "S_1", "M_3", "M_2", "M_1", "L_1"]
        assert len(pool) == 7 and pool.p == 3
        assert [e.start_layer for e in pool.entries[:3]] == [2, 3, 4]
        assert pool[pool.top] == identity_config(spec)
        assert list(pool.sizes) == sorted(set(pool.sizes))
        assert pool.sizes[-1] == spec_size(spec)

    def test_single_variant_layout(self):
        pool = build_pool(SPEC_4884, {"S": 0.4, "M": 0.7}, (1,))
        assert pool.labels() == ["S_1", "M_1", "L_1"]

    def test_nesting_within_level(self, p2_pool):
        for lvl in "SM":
            rows = p2_pool.level_rows(lvl)
            for a, b in zip(rows, rows[1:]):
                assert p2_pool[b].contains(p2_pool[a])

    @pytest.mark.parametrize(
        "ratios, starts",
        [
            ({"S": 0.4, "M": 1.3}, (1,)),
            ({"S": 0.4, "M": 0.7, "L": 0.9}, (1,)),
            ({"S": 0.4}, (1,)),
            ({"S": 0.4, "M": 0.7}, (1, 2)),
            ({"S": 0.4, "M": 0.7}, ()),
            ({"S": 0.4, "M": 0.7}, (4,)),
        ],
    )
    def test_rejects_bad_arguments(self, ratios, starts):
        with pytest.raises(ValueError):
            build_pool(SPEC_4884, ratios, starts)

    def test_rejects_non_monotone_sizes(self):
        # S and M share the ratio after rounding, so S_1 and M_1 coincide in size
        with pytest.raises(ValueError, match="strictly increasing"):
            build_pool(SPEC_4884, {"S": 0.5, "M": 0.5}, (1,))


def spec_size(spec):
    return sum(d * n + d for d, n in spec.layer_shapes())


class TestParamCount:
    def test_vgg16_full(self):
        full = param_count(vgg16_shape())
        assert full == 33_625_792
        assert abs(full - 33.65e6) / 33.65e6 < 0.005

    @pytest.mark.parametrize("r_w, start, ratio", [(0.66, 8, 0.50), (0.40, 8, 0.25)])
    def test_vgg16_level_ratios(self, r_w, start, ratio):
        shape = vgg16_shape()
        assert abs(param_count(shape, r_w, start) / param_count(shape) - ratio) <= 0.03

    def test_vgg16_variants_shrink_with_start_layer(self):
        shape = vgg16_shape()
        for r in (0.66, 0.40):
            counts = [param_count(shape, r, i) for i in (8, 6, 4)]
            assert counts[0] > counts[1] > counts[2]

    def test_dense_matches_model_size_without_biases(self):
        text = "# shapespec v1\ndense 4 8 0 1\ndense 8 8 1 1\ndense 8 4 1 0\n"
        shape = parse_shape_spec(text)
        cfg = PruneConfig("S", 1, 0.5, 1)
        weights = sum(r * c for r, c in kept_shapes(SPEC_4884, cfg))
        assert config_param_count(shape, cfg) == weights == 32 + 32 + 16

    def test_conv_kernel_weighting(self):
        shape = parse_shape_spec("conv3x3 3 4 0 1\ndense 4 2 1 0\n")
        assert param_count(shape) == 3 * 4 * 9 + 8

    @pytest.mark.parametrize(
        "text",
        ["", "dense 4 8 1 1\ndense 8 4 1 0\n", "dense 4 8 0 1\nfoo 8 4 1 0\n", "dense 4 8 0\n"],
    )
    def test_rejects_bad_shape_text(self, text):
        with pytest.raises(ValueError):
            parse_shape_spec(text)

    @settings(max_examples=100, deadline=None)
    @given(r1=st.floats(0.01, 1.0), r2=st.floats(0.01, 1.0), i1=st.integers(0, 16), i2=st.integers(0, 16))
    def test_monotone_in_ratio_and_start_layer(self, r1, r2, i1, i2):
        shape = vgg16_shape()
        (r1, r2), (i1, i2) = sorted((r1, r2)), sorted((i1, i2))
        assert param_count(shape, r1, i1) <= param_count(shape, r2, i2)


def synthetic_pool(sizes_by_label):
    """Pool with hand-set sizes; configs only matter through ``contains``."""
    configs = {
        "S_2": PruneConfig("S", 2, 0.4, 2),
        "S_1": PruneConfig("S", 1, 0.4, 3),
        "M_2": PruneConfig("M", 2, 0.7, 2),
        "M_1": PruneConfig("M", 1, 0.7, 3),
        "L_1": PruneConfig("L", 1, 1.0, 4),
    }
    labels = list(sizes_by_label)
    return ModelPool(
        tuple(configs[lbl] for lbl in labels),
        tuple(sizes_by_label[lbl] for lbl in labels),
        {"S": 0.4, "M": 0.7, "L": 1.0},
        2,
    )


class TestFitToBudget:
    def test_already_fits(self):
        pool = synthetic_pool({"S_2": 20, "S_1": 25, "M_2": 46, "M_1": 50, "L_1": 100})
        assert fit_to_budget(pool[pool.top], 100, pool) == pool[pool.top]

    def test_largest_fitting_entry(self):
        pool = synthetic_pool({"S_2": 20, "S_1": 25, "M_2": 46, "M_1": 50, "L_1": 100})
        assert fit_to_budget(pool[pool.top], 48, pool).label == "M_2"

    def test_vgg_medium_falls_to_small(self):
        shape = vgg16_shape()
        entries = [
            PruneConfig(lvl, v, r, i)
            for lvl, r in (("S", 0.40), ("M", 0.66))
            for v, i in ((3, 4), (2, 6), (1, 8))
        ] + [PruneConfig("L", 1, 1.0, 16)]
        sizes = tuple(config_param_count(shape, e) for e in entries)
        assert list(sizes) == sorted(sizes)
        pool = ModelPool(tuple(entries), sizes, {"S": 0.4, "M": 0.66, "L": 1.0}, 3)
        m1 = pool[pool.find("M_1")]
        capacity = min(sizes[3:6]) - 1
        assert capacity >= sizes[pool.find("S_1")]
        assert fit_to_budget(m1, capacity, pool).label == "S_1"

    def test_capacity_below_pool(self, p2_pool):
        with pytest.raises(ValueError):
            fit_to_budget(p2_pool[p2_pool.top], p2_pool.sizes[0] - 1, p2_pool)

    def test_never_grows_past_received(self, p2_pool):
        s2 = p2_pool[0]
        assert fit_to_budget(s2, 10**9, p2_pool) == s2

    @settings(max_examples=200, deadline=None)
    @given(capacity=st.integers(0, 400), received=st.integers(0, 4))
    def test_result_is_maximal_nested_fit(self, p2_pool, capacity, received):
        pool = p2_pool
        recv = pool[received]
        candidates = [
            i for i in range(len(pool)) if pool.sizes[i] <= capacity and recv.contains(pool[i])
        ]
        if not candidates:
            with pytest.raises(ValueError):
                fit_to_budget(recv, capacity, pool)
            return
        got_cfg = fit_to_budget(recv, capacity, pool)
        best = max(candidates, key=lambda i: pool.sizes[i])
        assert got_cfg == pool[best]
        assert pool.sizes[pool.index(got_cfg)] <= capacity


class TestContains:
    def test_full_contains_everything(self):
        full = PruneConfig("L", 1, 1.0, 3)
        for r, i in itertools.product((0.1, 0.5, 1.0), (1, 2, 3)):
            assert full.contains(PruneConfig("S", 1, r, i))

    def test_wider_but_earlier_start_is_not_nested(self):
        a = PruneConfig("M", 1, 0.7, 1)
        b = PruneConfig("S", 1, 0.4, 2)
        assert not a.contains(b)
        assert not b.contains(a)

    @pytest.mark.parametrize(
        "args", [("X", 1, 0.5, 1), ("S", 1, 0.0, 1), ("S", 1, 1.5, 1), ("L", 1, 0.5, 1), ("S", 0, 0.5, 1)]
    )
    def test_config_rejects(self, args):
        with pytest.raises(ValueError):
            PruneConfig(*args)
