import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptivefl.aggregation import ReturnedModel, aggregate, fedavg
from adaptivefl.nn import ModelSpec, ParamSet, init_params
from adaptivefl.oracles import brute_force_aggregate
from adaptivefl.pruning import PruneConfig, identity_config, kept_shapes, prune_params

# With I = 1 and r_w = 0.5 the third weight layer of this spec keeps exactly
# one coordinate, (0, 0), of its 2x2 matrix.
SPEC_2222 = ModelSpec((2, 2, 2, 2, 2), tau=1)
CORNER = PruneConfig("S", 1, 0.5, 1)


def constant_params(shapes, value):
    return ParamSet([(np.full((r, c), float(value)), np.full(r, float(value))) for r, c in shapes])


def with_layer(params, k, w):
    layers = list(params.layers)
    layers[k] = (np.array(w, dtype=float), layers[k][1])
    return ParamSet(layers)


def random_instance(rng):
    depth = int(rng.integers(3, 6))
    dims = [int(d) for d in rng.integers(1, 9, size=depth)]
    spec = ModelSpec(dims, 1)
    g = init_params(spec, int(rng.integers(1 << 30)))
    returned = []
    for cid in range(int(rng.integers(1, 7))):
        cfg = PruneConfig("S", 1, float(rng.uniform(0.05, 1.0)), int(rng.integers(1, depth)))
        local = prune_params(init_params(spec, int(rng.integers(1 << 30))), cfg, spec)
        returned.append(ReturnedModel(local, cfg, int(rng.integers(1, 100)), cid))
    return spec, g, returned


def test_sub_slice_of_example_spec():
    assert kept_shapes(SPEC_2222, CORNER)[2] == (1, 1)


def test_single_full_model_is_copied():
    g = init_params(SPEC_2222, 0)
    local = init_params(SPEC_2222, 1)
    out = aggregate(g, [ReturnedModel(local, identity_config(SPEC_2222), 17)], SPEC_2222)
    assert out.equals(local)


def test_partial_coverage_mixes_per_coordinate():
    full = identity_config(SPEC_2222)
    g = with_layer(init_params(SPEC_2222, 0), 2, [[1, 2], [3, 4]])
    a = constant_params(kept_shapes(SPEC_2222, full), 0.0)
    b = with_layer(constant_params(kept_shapes(SPEC_2222, CORNER), 0.0), 2, [[10]])
    out = aggregate(g, [ReturnedModel(a, full, 1, 0), ReturnedModel(b, CORNER, 3, 1)], SPEC_2222)
    assert out[2][0].tolist() == [[7.5, 0.0], [0.0, 0.0]]


def test_uncovered_coordinates_keep_global_value():
    g = with_layer(init_params(SPEC_2222, 0), 2, [[1, 2], [3, 4]])
    b = with_layer(constant_params(kept_shapes(SPEC_2222, CORNER), 0.0), 2, [[10]])
    out = aggregate(g, [ReturnedModel(b, CORNER, 3)], SPEC_2222)
    assert out[2][0].tolist() == [[10.0, 2.0], [3.0, 4.0]]
    # the unpruned bias entry of layer 3 is untouched as well
    assert out[2][1][1] == g[2][1][1]


def test_two_full_clients_weighted_mean():
    full = identity_config(SPEC_2222)
    g = init_params(SPEC_2222, 0)
    wa, wb = init_params(SPEC_2222, 1), init_params(SPEC_2222, 2)
    out = aggregate(g, [ReturnedModel(wa, full, 2, 0), ReturnedModel(wb, full, 3, 1)], SPEC_2222)
    for (w, b), (a1, a2), (b1, b2) in zip(out, wa, wb):
        np.testing.assert_allclose(w, (2 * a1 + 3 * b1) / 5, rtol=1e-14)
        np.testing.assert_allclose(b, (2 * a2 + 3 * b2) / 5, rtol=1e-14)


def test_no_returns_leaves_global_unchanged():
    g = init_params(SPEC_2222, 0)
    assert aggregate(g, [], SPEC_2222).equals(g)


def test_global_is_not_mutated():
    g = init_params(SPEC_2222, 0)
    snapshot = g.copy()
    aggregate(g, [ReturnedModel(init_params(SPEC_2222, 1), identity_config(SPEC_2222), 4)], SPEC_2222)
    assert g.equals(snapshot)


@pytest.mark.parametrize("size", [0, -3])
def test_rejects_non_positive_data_size(size):
    g = init_params(SPEC_2222, 0)
    with pytest.raises(ValueError):
        aggregate(g, [ReturnedModel(g.copy(), identity_config(SPEC_2222), size)], SPEC_2222)


def test_rejects_shape_label_mismatch():
    g = init_params(SPEC_2222, 0)
    with pytest.raises(ValueError):
        aggregate(g, [ReturnedModel(g.copy(), CORNER, 1)], SPEC_2222)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_matches_brute_force_oracle(seed):
    spec, g, returned = random_instance(np.random.default_rng(seed))
    got = aggregate(g, returned, spec)
    ref = brute_force_aggregate(g.layers, [(r.params.layers, r.data_size) for r in returned])
    for (w, b), (rw, rb) in zip(got, ref):
        np.testing.assert_allclose(w, rw, rtol=1e-12, atol=0)
        np.testing.assert_allclose(b, rb, rtol=1e-12, atol=0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_input_order_does_not_matter(seed):
    rng = np.random.default_rng(seed)
    spec, g, returned = random_instance(rng)
    shuffled = [returned[i] for i in rng.permutation(len(returned))]
    assert aggregate(g, returned, spec).equals(aggregate(g, shuffled, spec))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
def test_homogeneous_case_is_fedavg(seed, n):
    rng = np.random.default_rng(seed)
    spec = ModelSpec([int(d) for d in rng.integers(1, 9, size=4)], 1)
    full = identity_config(spec)
    models = [init_params(spec, int(rng.integers(1 << 30))) for _ in range(n)]
    sizes = [int(s) for s in rng.integers(1, 100, size=n)]
    returned = [ReturnedModel(m, full, s, i) for i, (m, s) in enumerate(zip(models, sizes))]
    assert aggregate(init_params(spec, 0), returned, spec).equals(fedavg(models, sizes))


def test_fedavg_rejects_empty():
    with pytest.raises(ValueError):
        fedavg([], [])
