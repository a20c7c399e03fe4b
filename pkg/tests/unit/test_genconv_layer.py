import numpy as np
import pytest

from genconv.core.cloud import PointCloud
from genconv.core.kdtree import brute_force_knn
from genconv.core.numeric import Activation, leaky_relu
from genconv.domain.models import HeadSpec, LayerSpec
from genconv.errors import EmptyInputError, ShapeError, StateError
from genconv.layers.genconv_layer import (
    GenConvLayer,
    extract_relations,
    genconv_backward,
    genconv_forward,
    global_head_forward,
    query_count,
    stride_sample,
)


def _layer(k=4, hidden=(6,), out=5, in_features=0, dims=2, stride=1.0, seed=0, concat_coords=True):
    spec = LayerSpec(
        k=k,
        stride_fraction=stride,
        hidden_widths=list(hidden),
        out_channels=out,
        concat_coords=concat_coords,
    )
    return GenConvLayer.from_spec(spec, in_features, dims, np.random.default_rng(seed), precision="float64")


def _head(in_features=3, classes=4, dims=2, seed=0, dense=False):
    return GenConvLayer.head_from_spec(
        HeadSpec(hidden_widths=[6], dense=dense),
        in_features,
        classes,
        dims,
        np.random.default_rng(seed),
        precision="float64",
    )


def _f(net, row):
    h = np.asarray(row, dtype=np.float64)
    for layer in net.layers:
        z = layer.weight @ h + layer.bias
        h = leaky_relu(z, layer.slope) if layer.activation is Activation.LEAKY_RELU else z
    return h


# ---- striding ----
def test_stride_half_of_thousand():
    idx = stride_sample(1000, 0.5, seed=3)
    assert idx.size == 500
    assert np.unique(idx).size == 500
    assert np.all(np.diff(idx) > 0)


def test_stride_one_is_identity():
    assert np.array_equal(stride_sample(37, 1.0, seed=9), np.arange(37))


def test_stride_is_seeded():
    assert np.array_equal(stride_sample(200, 0.3, seed=4), stride_sample(200, 0.3, seed=4))


def test_stride_rounds_up():
    assert query_count(5, 0.5) == 3
    assert query_count(10, 0.3) == 3
    assert query_count(1, 0.1) == 1


def test_stride_fraction_out_of_range():
    with pytest.raises(ShapeError):
        stride_sample(10, 0.0, seed=0)


def test_farthest_sampling_returns_distinct_sorted_indices(random_cloud):
    cloud = random_cloud(n=80)
    idx = stride_sample(cloud, 0.25, seed=1, method="farthest")
    assert idx.size == 20
    assert np.unique(idx).size == 20
    assert np.all(np.diff(idx) > 0)


# ---- relations ----
def test_relation_three_four_five():
    cloud = PointCloud.from_coords([[0.0, 0.0], [3.0, 4.0]], [[1.0], [7.0]], dtype=np.float64)
    rel = extract_relations(cloud, np.zeros((1, 2)), np.array([[1]]))
    assert rel.values[0, 0].tolist() == [3.0, 4.0, 5.0, 7.0]


def test_self_relation_is_zero_with_features_intact():
    cloud = PointCloud.from_coords([[1.0, 2.0]], [[0.25, -3.0]], dtype=np.float64)
    rel = extract_relations(cloud, cloud.coords, np.array([[0]]))
    assert rel.values[0, 0].tolist() == [0.0, 0.0, 0.0, 0.25, -3.0]


def test_relations_are_translation_invariant(rng, random_cloud):
    for seed in range(50):
        cloud = random_cloud(n=30, spatial_dims=3, features=2, seed=seed)
        queries = cloud.coords[:10]
        table = brute_force_knn(cloud.coords, queries, 5)
        t = rng.normal(size=3)
        t *= rng.uniform(0, 10) / np.linalg.norm(t)
        moved = cloud.translated(t)
        a = extract_relations(cloud, queries, table).values
        b = extract_relations(moved, queries + t, table).values
        assert np.allclose(a, b, rtol=0, atol=1e-6)


def test_distance_column_is_delta_norm(random_cloud):
    cloud = random_cloud(n=40, spatial_dims=3, features=1)
    rel = extract_relations(cloud, cloud.coords[:5], brute_force_knn(cloud.coords, cloud.coords[:5], 6))
    assert np.allclose(rel.distance, np.linalg.norm(rel.delta, axis=-1), rtol=1e-6)


def test_table_cloud_mismatch_raises(random_cloud):
    cloud = random_cloud(n=10)
    with pytest.raises(ShapeError):
        extract_relations(cloud, cloud.coords[:3], np.zeros((2, 4), dtype=np.int64))
    with pytest.raises(ShapeError):
        extract_relations(cloud, cloud.coords[:1], np.array([[10]]))


# ---- forward ----
def test_zero_filter_gives_zero_activations(random_cloud):
    layer = _layer()
    for p in layer.parameters():
        p[...] = 0.0
    out = genconv_forward(layer, random_cloud(n=20), seed=0)
    assert not out.features.any()


def test_output_shape_law(random_cloud):
    layer = _layer(k=6, out=7, stride=0.5)
    out = genconv_forward(layer, random_cloud(n=101), seed=2)
    assert out.n_points == 51
    assert out.as_matrix().shape == (51, 2 + 7)


def test_forward_matches_naive_triple_loop():
    r = np.random.default_rng(99)
    for case in range(100):
        dims = int(r.choice([2, 3]))
        d_in = int(r.integers(0, 3))
        n = int(r.integers(5, 40))
        k = int(r.integers(1, 8))
        stride = float(r.choice([1.0, 0.5, 0.3]))
        layer = _layer(k=k, hidden=(5, 4), out=3, in_features=d_in, dims=dims, stride=stride, seed=case)
        cloud = PointCloud.from_coords(r.normal(size=(n, dims)), r.normal(size=(n, d_in)), dtype=np.float64)
        got = genconv_forward(layer, cloud, seed=case)

        q_idx = stride_sample(cloud, stride, case)
        queries = cloud.coords[q_idx]
        table = brute_force_knn(cloud.coords, queries, k)
        expected = np.zeros((len(q_idx), 3))
        for i, q in enumerate(queries):
            for j in table.indices[i]:
                delta = cloud.coords[j] - q
                row = np.concatenate((delta, [np.sqrt(np.sum(delta**2))], cloud.features[j]))
                expected[i] += _f(layer.filter, row)
        expected = leaky_relu(expected, layer.slope)
        assert np.allclose(got.features, expected, rtol=1e-5, atol=1e-9)
        assert np.array_equal(got.coords, queries)


def test_spatially_blind_filter_is_permutation_invariant(random_cloud, rng):
    layer = _layer(k=25, in_features=2)
    layer.filter.layers[0].weight[:, :3] = 0.0
    cloud = random_cloud(n=25, features=2)
    out = genconv_forward(layer, cloud, seed=0).features
    assert np.allclose(out, out[0], rtol=0, atol=1e-6)
    permuted = genconv_forward(layer, cloud.take(rng.permutation(25)), seed=0).features
    assert np.allclose(permuted, out[0], rtol=0, atol=1e-6)


def test_locality_of_feature_perturbations(random_cloud):
    for seed in range(50):
        layer = _layer(k=4, in_features=2, seed=seed)
        cloud = random_cloud(n=30, features=2, seed=seed)
        before = genconv_forward(layer, cloud, seed=0).features
        table = brute_force_knn(cloud.coords, cloud.coords, 4)
        target = seed % 30
        feats = cloud.features.copy()
        feats[target] += 1.0
        after = genconv_forward(layer, PointCloud(cloud.coords, feats), seed=0).features
        touched = np.any(table.indices == target, axis=1)
        assert np.allclose(after[~touched], before[~touched], rtol=0, atol=1e-12)


def test_concat_coords_off_zeroes_coordinates(random_cloud):
    layer = _layer(concat_coords=False)
    out = genconv_forward(layer, random_cloud(n=12), seed=0)
    assert not out.coords.any()


def test_feature_width_mismatch_raises(random_cloud):
    with pytest.raises(ShapeError):
        genconv_forward(_layer(in_features=3), random_cloud(n=10, features=1), seed=0)


# ---- backward ----
def test_backward_before_forward_is_a_state_error():
    with pytest.raises(StateError):
        genconv_backward(_layer(), np.zeros((3, 5)))


def test_zero_upstream_gives_zero_parameter_gradients(random_cloud):
    layer = _layer(in_features=2)
    out = genconv_forward(layer, random_cloud(n=15, features=2), seed=0)
    grads, feature_grad = genconv_backward(layer, np.zeros_like(out.features))
    assert all(not g.any() for g in grads)
    assert not feature_grad.any()


def test_isolated_point_receives_no_feature_gradient(rng):
    coords = np.concatenate((rng.uniform(size=(12, 2)), [[100.0, 100.0]]))
    cloud = PointCloud.from_coords(coords, rng.normal(size=(13, 2)), dtype=np.float64)
    layer = _layer(k=3, in_features=2)
    out = layer.forward(cloud, query_idx=np.arange(12))
    _, feature_grad = layer.backward(np.ones_like(out.features))
    assert not feature_grad[12].any()
    assert feature_grad[:12].any()


def test_feature_gradient_matches_finite_differences(random_cloud, rng):
    layer = _layer(k=4, in_features=2, seed=3)
    cloud = random_cloud(n=15, features=2, seed=3)
    upstream = rng.normal(size=(15, 5))
    layer.forward(cloud, seed=0)
    _, feature_grad = layer.backward(upstream)
    h = 1e-6
    for i in range(15):
        for c in range(2):
            feats = cloud.features.copy()
            feats[i, c] += h
            up = float(np.sum(upstream * layer.forward(PointCloud(cloud.coords, feats), 0).features))
            feats[i, c] -= 2 * h
            down = float(np.sum(upstream * layer.forward(PointCloud(cloud.coords, feats), 0).features))
            assert (up - down) / (2 * h) == pytest.approx(feature_grad[i, c], rel=1e-4, abs=1e-6)


# ---- global head ----
def test_zero_head_gives_zero_logits(random_cloud):
    head = _head()
    for p in head.parameters():
        p[...] = 0.0
    assert not global_head_forward(head, random_cloud(n=9, features=3)).any()


def test_head_is_permutation_invariant(random_cloud, rng):
    head = _head(dims=3)
    for seed in range(10):
        cloud = random_cloud(n=40, spatial_dims=3, features=3, seed=seed)
        a = global_head_forward(head, cloud)
        b = global_head_forward(head, cloud.take(rng.permutation(40)))
        assert np.allclose(a, b, rtol=0, atol=1e-6)


def test_single_point_at_origin_is_one_filter_term():
    head = _head()
    cloud = PointCloud.from_coords([[0.0, 0.0]], [[0.5, -1.0, 2.0]], dtype=np.float64)
    expected = _f(head.filter, [0.0, 0.0, 0.0, 0.5, -1.0, 2.0])
    assert np.allclose(global_head_forward(head, cloud), expected, rtol=1e-12)


def test_empty_cloud_rejected():
    with pytest.raises(EmptyInputError):
        global_head_forward(_head(), None)


def test_dense_head_gives_per_point_logits(random_cloud):
    head = _head(dense=True)
    logits = global_head_forward(head, random_cloud(n=11, features=3), dense=True)
    assert logits.shape == (11, 4)


def test_head_backward_matches_finite_differences(random_cloud, rng):
    head = _head(in_features=2, classes=3)
    cloud = random_cloud(n=10, features=2, seed=8)
    upstream = rng.normal(size=3)
    head.head_forward(cloud)
    _, feature_grad = head.head_backward(upstream)
    h = 1e-6
    for i in range(10):
        feats = cloud.features.copy()
        feats[i, 0] += h
        up = float(upstream @ head.head_forward(PointCloud(cloud.coords, feats)))
        feats[i, 0] -= 2 * h
        down = float(upstream @ head.head_forward(PointCloud(cloud.coords, feats)))
        assert (up - down) / (2 * h) == pytest.approx(feature_grad[i, 0], rel=1e-4, abs=1e-6)
