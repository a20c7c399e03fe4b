import numpy as np
import pytest

from genconv.core.kdtree import brute_force_knn, build_kdtree, knn_query
from genconv.errors import EmptyInputError, ShapeError


def _assert_same(tree_table, oracle_table):
    assert np.array_equal(tree_table.indices, oracle_table.indices)
    assert np.array_equal(tree_table.distances, oracle_table.distances)


def test_single_point_is_one_leaf():
    tree = build_kdtree(np.array([[0.5, -1.0]]))
    assert tree.node_count == 1
    assert tree.is_leaf(0)


def test_empty_input_rejected():
    with pytest.raises(EmptyInputError):
        build_kdtree(np.empty((0, 3)))


def test_non_finite_coordinates_rejected():
    with pytest.raises(ShapeError):
        build_kdtree(np.array([[0.0, np.nan], [1.0, 2.0]]))


def test_leaf_order_is_a_permutation(rng):
    tree = build_kdtree(rng.normal(size=(1000, 3)))
    assert np.array_equal(np.sort(tree.leaf_order()), np.arange(1000))


def test_split_invariant_holds(rng):
    pts = rng.normal(size=(500, 2))
    tree = build_kdtree(pts)
    for node in range(tree.node_count):
        if tree.is_leaf(node):
            continue
        dim, value = tree.split_dim[node], tree.split_value[node]
        left = tree.order[tree.start[tree.left[node]] : tree.stop[tree.left[node]]]
        right = tree.order[tree.start[tree.right[node]] : tree.stop[tree.right[node]]]
        assert np.all(pts[left, dim] <= value)
        assert np.all(pts[right, dim] >= value)


def test_self_match_first_at_distance_zero(rng):
    pts = rng.uniform(size=(200, 3))
    table = knn_query(build_kdtree(pts), pts[17:18], 1)
    assert table.indices[0, 0] == 17
    assert table.distances[0, 0] == 0.0


def test_unit_square_corners_tie_by_index():
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    table = knn_query(build_kdtree(corners), np.array([[0.5, 0.5]]), 4)
    assert table.indices[0].tolist() == [0, 1, 2, 3]
    assert np.allclose(table.distances[0], np.sqrt(2) / 2)


def test_matches_brute_force_on_random_queries(rng):
    pts = rng.normal(size=(100, 3))
    queries = rng.normal(size=(20, 3))
    _assert_same(knn_query(build_kdtree(pts), queries, 5), brute_force_knn(pts, queries, 5))


def test_collinear_points_stay_exact():
    pts = np.stack((np.arange(8, dtype=float), np.zeros(8)), axis=1)
    tree = build_kdtree(pts, leaf_capacity=2)
    queries = np.array([[2.4, 0.0], [7.0, 3.0], [-1.0, 0.0]])
    for k in (1, 3, 8):
        _assert_same(knn_query(tree, queries, k), brute_force_knn(pts, queries, k))


def test_duplicate_points_tie_break_by_index():
    pts = np.array([[1.0, 1.0]] * 5 + [[0.0, 0.0]] * 20)
    tree = build_kdtree(pts, leaf_capacity=3)
    table = knn_query(tree, np.array([[1.0, 1.0]]), 7)
    assert table.indices[0].tolist() == [0, 1, 2, 3, 4, 5, 6]
    _assert_same(table, brute_force_knn(pts, np.array([[1.0, 1.0]]), 7))


def test_k_larger_than_n_is_clamped(rng):
    pts = rng.normal(size=(5, 2))
    table = knn_query(build_kdtree(pts), pts, 50)
    assert table.k == 5
    assert all(sorted(row) == list(range(5)) for row in table.indices.tolist())


def test_k_must_be_positive(rng):
    with pytest.raises(ShapeError):
        knn_query(build_kdtree(rng.normal(size=(5, 2))), np.zeros((1, 2)), 0)


def test_empty_queries_give_empty_table(rng):
    table = knn_query(build_kdtree(rng.normal(size=(10, 2))), np.empty((0, 2)), 3)
    assert table.query_count == 0
    assert table.indices.shape == (0, 3)


def test_brute_force_single_point():
    table = brute_force_knn(np.array([[3.0, 4.0, 5.0]]), np.zeros((1, 3)), 1)
    assert table.indices.tolist() == [[0]]


def test_k_equal_n_orders_every_candidate(rng):
    pts = rng.normal(size=(30, 2))
    table = brute_force_knn(pts, np.zeros((1, 2)), 30)
    assert sorted(table.indices[0].tolist()) == list(range(30))
    assert np.all(np.diff(table.distances[0]) >= 0)


def test_rows_are_nondecreasing(rng):
    pts = rng.normal(size=(300, 3))
    table = knn_query(build_kdtree(pts), rng.normal(size=(40, 3)), 16)
    assert np.all(np.diff(table.distances, axis=1) >= 0)


def _oracle_cases(count, max_n, seed):
    r = np.random.default_rng(seed)
    for case in range(count):
        n = int(r.integers(1, max_n + 1))
        dims = int(r.choice([2, 3]))
        if case % 10 == 0:
            pts = np.repeat(r.normal(size=(max(1, n // 4), dims)), 4, axis=0)[:n]
        elif case % 10 == 1:
            t = r.uniform(size=n)
            pts = np.outer(t, r.normal(size=dims))
        else:
            pts = r.normal(size=(n, dims))
        if pts.shape[0] == 0:
            pts = r.normal(size=(1, dims))
        queries = np.concatenate((pts[: min(10, len(pts))], r.normal(size=(10, dims))))
        yield pts, queries


def test_oracle_equivalence_small_suite():
    for pts, queries in _oracle_cases(20, 200, seed=5):
        tree = build_kdtree(pts)
        for k in (1, 4, 16, len(pts)):
            _assert_same(knn_query(tree, queries, k), brute_force_knn(pts, queries, k))


@pytest.mark.slow
def test_oracle_equivalence_hundred_clouds():
    for pts, queries in _oracle_cases(100, 2000, seed=17):
        tree = build_kdtree(pts)
        for k in (1, 4, 16, len(pts)):
            _assert_same(knn_query(tree, queries, k), brute_force_knn(pts, queries, k))
