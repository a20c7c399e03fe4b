# src/genconv/core/kdtree.py
"""
Exact k-nearest-neighbor search.

The KD-tree splits at the median of the widest dimension (ties resolved by
point index) and keeps up to ``leaf_capacity`` points per leaf. Results are
ordered by (distance, index), and the brute-force oracle uses the same
distance arithmetic, so both return bit-identical tables.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from ..errors import EmptyInputError, ShapeError
from ..logging import get_component_logger

log = get_component_logger("kdtree")

LEAF_CAPACITY = 16
SUPPORTED_DIMS = (2, 3)


@dataclass(frozen=True)
class NeighborTable:
    indices: np.ndarray  # (queries, K) int64
    distances: np.ndarray  # (queries, K) float64, nondecreasing per row

    @property
    def query_count(self) -> int:
        return int(self.indices.shape[0])

    @property
    def k(self) -> int:
        return int(self.indices.shape[1])


@dataclass(frozen=True)
class KdTree:
    points: np.ndarray  # (N, S) float64
    order: np.ndarray  # permutation of 0..N-1; leaves own contiguous ranges
    split_dim: np.ndarray  # -1 marks a leaf
    split_value: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    stop: np.ndarray
    leaf_capacity: int = LEAF_CAPACITY

    @property
    def n_points(self) -> int:
        return int(self.points.shape[0])

    @property
    def dims(self) -> int:
        return int(self.points.shape[1])

    @property
    def node_count(self) -> int:
        return int(self.split_dim.shape[0])

    def is_leaf(self, node: int) -> bool:
        return bool(self.split_dim[node] < 0)

    def leaf_indices(self, node: int) -> np.ndarray:
        return self.order[self.start[node] : self.stop[node]]

    def leaf_order(self) -> np.ndarray:
        """Point indices in in-order leaf traversal."""
        out: List[np.ndarray] = []
        stack = [0]
        while stack:
            node = stack.pop()
            if self.is_leaf(node):
                out.append(self.leaf_indices(node))
            else:
                stack.append(int(self.right[node]))
                stack.append(int(self.left[node]))
        return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def _as_coords(points, name: str) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be a 2-D coordinate array, got shape {arr.shape}")
    return arr


def squared_distances(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Column-by-column sum of squares; the single distance formula for tree and oracle."""
    diff = points - query
    d2 = diff[:, 0] * diff[:, 0]
    for c in range(1, diff.shape[1]):
        d2 = d2 + diff[:, c] * diff[:, c]
    return d2


# ─────────────────────────────────────────────
# 🌳 BUILD
# ─────────────────────────────────────────────
def build_kdtree(points, leaf_capacity: int = LEAF_CAPACITY) -> KdTree:
    pts = _as_coords(points, "points")
    if pts.shape[0] == 0:
        raise EmptyInputError("cannot build a KD-tree over zero points")
    if pts.shape[1] not in SUPPORTED_DIMS:
        raise ShapeError(f"spatial dimensionality must be 2 or 3, got {pts.shape[1]}")
    if not np.all(np.isfinite(pts)):
        raise ShapeError("point coordinates must be finite")
    if leaf_capacity < 1:
        raise ShapeError("leaf capacity must be >= 1")

    order = np.arange(pts.shape[0], dtype=np.int64)
    split_dim: List[int] = []
    split_value: List[float] = []
    left: List[int] = []
    right: List[int] = []
    start: List[int] = []
    stop: List[int] = []

    def new_node(lo: int, hi: int) -> int:
        split_dim.append(-1)
        split_value.append(0.0)
        left.append(-1)
        right.append(-1)
        start.append(lo)
        stop.append(hi)
        return len(split_dim) - 1

    root = new_node(0, pts.shape[0])
    pending = [root]
    while pending:
        node = pending.pop()
        lo, hi = start[node], stop[node]
        if hi - lo <= leaf_capacity:
            continue
        idx = order[lo:hi]
        sub = pts[idx]
        dim = int(np.argmax(sub.max(axis=0) - sub.min(axis=0)))
        ranked = idx[np.lexsort((idx, sub[:, dim]))]
        order[lo:hi] = ranked
        mid = lo + (hi - lo) // 2
        split_dim[node] = dim
        split_value[node] = float(pts[order[mid], dim])
        left[node] = new_node(lo, mid)
        right[node] = new_node(mid, hi)
        pending.append(right[node])
        pending.append(left[node])

    tree = KdTree(
        points=pts,
        order=order,
        split_dim=np.asarray(split_dim, dtype=np.int64),
        split_value=np.asarray(split_value, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        start=np.asarray(start, dtype=np.int64),
        stop=np.asarray(stop, dtype=np.int64),
        leaf_capacity=leaf_capacity,
    )
    log.debug("kdtree_built", points=tree.n_points, nodes=tree.node_count)
    return tree


# ─────────────────────────────────────────────
# 🔍 QUERY
# ─────────────────────────────────────────────
def _clamp_k(k: int, n: int) -> int:
    if k < 1:
        raise ShapeError(f"K must be >= 1, got {k}")
    if k > n:
        log.info("knn_k_clamped", requested=k, clamped_to=n)
        return n
    return k


def _empty_table(k: int) -> NeighborTable:
    return NeighborTable(np.empty((0, k), dtype=np.int64), np.empty((0, k), dtype=np.float64))


def _search_one(tree: KdTree, q: np.ndarray, k: int):
    best_d2 = np.empty(0, dtype=np.float64)
    best_idx = np.empty(0, dtype=np.int64)
    worst = np.inf
    stack = [(0, 0.0)]
    while stack:
        node, bound = stack.pop()
        if best_idx.size == k and bound > worst:
            continue
        dim = tree.split_dim[node]
        if dim < 0:
            idx = tree.order[tree.start[node] : tree.stop[node]]
            d2 = squared_distances(tree.points[idx], q)
            if best_idx.size == k:
                keep = d2 <= worst
                if not keep.any():
                    continue
                idx, d2 = idx[keep], d2[keep]
            cand_d2 = np.concatenate((best_d2, d2))
            cand_idx = np.concatenate((best_idx, idx))
            ranked = np.lexsort((cand_idx, cand_d2))[:k]
            best_d2, best_idx = cand_d2[ranked], cand_idx[ranked]
            if best_idx.size == k:
                worst = best_d2[-1]
            continue
        diff = q[dim] - tree.split_value[node]
        far_bound = max(bound, diff * diff)
        if diff < 0:
            near, far = tree.left[node], tree.right[node]
        else:
            near, far = tree.right[node], tree.left[node]
        stack.append((int(far), far_bound))
        stack.append((int(near), bound))
    return best_idx, best_d2


def knn_query(tree: KdTree, queries, k: int) -> NeighborTable:
    """Exact K nearest stored points for every query row, ties broken by smaller index."""
    qs = _as_coords(queries, "queries") if np.size(queries) else np.empty((0, tree.dims))
    k = _clamp_k(int(k), tree.n_points)
    if qs.shape[0] == 0:
        return _empty_table(k)
    if qs.shape[1] != tree.dims:
        raise ShapeError(f"queries have {qs.shape[1]} dims, tree has {tree.dims}")

    indices = np.empty((qs.shape[0], k), dtype=np.int64)
    d2 = np.empty((qs.shape[0], k), dtype=np.float64)
    for i in range(qs.shape[0]):
        indices[i], d2[i] = _search_one(tree, qs[i], k)
    return NeighborTable(indices, np.sqrt(d2))


def brute_force_knn(points, queries, k: int) -> NeighborTable:
    """Full pairwise distances, per-row sort by (distance, index)."""
    pts = _as_coords(points, "points")
    if pts.shape[0] == 0:
        raise EmptyInputError("no candidate points")
    qs = _as_coords(queries, "queries") if np.size(queries) else np.empty((0, pts.shape[1]))
    k = _clamp_k(int(k), pts.shape[0])
    if qs.shape[0] == 0:
        return _empty_table(k)
    if qs.shape[1] != pts.shape[1]:
        raise ShapeError(f"queries have {qs.shape[1]} dims, points have {pts.shape[1]}")

    all_idx = np.arange(pts.shape[0], dtype=np.int64)
    indices = np.empty((qs.shape[0], k), dtype=np.int64)
    d2 = np.empty((qs.shape[0], k), dtype=np.float64)
    for i in range(qs.shape[0]):
        row = squared_distances(pts, qs[i])
        ranked = np.lexsort((all_idx, row))[:k]
        indices[i] = ranked
        d2[i] = row[ranked]
    return NeighborTable(indices, np.sqrt(d2))
