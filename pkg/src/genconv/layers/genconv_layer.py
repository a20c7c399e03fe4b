# src/genconv/layers/genconv_layer.py
"""
Generalized convolution over point clouds.

For each query point the shared filter network f sees one relation row per
neighbor (Δ-coordinates, Euclidean distance, neighbor features), the filter
outputs are summed over the neighbors and passed through leaky ReLU. The
same machinery, evaluated once at the origin with every point as a
neighbor and no activation, is the global classification head.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from ..core.cloud import PointCloud
from ..core.kdtree import NeighborTable, build_kdtree, knn_query
from ..core.numeric import DEFAULT_SLOPE, FilterNetwork, leaky_relu, leaky_relu_grad
from ..domain.models import HeadSpec, LayerSpec
from ..errors import EmptyInputError, NumericalError, ShapeError, StateError
from ..logging import get_component_logger

log = get_component_logger("genconv_layer")

SAMPLING_METHODS = ("uniform", "farthest")


# ─────────────────────────────────────────────
# 🎯 QUERY SELECTION (STRIDING)
# ─────────────────────────────────────────────
def query_count(n_points: int, fraction: float) -> int:
    # rounding guards products like 0.3 * 10 = 3.0000000000000004
    return max(1, int(math.ceil(round(fraction * n_points, 9))))


def stride_sample(
    cloud: Union[PointCloud, int], fraction: float, seed: int, method: str = "uniform"
) -> np.ndarray:
    """Indices of the query points kept by striding, ascending."""
    if not 0.0 < fraction <= 1.0:
        raise ShapeError(f"stride fraction must lie in (0, 1], got {fraction}")
    n = cloud if isinstance(cloud, int) else cloud.n_points
    if fraction == 1.0:
        return np.arange(n, dtype=np.int64)
    m = query_count(n, fraction)
    rng = np.random.default_rng(seed)
    if method == "uniform":
        picked = rng.choice(n, size=m, replace=False)
    elif method == "farthest":
        if isinstance(cloud, int):
            raise ShapeError("farthest-point sampling needs coordinates")
        picked = _farthest_points(np.asarray(cloud.coords, dtype=np.float64), m, rng)
    else:
        raise ShapeError(f"unknown sampling method: {method}")
    return np.sort(np.asarray(picked, dtype=np.int64))


def _farthest_points(coords: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    n = coords.shape[0]
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = rng.integers(n)
    nearest = np.sum((coords - coords[chosen[0]]) ** 2, axis=1)
    for i in range(1, m):
        chosen[i] = int(np.argmax(nearest))
        nearest = np.minimum(nearest, np.sum((coords - coords[chosen[i]]) ** 2, axis=1))
    return chosen


# ─────────────────────────────────────────────
# 📐 RELATIONS
# ─────────────────────────────────────────────
@dataclass(frozen=True)
class RelationTensor:
    """(queries, neighbors, S + 1 + D): Δ-coordinates, distance, neighbor features."""

    values: np.ndarray
    spatial_dims: int

    @property
    def query_count(self) -> int:
        return int(self.values.shape[0])

    @property
    def k(self) -> int:
        return int(self.values.shape[1])

    @property
    def width(self) -> int:
        return int(self.values.shape[2])

    @property
    def delta(self) -> np.ndarray:
        return self.values[..., : self.spatial_dims]

    @property
    def distance(self) -> np.ndarray:
        return self.values[..., self.spatial_dims]

    @property
    def features(self) -> np.ndarray:
        return self.values[..., self.spatial_dims + 1 :]

    def rows(self) -> np.ndarray:
        return self.values.reshape(-1, self.width)


def extract_relations(
    cloud: PointCloud, queries, table: Union[NeighborTable, np.ndarray]
) -> RelationTensor:
    """Relative geometry of every (query, neighbor) pair; absolute positions never appear."""
    indices = table.indices if isinstance(table, NeighborTable) else np.asarray(table)
    queries = np.asarray(queries, dtype=cloud.dtype)
    if queries.ndim != 2 or queries.shape[1] != cloud.spatial_dims:
        raise ShapeError(f"queries must be (M, {cloud.spatial_dims}), got {queries.shape}")
    if indices.ndim != 2 or indices.shape[0] != queries.shape[0]:
        raise ShapeError(
            f"neighbor table has {indices.shape[0] if indices.ndim else 0} rows "
            f"for {queries.shape[0]} queries"
        )
    if indices.size and (indices.min() < 0 or indices.max() >= cloud.n_points):
        raise ShapeError("neighbor indices fall outside the cloud")

    delta = cloud.coords[indices] - queries[:, None, :]
    distance = np.sqrt(np.sum(delta * delta, axis=-1, keepdims=True))
    values = np.concatenate((delta, distance, cloud.features[indices]), axis=-1)
    return RelationTensor(values, cloud.spatial_dims)


# ─────────────────────────────────────────────
# 🧱 LAYER
# ─────────────────────────────────────────────
@dataclass
class _LayerCache:
    n_in: int
    neighbor_idx: np.ndarray  # (queries, K)
    z: np.ndarray  # (queries, D′) pre-activation sums
    activated: bool


class GenConvLayer:
    """One generalized convolution (or, with ``is_head``, the origin-query global head)."""

    def __init__(
        self,
        filter_net: FilterNetwork,
        spatial_dims: int,
        k: int = 1,
        stride_fraction: float = 1.0,
        slope: float = DEFAULT_SLOPE,
        concat_coords: bool = True,
        sampling: str = "uniform",
        is_head: bool = False,
        dense: bool = False,
    ):
        if filter_net.input_width < spatial_dims + 1:
            raise ShapeError(
                f"filter input width {filter_net.input_width} is narrower than the "
                f"{spatial_dims + 1} relation columns"
            )
        if sampling not in SAMPLING_METHODS:
            raise ShapeError(f"unknown sampling method: {sampling}")
        self.filter = filter_net
        self.spatial_dims = spatial_dims
        self.k = k
        self.stride_fraction = stride_fraction
        self.slope = slope
        self.concat_coords = concat_coords
        self.sampling = sampling
        self.is_head = is_head
        self.dense = dense
        self._cache: Optional[_LayerCache] = None

    # ---- construction ----
    @classmethod
    def from_spec(
        cls,
        spec: LayerSpec,
        in_features: int,
        spatial_dims: int,
        rng: np.random.Generator,
        slope: float = DEFAULT_SLOPE,
        filter_output_activation: bool = False,
        precision: str = "float32",
        sampling: str = "uniform",
    ) -> "GenConvLayer":
        widths = [spatial_dims + 1 + in_features, *spec.hidden_widths, spec.out_channels]
        net = FilterNetwork.initialize(widths, rng, slope, filter_output_activation, precision)
        return cls(
            net, spatial_dims, spec.k, spec.stride_fraction, slope, spec.concat_coords, sampling
        )

    @classmethod
    def head_from_spec(
        cls,
        spec: HeadSpec,
        in_features: int,
        num_classes: int,
        spatial_dims: int,
        rng: np.random.Generator,
        slope: float = DEFAULT_SLOPE,
        filter_output_activation: bool = False,
        precision: str = "float32",
    ) -> "GenConvLayer":
        widths = [spatial_dims + 1 + in_features, *spec.hidden_widths, num_classes]
        net = FilterNetwork.initialize(
            widths, rng, slope, filter_output_activation, precision, spec.output_init_scale
        )
        return cls(net, spatial_dims, slope=slope, concat_coords=False, is_head=True, dense=spec.dense)

    # ---- shape info ----
    @property
    def in_features(self) -> int:
        return self.filter.input_width - self.spatial_dims - 1

    @property
    def out_channels(self) -> int:
        return self.filter.output_width

    @property
    def parameter_count(self) -> int:
        return self.filter.parameter_count

    def parameters(self) -> List[np.ndarray]:
        return self.filter.parameters()

    def _check_cloud(self, cloud: PointCloud) -> None:
        if cloud.spatial_dims != self.spatial_dims:
            raise ShapeError(f"layer expects S={self.spatial_dims}, cloud has S={cloud.spatial_dims}")
        if cloud.feature_dims != self.in_features:
            raise ShapeError(
                f"layer expects D={self.in_features} feature channels, cloud has {cloud.feature_dims}"
            )

    # ---- shared evaluation path ----
    def _evaluate(self, cloud: PointCloud, queries: np.ndarray, neighbor_idx: np.ndarray, activate: bool):
        relations = extract_relations(cloud, queries, neighbor_idx)
        n_q, k = neighbor_idx.shape
        out = self.filter.forward(relations.rows()).reshape(n_q, k, self.out_channels)
        z = out.sum(axis=1)
        if not np.all(np.isfinite(z)):
            raise NumericalError("non-finite filter response")
        self._cache = _LayerCache(cloud.n_points, neighbor_idx, z, activate)
        return leaky_relu(z, self.slope) if activate else z

    def _backprop(self, upstream: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        if self._cache is None:
            raise StateError("backward called before forward")
        cache = self._cache
        upstream = np.asarray(upstream, dtype=self.filter.dtype)
        if upstream.shape != cache.z.shape:
            raise ShapeError(f"upstream gradient shape {upstream.shape} != output shape {cache.z.shape}")
        g = upstream * leaky_relu_grad(cache.z, self.slope) if cache.activated else upstream
        n_q, k = cache.neighbor_idx.shape
        rows = np.broadcast_to(g[:, None, :], (n_q, k, g.shape[1])).reshape(n_q * k, g.shape[1])
        param_grads, input_grad = self.filter.backward(rows)
        feature_grad = np.zeros((cache.n_in, self.in_features), dtype=self.filter.dtype)
        if self.in_features:
            # np.add.at accumulates sequentially: query-major, neighbor-minor
            np.add.at(feature_grad, cache.neighbor_idx.ravel(), input_grad[:, self.spatial_dims + 1 :])
        return param_grads, feature_grad

    # ---- generalized convolution ----
    def forward(self, cloud: PointCloud, seed: int = 0, query_idx: Optional[np.ndarray] = None) -> PointCloud:
        if self.is_head:
            raise StateError("use head_forward on a global head")
        self._check_cloud(cloud)
        if query_idx is None:
            query_idx = stride_sample(cloud, self.stride_fraction, seed, self.sampling)
        queries = cloud.coords[query_idx]
        table = knn_query(build_kdtree(cloud.coords), queries, self.k)
        activations = self._evaluate(cloud, queries, table.indices, activate=True)
        coords = queries if self.concat_coords else np.zeros_like(queries)
        return PointCloud(coords, activations.astype(cloud.dtype, copy=False))

    def backward(self, upstream) -> Tuple[List[np.ndarray], np.ndarray]:
        """Gradients for the filter parameters and the incoming feature channels (not coordinates)."""
        if isinstance(upstream, PointCloud):
            upstream = upstream.features
        return self._backprop(upstream)

    # ---- global head ----
    def head_forward(self, cloud: PointCloud, dense: Optional[bool] = None) -> np.ndarray:
        """Pre-softmax logits: (C,) at the origin query, or (N, C) in dense mode."""
        self._check_cloud(cloud)
        dense = self.dense if dense is None else dense
        n = cloud.n_points
        all_points = np.arange(n, dtype=np.int64)
        if dense:
            return self._evaluate(cloud, cloud.coords, np.tile(all_points, (n, 1)), activate=False)
        origin = np.zeros((1, self.spatial_dims), dtype=cloud.dtype)
        return self._evaluate(cloud, origin, all_points[None, :], activate=False)[0]

    def head_backward(self, grad_logits: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        grad_logits = np.asarray(grad_logits)
        if grad_logits.ndim == 1:
            grad_logits = grad_logits[None, :]
        return self._backprop(grad_logits)

    def clear_cache(self) -> None:
        self._cache = None
        self.filter.clear_cache()


# ─────────────────────────────────────────────
# 🔗 FUNCTIONAL ENTRY POINTS
# ─────────────────────────────────────────────
def genconv_forward(layer: GenConvLayer, cloud: PointCloud, seed: int = 0) -> PointCloud:
    return layer.forward(cloud, seed)


def genconv_backward(layer: GenConvLayer, upstream) -> Tuple[List[np.ndarray], np.ndarray]:
    return layer.backward(upstream)


def global_head_forward(head: GenConvLayer, cloud: Optional[PointCloud], dense: bool = False) -> np.ndarray:
    if cloud is None:
        raise EmptyInputError("global head needs a non-empty cloud")
    return head.head_forward(cloud, dense=dense)
