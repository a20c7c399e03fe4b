# src/genconv/services/benchmark.py
from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

from ..core.cloud import PointCloud
from ..core.kdtree import build_kdtree, knn_query
from ..core.rng import random_stream
from ..domain.models import LayerSpec
from ..errors import ShapeError
from ..layers.genconv_layer import GenConvLayer
from ..logging import get_component_logger

log = get_component_logger("benchmark")

BENCH_COLUMNS = ("n_points", "knn_ms", "forward_ms", "repetitions")


@dataclass
class ScalingRow:
    n_points: int
    knn_ms: float
    forward_ms: float
    knn_samples: List[float] = field(default_factory=list)
    forward_samples: List[float] = field(default_factory=list)

    @property
    def repetitions(self) -> int:
        return len(self.forward_samples)


def _time_ms(fn: Callable[[], object]) -> float:
    started = time.perf_counter()
    fn()
    return (time.perf_counter() - started) * 1e3


def bench_scaling(
    counts: Sequence[int],
    k: int = 16,
    layer_spec: Optional[LayerSpec] = None,
    repetitions: int = 5,
    seed: int = 0,
    spatial_dims: int = 3,
) -> List[ScalingRow]:
    """
    Median wall time of KNN (tree build + query for every point) and of one
    full genconv forward, per cloud size. Each size gets one untimed warm-up.
    """
    if repetitions < 1:
        raise ShapeError("repetitions must be >= 1")
    if any(b < a for a, b in zip(counts, counts[1:])):
        raise ShapeError(f"point counts must be ascending, got {list(counts)}")
    spec = layer_spec or LayerSpec(k=k, hidden_widths=[16, 16], out_channels=16)
    layer = GenConvLayer.from_spec(spec, 0, spatial_dims, random_stream(seed, "init"))

    rows: List[ScalingRow] = []
    for n in counts:
        rng = random_stream(seed, "data", n)
        cloud = PointCloud.from_coords(rng.uniform(-1.0, 1.0, size=(n, spatial_dims)))

        def knn() -> None:
            knn_query(build_kdtree(cloud.coords), cloud.coords, spec.k)

        def forward() -> None:
            layer.forward(cloud, seed)
            layer.clear_cache()

        knn()
        forward()
        row = ScalingRow(n_points=n, knn_ms=0.0, forward_ms=0.0)
        for _ in range(repetitions):
            row.knn_samples.append(_time_ms(knn))
            row.forward_samples.append(_time_ms(forward))
        row.knn_ms = statistics.median(row.knn_samples)
        row.forward_ms = statistics.median(row.forward_samples)
        rows.append(row)
        log.info("bench_point", n=n, knn_ms=round(row.knn_ms, 3), forward_ms=round(row.forward_ms, 3))
    return rows


def doubling_ratios(rows: Sequence[ScalingRow], attribute: str = "forward_ms") -> List[float]:
    """Time ratio between consecutive rows whose sizes differ by exactly 2x."""
    ratios = []
    for a, b in zip(rows, rows[1:]):
        if b.n_points == 2 * a.n_points:
            ratios.append(getattr(b, attribute) / max(getattr(a, attribute), 1e-9))
    return ratios


def write_bench_csv(rows: Sequence[ScalingRow], path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(BENCH_COLUMNS)
        for r in rows:
            writer.writerow([r.n_points, f"{r.knn_ms:.4f}", f"{r.forward_ms:.4f}", r.repetitions])


def default_counts(start: int = 2048, doublings: int = 3) -> List[int]:
    return [int(start * 2**i) for i in range(doublings + 1)]

