# src/genconv/datasets/toy.py
"""2-D squares-vs-circles toy task."""
from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from ..core.cloud import LabeledCloud, PointCloud
from ..core.rng import derive_int_seed
from ..errors import ShapeError

TOY_CLASSES: Tuple[str, ...] = ("circle", "square")


def _circle(n: int, rng: np.random.Generator, size: float) -> np.ndarray:
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.stack((size * np.cos(theta), size * np.sin(theta)), axis=1)


def _square(n: int, rng: np.random.Generator, size: float) -> np.ndarray:
    half = size / 2.0
    t = rng.uniform(0.0, 4.0, size=n)
    side = np.minimum(np.floor(t), 3).astype(np.int64)
    u = -half + size * (t - side)  # position along the side, in [-half, half)
    pts = np.empty((n, 2), dtype=np.float64)
    pts[side == 0] = np.stack((u[side == 0], np.full((side == 0).sum(), -half)), axis=1)
    pts[side == 1] = np.stack((np.full((side == 1).sum(), half), u[side == 1]), axis=1)
    pts[side == 2] = np.stack((-u[side == 2], np.full((side == 2).sum(), half)), axis=1)
    pts[side == 3] = np.stack((np.full((side == 3).sum(), -half), -u[side == 3]), axis=1)
    return pts


def gen_toy_cloud(
    shape: str,
    n_points: int = 100,
    center: Sequence[float] = (0.0, 0.0),
    size: float = 1.0,
    jitter: float = 0.0,
    seed: int = 0,
    dtype=np.float32,
) -> LabeledCloud:
    """
    Points uniform along a circle (radius ``size``) or a square (side ``size``)
    perimeter, plus Gaussian jitter with std ``jitter * size``.
    """
    if shape not in TOY_CLASSES:
        raise ShapeError(f"unknown toy shape {shape!r}; expected one of {TOY_CLASSES}")
    if n_points < 8:
        raise ShapeError("toy clouds need at least 8 points")
    if size <= 0 or jitter < 0:
        raise ShapeError("size must be > 0 and jitter >= 0")

    rng = np.random.default_rng(seed)
    pts = _circle(n_points, rng, size) if shape == "circle" else _square(n_points, rng, size)
    if jitter > 0:
        pts = pts + rng.normal(0.0, jitter * size, size=pts.shape)
    pts = pts + np.asarray(center, dtype=np.float64)
    return LabeledCloud(
        cloud=PointCloud.from_coords(pts, dtype=dtype),
        label=TOY_CLASSES.index(shape),
        class_name=shape,
    )


def make_toy_dataset(
    count: int,
    seed: int,
    n_points: int = 100,
    jitter: float = 0.02,
    split: str = "train",
    center_range: float = 0.5,
    size_range: Tuple[float, float] = (0.5, 1.0),
) -> List[LabeledCloud]:
    """Alternating classes (balanced within one), random placement and scale per cloud."""
    clouds: List[LabeledCloud] = []
    for i in range(count):
        cloud_seed = derive_int_seed(seed, f"data:{split}", i)
        rng = np.random.default_rng(cloud_seed)
        shape = TOY_CLASSES[i % len(TOY_CLASSES)]
        center = rng.uniform(-center_range, center_range, size=2)
        size = rng.uniform(*size_range)
        # circle radius = half the square side, so both shapes span the same box
        extent = size if shape == "square" else size / 2.0
        item = gen_toy_cloud(shape, n_points, center, extent, jitter, seed=cloud_seed)
        clouds.append(
            LabeledCloud(item.cloud, item.label, item.class_name, source=f"{split}/{i:05d}")
        )
    return clouds

