# src/genconv/viz/filter_probe.py
"""
Unit-sample probing of a learned filter.

The filter network is evaluated on a regular grid of synthetic relations:
Δ set to the grid location, distance set to its norm, every feature input
set to 1. The raw output of f is recorded (before the neighbor sum and
before the layer activation).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..core.numeric import FilterNetwork
from ..errors import ShapeError
from ..settings import settings


@dataclass(frozen=True)
class FilterImage:
    values: np.ndarray  # (H, W) for 2-D filters, (slices, H, W) for 3-D
    channel: int
    extent: float
    slice_coords: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.values.ndim not in (2, 3) or min(self.values.shape) < 1:
            raise ShapeError(f"filter image must be (H, W) or (slices, H, W), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ShapeError("filter image holds non-finite responses")

    @property
    def width(self) -> int:
        return int(self.values.shape[-1])

    @property
    def height(self) -> int:
        return int(self.values.shape[-2])

    @property
    def slice_count(self) -> int:
        return 1 if self.values.ndim == 2 else int(self.values.shape[0])

    @property
    def value_range(self) -> Tuple[float, float]:
        return float(self.values.min()), float(self.values.max())

    def slices(self):
        """(z, H×W image) pairs; a 2-D filter yields a single pair with z = 0."""
        if self.values.ndim == 2:
            return [(0.0, self.values)]
        return list(zip(self.slice_coords, self.values))


def grid_coordinates(extent: float, resolution: int) -> np.ndarray:
    """``resolution`` evenly spaced values over [-extent, extent]; the middle one is exactly 0 for odd sizes."""
    if resolution == 1:
        return np.zeros(1)
    i = np.arange(resolution, dtype=np.float64)
    return (2.0 * i - (resolution - 1)) / (resolution - 1) * extent


def unit_sample_rows(deltas: np.ndarray, feature_dims: int) -> np.ndarray:
    distance = np.sqrt(np.sum(deltas * deltas, axis=1, keepdims=True))
    ones = np.ones((deltas.shape[0], feature_dims))
    return np.concatenate((deltas, distance, ones), axis=1)


def probe_filter(
    filter_net: FilterNetwork,
    channel: int,
    extent: float = 1.0,
    resolution: Optional[int] = None,
    spatial_dims: int = 2,
    slice_coords: Optional[Sequence[float]] = None,
    slices: Optional[int] = None,
) -> FilterImage:
    """
    Evaluate output ``channel`` of ``filter_net`` over [-extent, extent]^S.

    Row 0 of the image is +y, column 0 is -x. 3-D filters become a stack of
    axial slices at ``slice_coords`` (default: ``slices`` evenly spaced z values).
    """
    resolution = resolution or settings.default_resolution
    if extent <= 0:
        raise ShapeError(f"extent must be > 0, got {extent}")
    if resolution < 1:
        raise ShapeError(f"resolution must be >= 1, got {resolution}")
    if spatial_dims not in (2, 3):
        raise ShapeError(f"spatial dimensionality must be 2 or 3, got {spatial_dims}")
    feature_dims = filter_net.input_width - spatial_dims - 1
    if feature_dims < 0:
        raise ShapeError(
            f"filter input width {filter_net.input_width} too narrow for S={spatial_dims}"
        )
    if not 0 <= channel < filter_net.output_width:
        raise ShapeError(f"channel {channel} out of range 0..{filter_net.output_width - 1}")

    axis = grid_coordinates(extent, resolution)
    ys, xs = np.meshgrid(axis[::-1], axis, indexing="ij")
    plane = np.stack((xs.ravel(), ys.ravel()), axis=1)

    if spatial_dims == 2:
        z_values: Tuple[float, ...] = ()
        deltas = plane
    else:
        if slice_coords is None:
            z_values = tuple(float(z) for z in grid_coordinates(extent, slices or settings.default_slices))
        else:
            z_values = tuple(float(z) for z in slice_coords)
        if not z_values:
            raise ShapeError("3-D probing needs at least one slice")
        deltas = np.concatenate(
            [np.concatenate((plane, np.full((plane.shape[0], 1), z)), axis=1) for z in z_values]
        )

    out = filter_net.forward(unit_sample_rows(deltas, feature_dims))
    filter_net.clear_cache()
    values = np.asarray(out[:, channel], dtype=np.float64)
    shape = (resolution, resolution) if spatial_dims == 2 else (len(z_values), resolution, resolution)
    return FilterImage(values.reshape(shape), channel, float(extent), z_values)
