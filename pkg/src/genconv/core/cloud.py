# src/genconv/core/cloud.py
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyInputError, ShapeError


@dataclass(frozen=True)
class PointCloud:
    """
    N points, each with S spatial coordinates and D feature channels.

    ``coords`` is (N, S) and ``features`` is (N, D); D may be 0. The matrix view
    (``as_matrix``) places coordinates first, as the layers consume it.
    """

    coords: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        if self.coords.ndim != 2:
            raise ShapeError(f"coords must be (N, S), got {self.coords.shape}")
        if self.coords.shape[0] == 0:
            raise EmptyInputError("a point cloud needs at least one point")
        if self.coords.shape[1] not in (2, 3):
            raise ShapeError(f"spatial dimensionality must be 2 or 3, got {self.coords.shape[1]}")
        if self.features.ndim != 2 or self.features.shape[0] != self.coords.shape[0]:
            raise ShapeError(
                f"features {self.features.shape} do not match {self.coords.shape[0]} points"
            )
        if not (np.all(np.isfinite(self.coords)) and np.all(np.isfinite(self.features))):
            raise ShapeError("point cloud values must be finite")

    @classmethod
    def from_coords(cls, coords, features=None, dtype=np.float32) -> "PointCloud":
        coords = np.asarray(coords, dtype=dtype)
        if coords.ndim == 1:
            coords = coords[None, :]
        if features is None:
            features = np.zeros((coords.shape[0], 0), dtype=dtype)
        return cls(coords, np.asarray(features, dtype=dtype))

    @classmethod
    def from_matrix(cls, matrix, spatial_dims: int) -> "PointCloud":
        matrix = np.asarray(matrix)
        return cls(matrix[:, :spatial_dims].copy(), matrix[:, spatial_dims:].copy())

    @property
    def n_points(self) -> int:
        return int(self.coords.shape[0])

    @property
    def spatial_dims(self) -> int:
        return int(self.coords.shape[1])

    @property
    def feature_dims(self) -> int:
        return int(self.features.shape[1])

    @property
    def dtype(self) -> np.dtype:
        return self.coords.dtype

    def as_matrix(self) -> np.ndarray:
        return np.concatenate((self.coords, self.features), axis=1)

    def astype(self, dtype) -> "PointCloud":
        return PointCloud(self.coords.astype(dtype), self.features.astype(dtype))

    def take(self, indices) -> "PointCloud":
        indices = np.asarray(indices, dtype=np.int64)
        return PointCloud(self.coords[indices], self.features[indices])

    def translated(self, offset) -> "PointCloud":
        return PointCloud(self.coords + np.asarray(offset, dtype=self.coords.dtype), self.features)


@dataclass(frozen=True)
class LabeledCloud:
    cloud: PointCloud
    label: int
    class_name: str
    source: str = ""
