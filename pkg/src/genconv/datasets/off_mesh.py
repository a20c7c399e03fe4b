# src/genconv/datasets/off_mesh.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Tuple

import numpy as np

from ..core.cloud import PointCloud
from ..errors import DataError, OffParseError


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray  # (F, 3) int64

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_faces(self) -> int:
        return int(self.faces.shape[0])

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    @property
    def surface_area(self) -> float:
        return float(self.triangle_areas().sum()) if self.n_faces else 0.0


# ─────────────────────────────────────────────
# 📄 OFF PARSING
# ─────────────────────────────────────────────
def _content_lines(text: str) -> Iterator[Tuple[int, List[str]]]:
    for line_no, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            yield line_no, tokens


def _ints(tokens: List[str], line_no: int, what: str) -> List[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise OffParseError(f"expected integers for {what}, got {' '.join(tokens)!r}", line_no) from None


def parse_off(text: str) -> TriangleMesh:
    """
    Parse an OFF mesh. Accepts the ModelNet variant where the header and the
    counts share the first line ("OFF3 1 0"); polygons are fan-triangulated.
    """
    lines = _content_lines(text)
    try:
        line_no, tokens = next(lines)
    except StopIteration:
        raise OffParseError("empty file", 1) from None
    if not tokens[0].startswith("OFF"):
        raise OffParseError(f"missing OFF header, found {tokens[0]!r}", line_no)

    rest = [tokens[0][3:]] + tokens[1:] if tokens[0] != "OFF" else tokens[1:]
    rest = [t for t in rest if t]
    if not rest:
        try:
            line_no, rest = next(lines)
        except StopIteration:
            raise OffParseError("missing vertex/face counts", line_no + 1) from None
    counts = _ints(rest, line_no, "counts")
    if len(counts) < 2 or counts[0] < 0 or counts[1] < 0:
        raise OffParseError(f"malformed counts {rest!r}", line_no)
    n_vertices, n_faces = counts[0], counts[1]

    vertices = np.empty((n_vertices, 3), dtype=np.float64)
    for i in range(n_vertices):
        try:
            line_no, tokens = next(lines)
        except StopIteration:
            raise OffParseError(f"expected {n_vertices} vertices, found {i}", line_no + 1) from None
        if len(tokens) < 3:
            raise OffParseError("vertex needs three coordinates", line_no)
        try:
            vertices[i] = [float(t) for t in tokens[:3]]
        except ValueError:
            raise OffParseError(f"bad vertex coordinates {tokens[:3]!r}", line_no) from None

    triangles: List[Tuple[int, int, int]] = []
    for i in range(n_faces):
        try:
            line_no, tokens = next(lines)
        except StopIteration:
            raise OffParseError(f"expected {n_faces} faces, found {i}", line_no + 1) from None
        values = _ints(tokens, line_no, "face")
        arity = values[0]
        if arity < 3 or len(values) < arity + 1:
            raise OffParseError(f"face declares {arity} vertices but lists {len(values) - 1}", line_no)
        idx = values[1 : arity + 1]
        if any(v < 0 or v >= n_vertices for v in idx):
            raise OffParseError(f"face index out of range 0..{n_vertices - 1}", line_no)
        triangles.extend((idx[0], idx[j], idx[j + 1]) for j in range(1, arity - 1))

    faces = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    return TriangleMesh(vertices=vertices, faces=faces)


def read_off(path: str) -> TriangleMesh:
    with open(path, "r", encoding="utf-8", errors="replace") as f:
        return parse_off(f.read())


# ─────────────────────────────────────────────
# 🎲 SURFACE SAMPLING
# ─────────────────────────────────────────────
def sample_mesh(mesh: TriangleMesh, n_points: int, seed: int, dtype=np.float32) -> PointCloud:
    """Area-weighted triangle choice, then uniform barycentric sampling inside it."""
    if mesh.n_faces == 0:
        raise DataError("mesh has no faces to sample")
    areas = mesh.triangle_areas()
    total = float(areas.sum())
    if not total > 0.0:
        raise DataError("mesh has zero surface area")

    rng = np.random.default_rng(seed)
    tri = rng.choice(mesh.n_faces, size=n_points, p=areas / total)
    r1, r2 = rng.random(n_points), rng.random(n_points)
    s = np.sqrt(r1)
    u, v, w = 1.0 - s, s * (1.0 - r2), s * r2
    a, b, c = (mesh.vertices[mesh.faces[tri, i]] for i in range(3))
    pts = u[:, None] * a + v[:, None] * b + w[:, None] * c
    return PointCloud.from_coords(pts, dtype=dtype)


def normalize_cloud(cloud: PointCloud) -> PointCloud:
    """Centroid to the origin, farthest point to unit norm (scale untouched if all points coincide)."""
    coords = np.asarray(cloud.coords, dtype=np.float64)
    centered = coords - coords.mean(axis=0)
    radius = float(np.max(np.linalg.norm(centered, axis=1)))
    scale_ref = max(1.0, float(np.max(np.abs(coords))))
    if radius <= 1e-12 * scale_ref:
        centered = np.zeros_like(centered)
    else:
        centered = centered / radius
    return PointCloud(centered.astype(cloud.dtype), cloud.features)
