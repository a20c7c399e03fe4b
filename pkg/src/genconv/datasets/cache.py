# src/genconv/datasets/cache.py
"""
PCLD cloud files and the dataset manifest.

One file per cloud, little-endian: magic "PCLD", version u16, S u8, D u8,
N u32, N·(S+D) float32 values (coordinates then features per point), label u16.
"""
from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..core.cloud import LabeledCloud, PointCloud
from ..errors import DataError, GenConvError
from ..logging import get_component_logger

log = get_component_logger("pcld_cache")

MAGIC = b"PCLD"
VERSION = 1
_HEADER = struct.Struct("<4sHBBI")
_LABEL = struct.Struct("<H")
MANIFEST_NAME = "manifest.csv"
MANIFEST_COLUMNS = ("split", "file", "label", "class_name")


def encode_pcld(item: LabeledCloud) -> bytes:
    cloud = item.cloud
    if not 0 <= item.label <= 0xFFFF:
        raise DataError(f"label {item.label} does not fit in u16")
    blob = cloud.as_matrix().astype("<f4", copy=False)
    header = _HEADER.pack(MAGIC, VERSION, cloud.spatial_dims, cloud.feature_dims, cloud.n_points)
    return header + blob.tobytes() + _LABEL.pack(item.label)


def decode_pcld(data: bytes, class_name: str = "", source: str = "") -> LabeledCloud:
    if len(data) < _HEADER.size:
        raise DataError(f"PCLD file too short ({len(data)} bytes)")
    magic, version, s, d, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DataError(f"not a PCLD file (magic {magic!r})")
    if version != VERSION:
        raise DataError(f"unsupported PCLD version {version}")
    expected = _HEADER.size + 4 * n * (s + d) + _LABEL.size
    if len(data) != expected:
        raise DataError(f"PCLD size {len(data)} != expected {expected} for N={n}, S={s}, D={d}")
    values = np.frombuffer(data, dtype="<f4", count=n * (s + d), offset=_HEADER.size)
    (label,) = _LABEL.unpack_from(data, expected - _LABEL.size)
    try:
        cloud = PointCloud.from_matrix(values.reshape(n, s + d).astype(np.float32), s)
    except GenConvError as e:
        raise DataError(f"invalid cloud in PCLD data: {e}") from e
    return LabeledCloud(cloud=cloud, label=int(label), class_name=class_name, source=source)


def write_pcld(item: LabeledCloud, path: str | Path) -> None:
    with open(path, "wb") as f:
        f.write(encode_pcld(item))


def read_pcld(path: str | Path, class_name: str = "") -> LabeledCloud:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    return decode_pcld(data, class_name=class_name, source=str(path))


# ─────────────────────────────────────────────
# 📁 DATASET DIRECTORIES
# ─────────────────────────────────────────────
@dataclass
class CloudDataset:
    splits: Dict[str, List[LabeledCloud]] = field(default_factory=dict)
    class_names: List[str] = field(default_factory=list)

    def split(self, name: str) -> List[LabeledCloud]:
        if name not in self.splits:
            raise DataError(f"dataset has no {name!r} split (found {sorted(self.splits)})")
        return self.splits[name]


def write_dataset(directory: str | Path, splits: Dict[str, Sequence[LabeledCloud]]) -> Path:
    """Write every split as ``<split>/<index>.pcld`` plus one manifest; returns the manifest path."""
    root = Path(directory)
    rows: List[Tuple[str, str, int, str]] = []
    for split, items in splits.items():
        (root / split).mkdir(parents=True, exist_ok=True)
        for i, item in enumerate(items):
            rel = f"{split}/{i:05d}.pcld"
            write_pcld(item, root / rel)
            rows.append((split, rel, item.label, item.class_name))
    manifest = root / MANIFEST_NAME
    with open(manifest, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_COLUMNS)
        writer.writerows(rows)
    log.info("dataset_written", directory=str(root), clouds=len(rows), splits=list(splits))
    return manifest


def read_dataset(directory: str | Path) -> CloudDataset:
    root = Path(directory)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise DataError(f"no {MANIFEST_NAME} in {root}")
    dataset = CloudDataset()
    names: Dict[int, str] = {}
    with open(manifest, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != MANIFEST_COLUMNS:
            raise DataError(f"manifest columns {reader.fieldnames} != {list(MANIFEST_COLUMNS)}")
        for row in reader:
            item = read_pcld(root / row["file"], class_name=row["class_name"])
            if item.label != int(row["label"]):
                raise DataError(f"{row['file']}: label {item.label} disagrees with manifest {row['label']}")
            names.setdefault(item.label, row["class_name"])
            dataset.splits.setdefault(row["split"], []).append(item)
    if names:
        dataset.class_names = [names.get(i, str(i)) for i in range(max(names) + 1)]
    log.info("dataset_loaded", directory=str(root), splits={k: len(v) for k, v in dataset.splits.items()})
    return dataset


def cache_path(cache_dir: str | Path, source: str, n_points: int, seed: int) -> Path:
    """Cache file for one sampled mesh; keyed on the source path, sample size and seed."""
    stem = source.replace("\\", "/").strip("/").replace("/", "__")
    return Path(cache_dir) / f"{os.path.splitext(stem)[0]}.n{n_points}.s{seed}.pcld"
