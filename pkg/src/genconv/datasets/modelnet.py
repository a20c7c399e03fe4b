# src/genconv/datasets/modelnet.py
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

from ..core.cloud import LabeledCloud
from ..core.rng import path_seed
from ..errors import DataError
from ..logging import get_component_logger
from .cache import cache_path, read_pcld, write_pcld
from .off_mesh import normalize_cloud, read_off, sample_mesh

log = get_component_logger("modelnet_loader")

SPLITS = ("train", "test")


@dataclass
class LoadReport:
    """Itemized outcome of a ModelNet load: what was read, what was skipped and why."""

    loaded: int = 0
    cached: int = 0
    skipped: List[Tuple[str, str]] = field(default_factory=list)
    missing_dirs: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.skipped and not self.missing_dirs


@dataclass(frozen=True)
class _Job:
    path: Path
    rel: str
    split: str
    label: int
    class_name: str


def discover_classes(root: Path) -> List[str]:
    """Class names are the sub-directory names, sorted so label indices are stable."""
    return sorted(p.name for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))


def _load_one(
    job: _Job, n_points: int, seed: int, cache_dir: Optional[str]
) -> Tuple[_Job, Optional[LabeledCloud], Optional[str], bool]:
    file_seed = path_seed(seed, job.rel)
    cached = cache_path(cache_dir, job.rel, n_points, seed) if cache_dir else None
    try:
        if cached is not None and cached.is_file():
            item = read_pcld(cached, class_name=job.class_name)
            return job, LabeledCloud(item.cloud, job.label, job.class_name, job.rel), None, True
        cloud = normalize_cloud(sample_mesh(read_off(str(job.path)), n_points, file_seed))
        item = LabeledCloud(cloud, job.label, job.class_name, job.rel)
        if cached is not None:
            cached.parent.mkdir(parents=True, exist_ok=True)
            write_pcld(item, cached)
        return job, item, None, False
    except (DataError, OSError, UnicodeDecodeError) as e:
        return job, None, str(e), False


def load_modelnet10(
    root_dir: str,
    n_points: int = 1000,
    seed: int = 0,
    threads: int = 1,
    cache_dir: Optional[str] = None,
) -> Tuple[List[LabeledCloud], List[LabeledCloud], List[str], LoadReport]:
    """
    Read ``<root>/<class>/{train,test}/*.off``, sample every mesh to ``n_points``
    and normalize it. Unreadable files are skipped and listed in the report.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise DataError(f"ModelNet root not found: {root_dir}")
    class_names = discover_classes(root)
    if not class_names:
        raise DataError(f"no class directories under {root_dir}")

    report = LoadReport()
    jobs: List[_Job] = []
    for label, name in enumerate(class_names):
        for split in SPLITS:
            split_dir = root / name / split
            if not split_dir.is_dir():
                report.missing_dirs.append(str(split_dir))
                log.warning("modelnet_dir_missing", directory=str(split_dir))
                continue
            for path in sorted(split_dir.glob("*.off")):
                jobs.append(_Job(path, path.relative_to(root).as_posix(), split, label, name))
    if not jobs:
        raise DataError(f"no .off files found under {root_dir}")

    log.info("modelnet_loading", classes=len(class_names), files=len(jobs), threads=threads)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda j: _load_one(j, n_points, seed, cache_dir), jobs))
    else:
        results = [_load_one(j, n_points, seed, cache_dir) for j in jobs]

    train: List[LabeledCloud] = []
    test: List[LabeledCloud] = []
    for job, item, error, from_cache in results:
        if item is None:
            report.skipped.append((job.rel, error or "unknown error"))
            log.warning("modelnet_file_skipped", file=job.rel, reason=error)
            continue
        report.loaded += 1
        report.cached += int(from_cache)
        (train if job.split == "train" else test).append(item)

    if not train and not test:
        raise DataError(f"every file under {root_dir} failed to load ({len(report.skipped)} skipped)")
    log.info(
        "modelnet_loaded",
        train=len(train),
        test=len(test),
        skipped=len(report.skipped),
        from_cache=report.cached,
    )
    return train, test, class_names, report
