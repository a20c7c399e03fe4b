# src/genconv/viz/image_writer.py
from __future__ import annotations

from pathlib import Path
from typing import List

import numpy as np
from PIL import Image

from ..errors import ShapeError
from ..logging import get_component_logger
from .filter_probe import FilterImage

log = get_component_logger("image_writer")

COLORMAPS = ("diverging", "gray")


def scale_symmetric(values: np.ndarray) -> np.ndarray:
    """
    Map values into [0, 1] with 0 pinned at 0.5: the minimum lands on 0 and the
    maximum on 1 when they straddle zero, each side scaled on its own. A
    constant image maps entirely to 0.5.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return np.full(values.shape, 0.5)
    low, high = float(values.min()), float(values.max())
    if low == high:
        return np.full(values.shape, 0.5)
    t = np.full(values.shape, 0.5)
    if low < 0.0:
        neg = values < 0.0
        t[neg] = 0.5 + 0.5 * values[neg] / -low
    if high > 0.0:
        pos = values > 0.0
        t[pos] = 0.5 + 0.5 * values[pos] / high
    return t


def diverging_rgb(t: np.ndarray) -> np.ndarray:
    """Red at 0, white at 0.5, blue at 1; returns uint8 (..., 3)."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    low = t < 0.5
    r = np.where(low, 1.0, 2.0 * (1.0 - t))
    g = np.where(low, 2.0 * t, 2.0 * (1.0 - t))
    b = np.where(low, 2.0 * t, 1.0)
    return np.rint(np.stack((r, g, b), axis=-1) * 255.0).astype(np.uint8)


def gray_levels(t: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(t, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_image(
    img: FilterImage, path: str | Path, colormap: str = "diverging", png: bool = False
) -> List[Path]:
    """
    Write PPM (P6, diverging) or PGM (P5, gray) plus the raw responses as CSV.
    3-D images produce one file set per slice (``<stem>_z<k>``). All slices of
    one image share a scale so intensities compare across slices.
    """
    if colormap not in COLORMAPS:
        raise ShapeError(f"unknown colormap {colormap!r}; expected one of {COLORMAPS}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    suffix = ".pgm" if colormap == "gray" else ".ppm"
    stack = img.values if img.values.ndim == 3 else img.values[None]
    t_all = scale_symmetric(stack)

    written: List[Path] = []
    for k, (t, raw) in enumerate(zip(t_all, stack)):
        stem = path.stem if stack.shape[0] == 1 else f"{path.stem}_z{k}"
        target = path.with_name(stem + suffix)
        if colormap == "gray":
            picture = Image.fromarray(gray_levels(t))
        else:
            picture = Image.fromarray(diverging_rgb(t))
        picture.save(target, format="PPM")
        np.savetxt(target.with_suffix(".csv"), raw, delimiter=",", fmt="%.9g")
        written.extend((target, target.with_suffix(".csv")))
        if png:
            picture.save(target.with_suffix(".png"), format="PNG")
            written.append(target.with_suffix(".png"))
    log.info("filter_image_written", path=str(path), channel=img.channel, files=len(written))
    return written
