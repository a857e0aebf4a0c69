"""16-bit PNG depth I/O (5000 ticks per metre, 0 = invalid)."""

from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import DepthImage, UncertaintyImage

TICKS_PER_METRE = 5000.0


def encode_depth(values) -> np.ndarray:
    ticks = np.rint(np.asarray(values, dtype=np.float64) * TICKS_PER_METRE)
    return np.clip(ticks, 0, np.iinfo(np.uint16).max).astype(np.uint16)


def decode_depth(ticks) -> np.ndarray:
    return np.asarray(ticks, dtype=np.float64) / TICKS_PER_METRE


def read_png16(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.array(im)
    except (OSError, ValueError) as exc:
        raise ValueError(f"cannot decode {path}: {exc}") from exc
    if arr.ndim != 2:
        raise ValueError(f"{path} is not a single-channel image")
    return arr.astype(np.uint16)


def write_png16(path, ticks: np.ndarray):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(ticks, dtype=np.uint16)).save(path, format="PNG")


def read_depth(path) -> DepthImage:
    return DepthImage(decode_depth(read_png16(path)))


def read_uncertainty(path) -> UncertaintyImage:
    return UncertaintyImage(decode_depth(read_png16(path)))


def write_depth(path, image):
    write_png16(path, encode_depth(np.asarray(image)))
