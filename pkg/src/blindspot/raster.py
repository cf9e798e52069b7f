"""8-bit RGB raster I/O. Binary PPM (P6) is always available; PNG needs Pillow."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

_PPM_HEADER = re.compile(rb"\AP6\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


def decode_ppm(data: bytes) -> np.ndarray:
    m = _PPM_HEADER.match(data)
    if m is None:
        raise ValueError("not a binary PPM (P6) image")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError(f"only 8-bit PPM is supported, got maxval {maxval}")
    body = data[m.end():]
    need = width * height * 3
    if len(body) < need:
        raise ValueError(f"truncated PPM: need {need} bytes, have {len(body)}")
    return np.frombuffer(body[:need], dtype=np.uint8).reshape(height, width, 3).copy()


def encode_ppm(image: np.ndarray) -> bytes:
    image = np.ascontiguousarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected HxWx3 raster, got shape {image.shape}")
    h, w = image.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + image.tobytes()


def read_image(path: str | Path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        return decode_ppm(path.read_bytes())
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise RuntimeError(f"reading {path.suffix} files requires Pillow") from exc
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_image(path: str | Path, image: np.ndarray) -> None:
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        path.write_bytes(encode_ppm(image))
        return
    from PIL import Image

    Image.fromarray(np.asarray(image, dtype=np.uint8), "RGB").save(path)
