"""Seeded photometric/geometric augmentation with box remapping.

Fixed order: zoom-crop, hue, saturation, brightness, Gaussian blur,
salt-and-pepper noise. Output rasters keep the input size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .geometry import BoundingBox
from .voc import ImageAnnotation

MIN_BOX_SURVIVAL = 0.25


@dataclass(frozen=True)
class AugmentationParams:
    """Upper magnitudes for each augmentation; each is sampled uniformly from
    ``[0, zoom]``, ``[-hue_shift, +hue_shift]`` and so on."""

    zoom: float = 0.31
    hue_shift: float = 25.0
    saturation: float = 0.22
    brightness: float = 0.13
    blur_sigma: float = 0.125
    noise_fraction: float = 0.02
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("zoom", "hue_shift", "saturation", "brightness", "blur_sigma", "noise_fraction"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} magnitude must be non-negative")
        if self.zoom >= 1.0:
            raise ValueError("zoom must be < 1")


IDENTITY = AugmentationParams(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class AugmentationSample:
    """Concrete magnitudes for one augmented image."""

    zoom: float = 0.0
    crop_x: float = 0.5
    crop_y: float = 0.5
    hue_shift: float = 0.0
    saturation: float = 0.0
    brightness: float = 0.0
    blur_sigma: float = 0.0
    noise_fraction: float = 0.0
    noise_seed: int = 0


def sample_params(params: AugmentationParams, rng: np.random.Generator) -> AugmentationSample:
    return AugmentationSample(
        zoom=float(rng.uniform(0.0, params.zoom)),
        crop_x=float(rng.uniform(0.0, 1.0)),
        crop_y=float(rng.uniform(0.0, 1.0)),
        hue_shift=float(rng.uniform(-params.hue_shift, params.hue_shift)),
        saturation=float(rng.uniform(-params.saturation, params.saturation)),
        brightness=float(rng.uniform(-params.brightness, params.brightness)),
        blur_sigma=float(rng.uniform(0.0, params.blur_sigma)),
        noise_fraction=float(rng.uniform(0.0, params.noise_fraction)),
        noise_seed=int(rng.integers(0, 2**63 - 1)),
    )


# -- colour ---------------------------------------------------------------

def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """float RGB in [0,1] -> HSV with hue in [0,1)."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    delta = v - mn
    s = np.where(v > 0, delta / np.where(v > 0, v, 1.0), 0.0)
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(
        v == r,
        ((g - b) / safe) % 6.0,
        np.where(v == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    h = np.where(delta > 0, h / 6.0, 0.0)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    h6 = (h % 1.0) * 6.0
    i = np.floor(h6).astype(np.int64) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def adjust_hsv(image: np.ndarray, hue_deg: float, saturation: float, brightness: float) -> np.ndarray:
    """Rotate hue by ``hue_deg`` degrees, then scale saturation by
    ``1 + saturation`` and value by ``1 + brightness``."""
    if hue_deg == 0.0 and saturation == 0.0 and brightness == 0.0:
        return image.copy()
    hsv = rgb_to_hsv(image.astype(np.float64) / 255.0)
    hsv[..., 0] = (hsv[..., 0] + hue_deg / 360.0) % 1.0
    hsv[..., 1] = np.clip(hsv[..., 1] * (1.0 + saturation), 0.0, 1.0)
    hsv[..., 2] = np.clip(hsv[..., 2] * (1.0 + brightness), 0.0, 1.0)
    return np.clip(np.rint(hsv_to_rgb(hsv) * 255.0), 0, 255).astype(np.uint8)


# -- geometry -------------------------------------------------------------

def crop_window(width: int, height: int, zoom: float, fx: float, fy: float) -> Tuple[float, float, float, float]:
    """Crop rectangle of side fraction ``1 - zoom`` placed at relative offset (fx, fy)."""
    side = 1.0 - zoom
    cw, ch = width * side, height * side
    x0 = fx * (width - cw)
    y0 = fy * (height - ch)
    return x0, y0, x0 + cw, y0 + ch


def resize_crop_bilinear(image: np.ndarray, window: Tuple[float, float, float, float]) -> np.ndarray:
    """Sample ``window`` (continuous pixel coordinates) back to the full raster size."""
    h, w = image.shape[:2]
    x0, y0, x1, y1 = window
    # output pixel centers mapped into the window, then to source pixel-center coordinates
    xs = x0 + (np.arange(w) + 0.5) * (x1 - x0) / w - 0.5
    ys = y0 + (np.arange(h) + 0.5) * (y1 - y0) / h - 0.5
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    xl = np.floor(xs).astype(np.int64)
    yl = np.floor(ys).astype(np.int64)
    xh = np.minimum(xl + 1, w - 1)
    yh = np.minimum(yl + 1, h - 1)
    ax = (xs - xl)[None, :, None]
    ay = (ys - yl)[:, None, None]
    src = image.astype(np.float64)
    top = src[yl][:, xl] * (1 - ax) + src[yl][:, xh] * ax
    bot = src[yh][:, xl] * (1 - ax) + src[yh][:, xh] * ax
    out = top * (1 - ay) + bot * ay
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def remap_boxes(
    boxes: Sequence[BoundingBox],
    window: Tuple[float, float, float, float],
    width: int,
    height: int,
    min_survival: float = MIN_BOX_SURVIVAL,
) -> List[BoundingBox]:
    """Map boxes through a crop-and-resize; drop those keeping < ``min_survival``
    of their original area inside the window."""
    x0, y0, x1, y1 = window
    sx = width / (x1 - x0)
    sy = height / (y1 - y0)
    out = []
    for box in boxes:
        inside = box.clipped(x0, y0, x1, y1)
        if box.area > 0:
            if inside.area < min_survival * box.area:
                continue
        elif not (x0 <= box.x_min <= x1 and y0 <= box.y_min <= y1):
            continue
        mapped = BoundingBox(
            (inside.x_min - x0) * sx,
            (inside.y_min - y0) * sy,
            (inside.x_max - x0) * sx,
            (inside.y_max - y0) * sy,
        )
        out.append(mapped.clipped(0.0, 0.0, float(width), float(height)))
    return out


# -- filtering / noise ----------------------------------------------------

def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0.0:
        return image.copy()
    k = gaussian_kernel(sigma)
    r = len(k) // 2
    src = image.astype(np.float64)
    padded = np.pad(src, ((0, 0), (r, r), (0, 0)), mode="reflect" if image.shape[1] > r else "edge")
    tmp = sum(k[i] * padded[:, i:i + src.shape[1]] for i in range(len(k)))
    padded = np.pad(tmp, ((r, r), (0, 0), (0, 0)), mode="reflect" if image.shape[0] > r else "edge")
    out = sum(k[i] * padded[i:i + src.shape[0]] for i in range(len(k)))
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def salt_and_pepper(image: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    out = image.copy()
    h, w = image.shape[:2]
    n = int(round(fraction * h * w))
    if n <= 0:
        return out
    idx = rng.choice(h * w, size=n, replace=False)
    values = np.where(rng.random(n) < 0.5, 0, 255).astype(np.uint8)
    flat = out.reshape(h * w, -1)
    flat[idx] = values[:, None]
    return out


# -- entry points ---------------------------------------------------------

def apply_sample(
    image: np.ndarray, annot: ImageAnnotation, sample: AugmentationSample
) -> Tuple[np.ndarray, ImageAnnotation]:
    h, w = image.shape[:2]
    if (w, h) != (annot.width, annot.height):
        raise ValueError(f"raster is {w}x{h} but annotation says {annot.width}x{annot.height}")
    out = np.asarray(image, dtype=np.uint8)
    boxes = list(annot.boxes)
    if sample.zoom > 0.0:
        window = crop_window(w, h, sample.zoom, sample.crop_x, sample.crop_y)
        out = resize_crop_bilinear(out, window)
        boxes = remap_boxes(boxes, window, w, h)
    else:
        out = out.copy()
    out = adjust_hsv(out, sample.hue_shift, sample.saturation, sample.brightness)
    out = gaussian_blur(out, sample.blur_sigma)
    out = salt_and_pepper(out, sample.noise_fraction, np.random.default_rng(sample.noise_seed))
    return out, replace(annot, boxes=tuple(boxes), skipped_count=0)


def augment(
    image: np.ndarray,
    annot: ImageAnnotation,
    params: AugmentationParams,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, ImageAnnotation]:
    """Draw one set of magnitudes from ``params`` and apply them."""
    if rng is None:
        rng = np.random.default_rng(params.seed)
    return apply_sample(image, annot, sample_params(params, rng))


def variant_seed(master_seed: int, index: int, variant: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed & (2**64 - 1), index, variant])


def triple_dataset(
    items: Sequence[ImageAnnotation],
    images: Sequence[np.ndarray],
    params_template: AugmentationParams,
    seed: int,
    variants: int = 2,
) -> List[Tuple[ImageAnnotation, np.ndarray]]:
    """Each original followed by ``variants`` augmented copies with per-item seeds.

    Augmented copies are renamed ``<image_id>_aug<k>``.
    """
    if len(items) != len(images):
        raise ValueError("items and images differ in length")
    out: List[Tuple[ImageAnnotation, np.ndarray]] = []
    for i, (annot, image) in enumerate(zip(items, images)):
        out.append((annot, np.asarray(image, dtype=np.uint8)))
        for k in range(1, variants + 1):
            rng = np.random.default_rng(variant_seed(seed, i, k))
            aug_img, aug_ann = augment(image, annot, params_template, rng)
            name = f"{annot.image_id}_aug{k}"
            out.append((replace(aug_ann, image_id=name, filename=f"{name}.ppm"), aug_img))
    return out
