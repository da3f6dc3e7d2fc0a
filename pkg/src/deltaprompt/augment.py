"""The fixed augmentation vocabulary over toy images.

Fourteen photometric / geometric transforms with frozen parameters.  Only
CROP_RESIZE, GAUSSIAN_NOISE and CUTOUT consume randomness; everything else
ignores the seed and is a pure function of the input pixels.  Every member
preserves image shape and the [0, 1] value range.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv

from .errors import DataError

__all__ = ["Augmentation", "STOCHASTIC", "ToyImage", "apply_augmentation", "luminance"]


@dataclass(frozen=True)
class ToyImage:
    """(H, W, 3) float64 pixels in [0, 1] plus the class that produced them."""

    pixels: np.ndarray
    class_id: int

    def validate(self) -> None:
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3:
            raise DataError(f"ToyImage pixels must be (H, W, 3), got {p.shape}")
        if p.dtype != np.float64:
            raise DataError(f"ToyImage pixels must be float64, got {p.dtype}")
        if p.min() < 0.0 or p.max() > 1.0:
            raise DataError("ToyImage pixels out of [0, 1]")
        if self.class_id < 0:
            raise DataError(f"ToyImage class_id must be non-negative, got {self.class_id}")


class Augmentation(Enum):
    HFLIP = "hflip"
    VFLIP = "vflip"
    ROT90 = "rot90"
    ROT180 = "rot180"
    ROT270 = "rot270"
    CROP_RESIZE = "crop_resize"
    BRIGHTNESS = "brightness"
    CONTRAST = "contrast"
    SATURATION = "saturation"
    HUE = "hue"
    GRAYSCALE = "grayscale"
    GAUSSIAN_BLUR = "gaussian_blur"
    GAUSSIAN_NOISE = "gaussian_noise"
    CUTOUT = "cutout"


STOCHASTIC = frozenset(
    {Augmentation.CROP_RESIZE, Augmentation.GAUSSIAN_NOISE, Augmentation.CUTOUT}
)

# Frozen transform parameters. These never vary between draws; the stochastic
# members randomize placement/values only.
BRIGHTNESS_FACTOR = 1.35
CONTRAST_FACTOR = 1.6
SATURATION_FACTOR = 1.5
HUE_SHIFT = 0.25
BLUR_SIGMA = 1.0
BLUR_SIZE = 5
NOISE_SIGMA = 0.05
CROP_SCALE_RANGE = (0.6, 0.9)
CUTOUT_FRACTION = 1 / 3

_LUMA = np.array([0.299, 0.587, 0.114])


def luminance(pixels: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma of an (H, W, 3) array."""
    return pixels @ _LUMA


def _clip(p: np.ndarray) -> np.ndarray:
    return np.clip(p, 0.0, 1.0)


def _blur_kernel(size: int, sigma: float) -> np.ndarray:
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    k1 = np.exp(-(ax**2) / (2.0 * sigma**2))
    k = np.outer(k1, k1)
    return k / k.sum()


_KERNEL = _blur_kernel(BLUR_SIZE, BLUR_SIGMA)


def _gaussian_blur(p: np.ndarray) -> np.ndarray:
    half = BLUR_SIZE // 2
    padded = np.pad(p, ((half, half), (half, half), (0, 0)), mode="reflect")
    h, w = p.shape[:2]
    out = np.zeros_like(p)
    for dy in range(BLUR_SIZE):
        for dx in range(BLUR_SIZE):
            out += _KERNEL[dy, dx] * padded[dy : dy + h, dx : dx + w, :]
    return _clip(out)


def _bilinear_resize(p: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = p.shape[:2]
    ys = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, in_h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, in_w - 1)
    y1 = np.clip(y0 + 1, 0, in_h - 1)
    x1 = np.clip(x0 + 1, 0, in_w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    top = p[y0][:, x0] * (1 - wx) + p[y0][:, x1] * wx
    bot = p[y1][:, x0] * (1 - wx) + p[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def _crop_resize(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    h, w = p.shape[:2]
    scale = rng.uniform(*CROP_SCALE_RANGE)
    ch = max(2, int(round(h * scale)))
    cw = max(2, int(round(w * scale)))
    top = int(rng.integers(0, h - ch + 1))
    left = int(rng.integers(0, w - cw + 1))
    crop = p[top : top + ch, left : left + cw, :]
    return _clip(_bilinear_resize(crop, h, w))


def _cutout(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    h, w = p.shape[:2]
    side = max(1, int(round(h * CUTOUT_FRACTION)))
    top = int(rng.integers(0, h - side + 1))
    left = int(rng.integers(0, w - side + 1))
    out = p.copy()
    out[top : top + side, left : left + side, :] = 0.0
    return out


def _shift_hsv(p: np.ndarray, hue_delta: float = 0.0, sat_factor: float = 1.0) -> np.ndarray:
    hsv = rgb_to_hsv(p)
    hsv[..., 0] = (hsv[..., 0] + hue_delta) % 1.0
    hsv[..., 1] = np.clip(hsv[..., 1] * sat_factor, 0.0, 1.0)
    return _clip(hsv_to_rgb(hsv))


def apply_augmentation(image: ToyImage, augmentation: Augmentation, seed: int = 0) -> ToyImage:
    """Apply one augmentation; returns a new image with the same class id.

    Stochastic members draw from a generator seeded with ``seed`` so equal
    seeds reproduce the output bitwise; deterministic members ignore it.
    """
    image.validate()
    p = image.pixels
    aug = Augmentation(augmentation)

    if aug is Augmentation.HFLIP:
        out = p[:, ::-1, :].copy()
    elif aug is Augmentation.VFLIP:
        out = p[::-1, :, :].copy()
    elif aug is Augmentation.ROT90:
        out = np.rot90(p, 1, axes=(0, 1)).copy()
    elif aug is Augmentation.ROT180:
        out = np.rot90(p, 2, axes=(0, 1)).copy()
    elif aug is Augmentation.ROT270:
        out = np.rot90(p, 3, axes=(0, 1)).copy()
    elif aug is Augmentation.CROP_RESIZE:
        out = _crop_resize(p, np.random.default_rng(seed))
    elif aug is Augmentation.BRIGHTNESS:
        out = _clip(p * BRIGHTNESS_FACTOR)
    elif aug is Augmentation.CONTRAST:
        anchor = luminance(p).mean()
        out = _clip(anchor + CONTRAST_FACTOR * (p - anchor))
    elif aug is Augmentation.SATURATION:
        out = _shift_hsv(p, sat_factor=SATURATION_FACTOR)
    elif aug is Augmentation.HUE:
        out = _shift_hsv(p, hue_delta=HUE_SHIFT)
    elif aug is Augmentation.GRAYSCALE:
        out = np.repeat(luminance(p)[:, :, None], 3, axis=2)
    elif aug is Augmentation.GAUSSIAN_BLUR:
        out = _gaussian_blur(p)
    elif aug is Augmentation.GAUSSIAN_NOISE:
        rng = np.random.default_rng(seed)
        out = _clip(p + rng.normal(0.0, NOISE_SIGMA, size=p.shape))
    elif aug is Augmentation.CUTOUT:
        out = _cutout(p, np.random.default_rng(seed))
    else:  # pragma: no cover - enum is closed
        raise DataError(f"unhandled augmentation {augmentation!r}")

    return ToyImage(pixels=np.ascontiguousarray(out), class_id=image.class_id)
