"""Synthetic shape/color dataset with per-class train/val/test partitions.

Each class is a distinct shape template (eight templates, cycled) drawn in a
class-specific hue on a dark background, with integer position jitter and a
small amount of pixel noise.  Rendering is fully determined by the dataset
seed, so regenerating with the same seed reproduces every pixel bitwise.

The on-disk format is a fixed little-endian layout: a 7-byte magic
``AAPLDS1``, a reserved byte, seven uint32 header fields (class count, height,
width, shots, per-class train/val/test counts), then every image as a uint32
class id followed by H*W*3 float64 pixels, ordered class-major then
train/val/test.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from matplotlib.colors import hsv_to_rgb

from .augment import ToyImage
from .errors import DataError
from .seeding import generator

__all__ = [
    "ToyDataset",
    "generate_dataset",
    "render_class_image",
    "save_dataset",
    "load_dataset",
    "MAGIC",
]

MAGIC = b"AAPLDS1"
MAX_CLASSES = 64
JITTER = 2
NOISE_SIGMA = 0.02
BACKGROUND = 0.08
PARTITIONS = ("train", "val", "test")


def _grid(size: int, cy: float, cx: float):
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    return ys - cy, xs - cx


def _square(size, cy, cx):
    dy, dx = _grid(size, cy, cx)
    r = size * 0.28
    return (np.abs(dy) <= r) & (np.abs(dx) <= r)


def _disc(size, cy, cx):
    dy, dx = _grid(size, cy, cx)
    return dy * dy + dx * dx <= (size * 0.32) ** 2


def _cross(size, cy, cx):
    dy, dx = _grid(size, cy, cx)
    arm = size * 0.11
    reach = size * 0.4
    return ((np.abs(dy) <= arm) & (np.abs(dx) <= reach)) | (
        (np.abs(dx) <= arm) & (np.abs(dy) <= reach)
    )


def _diag_stripe(size, cy, cx):
    dy, dx = _grid(size, cy, cx)
    return np.abs(dy - dx) <= size * 0.14


def _ring(size, cy, cx):
    dy, dx = _grid(size, cy, cx)
    rr = dy * dy + dx * dx
    return ((size * 0.2) ** 2 <= rr) & (rr <= (size * 0.38) ** 2)


def _checker(size, cy, cx):
    ys, xs = np.mgrid[0:size, 0:size]
    cell = max(2, size // 4)
    return ((ys + int(round(cy))) // cell + (xs + int(round(cx))) // cell) % 2 == 0


def _triangle(size, cy, cx):
    dy, dx = _grid(size, cy, cx)
    h = size * 0.36
    return (dy >= -h * 0.5) & (dy <= h * 0.5) & (np.abs(dx) <= (dy + h * 0.5) * 0.9)


def _bar(size, cy, cx):
    dy, dx = _grid(size, cy, cx)
    return (np.abs(dy) <= size * 0.12) & (np.abs(dx) <= size * 0.45)


SHAPE_TEMPLATES = (
    _square,
    _disc,
    _cross,
    _diag_stripe,
    _ring,
    _checker,
    _triangle,
    _bar,
)


def render_class_image(class_id: int, n_classes: int, size: int,
                       rng: np.random.Generator) -> ToyImage:
    """One jittered, noised render of the class template in the class hue."""
    template = SHAPE_TEMPLATES[class_id % len(SHAPE_TEMPLATES)]
    hue = class_id / n_classes
    color = hsv_to_rgb(np.array([hue, 0.85, 0.95]))
    cy = (size - 1) / 2 + int(rng.integers(-JITTER, JITTER + 1))
    cx = (size - 1) / 2 + int(rng.integers(-JITTER, JITTER + 1))
    mask = template(size, cy, cx).astype(np.float64)[:, :, None]
    pixels = BACKGROUND + mask * (color[None, None, :] - BACKGROUND)
    pixels = pixels + rng.normal(0.0, NOISE_SIGMA, size=pixels.shape)
    return ToyImage(pixels=np.clip(pixels, 0.0, 1.0), class_id=class_id)


@dataclass
class ToyDataset:
    """Rendered images grouped by class and partition.

    Training-image reads go through `train_image` so a run can prove
    afterwards that no held-out class was ever touched by the training loop
    (`train_access_counts`).
    """

    n_classes: int
    image_size: int
    shots: int
    train: dict[int, list[ToyImage]]
    val: dict[int, list[ToyImage]]
    test: dict[int, list[ToyImage]]
    train_access_counts: dict[int, int] = field(default_factory=dict)

    @property
    def base_classes(self) -> list[int]:
        return list(range((self.n_classes + 1) // 2))

    @property
    def new_classes(self) -> list[int]:
        return list(range((self.n_classes + 1) // 2, self.n_classes))

    def split_classes(self, split: str) -> list[int]:
        if split == "base":
            return self.base_classes
        if split == "new":
            return self.new_classes
        raise DataError(f"unknown split {split!r}; expected 'base' or 'new'")

    def train_image(self, class_id: int, index: int) -> ToyImage:
        imgs = self.train[class_id]
        self.train_access_counts[class_id] = self.train_access_counts.get(class_id, 0) + 1
        return imgs[index]

    def new_class_train_accesses(self) -> int:
        return sum(self.train_access_counts.get(c, 0) for c in self.new_classes)

    def partition(self, name: str) -> dict[int, list[ToyImage]]:
        if name not in PARTITIONS:
            raise DataError(f"unknown partition {name!r}")
        return getattr(self, name)


def _validate_shape_params(n_classes: int, per_class: int, image_size: int, shots: int) -> None:
    if n_classes < 4 or n_classes % 2 != 0:
        raise DataError(f"n_classes must be even and >= 4, got {n_classes}")
    if n_classes > MAX_CLASSES:
        raise DataError(
            f"n_classes {n_classes} exceeds the {MAX_CLASSES} distinct template/hue renders"
        )
    if per_class < 24:
        raise DataError(f"per_class must be >= 24, got {per_class}")
    if image_size < 8:
        raise DataError(f"image_size must be >= 8, got {image_size}")
    if shots < 1 or shots > per_class - 2:
        raise DataError(f"shots={shots} leaves no val/test images (per_class={per_class})")


def generate_dataset(n_classes: int, per_class: int, image_size: int,
                     shots: int, seed: int) -> ToyDataset:
    """Render the full dataset for one master seed.

    Per class: the first ``shots`` renders form the train partition, the rest
    split evenly into val and test (val gets the odd one).
    """
    _validate_shape_params(n_classes, per_class, image_size, shots)
    rest = per_class - shots
    n_val = (rest + 1) // 2
    train: dict[int, list[ToyImage]] = {}
    val: dict[int, list[ToyImage]] = {}
    test: dict[int, list[ToyImage]] = {}
    for cid in range(n_classes):
        renders = [
            render_class_image(cid, n_classes, image_size, generator(seed, "dataset", cid, i))
            for i in range(per_class)
        ]
        train[cid] = renders[:shots]
        val[cid] = renders[shots : shots + n_val]
        test[cid] = renders[shots + n_val :]
    return ToyDataset(
        n_classes=n_classes,
        image_size=image_size,
        shots=shots,
        train=train,
        val=val,
        test=test,
    )


_HEADER = struct.Struct("<7sxIIIIIII")


def save_dataset(ds: ToyDataset, path) -> None:
    n_train = ds.shots
    n_val = len(ds.val[0])
    n_test = len(ds.test[0])
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                MAGIC, ds.n_classes, ds.image_size, ds.image_size, ds.shots,
                n_train, n_val, n_test,
            )
        )
        for cid in range(ds.n_classes):
            for part in PARTITIONS:
                for img in ds.partition(part)[cid]:
                    fh.write(struct.pack("<I", img.class_id))
                    fh.write(np.ascontiguousarray(img.pixels, dtype="<f8").tobytes())


def load_dataset(path) -> ToyDataset:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise DataError(f"{path}: truncated header")
        magic, k, h, w, shots, n_train, n_val, n_test = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        if h != w:
            raise DataError(f"{path}: images must be square, got {h}x{w}")
        pixel_bytes = h * w * 3 * 8
        train: dict[int, list[ToyImage]] = {}
        val: dict[int, list[ToyImage]] = {}
        test: dict[int, list[ToyImage]] = {}
        for cid in range(k):
            buckets = {"train": n_train, "val": n_val, "test": n_test}
            store = {"train": train, "val": val, "test": test}
            for part, count in buckets.items():
                imgs = []
                for _ in range(count):
                    head = fh.read(4)
                    body = fh.read(pixel_bytes)
                    if len(head) < 4 or len(body) < pixel_bytes:
                        raise DataError(f"{path}: truncated image block")
                    (stored_cid,) = struct.unpack("<I", head)
                    if stored_cid != cid:
                        raise DataError(
                            f"{path}: class id {stored_cid} out of order (expected {cid})"
                        )
                    pixels = np.frombuffer(body, dtype="<f8").reshape(h, w, 3).copy()
                    img = ToyImage(pixels=pixels, class_id=stored_cid)
                    img.validate()
                    imgs.append(img)
                store[part][cid] = imgs
        if fh.read(1):
            raise DataError(f"{path}: trailing bytes after last image")
    return ToyDataset(n_classes=k, image_size=h, shots=shots, train=train, val=val, test=test)
