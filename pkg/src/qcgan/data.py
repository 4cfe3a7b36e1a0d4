"""MNIST ingestion: IDX parsing, per-class filtering, bilinear resizing.

IDX files may be gzip-compressed (detected by the ``.gz`` suffix).
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError, ParseError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

IMAGE_FILES = ("train-images-idx3-ubyte", "train-images.idx3-ubyte")
LABEL_FILES = ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte")


@dataclass
class Dataset:
    images: np.ndarray  # (count, h*w) float64 in [0, 1], row-major
    labels: np.ndarray  # (count,) int64
    h: int
    w: int

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64).reshape(-1, self.h * self.w)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(self.images) != len(self.labels):
            raise ParseError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)


def _read_bytes(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def _header(buf: bytes, path, magic: int, n_dims: int) -> tuple[int, ...]:
    size = 4 * (1 + n_dims)
    if len(buf) < size:
        raise ParseError(f"{path}: header truncated at offset {len(buf)} (need {size} bytes)")
    fields = struct.unpack(f">{1 + n_dims}I", buf[:size])
    if fields[0] != magic:
        raise ParseError(f"{path}: bad magic 0x{fields[0]:08x} at offset 0, expected 0x{magic:08x}")
    return fields[1:]


def _payload(buf: bytes, path, offset: int, expected: int) -> np.ndarray:
    got = len(buf) - offset
    if got < expected:
        raise ParseError(f"{path}: payload truncated at offset {len(buf)}, expected {expected} bytes after offset {offset}")
    if got > expected:
        raise ParseError(f"{path}: {got - expected} unexpected trailing bytes at offset {offset + expected}")
    return np.frombuffer(buf, dtype=np.uint8, offset=offset).copy()


def parse_idx_images(buf: bytes, path="<bytes>") -> np.ndarray:
    count, rows, cols = _header(buf, path, IMAGE_MAGIC, 3)
    return _payload(buf, path, 16, count * rows * cols).reshape(count, rows, cols)


def parse_idx_labels(buf: bytes, path="<bytes>") -> np.ndarray:
    (count,) = _header(buf, path, LABEL_MAGIC, 1)
    labels = _payload(buf, path, 8, count)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise ParseError(f"{path}: label {labels[bad[0]]} out of range 0..9 at offset {8 + bad[0]}")
    return labels


def load_idx_images(path) -> np.ndarray:
    """Raw ``(count, rows, cols)`` uint8 tensor from an IDX3 file."""
    return parse_idx_images(_read_bytes(path), path)


def load_idx_labels(path) -> np.ndarray:
    return parse_idx_labels(_read_bytes(path), path)


def encode_idx_images(images: np.ndarray) -> bytes:
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    return struct.pack(">4I", IMAGE_MAGIC, count, rows, cols) + images.tobytes()


def encode_idx_labels(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">2I", LABEL_MAGIC, labels.size) + labels.tobytes()


def write_idx(path, payload: bytes) -> None:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.GzipFile(path, "wb", mtime=0) as f:
            f.write(payload)
    else:
        path.write_bytes(payload)


def normalize(raw) -> np.ndarray:
    """uint8 pixels -> float64 in [0, 1], flattened row-major."""
    return np.asarray(raw, dtype=np.float64).reshape(-1) / 255.0


def _find(data_dir: Path, stems) -> Path:
    for stem in stems:
        for suffix in ("", ".gz"):
            candidate = data_dir / (stem + suffix)
            if candidate.exists():
                return candidate
    raise ConfigurationError(f"no {stems[0]}[.gz] found in data directory {data_dir}")


def load_dataset(data_dir) -> Dataset:
    """Load the training split from a directory holding the standard MNIST file names."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise ConfigurationError(f"data directory {data_dir} does not exist")
    images = load_idx_images(_find(data_dir, IMAGE_FILES))
    labels = load_idx_labels(_find(data_dir, LABEL_FILES))
    if len(images) != len(labels):
        raise ParseError(f"{data_dir}: {len(images)} images but {len(labels)} labels")
    count, h, w = images.shape
    return Dataset(images.reshape(count, h * w) / 255.0, labels, h, w)


def filter_class(dataset: Dataset, digit: int) -> Dataset:
    if not 0 <= digit <= 9:
        raise DomainError(f"digit must be in 0..9, got {digit}")
    keep = dataset.labels == digit
    return Dataset(dataset.images[keep], dataset.labels[keep], dataset.h, dataset.w)


def _axis_weights(n_in: int, n_out: int):
    # half-pixel centres: s = (d + 0.5) * n_in / n_out - 0.5, clamped to [0, n_in - 1]
    s = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    s = np.clip(s, 0.0, n_in - 1)
    lo = np.floor(s).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = s - lo
    return lo, hi, frac


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or min(image.shape) < 1 or out_h < 1 or out_w < 1:
        raise DomainError(f"cannot resize {image.shape} to {out_h}x{out_w}")
    in_h, in_w = image.shape
    if (in_h, in_w) == (out_h, out_w):
        return image.copy()
    lo, hi, f = _axis_weights(in_h, out_h)
    rows = image[lo] * (1.0 - f)[:, None] + image[hi] * f[:, None]
    lo, hi, f = _axis_weights(in_w, out_w)
    return rows[:, lo] * (1.0 - f) + rows[:, hi] * f


def resize_dataset(dataset: Dataset, size: int) -> Dataset:
    if (dataset.h, dataset.w) == (size, size):
        return dataset
    images = np.stack(
        [resize_bilinear(img.reshape(dataset.h, dataset.w), size, size).reshape(-1) for img in dataset.images]
    ) if len(dataset) else np.zeros((0, size * size))
    return Dataset(np.clip(images, 0.0, 1.0), dataset.labels, size, size)
