"""MNIST-format (IDX) ingestion, class subsetting, and device partitioning.

Feature matrices are float64 arrays of shape ``(n, rows*cols)`` with pixel
intensities scaled into [0, 1] by dividing by 255; labels are int64 vectors.
All functions are pure: they never mutate their inputs and are safe to call
concurrently.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# Purpose tag mixed into the partition seed so other consumers of the same
# experiment seed draw from unrelated streams.
_PARTITION_STREAM = 0x5B175B17


class IdxFormatError(ValueError):
    """Raised when a byte stream is not a well-formed IDX file."""


def parse_idx_images(data: bytes) -> np.ndarray:
    """Parse an IDX image file into an ``(n, rows*cols)`` matrix in [0, 1].

    The stream must start with the big-endian image magic 0x00000803,
    followed by the item count, row count, and column count, then one
    unsigned byte per pixel, row-major.
    """
    if len(data) < 16:
        raise IdxFormatError(f"image stream too short for header: {len(data)} bytes")
    magic, count, rows, cols = struct.unpack(">iiii", data[:16])
    if magic != IMAGE_MAGIC:
        raise IdxFormatError(f"bad image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}")
    expected = 16 + count * rows * cols
    if len(data) != expected:
        raise IdxFormatError(
            f"image payload length {len(data) - 16} does not match "
            f"count*rows*cols = {count * rows * cols}"
        )
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows * cols).astype(np.float64) / 255.0


def parse_idx_labels(data: bytes) -> np.ndarray:
    """Parse an IDX label file into an int64 vector with entries in [0, 9]."""
    if len(data) < 8:
        raise IdxFormatError(f"label stream too short for header: {len(data)} bytes")
    magic, count = struct.unpack(">ii", data[:8])
    if magic != LABEL_MAGIC:
        raise IdxFormatError(f"bad label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}")
    if len(data) != 8 + count:
        raise IdxFormatError(
            f"label payload length {len(data) - 8} does not match count {count}"
        )
    labels = np.frombuffer(data, dtype=np.uint8, offset=8)
    if labels.size and labels.max() > 9:
        raise IdxFormatError(f"label value {labels.max()} outside [0, 9]")
    return labels.astype(np.int64)


def write_idx_images(features: np.ndarray, rows: int, cols: int) -> bytes:
    """Serialize a feature matrix in [0, 1] back to IDX image bytes.

    Round-trips exactly with :func:`parse_idx_images` because parsed
    intensities are integer multiples of 1/255.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != rows * cols:
        raise ValueError(f"features shape {features.shape} incompatible with {rows}x{cols}")
    pixels = np.rint(features * 255.0)
    if pixels.min() < 0 or pixels.max() > 255:
        raise ValueError("feature values outside [0, 1]")
    header = struct.pack(">iiii", IMAGE_MAGIC, features.shape[0], rows, cols)
    return header + pixels.astype(np.uint8).tobytes()


def write_idx_labels(labels: np.ndarray) -> bytes:
    """Serialize a label vector to IDX label bytes."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be a vector")
    if labels.size and (labels.min() < 0 or labels.max() > 9):
        raise ValueError("labels must lie in [0, 9]")
    header = struct.pack(">ii", LABEL_MAGIC, labels.shape[0])
    return header + labels.astype(np.uint8).tobytes()


def load_idx_images(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_idx_images(fh.read())


def load_idx_labels(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_idx_labels(fh.read())


def build_binary_subset(
    features: np.ndarray,
    labels: np.ndarray,
    class_a: int,
    class_b: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Keep only two classes and remap labels: ``class_a`` -> +1, ``class_b`` -> -1."""
    mask_a = labels == class_a
    mask_b = labels == class_b
    if not mask_a.any():
        raise ValueError(f"class {class_a} has no samples")
    if not mask_b.any():
        raise ValueError(f"class {class_b} has no samples")
    keep = mask_a | mask_b
    mapped = np.where(labels[keep] == class_a, 1, -1).astype(np.int64)
    return features[keep], mapped


def build_multiclass_subset(
    features: np.ndarray,
    labels: np.ndarray,
    classes: tuple[int, ...],
) -> tuple[np.ndarray, np.ndarray]:
    """Keep only the listed classes (labels retained as-is, in dataset order)."""
    classes = tuple(classes)
    if len(set(classes)) != len(classes):
        raise ValueError("duplicate class ids")
    for c in classes:
        if not (labels == c).any():
            raise ValueError(f"class {c} has no samples")
    keep = np.isin(labels, classes)
    return features[keep], labels[keep]


@dataclass(frozen=True)
class SplitSpec:
    """How to carve a filtered pool into seed set, device buffers, and test set.

    ``buffer_assignment`` is "iid" (uniform without replacement, the default)
    or "label_sorted" (devices receive label-skewed buffers).
    """

    seed_size: int
    buffer_size: int
    device_count: int
    test_size: int
    seed: int
    buffer_assignment: str = "iid"

    def validate(self) -> None:
        if self.seed_size < 0:
            raise ValueError("seed_size must be >= 0")
        if self.buffer_size < 1 or self.device_count < 1:
            raise ValueError("buffer_size and device_count must be >= 1")
        if self.test_size < 0:
            raise ValueError("test_size must be >= 0")
        if self.buffer_assignment not in ("iid", "label_sorted"):
            raise ValueError(f"unknown buffer_assignment {self.buffer_assignment!r}")


@dataclass(frozen=True)
class DeviceBuffer:
    """Samples held by one device. ``origins`` are indices into the source pool."""

    device_id: int
    features: np.ndarray
    labels: np.ndarray
    origins: np.ndarray

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class Split:
    seed_features: np.ndarray
    seed_labels: np.ndarray
    buffers: tuple[DeviceBuffer, ...]
    test_features: np.ndarray
    test_labels: np.ndarray
    seed_origins: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    test_origins: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))


def partition(features: np.ndarray, labels: np.ndarray, spec: SplitSpec) -> Split:
    """Split a pool into pairwise-disjoint seed set, device buffers, and test set.

    Reproducible from ``spec.seed``; every sample is used at most once.
    """
    spec.validate()
    n = features.shape[0]
    need = spec.seed_size + spec.buffer_size * spec.device_count + spec.test_size
    if need > n:
        raise ValueError(f"pool of {n} samples cannot supply {need} (seed+buffers+test)")

    rng = np.random.default_rng(np.random.SeedSequence([_PARTITION_STREAM, spec.seed]))
    order = rng.permutation(n)

    seed_idx = order[: spec.seed_size]
    cursor = spec.seed_size
    buffer_idx = order[cursor : cursor + spec.buffer_size * spec.device_count]
    cursor += spec.buffer_size * spec.device_count
    test_idx = order[cursor : cursor + spec.test_size]

    if spec.buffer_assignment == "label_sorted":
        # Stable sort keeps the permutation's order within each label, so the
        # split is still seed-reproducible while buffers become class-skewed.
        buffer_idx = buffer_idx[np.argsort(labels[buffer_idx], kind="stable")]

    buffers = []
    for k in range(spec.device_count):
        idx = buffer_idx[k * spec.buffer_size : (k + 1) * spec.buffer_size]
        buffers.append(
            DeviceBuffer(
                device_id=k,
                features=features[idx],
                labels=labels[idx],
                origins=idx.astype(np.int64),
            )
        )

    return Split(
        seed_features=features[seed_idx],
        seed_labels=labels[seed_idx],
        buffers=tuple(buffers),
        test_features=features[test_idx],
        test_labels=labels[test_idx],
        seed_origins=seed_idx.astype(np.int64),
        test_origins=test_idx.astype(np.int64),
    )
