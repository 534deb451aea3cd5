"""Deterministic synthetic handwritten-digit corpus in MNIST IDX layout.

Provides a self-contained stand-in dataset for environments without the
reference digit files: stroke-based 28x28 glyphs per digit class with random
affine warps, blur, and pixel noise. Corpora are written as genuine IDX
files and consumed through :mod:`edgeacq.dataio`, so every downstream code
path is identical to a real-data run.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy import ndimage

from .dataio import write_idx_images, write_idx_labels

SIDE = 28

_CORPUS_STREAM = 0xD161757


def _line(p0, p1, n=24):
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - t) * np.asarray(p0, dtype=float) + t * np.asarray(p1, dtype=float)


def _arc(cx, cy, rx, ry, deg0, deg1, n=48):
    th = np.radians(np.linspace(deg0, deg1, n))
    # y grows downward; 0 deg points right, 90 deg points down.
    return np.stack([cx + rx * np.cos(th), cy + ry * np.sin(th)], axis=1)


# Stroke sets per digit and writing-style variant, as (x=col, y=row)
# polylines on the 28x28 canvas. Multiple variants per digit keep the
# learning curve from saturating after a handful of samples.
_GLYPHS: dict[int, list[list[np.ndarray]]] = {
    0: [
        [_arc(14, 14, 5.0, 8.0, 0, 360, n=96)],
        [_arc(14, 14, 6.5, 7.0, 0, 360, n=96)],
        [_arc(14, 14, 3.8, 8.2, 0, 360, n=96)],
    ],
    1: [
        [_line((14, 5), (14, 23)), _line((11, 9), (14, 5)), _line((11, 23), (17, 23))],
        [_line((15, 5), (13.5, 23)), _line((10.5, 10), (15, 5))],
        [_line((14, 5), (14, 23))],
    ],
    2: [
        [
            _arc(13.5, 9.5, 5.0, 4.5, 180, 360, n=48),
            _line((18.5, 9.5), (9, 23)),
            _line((9, 23), (19, 23)),
        ],
        [
            _arc(13.5, 9.0, 4.5, 4.0, 195, 360, n=48),
            _arc(16.5, 17.0, 8.0, 7.5, 70, 138, n=32),
            _line((9.5, 22.5), (19.5, 22.0)),
        ],
    ],
    # 3, 5, and 8 share their lower bowls stroke-for-stroke and differ only
    # around the upper left, the way the handwritten digits genuinely
    # overlap: the shared ink dominates the per-pixel power while the
    # class-discriminative region stays small, so margins are thin even
    # though the classes are cleanly separable.
    3: [
        [
            _arc(12.3, 9.0, 5.2, 4.6, -150, 90, n=64),
            _arc(12.8, 17.8, 5.6, 5.2, -90, 150, n=64),
        ],
        [
            _arc(13.4, 9.9, 4.2, 4.3, -140, 85, n=56),
            _arc(13.2, 18.3, 4.7, 4.5, -85, 140, n=56),
        ],
        [
            _arc(12.0, 8.8, 6.0, 4.3, -160, 90, n=64),
            _arc(12.6, 18.0, 6.3, 5.0, -95, 155, n=64),
        ],
    ],
    4: [
        [_line((16.5, 5), (16.5, 23)), _line((16.5, 5), (8, 16.5)), _line((8, 16.5), (20, 16.5))],
        [_line((11, 5), (9, 15)), _line((9, 15), (19.5, 15)), _line((17, 5), (15.5, 23))],
    ],
    # Each 5 variant reuses the bottom bowl of the 3 variant with the same
    # index; only the top differs (flat bar + short left vertical).
    5: [
        [
            _line((17.5, 5.2), (9.3, 5.2)),
            _line((9.3, 5.2), (9.1, 12.0)),
            _arc(12.8, 17.8, 5.6, 5.2, -90, 150, n=64),
        ],
        [
            _line((16.8, 6.2), (10.2, 6.2)),
            _line((10.2, 6.2), (10.0, 12.6)),
            _arc(13.2, 18.3, 4.7, 4.5, -85, 140, n=56),
        ],
        [
            _line((18.6, 5.0), (8.8, 5.4)),
            _line((8.8, 5.4), (9.2, 12.8)),
            _arc(12.6, 18.0, 6.3, 5.0, -95, 155, n=64),
        ],
    ],
    6: [
        [
            _line((17.5, 4.5), (12.2, 11.5), n=32),
            _arc(13.5, 17.5, 5.0, 5.4, -90, 270, n=80),
        ],
        [
            _arc(19.5, 13.0, 9.5, 8.8, 150, 215, n=40),
            _arc(13.8, 18.0, 4.4, 4.9, -90, 270, n=72),
        ],
    ],
    7: [
        [_line((9, 5.5), (19, 5.5)), _line((19, 5.5), (11.5, 23))],
        [_line((9, 6), (19, 5.5)), _line((19, 5.5), (12, 23)), _line((10.5, 14.5), (17, 14.5))],
    ],
    # 8 closes the top bowl of the matching 3 variant into a loop and keeps
    # a near-identical lower loop, so it is separated from 3 and 5 by the
    # same kind of small upper-left patch.
    8: [
        [
            _arc(12.6, 9.0, 4.6, 4.4, 0, 360, n=72),
            _arc(12.9, 17.8, 5.3, 5.0, 0, 360, n=80),
        ],
        [
            _arc(13.5, 9.9, 3.8, 4.1, 0, 360, n=64),
            _arc(13.2, 18.3, 4.5, 4.4, 0, 360, n=72),
        ],
        [
            _arc(12.4, 8.8, 5.4, 4.1, 0, 360, n=72),
            _arc(12.7, 18.0, 5.9, 4.8, 0, 360, n=80),
        ],
    ],
    9: [
        [
            _arc(14, 10, 4.8, 4.9, 0, 360, n=72),
            _line((18.8, 10), (18.0, 17), n=20),
            _line((18.0, 17), (15.2, 23.3), n=20),
        ],
        [
            _arc(13.5, 9.5, 4.2, 4.4, 0, 360, n=64),
            _line((17.7, 9.5), (17.7, 23), n=24),
        ],
    ],
}


def _segment_distances(points: np.ndarray, stroke: np.ndarray) -> np.ndarray:
    """Min distance from each query point to a polyline's segments."""
    a = stroke[:-1]
    b = stroke[1:]
    ab = b - a
    denom = np.maximum((ab * ab).sum(axis=1), 1e-12)
    # (npix, nseg) projection of each pixel onto each segment, clamped.
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip((ap * ab[None, :, :]).sum(axis=2) / denom[None, :], 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = np.linalg.norm(points[:, None, :] - closest, axis=2)
    return d.min(axis=1)


def n_variants(digit: int) -> int:
    return len(_GLYPHS[digit])


def digit_prototype(digit: int, variant: int = 0, stroke_sigma: float = 0.9) -> np.ndarray:
    """Noise-free 28x28 intensity field for one digit style variant."""
    if digit not in _GLYPHS:
        raise ValueError(f"no glyph for digit {digit}")
    ys, xs = np.mgrid[0:SIDE, 0:SIDE]
    pix = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(float)
    dist = np.full(SIDE * SIDE, np.inf)
    for stroke in _GLYPHS[digit][variant]:
        dist = np.minimum(dist, _segment_distances(pix, stroke))
    img = np.exp(-((dist / stroke_sigma) ** 2))
    return img.reshape(SIDE, SIDE)


_PROTO_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _proto(digit: int, variant: int) -> np.ndarray:
    key = (digit, variant)
    if key not in _PROTO_CACHE:
        _PROTO_CACHE[key] = digit_prototype(digit, variant)
    return _PROTO_CACHE[key]


def _elastic_field(rng: np.random.Generator, magnitude: float, smooth: float) -> np.ndarray:
    """Smooth random displacement field, one component per call."""
    field = rng.normal(0.0, 1.0, size=(SIDE, SIDE))
    field = ndimage.gaussian_filter(field, sigma=smooth, mode="constant")
    peak = np.abs(field).max()
    if peak > 0:
        field *= magnitude / peak
    return field


def _random_sample(
    digit: int,
    rng: np.random.Generator,
    morph_classes: tuple[int, ...] = (),
    morph_max: float = 0.45,
    clutter_max: float = 0.0,
) -> np.ndarray:
    base = _proto(digit, int(rng.integers(0, n_variants(digit))))

    # Ambiguous handwriting: blend in a random fraction of another class's
    # glyph. This is what keeps class margins tight; without it a linear
    # separator gets unrealistically confident after a handful of samples.
    # The square keeps most samples mildly ambiguous and a minority heavily.
    others = [c for c in morph_classes if c != digit]
    if others:
        lam = morph_max * rng.uniform(0.0, 1.0) ** 2
        other = int(others[int(rng.integers(0, len(others)))])
        other_base = _proto(other, int(rng.integers(0, n_variants(other))))
        base = (1.0 - lam) * base + lam * other_base

    angle = rng.uniform(-0.32, 0.32)
    sx = math.exp(rng.uniform(-0.17, 0.17))
    sy = math.exp(rng.uniform(-0.17, 0.17))
    shear = rng.uniform(-0.32, 0.32)
    tx, ty = rng.uniform(-2.4, 2.4, size=2)

    c, s = math.cos(angle), math.sin(angle)
    fwd = np.array([[c, -s], [s, c]]) @ np.array([[sx, shear], [0.0, sy]])
    inv = np.linalg.inv(fwd)
    center = np.array([(SIDE - 1) / 2.0, (SIDE - 1) / 2.0])
    offset = center - inv @ (center + np.array([ty, tx]))

    # Elastic wobble on top of the affine pose: strokes bend per sample.
    mag = rng.uniform(1.6, 3.6)
    dy = _elastic_field(rng, mag, smooth=3.4)
    dx = _elastic_field(rng, mag, smooth=3.4)
    ys, xs = np.mgrid[0:SIDE, 0:SIDE].astype(float)
    coords = np.stack([ys + dy, xs + dx])
    affined = inv @ coords.reshape(2, -1) + offset[:, None]
    warped = ndimage.map_coordinates(base, affined.reshape(2, SIDE, SIDE), order=1, mode="constant")

    warped = ndimage.gaussian_filter(warped, sigma=rng.uniform(0.35, 0.95))
    warped *= rng.uniform(0.72, 1.0)

    if clutter_max > 0:
        # Class-independent clutter: smooth background energy shared by all
        # classes, so per-dimension signal power is dominated by ink that
        # does not discriminate (thick shared strokes in scanned digits).
        # It raises the noise floor per receive SNR without moving margins.
        clutter = np.abs(
            _elastic_field(rng, rng.uniform(0.45 * clutter_max, clutter_max), smooth=2.6)
        )
        warped += clutter
    warped += rng.normal(0.0, 0.035, size=warped.shape)
    return np.clip(warped, 0.0, 1.0)


def sample_digits(
    n: int,
    classes: tuple[int, ...],
    rng: np.random.Generator,
    morph_max: float = 0.0,
    clutter_max: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` images with labels cycling uniformly over ``classes``.

    A positive ``morph_max`` morphs samples toward other classes of the
    same corpus (ambiguous-handwriting overlap); a positive ``clutter_max``
    adds class-independent background ink, raising the mean per-dimension
    power relative to the class margins. The defaults keep classes
    overlapping only through style and warp.
    """
    labels = np.asarray([classes[i % len(classes)] for i in range(n)], dtype=np.int64)
    rng.shuffle(labels)
    feats = np.empty((n, SIDE * SIDE), dtype=np.float64)
    for i in range(n):
        feats[i] = _random_sample(
            int(labels[i]),
            rng,
            morph_classes=tuple(classes),
            morph_max=morph_max,
            clutter_max=clutter_max,
        ).ravel()
    return feats, labels


def write_corpus(
    out_dir: str,
    n_train: int = 14000,
    n_test: int = 2400,
    seed: int = 0,
    classes: tuple[int, ...] = tuple(range(10)),
    morph_max: float = 0.0,
    clutter_max: float = 0.0,
) -> dict[str, str]:
    """Generate a corpus and write IDX files; returns the four file paths.

    Each (sizes, seed, classes, morph, clutter) signature gets its own
    subdirectory of ``out_dir`` and is generated once; later calls reuse
    the files.
    """
    tag = (
        "c" + "-".join(str(c) for c in classes)
        + f"_n{n_train}_t{n_test}_s{seed}"
        + f"_m{int(round(morph_max * 100))}_k{int(round(clutter_max * 100))}"
    )
    out_dir = os.path.join(out_dir, tag)
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "train_images": os.path.join(out_dir, "train-images-idx3-ubyte"),
        "train_labels": os.path.join(out_dir, "train-labels-idx1-ubyte"),
        "test_images": os.path.join(out_dir, "t10k-images-idx3-ubyte"),
        "test_labels": os.path.join(out_dir, "t10k-labels-idx1-ubyte"),
    }
    if all(os.path.exists(p) for p in paths.values()):
        return paths

    rng = np.random.default_rng(np.random.SeedSequence([_CORPUS_STREAM, seed]))
    train_x, train_y = sample_digits(
        n_train, classes, rng, morph_max=morph_max, clutter_max=clutter_max
    )
    test_x, test_y = sample_digits(
        n_test, classes, rng, morph_max=morph_max, clutter_max=clutter_max
    )

    with open(paths["train_images"], "wb") as fh:
        fh.write(write_idx_images(train_x, SIDE, SIDE))
    with open(paths["train_labels"], "wb") as fh:
        fh.write(write_idx_labels(train_y))
    with open(paths["test_images"], "wb") as fh:
        fh.write(write_idx_images(test_x, SIDE, SIDE))
    with open(paths["test_labels"], "wb") as fh:
        fh.write(write_idx_labels(test_y))
    return paths
