"""Single-channel raster primitives shared by every pipeline stage.

A grayscale image is a 2-D uint8 array (row major, intensities 0..255), a
mask is a 2-D bool array of the same layout (True = foreground), and a
gradient map is a 2-D float32 array of signed magnitudes. All operations
here are pure functions; arrays are never mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DimensionError, ParseError

# 3x3 Sobel kernel responding to horizontal edges (vertical derivative).
SOBEL_HORIZONTAL_KERNEL = np.array(
    [[-1, -2, -1],
     [0, 0, 0],
     [1, 2, 1]], dtype=np.float32)

# Transposed kernel, responds to vertical edges.
SOBEL_VERTICAL_KERNEL = SOBEL_HORIZONTAL_KERNEL.T.copy()


def as_gray(img: np.ndarray) -> np.ndarray:
    """Validate a grayscale image array (2-D uint8, both sides >= 1)."""
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f"expected non-empty 2-D image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise DimensionError(f"expected uint8 image, got {arr.dtype}")
    return arr


def as_mask(mask: np.ndarray) -> np.ndarray:
    """Validate a bit mask array (2-D bool)."""
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f"expected non-empty 2-D mask, got shape {arr.shape}")
    if arr.dtype != np.bool_:
        raise DimensionError(f"expected bool mask, got {arr.dtype}")
    return arr


def sobel_horizontal(img: np.ndarray) -> np.ndarray:
    """Per-pixel vertical-derivative response of the 3x3 Sobel kernel.

    Responds to horizontal edges; border pixels use edge replication.
    Returns a float32 map of signed magnitudes (range +-1020).
    """
    arr = as_gray(img).astype(np.float32)
    return ndimage.correlate(arr, SOBEL_HORIZONTAL_KERNEL, mode="nearest")


def sobel_vertical(img: np.ndarray) -> np.ndarray:
    """Transposed variant of :func:`sobel_horizontal` (vertical edges)."""
    arr = as_gray(img).astype(np.float32)
    return ndimage.correlate(arr, SOBEL_VERTICAL_KERNEL, mode="nearest")


def threshold(gradient_map: np.ndarray, t: float) -> np.ndarray:
    """Mask of pixels whose absolute gradient value is >= ``t`` (t >= 0)."""
    if t < 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    arr = np.asarray(gradient_map)
    if arr.ndim != 2:
        raise DimensionError(f"expected 2-D gradient map, got shape {arr.shape}")
    return np.abs(arr) >= t


@dataclass(frozen=True)
class LabeledComponents:
    """Connected components of a mask.

    ``labels`` holds one component index per pixel (0 = background),
    ``boxes[i]`` is the (x, y, w, h) bounding box of component ``i + 1``
    and ``sizes[i]`` its pixel count. Labels are assigned in raster-scan
    order of each component's first pixel, so numbering is deterministic.
    """

    labels: np.ndarray
    count: int
    boxes: tuple[tuple[int, int, int, int], ...]
    sizes: tuple[int, ...]


def connected_components(mask: np.ndarray, connectivity: int = 8) -> LabeledComponents:
    """Label maximal connected regions under 4- or 8-connectivity."""
    arr = as_mask(mask)
    if connectivity == 4:
        structure = ndimage.generate_binary_structure(2, 1)
    elif connectivity == 8:
        structure = np.ones((3, 3), dtype=bool)
    else:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")

    raw, n = ndimage.label(arr, structure=structure)
    if n == 0:
        return LabeledComponents(np.zeros_like(raw, dtype=np.int32), 0, (), ())

    # Renumber so label k is the k-th component encountered in raster order.
    flat = raw.ravel()
    values, first_index = np.unique(flat, return_index=True)
    order = values[np.argsort(first_index)]
    order = order[order != 0]
    remap = np.zeros(n + 1, dtype=np.int32)
    remap[order] = np.arange(1, n + 1, dtype=np.int32)
    labels = remap[raw]

    sizes = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    boxes = []
    for sl in ndimage.find_objects(labels):
        ys, xs = sl
        boxes.append((int(xs.start), int(ys.start),
                      int(xs.stop - xs.start), int(ys.stop - ys.start)))
    return LabeledComponents(labels, int(n), tuple(boxes), tuple(int(s) for s in sizes))


# ---------------------------------------------------------------------------
# Binary PGM (P5) load/store. Images round-trip bit exactly; masks are
# stored as 0/255 and any loaded value >= 128 counts as foreground.
# ---------------------------------------------------------------------------

def _read_pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read whitespace/comment separated header tokens, return (tokens, offset)."""
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise ParseError("truncated PGM header")
        c = data[i:i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    return tokens, i + 1  # single whitespace byte after maxval


def load_pgm(path: str | Path) -> np.ndarray:
    """Load a binary (P5) 8-bit PGM file as a grayscale image."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ParseError(f"{path}: not a binary PGM (P5) file")
    tokens, offset = _read_pgm_tokens(data[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ParseError(f"{path}: bad PGM header: {exc}") from exc
    if width < 1 or height < 1:
        raise ParseError(f"{path}: bad PGM size {width}x{height}")
    if not 0 < maxval < 256:
        raise ParseError(f"{path}: unsupported PGM maxval {maxval}")
    pixels = data[2 + offset:]
    if len(pixels) < width * height:
        raise ParseError(f"{path}: truncated PGM pixel data")
    arr = np.frombuffer(pixels[:width * height], dtype=np.uint8)
    return arr.reshape(height, width).copy()


def store_pgm(img: np.ndarray, path: str | Path) -> None:
    """Store a grayscale image as binary PGM; atomic write-then-rename."""
    arr = as_gray(img)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    tmp = Path(path).with_name(Path(path).name + ".tmp")
    tmp.write_bytes(header + arr.tobytes())
    tmp.replace(path)


def load_mask(path: str | Path) -> np.ndarray:
    """Load a PGM file as a bit mask (value >= 128 is foreground)."""
    return load_pgm(path) >= 128


def store_mask(mask: np.ndarray, path: str | Path) -> None:
    """Store a bit mask as a 0/255 binary PGM."""
    arr = as_mask(mask)
    store_pgm(np.where(arr, 255, 0).astype(np.uint8), path)
