"""Horizontal segment extraction: mask post-processing, Hough, LSD.

Three detectors produce the same ``Segment`` records so they can be scored
against each other with identical pixel-level metrics:

* ``mask_to_segments`` summarizes segmentation-mask components,
* ``hough_horizontal`` is a Sobel + run-linking line finder,
* ``lsd_horizontal`` is a gradient region-growing detector restricted to
  near-horizontal level lines.

All detectors return segments sorted by (y, x0), deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ParseError
from .raster import as_mask, connected_components, sobel_horizontal, sobel_vertical, threshold

# Edge responses of a thin stroke straddle it (one response row above, one
# below), so runs this many rows apart that overlap in columns are fused.
_ROW_MERGE_TOLERANCE = 2


class SegmentSource(str, Enum):
    MASK = "mask"
    HOUGH = "hough"
    LSD = "lsd"


@dataclass(frozen=True)
class Segment:
    """A horizontal line segment: column extent [x0, x1] at row y."""

    x0: float
    x1: float
    y: float
    source: SegmentSource = SegmentSource.MASK

    def __post_init__(self) -> None:
        if self.x1 < self.x0:
            raise ValueError(f"segment has x1 < x0: {self}")

    @property
    def length(self) -> float:
        return self.x1 - self.x0


@dataclass(frozen=True)
class HoughParams:
    max_gap: int = 5
    edge_threshold: float = 32.0
    min_votes: int = 20

    def __post_init__(self) -> None:
        if self.max_gap < 0:
            raise ValueError(f"max_gap must be >= 0, got {self.max_gap}")


@dataclass(frozen=True)
class LsdParams:
    min_length: float = 40.0
    angle_tolerance: float = 5.0
    gradient_threshold: float = 64.0

    def __post_init__(self) -> None:
        if self.min_length < 1:
            raise ValueError(f"min_length must be >= 1, got {self.min_length}")
        if not 0 < self.angle_tolerance <= 15:
            raise ValueError(f"angle_tolerance must be in (0, 15], got {self.angle_tolerance}")


def _sort_segments(segments: list[Segment]) -> list[Segment]:
    return sorted(segments, key=lambda s: (s.y, s.x0, s.x1))


def mask_to_segments(mask: np.ndarray, min_component_px: int = 10) -> list[Segment]:
    """Summarize mask components as horizontal segments.

    Each connected component with at least ``min_component_px`` pixels
    yields one segment: y is the pixel-weighted mean row, x0/x1 the
    column extremes.
    """
    arr = as_mask(mask)
    components = connected_components(arr, connectivity=8)
    segments = []
    for index in range(1, components.count + 1):
        if components.sizes[index - 1] < min_component_px:
            continue
        ys, xs = np.nonzero(components.labels == index)
        segments.append(Segment(
            x0=float(xs.min()), x1=float(xs.max()), y=float(ys.mean()),
            source=SegmentSource.MASK))
    return _sort_segments(segments)


def _row_runs(edge_mask: np.ndarray, max_gap: int, min_votes: int) -> list[tuple[int, int, int, int]]:
    """Per-row linked runs of edge pixels: (row, x0, x1, votes)."""
    runs = []
    for row in range(edge_mask.shape[0]):
        cols = np.nonzero(edge_mask[row])[0]
        if cols.size == 0:
            continue
        # split where more than max_gap pixels are missing between neighbors
        breaks = np.nonzero(np.diff(cols) - 1 > max_gap)[0]
        for chunk in np.split(cols, breaks + 1):
            if chunk.size >= min_votes:
                runs.append((row, int(chunk[0]), int(chunk[-1]), int(chunk.size)))
    return runs


def _merge_runs(runs: list[tuple[int, int, int, int]], source: SegmentSource) -> list[Segment]:
    """Fuse runs on nearby rows with overlapping column ranges.

    Union-find over the original runs; adjacency is |row difference| <=
    _ROW_MERGE_TOLERANCE and column overlap. The fused y is the
    vote-weighted mean row, so the two edge responses straddling a stroke
    collapse onto the stroke itself.
    """
    n = len(runs)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    by_row: dict[int, list[int]] = {}
    for i, run in enumerate(runs):
        by_row.setdefault(run[0], []).append(i)
    for i, (row, x0, x1, _) in enumerate(runs):
        for other_row in range(row + 1, row + _ROW_MERGE_TOLERANCE + 1):
            for j in by_row.get(other_row, ()):
                if runs[j][1] <= x1 and x0 <= runs[j][2]:
                    union(i, j)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    segments = []
    for members in groups.values():
        votes = np.array([runs[i][3] for i in members], dtype=np.float64)
        rows = np.array([runs[i][0] for i in members], dtype=np.float64)
        segments.append(Segment(
            x0=float(min(runs[i][1] for i in members)),
            x1=float(max(runs[i][2] for i in members)),
            y=float((rows * votes).sum() / votes.sum()),
            source=source))
    return _sort_segments(segments)


def hough_horizontal(img: np.ndarray, params: HoughParams = HoughParams()) -> list[Segment]:
    """Detect horizontal lines via Sobel edges and per-row run linking.

    For strictly horizontal lines the polar Hough accumulator degenerates
    to per-row pixel counts, so linking collinear edge pixels on a row
    (bridging gaps up to ``max_gap`` missing pixels) and keeping runs with
    at least ``min_votes`` pixels is an exact, faster equivalent of the
    accumulator-threshold formulation.
    """
    edges = threshold(sobel_horizontal(img), params.edge_threshold)
    runs = _row_runs(edges, params.max_gap, params.min_votes)
    return _merge_runs(runs, SegmentSource.HOUGH)


def lsd_horizontal(img: np.ndarray, params: LsdParams = LsdParams()) -> list[Segment]:
    """Gradient region growing restricted to near-horizontal level lines.

    Pixels with gradient magnitude >= ``gradient_threshold`` whose level
    line (isophote direction) is within ``angle_tolerance`` degrees of
    horizontal are grouped into connected regions; each region is fitted
    with a segment. Regions shorter than ``min_length`` or whose fitted
    slope is steeper than the tolerance are discarded, so the result for
    a larger ``min_length`` is always a subset of a smaller one.
    """
    gx = sobel_vertical(img)
    gy = sobel_horizontal(img)
    magnitude = np.hypot(gx, gy)
    # level line is perpendicular to the gradient; its angle from
    # horizontal is atan(|gx| / |gy|)
    level_angle = np.degrees(np.arctan2(np.abs(gx), np.abs(gy)))
    aligned = (magnitude >= params.gradient_threshold) & (level_angle <= params.angle_tolerance)

    components = connected_components(aligned, connectivity=8)
    segments = []
    for index in range(1, components.count + 1):
        ys, xs = np.nonzero(components.labels == index)
        weights = magnitude[ys, xs]
        x0, x1 = float(xs.min()), float(xs.max())
        if x1 - x0 < params.min_length:
            continue
        total = weights.sum()
        y_mean = float((ys * weights).sum() / total)
        x_mean = float((xs * weights).sum() / total)
        # weighted least-squares slope; reject regions steeper than the
        # tolerance (catches staircases of tilted lines whose individual
        # pixels look locally horizontal)
        var_x = (weights * (xs - x_mean) ** 2).sum()
        if var_x <= 0:
            continue
        slope = float((weights * (xs - x_mean) * (ys - y_mean)).sum() / var_x)
        if np.degrees(np.arctan(abs(slope))) > params.angle_tolerance:
            continue
        segments.append(Segment(x0=x0, x1=x1, y=y_mean, source=SegmentSource.LSD))
    return _sort_segments(segments)


def segments_to_mask(segments: list[Segment], width: int, height: int, thickness: int = 2) -> np.ndarray:
    """Rasterize segments as horizontal bars of the given thickness.

    Bars are centered on each segment's y; overlaps union. Used to score
    every detector with the same pixel-level metrics.
    """
    if thickness < 1:
        raise ValueError(f"thickness must be >= 1, got {thickness}")
    mask = np.zeros((height, width), dtype=bool)
    for seg in segments:
        c0 = max(int(np.floor(seg.x0 + 0.5)), 0)
        c1 = min(int(np.floor(seg.x1 + 0.5)), width - 1)
        r0 = int(np.floor(seg.y - (thickness - 1) / 2.0 + 0.5))
        r1 = r0 + thickness - 1
        r0, r1 = max(r0, 0), min(r1, height - 1)
        if c1 < c0 or r1 < r0:
            continue
        mask[r0:r1 + 1, c0:c1 + 1] = True
    return mask


def store_segments(segments: list[Segment], path: str | Path) -> None:
    """Write segments as text lines ``y x0 x1 source`` (3-decimal fixed point)."""
    lines = [f"{s.y:.3f} {s.x0:.3f} {s.x1:.3f} {s.source.value}" for s in segments]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_segments(path: str | Path) -> list[Segment]:
    segments = []
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"{path}:{ln}: expected 'y x0 x1 source', got {line!r}")
        try:
            y, x0, x1 = float(parts[0]), float(parts[1]), float(parts[2])
            source = SegmentSource(parts[3])
        except ValueError as exc:
            raise ParseError(f"{path}:{ln}: {exc}") from exc
        segments.append(Segment(x0=x0, x1=x1, y=y, source=source))
    return segments
