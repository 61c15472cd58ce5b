"""Pluggable character-recognition boundary with a deterministic stub.

Real handwriting recognition sits behind the ``Recognizer`` protocol; the
stub implementation reads back text rendered with the 5x7 bitmap font of
:mod:`sheetgrade.font` and is what the synthetic closed-loop tests use. A
manifest-backed recognizer lets externally produced results (e.g. from a
trained model) be injected per (image, area) pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from . import font
from .errors import ParseError
from .raster import as_gray, connected_components

_INK_THRESHOLD = 128
_FULL_CELL = font.GLYPH_W * font.GLYPH_H  # Hamming normalizer
_DIM_SLACK = 0.75  # accepted |ink-box dimension - reference| in font pixels

# Precomputed tight ink boxes and patterns of every reference glyph.
_REFS: list[tuple[str, int, int, int, np.ndarray]] = []
for _ch in font.ALPHABET:
    _box = font.glyph_ink_box(_ch)
    if _box is None:
        continue
    _c0, _r0, _w, _h = _box
    _bits = font.glyph_bitmap(_ch)[_r0:_r0 + _h, _c0:_c0 + _w]
    _REFS.append((_ch, _w, _h, _c0, _bits))


@dataclass(frozen=True)
class RecognitionResult:
    text: str
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


class Recognizer(Protocol):
    """Behavioral contract: deterministic text recognition on a crop.

    ``image_id`` and ``area_index`` are context for implementations that
    look results up externally; area_index -1 denotes the unique-ID box.
    """

    def recognize(self, img: np.ndarray, image_id: str = "",
                  area_index: int = -1) -> RecognitionResult: ...


def _clean_ink(ink: np.ndarray, scale: int) -> np.ndarray:
    """Drop speckle and line-like components, keep glyph-shaped ink."""
    if not ink.any():
        return ink
    components = connected_components(ink, connectivity=8)
    keep = np.ones(components.count + 1, dtype=bool)
    min_area = max(1, (scale * scale) // 4)
    for index, ((_, _, w, h), size) in enumerate(zip(components.boxes, components.sizes), 1):
        if size <= min_area:
            keep[index] = False
        elif w >= 6 * h and w > 8 * scale:  # underline / stray stroke
            keep[index] = False
    keep[0] = False
    return keep[components.labels]


def _column_runs(inky: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs [c0, c1] of consecutive inky columns."""
    cols = np.nonzero(inky)[0]
    if cols.size == 0:
        return []
    breaks = np.nonzero(np.diff(cols) > 1)[0]
    return [(int(chunk[0]), int(chunk[-1])) for chunk in np.split(cols, breaks + 1)]


def _resample(block: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Block-mean downsample of a bool patch to out_h x out_w, threshold 0.5."""
    h, w = block.shape
    out = np.zeros((out_h, out_w), dtype=bool)
    for r in range(out_h):
        r0, r1 = round(r * h / out_h), max(round((r + 1) * h / out_h), round(r * h / out_h) + 1)
        for c in range(out_w):
            c0, c1 = round(c * w / out_w), max(round((c + 1) * w / out_w), round(c * w / out_w) + 1)
            out[r, c] = block[r0:r1, c0:c1].mean() >= 0.5
    return out


def _match_glyph(patch: np.ndarray, scale: int) -> tuple[str, float, int]:
    """Best (char, normalized distance, cell left margin) for one ink patch."""
    h, w = patch.shape
    wf, hf = w / scale, h / scale
    best: tuple[float, str, int] | None = None
    for ch, rw, rh, left_margin, ref in _REFS:
        if abs(rw - wf) > _DIM_SLACK or abs(rh - hf) > _DIM_SLACK:
            continue
        resampled = _resample(patch, rh, rw)
        distance = int(np.count_nonzero(resampled != ref)) / _FULL_CELL
        key = (distance, ch, left_margin)
        if best is None or key < best:
            best = key
    if best is None:
        return "?", 1.0, 0
    distance, ch, left_margin = best
    return ch, distance, left_margin


def stub_recognize(img: np.ndarray, glyph_scale: int = 3) -> RecognitionResult:
    """Decode text rendered with the stub font at a known glyph scale.

    Ink components are cleaned of speckle and line-like strokes, split
    into glyphs at blank column gaps, and each glyph is matched against
    the font table by minimum Hamming distance on a tight, block-resampled
    ink box. Interior runs of spaces are recovered from gap widths; an ink
    patch matching no reference decodes to ``?`` with zero confidence
    contribution. A blank image decodes to empty text with confidence 1.
    """
    if glyph_scale < 1:
        raise ValueError(f"glyph_scale must be >= 1, got {glyph_scale}")
    arr = as_gray(img)
    ink = _clean_ink(arr < _INK_THRESHOLD, glyph_scale)
    runs = _column_runs(ink.any(axis=0))
    if not runs:
        return RecognitionResult("", 1.0)

    glyphs: list[tuple[str, float, int, int, int, int]] = []  # ch, nd, c0, c1, lm, rm
    for c0, c1 in runs:
        chunk = ink[:, c0:c1 + 1]
        rows = np.nonzero(chunk.any(axis=1))[0]
        patch = chunk[rows[0]:rows[-1] + 1, :]
        ch, distance, left_margin = _match_glyph(patch, glyph_scale)
        if ch == "?":
            right_margin = 0
        else:
            box = font.glyph_ink_box(ch)
            right_margin = font.GLYPH_W - box[0] - box[2]
        glyphs.append((ch, distance, c0, c1, left_margin, right_margin))

    pieces: list[str] = []
    distances: list[float] = []
    for i, (ch, distance, c0, c1, left_margin, _) in enumerate(glyphs):
        if i > 0:
            # gap width, corrected for the two flanking cell margins, in
            # units of the glyph advance: 0 -> adjacent, k -> k spaces
            prev_right = glyphs[i - 1][3]
            margins = glyphs[i - 1][5] + left_margin
            gap = c0 - prev_right - 1 - margins * glyph_scale
            spaces = round((gap - glyph_scale) / (font.ADVANCE * glyph_scale))
            pieces.append(" " * max(spaces, 0))
        pieces.append(ch)
        distances.append(distance)
    return RecognitionResult("".join(pieces), 1.0 - float(np.mean(distances)))


@dataclass(frozen=True)
class StubRecognizer:
    """Recognizer wrapper around :func:`stub_recognize`."""

    glyph_scale: int = 3

    def recognize(self, img: np.ndarray, image_id: str = "",
                  area_index: int = -1) -> RecognitionResult:
        return stub_recognize(img, self.glyph_scale)


class ManifestRecognizer:
    """Recognizer backed by a (image_id, area_index) -> text manifest.

    Missing keys resolve to empty text with confidence 0, so absent model
    output degrades to a scored failure rather than an exception.
    """

    def __init__(self, entries: dict[tuple[str, int], str]):
        self.entries = dict(entries)

    def recognize(self, img: np.ndarray, image_id: str = "",
                  area_index: int = -1) -> RecognitionResult:
        try:
            return RecognitionResult(self.entries[(image_id, area_index)], 1.0)
        except KeyError:
            return RecognitionResult("", 0.0)


def load_manifest(path: str | Path) -> dict[tuple[str, int], str]:
    """Parse a recognition manifest: ``<image_id>\\t<area_index>\\t<text>`` lines."""
    entries: dict[tuple[str, int], str] = {}
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"{path}:{ln}: expected 3 tab-separated fields, got {len(parts)}")
        try:
            index = int(parts[1])
        except ValueError as exc:
            raise ParseError(f"{path}:{ln}: bad area index {parts[1]!r}") from exc
        entries[(parts[0], index)] = parts[2]
    return entries


def store_manifest(entries: dict[tuple[str, int], str], path: str | Path) -> None:
    lines = [f"{image_id}\t{index}\t{text}"
             for (image_id, index), text in sorted(entries.items())]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def file_recognizer(manifest_path: str | Path) -> ManifestRecognizer:
    """Build a recognizer from a manifest file."""
    return ManifestRecognizer(load_manifest(manifest_path))
