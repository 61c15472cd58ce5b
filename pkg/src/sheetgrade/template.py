"""Standard answer-sheet model: layout geometry, answers, segment matching.

A template describes one sheet design in canonical coordinates: where the
unique-ID box sits, where each answer-area underline lies, how far the
answer area extends above (m) and below (n) the underline, and the
standard answer per area. Detected segments are matched to template areas
by relative position with a thresholded greedy nearest-pair scheme.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AreaOutOfBounds, DimensionError, ParseError, TemplateError
from .linedet import Segment
from .raster import as_gray

ID_CORNERS = ("left_bottom", "right_bottom")

_TEMPLATE_KEYS = {"sheet_id", "canonical_w", "canonical_h", "id_box", "id_corner", "areas"}
_RECT_KEYS = {"x", "y", "w", "h"}
_AREA_KEYS = {"index", "x0", "x1", "y", "m", "n", "standard_answer"}


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise TemplateError(f"rect must be at least 1x1, got {self}")


def rect_iou(a: Rect, b: Rect) -> float:
    """Intersection over union of two rects."""
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union > 0 else 0.0


@dataclass(frozen=True)
class TemplateArea:
    """One answer area: its underline, m/n expansion and standard answer."""

    index: int
    aau: Segment
    m: int
    n: int
    standard_answer: str

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < 0:
            raise TemplateError(f"area {self.index}: need m >= 1 and n >= 0, got m={self.m} n={self.n}")


@dataclass(frozen=True)
class AnswerSheetTemplate:
    sheet_id: str
    canonical_w: int
    canonical_h: int
    id_box: Rect
    id_corner: str
    areas: tuple[TemplateArea, ...]

    def __post_init__(self) -> None:
        if not self.sheet_id:
            raise TemplateError("sheet_id must be nonempty")
        if self.id_corner not in ID_CORNERS:
            raise TemplateError(f"id_corner must be one of {ID_CORNERS}, got {self.id_corner!r}")
        if not self.areas:
            raise TemplateError("template has no answer areas")
        self._check_rect(self.id_box, "id_box")
        for area in self.areas:
            self._check_rect(expand_area(area), f"area {area.index}")

    def _check_rect(self, rect: Rect, what: str) -> None:
        if rect.x < 0 or rect.y < 0 or rect.x + rect.w > self.canonical_w \
                or rect.y + rect.h > self.canonical_h:
            raise TemplateError(f"{what} exceeds the canonical {self.canonical_w}x{self.canonical_h} bounds: {rect}")


def _round_half_up(v: float) -> int:
    return int(np.floor(v + 0.5))


def expand_area(area: TemplateArea) -> Rect:
    """Expanded answer rect: m pixels above the underline, n below.

    Raises :class:`AreaOutOfBounds` when the rect's top would be negative;
    bounds against the canonical size are enforced by the template itself.
    """
    y = _round_half_up(area.aau.y - area.m)
    if y < 0:
        raise AreaOutOfBounds(f"area {area.index}: expansion m={area.m} rises above the sheet")
    return Rect(x=_round_half_up(area.aau.x0), y=y,
                w=_round_half_up(area.aau.x1 - area.aau.x0), h=area.m + area.n)


def segment_rect(seg: Segment, m: int, n: int, width: int, height: int) -> Rect | None:
    """Expansion rect of a detected segment, clamped to image bounds."""
    x0 = max(_round_half_up(seg.x0), 0)
    x1 = min(_round_half_up(seg.x1), width)
    y0 = max(_round_half_up(seg.y - m), 0)
    y1 = min(_round_half_up(seg.y) + n, height)
    if x1 - x0 < 1 or y1 - y0 < 1:
        return None
    return Rect(x=x0, y=y0, w=x1 - x0, h=y1 - y0)


@dataclass(frozen=True)
class Assignment:
    """Matching between detected segments and template areas.

    ``matched`` holds (detection index, template area position, distance)
    triples; unmatched areas and detections are listed separately.
    """

    matched: tuple[tuple[int, int, float], ...]
    missed_template_indices: tuple[int, ...]
    spurious_detection_indices: tuple[int, ...]


def _pair_distance(seg: Segment, aau: Segment) -> float:
    dy = abs(seg.y - aau.y)
    gap = max(0.0, max(aau.x0 - seg.x1, seg.x0 - aau.x1))
    return max(dy, gap)


def match_segments(detected: list[Segment], template: AnswerSheetTemplate,
                   max_dist: float = 15.0) -> Assignment:
    """Greedy nearest matching of detected segments to template areas.

    The pair distance is max(vertical offset, horizontal interval gap), so
    a short fragment under the right blank still matches. Pairs are taken
    globally smallest first among d <= max_dist; ties break on (template
    position, detection index), making the result deterministic.
    """
    pairs = []
    for t, area in enumerate(template.areas):
        for d, seg in enumerate(detected):
            distance = _pair_distance(seg, area.aau)
            if distance <= max_dist:
                pairs.append((distance, t, d))
    pairs.sort()

    matched: list[tuple[int, int, float]] = []
    used_t: set[int] = set()
    used_d: set[int] = set()
    for distance, t, d in pairs:
        if t in used_t or d in used_d:
            continue
        used_t.add(t)
        used_d.add(d)
        matched.append((d, t, distance))
    matched.sort(key=lambda m: m[1])
    return Assignment(
        matched=tuple(matched),
        missed_template_indices=tuple(t for t in range(len(template.areas)) if t not in used_t),
        spurious_detection_indices=tuple(d for d in range(len(detected)) if d not in used_d))


def crop(img: np.ndarray, rect: Rect) -> np.ndarray:
    """Exact sub-image copy; the rect must lie inside the image."""
    arr = as_gray(img)
    h, w = arr.shape
    if rect.x < 0 or rect.y < 0 or rect.x + rect.w > w or rect.y + rect.h > h:
        raise DimensionError(f"crop rect {rect} exceeds image bounds {w}x{h}")
    return arr[rect.y:rect.y + rect.h, rect.x:rect.x + rect.w].copy()


# ---------------------------------------------------------------------------
# Template file format: one UTF-8 JSON document per sheet design.
# ---------------------------------------------------------------------------

def _require(mapping: dict, keys: set[str], what: str) -> None:
    missing = keys - mapping.keys()
    if missing:
        raise ParseError(f"{what}: missing field(s) {sorted(missing)}")
    unknown = mapping.keys() - keys
    if unknown:
        raise ParseError(f"{what}: unknown field(s) {sorted(unknown)}")


def template_from_dict(doc: dict, what: str = "template") -> AnswerSheetTemplate:
    if not isinstance(doc, dict):
        raise ParseError(f"{what}: expected a JSON object")
    _require(doc, _TEMPLATE_KEYS, what)
    _require(doc["id_box"], _RECT_KEYS, f"{what}: id_box")
    areas = []
    for i, entry in enumerate(doc["areas"]):
        _require(entry, _AREA_KEYS, f"{what}: areas[{i}]")
        areas.append(TemplateArea(
            index=int(entry["index"]),
            aau=Segment(x0=float(entry["x0"]), x1=float(entry["x1"]), y=float(entry["y"])),
            m=int(entry["m"]), n=int(entry["n"]),
            standard_answer=str(entry["standard_answer"])))
    try:
        return AnswerSheetTemplate(
            sheet_id=str(doc["sheet_id"]),
            canonical_w=int(doc["canonical_w"]),
            canonical_h=int(doc["canonical_h"]),
            id_box=Rect(**{k: int(v) for k, v in doc["id_box"].items()}),
            id_corner=str(doc["id_corner"]),
            areas=tuple(areas))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}: {exc}") from exc


def template_to_dict(t: AnswerSheetTemplate) -> dict:
    return {
        "sheet_id": t.sheet_id,
        "canonical_w": t.canonical_w,
        "canonical_h": t.canonical_h,
        "id_box": {"x": t.id_box.x, "y": t.id_box.y, "w": t.id_box.w, "h": t.id_box.h},
        "id_corner": t.id_corner,
        "areas": [
            {"index": a.index, "x0": a.aau.x0, "x1": a.aau.x1, "y": a.aau.y,
             "m": a.m, "n": a.n, "standard_answer": a.standard_answer}
            for a in t.areas
        ],
    }


def load_template(path: str | Path) -> AnswerSheetTemplate:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    try:
        return template_from_dict(doc, what=str(path))
    except TemplateError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def store_template(t: AnswerSheetTemplate, path: str | Path) -> None:
    text = json.dumps(template_to_dict(t), indent=2, ensure_ascii=False) + "\n"
    tmp = Path(path).with_name(Path(path).name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


@dataclass
class TemplateStore:
    """Read-only sheet_id -> template map over a directory of JSON files.

    All templates in one store must agree on canonical size, id box and id
    corner: the ID must be readable before the sheet is identified, so the
    geometry that locates it has to be shared.
    """

    templates: dict[str, AnswerSheetTemplate] = field(default_factory=dict)

    @classmethod
    def from_dir(cls, directory: str | Path) -> "TemplateStore":
        store = cls()
        for path in sorted(Path(directory).glob("*.json")):
            template = load_template(path)
            store.add(template)
        if not store.templates:
            raise TemplateError(f"no templates found in {directory}")
        return store

    def add(self, template: AnswerSheetTemplate) -> None:
        if self.templates:
            ref = next(iter(self.templates.values()))
            same = (template.canonical_w == ref.canonical_w
                    and template.canonical_h == ref.canonical_h
                    and template.id_box == ref.id_box
                    and template.id_corner == ref.id_corner)
            if not same:
                raise TemplateError(
                    f"template {template.sheet_id} disagrees with the store's shared geometry")
        self.templates[template.sheet_id] = template

    def get(self, sheet_id: str) -> AnswerSheetTemplate | None:
        return self.templates.get(sheet_id)

    @property
    def shared(self) -> AnswerSheetTemplate:
        """Any template, as the carrier of the store-wide shared geometry."""
        return next(iter(self.templates.values()))
