"""End-to-end grading pipeline and batch evaluation.

Flow per photo: borderline segmentation -> corner extraction -> perspective
rectification to the canonical sheet frame -> unique-ID crop + recognition
-> template lookup -> answer-underline detection -> matching by relative
position -> per-area crop + recognition -> edit-distance scoring and
failure attribution. Segmenters and the recognizer are configuration-time
choices, so the pipeline runs against oracle masks, external model masks
or the classical Hough/LSD baselines without code changes.

Detection and grading errors degrade to scored failures; only IO and
parse problems abort a batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DetectionError, ParseError
from .grading import (
    AreaResult,
    FailureKind,
    EvalReport,
    SheetResult,
    apply_id_rule,
    build_report,
    classify_failure,
    score_area,
)
from .linedet import (
    HoughParams,
    LsdParams,
    Segment,
    hough_horizontal,
    lsd_horizontal,
    mask_to_segments,
    segments_to_mask,
)
from .raster import load_mask, load_pgm
from .recognize import ManifestRecognizer, Recognizer, StubRecognizer, file_recognizer
from .rectify import estimate_homography, extract_quad, warp, warp_mask
from .segmetrics import PixelMetrics, aggregate, pixel_metrics
from .synthgen import load_answers, read_manifest
from .template import (
    AnswerSheetTemplate,
    TemplateStore,
    crop,
    expand_area,
    load_template,
    match_segments,
    rect_iou,
    segment_rect,
)

SEGMENTER_KINDS = ("oracle", "external", "hough", "lsd")
MASK_FRAMES = ("photo", "canonical")


@dataclass(frozen=True)
class SegmenterChoice:
    """One segmentation stage: ground-truth masks, external model masks, or
    a classical detector. Mask-based kinds read ``<image_id><suffix>`` from
    ``mask_dir``; ``frame`` says whether those masks live in photo or
    canonical (rectified) coordinates."""

    kind: str
    mask_dir: Path | None = None
    suffix: str = ".aau.pgm"
    frame: str = "photo"
    hough: HoughParams = field(default_factory=HoughParams)
    lsd: LsdParams = field(default_factory=LsdParams)

    def __post_init__(self) -> None:
        if self.kind not in SEGMENTER_KINDS:
            raise ValueError(f"segmenter kind must be one of {SEGMENTER_KINDS}, got {self.kind!r}")
        if self.frame not in MASK_FRAMES:
            raise ValueError(f"mask frame must be one of {MASK_FRAMES}, got {self.frame!r}")
        if self.kind in ("oracle", "external") and self.mask_dir is None:
            raise ValueError(f"segmenter kind {self.kind!r} needs a mask_dir")


@dataclass(frozen=True)
class PipelineConfig:
    segmenter_border: SegmenterChoice
    segmenter_aau: SegmenterChoice
    recognizer: Recognizer
    template_dir: Path
    max_dist: float = 15.0
    mask_thickness: int = 2
    canonical_margin: int = 10
    min_component_px: int = 10
    iou_threshold: float = 0.5
    out_dir: Path | None = None

    def __post_init__(self) -> None:
        for name in ("max_dist", "mask_thickness", "canonical_margin", "min_component_px",
                     "iou_threshold"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def canonical_corners(width: int, height: int, margin: int) -> np.ndarray:
    """Destination quad for rectification: the canonical rectangle inset by
    ``margin`` px, where the borderline frame lives on the sheet."""
    return np.array([
        [margin, margin],
        [width - 1 - margin, margin],
        [width - 1 - margin, height - 1 - margin],
        [margin, height - 1 - margin],
    ], dtype=np.float64)


def _mask_path(choice: SegmenterChoice, image_id: str) -> Path:
    return choice.mask_dir / f"{image_id}{choice.suffix}"


def _border_mask(photo: np.ndarray, choice: SegmenterChoice, image_id: str,
                 thickness: int) -> np.ndarray:
    if choice.kind in ("oracle", "external"):
        return load_mask(_mask_path(choice, image_id))
    if choice.kind == "hough":
        segments = hough_horizontal(photo, choice.hough)
    else:
        segments = lsd_horizontal(photo, choice.lsd)
    return segments_to_mask(segments, photo.shape[1], photo.shape[0], thickness)


def _aau_segments(photo_mask_frame: np.ndarray, rectified: np.ndarray,
                  homography: np.ndarray, choice: SegmenterChoice, image_id: str,
                  min_component_px: int) -> list[Segment]:
    ch, cw = rectified.shape
    if choice.kind in ("oracle", "external"):
        mask = load_mask(_mask_path(choice, image_id))
        if choice.frame == "photo":
            mask = warp_mask(mask, homography, cw, ch)
        return mask_to_segments(mask, min_component_px)
    if choice.kind == "hough":
        return hough_horizontal(rectified, choice.hough)
    return lsd_horizontal(rectified, choice.lsd)


def _unlocated(area_index: int, label: str) -> AreaResult:
    return AreaResult(area_index=area_index, located=False, recognized_text="",
                      label=label, accuracy=0.0, failure_kind=FailureKind.FAILED_LOCATION)


def _label_for(area, labels: dict[int, str] | None) -> str:
    if labels and area.index in labels:
        return labels[area.index]
    return area.standard_answer


def _all_failed(image_id: str, recognized_id: str, id_correct: bool,
                template: AnswerSheetTemplate | None,
                labels: dict[int, str] | None) -> SheetResult:
    areas = ()
    if template is not None:
        areas = tuple(_unlocated(a.index, _label_for(a, labels)) for a in template.areas)
    return SheetResult(image_id=image_id, sheet_id_recognized=recognized_id,
                       id_correct=id_correct, areas=areas)


def grade_image(photo: np.ndarray, config: PipelineConfig, store: TemplateStore,
                image_id: str, expected_sheet_id: str | None = None,
                labels: dict[int, str] | None = None) -> SheetResult:
    """Grade one photographed sheet.

    ``expected_sheet_id`` puts the pipeline in evaluation mode: the sheet
    is graded against the true template and ``id_correct`` means the
    recognized ID matches the truth (a wrong ID zeroes every area). In
    production mode (no expectation) any ID found in the store counts as
    correct. ``labels`` optionally overrides the per-area reference
    strings (ground-truth transcriptions instead of standard answers).
    """
    shared = store.shared
    cw, ch = shared.canonical_w, shared.canonical_h
    expected_template = store.get(expected_sheet_id) if expected_sheet_id else None

    border = _border_mask(photo, config.segmenter_border, image_id, config.mask_thickness)
    try:
        quad = extract_quad(border)
        homography = estimate_homography(
            quad, canonical_corners(cw, ch, config.canonical_margin))
    except DetectionError:
        return _all_failed(image_id, "", False, expected_template, labels)

    rectified = warp(photo, homography, cw, ch)
    id_crop = crop(rectified, shared.id_box)
    recognized_id = config.recognizer.recognize(id_crop, image_id, -1).text.strip()

    if expected_sheet_id is not None:
        id_correct = recognized_id == expected_sheet_id
        template = expected_template
    else:
        template = store.get(recognized_id)
        id_correct = template is not None
    if template is None:
        return _all_failed(image_id, recognized_id, False, expected_template, labels)

    detected = _aau_segments(photo, rectified, homography, config.segmenter_aau,
                             image_id, config.min_component_px)
    assignment = match_segments(detected, template, config.max_dist)
    matched_by_area = {t: d for d, t, _ in assignment.matched}

    areas = []
    for position, area in enumerate(template.areas):
        label = _label_for(area, labels)
        if position not in matched_by_area:
            areas.append(_unlocated(area.index, label))
            continue
        segment = detected[matched_by_area[position]]
        rect = segment_rect(segment, area.m, area.n, cw, ch)
        if rect is None:
            areas.append(_unlocated(area.index, label))
            continue
        result = config.recognizer.recognize(crop(rectified, rect), image_id, area.index)
        accuracy = score_area(True, result.text, label)
        location_ok = rect_iou(rect, expand_area(area)) >= config.iou_threshold
        partial = AreaResult(area_index=area.index, located=True,
                             recognized_text=result.text, label=label,
                             accuracy=accuracy, failure_kind=FailureKind.NONE)
        kind = classify_failure(partial, location_ok)
        areas.append(AreaResult(area_index=area.index, located=True,
                                recognized_text=result.text, label=label,
                                accuracy=accuracy, failure_kind=kind))

    sheet = SheetResult(image_id=image_id, sheet_id_recognized=recognized_id,
                        id_correct=id_correct, areas=tuple(areas))
    return apply_id_rule(sheet)


def evaluate_grading(corpus_dir: str | Path, config: PipelineConfig
                     ) -> tuple[EvalReport, list[SheetResult]]:
    """Grade a whole corpus against its ground truth; deterministic order."""
    entries = sorted(read_manifest(corpus_dir), key=lambda e: e.image_id)
    store = TemplateStore.from_dir(config.template_dir)
    sheets = []
    for entry in entries:
        photo = load_pgm(entry.image)
        labels = load_answers(entry.answers)
        sheets.append(grade_image(photo, config, store, entry.image_id,
                                  expected_sheet_id=entry.sheet_id, labels=labels))
    return build_report(sheets), sheets


@dataclass(frozen=True)
class DetectionMethod:
    """One cell of the detector-comparison matrix."""

    method: str
    hyper_parameter: str
    choice: SegmenterChoice


def hough_method_row(max_gap: int) -> DetectionMethod:
    return DetectionMethod("hough", str(max_gap),
                           SegmenterChoice(kind="hough", hough=HoughParams(max_gap=max_gap)))


def lsd_method_row(min_length: float) -> DetectionMethod:
    return DetectionMethod("lsd", f"{min_length:g}",
                           SegmenterChoice(kind="lsd", lsd=LsdParams(min_length=min_length)))


def evaluate_detection(corpus_dir: str | Path, methods: list[DetectionMethod],
                       mask_thickness: int = 2, canonical_margin: int = 10,
                       min_component_px: int = 10
                       ) -> list[tuple[str, str, PixelMetrics]]:
    """Score answer-underline detectors with pixel metrics, per method cell.

    Every image is rectified once from its ground-truth borderline mask;
    each method then detects on the rectified frame, the segments are
    rendered at the ground-truth stroke thickness and compared against the
    ground-truth underline mask carried through the same homography, so
    all cells see an identical reference.
    """
    entries = sorted(read_manifest(corpus_dir), key=lambda e: e.image_id)
    per_method: list[list[PixelMetrics]] = [[] for _ in methods]
    for entry in entries:
        photo = load_pgm(entry.image)
        border = load_mask(entry.border_mask)
        gt_aau = load_mask(entry.aau_mask)
        template = load_template(entry.template)
        cw, ch = template.canonical_w, template.canonical_h
        quad = extract_quad(border)
        homography = estimate_homography(quad, canonical_corners(cw, ch, canonical_margin))
        rectified = warp(photo, homography, cw, ch)
        reference = warp_mask(gt_aau, homography, cw, ch)
        for m, method in enumerate(methods):
            segments = _aau_segments(photo, rectified, homography, method.choice,
                                     entry.image_id, min_component_px)
            predicted = segments_to_mask(segments, cw, ch, mask_thickness)
            per_method[m].append(pixel_metrics(predicted, reference))
    return [(method.method, method.hyper_parameter, aggregate(per_method[m]))
            for m, method in enumerate(methods)]


# ---------------------------------------------------------------------------
# JSON pipeline configuration (CLI surface). Relative paths resolve against
# the config file's directory.
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {"segmenter_border", "segmenter_aau", "recognizer", "template_dir",
                "max_dist", "mask_thickness", "canonical_margin", "min_component_px",
                "iou_threshold", "out_dir"}
_SEGMENTER_KEYS = {"kind", "mask_dir", "suffix", "frame", "max_gap", "edge_threshold",
                   "min_votes", "min_length", "angle_tolerance", "gradient_threshold"}
_RECOGNIZER_KEYS = {"kind", "glyph_scale", "manifest"}


def _segmenter_from_dict(doc: dict, base: Path, default_suffix: str, what: str) -> SegmenterChoice:
    if not isinstance(doc, dict):
        raise ParseError(f"{what}: expected a JSON object")
    unknown = doc.keys() - _SEGMENTER_KEYS
    if unknown:
        raise ParseError(f"{what}: unknown field(s) {sorted(unknown)}")
    kind = doc.get("kind")
    if kind not in SEGMENTER_KINDS:
        raise ParseError(f"{what}: kind must be one of {SEGMENTER_KINDS}")
    mask_dir = base / doc["mask_dir"] if "mask_dir" in doc else None
    hough = HoughParams(
        max_gap=int(doc.get("max_gap", HoughParams.max_gap)),
        edge_threshold=float(doc.get("edge_threshold", HoughParams.edge_threshold)),
        min_votes=int(doc.get("min_votes", HoughParams.min_votes)))
    lsd = LsdParams(
        min_length=float(doc.get("min_length", LsdParams.min_length)),
        angle_tolerance=float(doc.get("angle_tolerance", LsdParams.angle_tolerance)),
        gradient_threshold=float(doc.get("gradient_threshold", LsdParams.gradient_threshold)))
    try:
        return SegmenterChoice(kind=kind, mask_dir=mask_dir,
                               suffix=doc.get("suffix", default_suffix),
                               frame=doc.get("frame", "photo"), hough=hough, lsd=lsd)
    except ValueError as exc:
        raise ParseError(f"{what}: {exc}") from exc


def _recognizer_from_dict(doc: dict, base: Path, what: str) -> Recognizer:
    if not isinstance(doc, dict):
        raise ParseError(f"{what}: expected a JSON object")
    unknown = doc.keys() - _RECOGNIZER_KEYS
    if unknown:
        raise ParseError(f"{what}: unknown field(s) {sorted(unknown)}")
    kind = doc.get("kind", "stub")
    if kind == "stub":
        return StubRecognizer(glyph_scale=int(doc.get("glyph_scale", 3)))
    if kind == "manifest":
        if "manifest" not in doc:
            raise ParseError(f"{what}: manifest recognizer needs a 'manifest' path")
        return file_recognizer(base / doc["manifest"])
    raise ParseError(f"{what}: unknown recognizer kind {kind!r}")


def load_config(path: str | Path) -> PipelineConfig:
    """Load a pipeline configuration from a UTF-8 JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object")
    unknown = doc.keys() - _CONFIG_KEYS
    if unknown:
        raise ParseError(f"{path}: unknown field(s) {sorted(unknown)}")
    for key in ("segmenter_border", "segmenter_aau", "recognizer", "template_dir"):
        if key not in doc:
            raise ParseError(f"{path}: missing field {key!r}")
    base = path.parent
    try:
        return PipelineConfig(
            segmenter_border=_segmenter_from_dict(doc["segmenter_border"], base,
                                                  ".border.pgm", f"{path}: segmenter_border"),
            segmenter_aau=_segmenter_from_dict(doc["segmenter_aau"], base,
                                               ".aau.pgm", f"{path}: segmenter_aau"),
            recognizer=_recognizer_from_dict(doc["recognizer"], base, f"{path}: recognizer"),
            template_dir=base / doc["template_dir"],
            max_dist=float(doc.get("max_dist", 15.0)),
            mask_thickness=int(doc.get("mask_thickness", 2)),
            canonical_margin=int(doc.get("canonical_margin", 10)),
            min_component_px=int(doc.get("min_component_px", 10)),
            iou_threshold=float(doc.get("iou_threshold", 0.5)),
            out_dir=base / doc["out_dir"] if "out_dir" in doc else None)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
