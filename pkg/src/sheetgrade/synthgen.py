"""Deterministic synthetic answer-sheet generator with full ground truth.

Sheets carry the anatomy the pipeline expects: a rectangular borderline
frame, a grid of answer-area underlines with handwriting-style answers
above them, and a printed unique ID in a fixed bottom corner box. The
distortion stage reproduces the three phenomena that make photographed
homework hard: perspective distortion, line-like background texture and
auxiliary strokes near the answer lines. Ground-truth masks, the exact
photo-to-canonical homography and the answer strings ride along with
every sample, so detection and grading can be scored in closed loop.

Every random draw flows from the explicit seeds in the specs; equal
seeds reproduce byte-identical corpora.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import font
from .errors import GenerationError, ParseError
from .linedet import Segment
from .rectify import compose, estimate_homography, quad_is_convex, warp, warp_mask
from .raster import store_mask, store_pgm
from .template import AnswerSheetTemplate, Rect, TemplateArea, store_template

BORDER_MARGIN = 10  # inset of the borderline frame, shared with rectification
_ANSWER_CHARS = "".join(c for c in font.ALPHABET if not c.isspace())
_PAPER = 255
_INK = 0


@dataclass(frozen=True)
class SheetSpec:
    """Canonical sheet layout parameters; the seed fully determines output."""

    canonical_w: int = 640
    canonical_h: int = 640
    rows: int = 4
    cols: int = 2
    stroke_thickness: int = 2
    id_digits: int = 6
    glyph_scale: int = 3
    seed: int = 0


@dataclass(frozen=True)
class DistortionSpec:
    """Photo degradations; zero everything = identity."""

    max_perspective_jitter: float = 0.0
    background_line_count: int = 0
    background_line_intensity: int = 150
    auxiliary_stroke_count: int = 0
    noise_level: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.noise_level <= 1.0:
            raise ValueError(f"noise_level must be in [0, 1], got {self.noise_level}")
        if self.max_perspective_jitter < 0:
            raise ValueError("max_perspective_jitter must be >= 0")


DISTORTION_PRESETS: dict[str, DistortionSpec] = {
    "none": DistortionSpec(),
    "mild": DistortionSpec(max_perspective_jitter=10, background_line_count=3,
                           auxiliary_stroke_count=2, noise_level=0.001),
    "hard": DistortionSpec(max_perspective_jitter=25, background_line_count=6,
                           auxiliary_stroke_count=5, noise_level=0.003),
}


@dataclass(frozen=True)
class GeneratedSample:
    photo: np.ndarray
    template: AnswerSheetTemplate
    gt_borderline_mask: np.ndarray
    gt_aau_mask: np.ndarray
    gt_homography: np.ndarray  # photo -> canonical
    gt_answers: dict[int, str]
    image_id: str


def _draw_hline_strip(canvas: np.ndarray, x0: int, x1: int, y: int, thickness: int,
                      value: int) -> None:
    h, w = canvas.shape
    c0, c1 = max(x0, 0), min(x1, w - 1)
    r0, r1 = max(y, 0), min(y + thickness - 1, h - 1)
    if c1 >= c0 and r1 >= r0:
        canvas[r0:r1 + 1, c0:c1 + 1] = np.minimum(canvas[r0:r1 + 1, c0:c1 + 1], value)


def _draw_sloped_line(canvas: np.ndarray, x0: float, y0: float, length: float,
                      slope: float, thickness: int, value: int) -> None:
    h, w = canvas.shape
    steps = max(int(2 * length), 2)
    xs = x0 + np.linspace(0.0, length, steps)
    ys = y0 + slope * (xs - x0)
    cols = np.rint(xs).astype(int)
    rows = np.rint(ys).astype(int)
    for dy in range(thickness):
        keep = (cols >= 0) & (cols < w) & (rows + dy >= 0) & (rows + dy < h)
        canvas[rows[keep] + dy, cols[keep]] = np.minimum(
            canvas[rows[keep] + dy, cols[keep]], value)


def generate_sheet(spec: SheetSpec, sheet_id: str | None = None,
                   image_id: str = "sheet0000") -> GeneratedSample:
    """Render one canonical, undistorted sheet with exact ground truth."""
    if spec.rows < 1 or spec.cols < 1:
        raise GenerationError(f"need at least a 1x1 answer grid, got {spec.rows}x{spec.cols}")
    if spec.stroke_thickness < 1 or spec.glyph_scale < 1 or spec.id_digits < 1:
        raise GenerationError("stroke_thickness, glyph_scale and id_digits must be >= 1")
    w, h = spec.canonical_w, spec.canonical_h
    t = spec.stroke_thickness
    s = spec.glyph_scale
    mg = BORDER_MARGIN
    rng = np.random.default_rng(spec.seed)

    if sheet_id is None:
        low = 10 ** (spec.id_digits - 1)
        sheet_id = str(int(rng.integers(low, 10 * low)))
    elif len(sheet_id) != spec.id_digits or not sheet_id.isdigit():
        raise GenerationError(f"sheet_id {sheet_id!r} is not {spec.id_digits} digits")

    photo = np.full((h, w), _PAPER, dtype=np.uint8)
    border = np.zeros((h, w), dtype=bool)
    aau = np.zeros((h, w), dtype=bool)

    # borderline frame, stroked inward from the outer corners (mg, mg) ..
    right, bottom = w - 1 - mg, h - 1 - mg
    border[mg:mg + t, mg:right + 1] = True
    border[bottom - t + 1:bottom + 1, mg:right + 1] = True
    border[mg:bottom + 1, mg:mg + t] = True
    border[mg:bottom + 1, right - t + 1:right + 1] = True
    photo[border] = _INK

    # unique-ID box in the bottom-left corner
    id_w, id_h = font.text_size(sheet_id, s)
    id_box = Rect(x=mg + t + 6, y=bottom - t - 10 - (id_h + 8), w=id_w + 8, h=id_h + 8)
    font.draw_text(photo, id_box.x + 4, id_box.y + 4, sheet_id, scale=s, ink=_INK)

    # answer grid between the top border and the ID box
    m = 7 * s + 6  # room for one text line plus clearance above the underline
    n = 4
    content_left = mg + t + 8
    content_right = right - t - 8
    content_top = mg + t + 8
    content_bottom = id_box.y - 8
    pitch = (content_bottom - content_top - m) / spec.rows if spec.rows else 0
    if pitch < m + n + 4 or content_right - content_left < spec.cols * (6 * s + 20):
        raise GenerationError(
            f"{spec.rows}x{spec.cols} grid at glyph scale {s} does not fit "
            f"a {w}x{h} sheet")
    cell_w = (content_right - content_left) / spec.cols

    areas = []
    answers: dict[int, str] = {}
    for r in range(spec.rows):
        line_y = int(round(content_top + m + r * pitch))
        for c in range(spec.cols):
            cell_x = int(round(content_left + c * cell_w))
            length = int(cell_w * rng.uniform(0.55, 0.85))
            x0 = cell_x + int(rng.integers(0, int(cell_w) - length + 1))
            x1 = x0 + length - 1
            _draw_hline_strip(photo, x0, x1, line_y, t, _INK)
            aau[line_y:line_y + t, x0:x1 + 1] = True

            max_len = min(5, (length - 4) // (font.ADVANCE * s))
            text_len = int(rng.integers(1, max(max_len, 1) + 1))
            answer = "".join(_ANSWER_CHARS[int(rng.integers(0, len(_ANSWER_CHARS)))]
                             for _ in range(text_len))
            font.draw_text(photo, x0 + 2, line_y - 4 - 7 * s, answer, scale=s,
                           ink=_INK, jitter_y=1, rng=rng)
            index = r * spec.cols + c
            areas.append(TemplateArea(
                index=index,
                aau=Segment(x0=float(x0), x1=float(x1), y=line_y + (t - 1) / 2.0),
                m=m, n=n, standard_answer=answer))
            answers[index] = answer

    template = AnswerSheetTemplate(
        sheet_id=sheet_id, canonical_w=w, canonical_h=h,
        id_box=id_box, id_corner="left_bottom", areas=tuple(areas))
    return GeneratedSample(
        photo=photo, template=template, gt_borderline_mask=border, gt_aau_mask=aau,
        gt_homography=np.eye(3), gt_answers=answers, image_id=image_id)


def _sample_distortion_quad(rng: np.random.Generator, w: int, h: int,
                            jitter: float) -> np.ndarray:
    """Inward-jittered canvas corners (TL, TR, BR, BL), guaranteed convex."""
    for _ in range(32):
        j = rng.uniform(0.0, jitter, size=(4, 2))
        quad = np.array([
            [j[0, 0], j[0, 1]],
            [w - 1 - j[1, 0], j[1, 1]],
            [w - 1 - j[2, 0], h - 1 - j[2, 1]],
            [j[3, 0], h - 1 - j[3, 1]],
        ])
        if quad_is_convex(quad):
            return quad
    raise GenerationError("could not sample a convex distortion quad")


def distort(sample: GeneratedSample, d: DistortionSpec) -> GeneratedSample:
    """Apply perspective jitter, clutter and noise; ground truth stays true.

    Auxiliary strokes are drawn on the paper (before warping), background
    texture and noise on the photo (after warping). Neither touches the
    ground-truth masks, and the homography is composed so it keeps mapping
    the distorted photo back onto the canonical sheet.
    """
    rng = np.random.default_rng(d.seed)
    photo = sample.photo.copy()
    h, w = photo.shape

    if d.auxiliary_stroke_count > 0:
        areas = sample.template.areas
        for _ in range(d.auxiliary_stroke_count):
            area = areas[int(rng.integers(0, len(areas)))]
            length = area.aau.length * rng.uniform(0.4, 1.1)
            x0 = area.aau.x0 + rng.uniform(-0.2, 0.6) * area.aau.length
            y0 = area.aau.y + rng.uniform(1.0, 6.0)
            slope = rng.uniform(-0.04, 0.04)
            _draw_sloped_line(photo, x0, y0, length, slope,
                              int(rng.integers(1, 3)), int(rng.integers(20, 70)))

    border = sample.gt_borderline_mask
    aau = sample.gt_aau_mask
    homography = sample.gt_homography
    if d.max_perspective_jitter > 0:
        canvas = np.array([[0, 0], [w - 1, 0], [w - 1, h - 1], [0, h - 1]], dtype=np.float64)
        target = _sample_distortion_quad(rng, w, h, d.max_perspective_jitter)
        g = estimate_homography(canvas, target)
        photo = warp(photo, g, w, h)
        border = warp_mask(border, g, w, h)
        aau = warp_mask(aau, g, w, h)
        homography = compose(np.linalg.inv(g), homography)

    for _ in range(d.background_line_count):
        y0 = rng.uniform(0, h - 1)
        slope = np.tan(np.radians(rng.uniform(-8.0, 8.0)))
        value = int(np.clip(rng.integers(d.background_line_intensity - 25,
                                         d.background_line_intensity + 26), 0, 255))
        _draw_sloped_line(photo, 0.0, y0, float(w - 1), slope,
                          int(rng.integers(1, 3)), value)

    if d.noise_level > 0:
        flip = rng.random(photo.shape) < d.noise_level
        salt = rng.random(photo.shape) < 0.5
        photo[flip & salt] = 255
        photo[flip & ~salt] = 0

    return replace(sample, photo=photo, gt_borderline_mask=border, gt_aau_mask=aau,
                   gt_homography=homography)


# ---------------------------------------------------------------------------
# Corpus layout:
#   images/<id>.pgm            masks/<id>.border.pgm   masks/<id>.aau.pgm
#   templates/<sheet_id>.json  gt/<id>.homography.txt  gt/<id>.answers.tsv
#   manifest.tsv
# ---------------------------------------------------------------------------

_MANIFEST_FIELDS = ["image_id", "sheet_id", "image", "border_mask", "aau_mask",
                    "template", "homography", "answers"]


@dataclass(frozen=True)
class CorpusEntry:
    image_id: str
    sheet_id: str
    image: Path
    border_mask: Path
    aau_mask: Path
    template: Path
    homography: Path
    answers: Path


def store_homography(h: np.ndarray, path: str | Path) -> None:
    values = " ".join(f"{v:.17g}" for v in np.asarray(h, dtype=np.float64).ravel())
    Path(path).write_text(values + "\n", encoding="utf-8")


def load_homography(path: str | Path) -> np.ndarray:
    parts = Path(path).read_text(encoding="utf-8").split()
    if len(parts) != 9:
        raise ParseError(f"{path}: expected 9 numbers, got {len(parts)}")
    return np.array([float(p) for p in parts], dtype=np.float64).reshape(3, 3)


def store_answers(answers: dict[int, str], path: str | Path) -> None:
    lines = [f"{index}\t{text}" for index, text in sorted(answers.items())]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_answers(path: str | Path) -> dict[int, str]:
    answers: dict[int, str] = {}
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"{path}:{ln}: expected '<area_index>\\t<text>'")
        answers[int(parts[0])] = parts[1]
    return answers


def _unique_sheet_id(spec: SheetSpec, index: int) -> str:
    low = 10 ** (spec.id_digits - 1)
    span = 9 * low
    return str(low + (spec.seed * 7919 + index) % span)


def generate_corpus(count: int, spec: SheetSpec, d: DistortionSpec,
                    out_dir: str | Path) -> list[CorpusEntry]:
    """Write ``count`` samples (seeds ``seed + i``) and the corpus manifest."""
    if count < 0:
        raise GenerationError(f"count must be >= 0, got {count}")
    out = Path(out_dir)
    for sub in ("images", "masks", "templates", "gt"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    entries = []
    for i in range(count):
        image_id = f"sheet{i:04d}"
        sample = generate_sheet(replace(spec, seed=spec.seed + i),
                                sheet_id=_unique_sheet_id(spec, i), image_id=image_id)
        sample = distort(sample, replace(d, seed=d.seed + i))
        entry = CorpusEntry(
            image_id=image_id,
            sheet_id=sample.template.sheet_id,
            image=out / "images" / f"{image_id}.pgm",
            border_mask=out / "masks" / f"{image_id}.border.pgm",
            aau_mask=out / "masks" / f"{image_id}.aau.pgm",
            template=out / "templates" / f"{sample.template.sheet_id}.json",
            homography=out / "gt" / f"{image_id}.homography.txt",
            answers=out / "gt" / f"{image_id}.answers.tsv")
        store_pgm(sample.photo, entry.image)
        store_mask(sample.gt_borderline_mask, entry.border_mask)
        store_mask(sample.gt_aau_mask, entry.aau_mask)
        store_template(sample.template, entry.template)
        store_homography(sample.gt_homography, entry.homography)
        store_answers(sample.gt_answers, entry.answers)
        entries.append(entry)

    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
    writer.writerow(_MANIFEST_FIELDS)
    for e in entries:
        writer.writerow([e.image_id, e.sheet_id] +
                        [str(getattr(e, f).relative_to(out)) for f in _MANIFEST_FIELDS[2:]])
    (out / "manifest.tsv").write_text(buf.getvalue(), encoding="utf-8")
    return entries


def read_manifest(corpus_dir: str | Path) -> list[CorpusEntry]:
    """Load the corpus manifest; paths resolve relative to the corpus root."""
    root = Path(corpus_dir)
    path = root / "manifest.tsv"
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ParseError(f"{path}: no corpus manifest") from exc
    reader = csv.reader(io.StringIO(text), delimiter="\t")
    try:
        header = next(reader)
    except StopIteration as exc:
        raise ParseError(f"{path}: empty manifest") from exc
    if header != _MANIFEST_FIELDS:
        raise ParseError(f"{path}: bad manifest header {header}")
    entries = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(_MANIFEST_FIELDS):
            raise ParseError(f"{path}: bad manifest row {row}")
        entries.append(CorpusEntry(
            image_id=row[0], sheet_id=row[1],
            **{f: root / row[i] for i, f in enumerate(_MANIFEST_FIELDS[2:], 2)}))
    return entries
