"""Edit-distance grading, failure taxonomy and corpus-level reporting.

An area's accuracy is 0 when it was not located, otherwise
``1 - levenshtein(recognized, label) / len(label)``, clamped at 0 (the
raw formula goes negative once the distance exceeds the label length).
A sheet whose unique ID was not recognized correctly scores 0 on every
area. Reports bucket areas into exact (= 1), partial ([0.9, 1)) and
failed (< 0.9), with failures attributed to location, recognition or
other causes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from enum import Enum

from .errors import EmptyLabel

FAILED_CUTOFF = 0.9


class FailureKind(str, Enum):
    NONE = "none"
    FAILED_LOCATION = "failed_location"
    FAILED_RECOGNITION = "failed_recognition"
    ELSE = "else"


def levenshtein(a: str, b: str) -> int:
    """Minimum insert/delete/substitute edits between two strings.

    Standard two-row dynamic program over Unicode scalar values.
    """
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1,
                               current[j - 1] + 1,
                               previous[j - 1] + cost))
        previous = current
    return previous[-1]


def score_area(located: bool, recognized: str, label: str) -> float:
    """Accuracy of one answer area: 0 if not located, else the clamped
    complement of the normalized edit distance."""
    if not located:
        return 0.0
    if not label:
        raise EmptyLabel("located area has an empty label")
    return max(0.0, 1.0 - levenshtein(recognized, label) / len(label))


@dataclass(frozen=True)
class AreaResult:
    area_index: int
    located: bool
    recognized_text: str
    label: str
    accuracy: float
    failure_kind: FailureKind

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy must be in [0, 1], got {self.accuracy}")
        if not self.located and (self.accuracy != 0.0 or self.failure_kind != FailureKind.FAILED_LOCATION):
            raise ValueError("an unlocated area must score 0 with kind failed_location")


@dataclass(frozen=True)
class SheetResult:
    image_id: str
    sheet_id_recognized: str
    id_correct: bool
    areas: tuple[AreaResult, ...]


def classify_failure(area: AreaResult, location_ok: bool) -> FailureKind:
    """Attribute a failure (accuracy < 0.9) to its cause.

    ``location_ok`` states whether the detected area overlaps the true one
    (IoU at least 0.5): a well-located area that still reads wrong is a
    recognition failure, anything else lands in the catch-all bucket.
    """
    if area.accuracy >= FAILED_CUTOFF:
        return FailureKind.NONE
    if not area.located:
        return FailureKind.FAILED_LOCATION
    if location_ok and area.recognized_text != area.label:
        return FailureKind.FAILED_RECOGNITION
    return FailureKind.ELSE


def apply_id_rule(sheet: SheetResult) -> SheetResult:
    """Zero every area of a sheet whose unique ID was not recognized.

    Areas that would otherwise have passed become ``else`` failures (the
    cause is the sheet-level ID, not their own location or recognition).
    """
    if sheet.id_correct:
        return sheet
    areas = []
    for area in sheet.areas:
        kind = area.failure_kind if area.failure_kind != FailureKind.NONE else FailureKind.ELSE
        areas.append(replace(area, accuracy=0.0, failure_kind=kind))
    return replace(sheet, areas=tuple(areas))


@dataclass(frozen=True)
class EvalReport:
    total_areas: int
    count_exact: int
    count_partial: int
    count_failed: int
    failed_location: int
    failed_recognition: int
    failed_else: int
    mean_accuracy: float


def build_report(sheets: list[SheetResult]) -> EvalReport:
    """Bucket all areas of all sheets into the exact/partial/failed report."""
    total = exact = partial = failed = 0
    breakdown = {FailureKind.FAILED_LOCATION: 0, FailureKind.FAILED_RECOGNITION: 0,
                 FailureKind.ELSE: 0}
    accuracy_sum = 0.0
    for sheet in sheets:
        for area in sheet.areas:
            total += 1
            accuracy_sum += area.accuracy
            if area.accuracy == 1.0:
                exact += 1
            elif area.accuracy >= FAILED_CUTOFF:
                partial += 1
            else:
                failed += 1
                breakdown[area.failure_kind] += 1
    return EvalReport(
        total_areas=total, count_exact=exact, count_partial=partial, count_failed=failed,
        failed_location=breakdown[FailureKind.FAILED_LOCATION],
        failed_recognition=breakdown[FailureKind.FAILED_RECOGNITION],
        failed_else=breakdown[FailureKind.ELSE],
        mean_accuracy=accuracy_sum / total if total else 0.0)


def report_to_json(report: EvalReport) -> str:
    return json.dumps({
        "total_areas": report.total_areas,
        "count_exact": report.count_exact,
        "count_partial": report.count_partial,
        "count_failed": report.count_failed,
        "failure_breakdown": {
            "failed_location": report.failed_location,
            "failed_recognition": report.failed_recognition,
            "else": report.failed_else,
        },
        "mean_accuracy": report.mean_accuracy,
    }, indent=2) + "\n"


def report_to_text(report: EvalReport) -> str:
    rows = [
        ("total areas", str(report.total_areas)),
        ("exact (accuracy = 1)", str(report.count_exact)),
        ("partial (0.9 <= accuracy < 1)", str(report.count_partial)),
        ("failed (accuracy < 0.9)", str(report.count_failed)),
        ("  failed location", str(report.failed_location)),
        ("  failed recognition", str(report.failed_recognition)),
        ("  else", str(report.failed_else)),
        ("mean accuracy", f"{report.mean_accuracy:.4f}"),
    ]
    width = max(len(name) for name, _ in rows)
    return "".join(f"{name:<{width}}  {value}\n" for name, value in rows)


def areas_to_csv(sheets: list[SheetResult]) -> str:
    """Per-area results as CSV, one row per (image, area)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["image_id", "area_index", "located", "recognized", "label",
                     "accuracy", "failure_kind"])
    for sheet in sheets:
        for area in sheet.areas:
            writer.writerow([sheet.image_id, area.area_index,
                             str(area.located).lower(), area.recognized_text,
                             area.label, f"{area.accuracy:.6f}", area.failure_kind.value])
    return buf.getvalue()
