"""Command-line interface.

Subcommands: generate (synthetic corpus), rectify (single image), detect
(detector comparison table), grade (corpus grading report), metrics
(mask-directory comparison). Exit codes: 0 success, 1 usage error, 2 data
error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import SheetgradeError
from .grading import areas_to_csv, report_to_json, report_to_text
from .linedet import HoughParams, LsdParams
from .pipeline import (
    DetectionMethod,
    SegmenterChoice,
    evaluate_detection,
    evaluate_grading,
    hough_method_row,
    load_config,
    lsd_method_row,
    canonical_corners,
)
from .raster import load_mask, load_pgm, store_pgm
from .rectify import estimate_homography, extract_quad, warp
from .segmetrics import agg800 if False else aggregate, metrics_table_csv, pixel_metrics
from .synthgen import DISTORTION_PRESETS, SheetSpec, generate_corpus


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sheetgrade", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic corpus with ground truth")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--distort", default="none",
                   choices=sorted(DISTORTION_PRESETS))
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--rows", type=int, default=4)
    p.add_argument("--cols", type=int, default=2)
    p.add_argument("--size", default="640x640", help="canonical WxH")

    p = sub.add_parser("rectify", help="rectify one photo from its borderline mask")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--border-mask", type=Path, required=True)
    p.add_argument("--template-size", required=True, help="canonical WxH")
    p.add_argument("--margin", type=int, default=10)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("detect", help="score an answer-underline detector on a corpus")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--method", required=True, choices=["oracle", "hough", "lsd", "external"])
    p.add_argument("--max-gap", type=int, default=5)
    p.add_argument("--min-length", type=float, default=40)
    p.add_argument("--mask-dir", type=Path)
    p.add_argument("--thickness", type=int, default=2)
    p.add_argument("--report", type=Path, required=True)

    p = sub.add_parser("grade", help="grade a corpus and write the report")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--report", type=Path, required=True)

    p = sub.add_parser("metrics", help="pixel metrics between two mask directories")
    p.add_argument("--pred-dir", type=Path, required=True)
    p.add_argument("--gt-dir", type=Path, required=True)
    p.add_argument("--report", type=Path, required=True)

    return parser


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise SheetgradeError(f"bad size {text!r}, expected WxH") from None
    return w, h


def _cmd_generate(args) -> int:
    w, h = _parse_size(args.size)
    spec = SheetSpec(canonical_w=w, canonical_h=h, rows=args.rows, cols=args.cols,
                     seed=args.seed)
    preset = DISTORTION_PRESETS[args.distort]
    entries = generate_corpus(args.count, spec,
                              type(preset)(**{**preset.__dict__, "seed": args.seed}),
                              args.out)
    print(f"wrote {len(entries)} samples to {args.out}")
    return 0


def _cmd_rectify(args) -> int:
    photo = load_pgm(args.image)
    border = load_mask(args.border_mask)
    w, h = _parse_size(args.template_size)
    quad = extract_quad(border)
    homography = estimate_homography(quad, canonical_corners(w, h, args.margin))
    store_pgm(warp(photo, homography, w, h), args.out)
    print(" ".join(f"{v:.9f}" for v in np.asarray(homography).ravel()))
    return 0


def _cmd_detect(args) -> int:
    if args.method == "hough":
        method = hough_method_row(args.max_gap)
    elif args.method == "lsd":
        method = lsd_method_row(args.min_length)
    else:
        if args.mask_dir is None and args.method == "external":
            raise SheetgradeError("--mask-dir is required for the external method")
        mask_dir = args.mask_dir if args.mask_dir is not None else args.corpus / "masks"
        frame = "canonical" if args.method == "external" else "photo"
        method = DetectionMethod(args.method, "-", SegmenterChoice(
            kind="oracle" if args.method == "oracle" else "external",
            mask_dir=mask_dir, suffix=".aau.pgm", frame=frame))
    rows = evaluate_detection(args.corpus, [method], mask_thickness=args.thickness)
    args.report.write_text(metrics_table_csv(rows), encoding="utf-8")
    for name, hyper, metrics in rows:
        print(f"{name}({hyper}): recall={metrics.recall:.4f} "
              f"precision={metrics.precision:.4f} accuracy={metrics.accuracy:.4f}")
    return 0


def _cmd_grade(args) -> int:
    config = load_config(args.config)
    report, sheets = evaluate_grading(args.corpus, config)
    args.report.write_text(report_to_json(report), encoding="utf-8")
    args.report.with_suffix(args.report.suffix + ".areas.csv").write_text(
        areas_to_csv(sheets), encoding="utf-8")
    print(report_to_text(report), end="")
    return 0


def _cmd_metrics(args) -> int:
    pred_files = sorted(p.name for p in args.pred_dir.glob("*.pgm"))
    if not pred_files:
        raise SheetgradeError(f"no .pgm masks in {args.pred_dir}")
    rows = []
    per_file = []
    for name in pred_files:
        gt_path = args.gt_dir / name
        if not gt_path.exists():
            raise SheetgradeError(f"no ground-truth mask {gt_path}")
        metrics = pixel_metrics(load_mask(args.pred_dir / name), load_mask(gt_path))
        per_file.append(metrics)
        rows.append((name, "-", metrics))
    total = aggregate(per_file)
    rows.append(("aggregate", "-", total))
    args.report.write_text(metrics_table_csv(rows), encoding="utf-8")
    print(f"aggregate: recall={total.recall:.4f} precision={total.precision:.4f} "
          f"accuracy={total.accuracy:.4f}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "rectify": _cmd_rectify,
    "detect": _cmd_detect,
    "grade": _cmd_grade,
    "metrics": _cmd_metrics,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (SheetgradeError, OSError) as exc:
        print(f"sheetgrade: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
