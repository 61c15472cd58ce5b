"""Sheet rectification: corner detection, 4-point homography, warping.

The borderline mask is turned into a quadrilateral via Harris corner
detection, a projective map to the canonical sheet rectangle is solved
from the four vertex pairs, and the photo is warped by inverse mapping.

Vertex order is always top-left, top-right, bottom-right, bottom-left,
assigned by TL = min(x+y), BR = max(x+y), TR = max(x-y), BL = min(x-y).
This is valid for the near-upright photos the pipeline targets and is
wrong for rotations of 45 degrees or more.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import (
    DegenerateQuad,
    DimensionError,
    GeometryError,
    InsufficientCorners,
    SingularHomography,
)
from .raster import SOBEL_HORIZONTAL_KERNEL, SOBEL_VERTICAL_KERNEL, as_gray, as_mask

_MAX_PEAKS = 16  # corner candidates kept before the quad search


@dataclass(frozen=True)
class HarrisParams:
    """Harris detector knobs.

    ``k`` is the corner-response constant, ``window`` the Gaussian window
    radius in pixels, ``nms_radius`` the non-maximum-suppression radius and
    ``response_floor`` the minimum accepted fraction of the global maximum.
    """

    k: float = 0.04
    window: int = 2
    nms_radius: int = 10
    response_floor: float = 0.1

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if not 0.0 < self.k < 1.0:
            raise ValueError(f"k must be in (0, 1), got {self.k}")


def _gaussian_kernel(radius: int) -> np.ndarray:
    # sigma chosen like the usual "size to sigma" rule for a 2r+1 kernel
    sigma = 0.3 * (radius - 1) + 0.8
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return (k / k.sum()).astype(np.float32)


def _smooth(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = ndimage.correlate1d(arr, kernel, axis=0, mode="nearest")
    return ndimage.correlate1d(out, kernel, axis=1, mode="nearest")


def harris_response(img: np.ndarray, params: HarrisParams = HarrisParams()) -> np.ndarray:
    """Classic Harris response R = det(M) - k * trace(M)^2 per pixel.

    M is the structure tensor of the Sobel gradients, smoothed with a
    Gaussian window of radius ``params.window``.
    """
    arr = as_gray(img)
    if arr.shape[0] < 3 or arr.shape[1] < 3:
        raise DimensionError(f"image must be at least 3x3, got {arr.shape}")
    f = arr.astype(np.float32)
    ix = ndimage.correlate(f, SOBEL_VERTICAL_KERNEL, mode="nearest")
    iy = ndimage.correlate(f, SOBEL_HORIZONTAL_KERNEL, mode="nearest")
    kernel = _gaussian_kernel(params.window)
    ixx = _smooth(ix * ix, kernel)
    iyy = _smooth(iy * iy, kernel)
    ixy = _smooth(ix * iy, kernel)
    det = ixx * iyy - ixy * ixy
    trace = ixx + iyy
    return det - np.float32(params.k) * trace * trace


def order_quad(points: np.ndarray) -> np.ndarray:
    """Order four points TL, TR, BR, BL by the x+y / x-y extremal rule."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape != (4, 2):
        raise GeometryError(f"expected 4 points, got shape {pts.shape}")
    s = pts[:, 0] + pts[:, 1]
    d = pts[:, 0] - pts[:, 1]
    idx = (int(np.argmin(s)), int(np.argmax(d)), int(np.argmax(s)), int(np.argmin(d)))
    if len(set(idx)) != 4:
        raise DegenerateQuad("corner ordering is ambiguous for these points")
    return pts[list(idx)]


def quad_area(quad: np.ndarray) -> float:
    """Shoelace area of an ordered quadrilateral."""
    pts = np.asarray(quad, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def quad_is_convex(quad: np.ndarray) -> bool:
    pts = np.asarray(quad, dtype=np.float64)
    cross = []
    for i in range(4):
        a = pts[(i + 1) % 4] - pts[i]
        b = pts[(i + 2) % 4] - pts[(i + 1) % 4]
        cross.append(a[0] * b[1] - a[1] * b[0])
    cross = np.asarray(cross)
    return bool(np.all(cross > 0) or np.all(cross < 0))


def _refine_peak(response: np.ndarray, y: int, x: int) -> tuple[float, float]:
    """Sub-pixel peak position: response-weighted centroid over 3x3."""
    h, w = response.shape
    y0, y1 = max(y - 1, 0), min(y + 2, h)
    x0, x1 = max(x - 1, 0), min(x + 2, w)
    patch = np.maximum(response[y0:y1, x0:x1], 0.0)
    total = patch.sum()
    if total <= 0:
        return float(x), float(y)
    ys, xs = np.mgrid[y0:y1, x0:x1]
    return float((xs * patch).sum() / total), float((ys * patch).sum() / total)


def extract_quad(borderline_mask: np.ndarray, params: HarrisParams = HarrisParams()) -> np.ndarray:
    """Locate the four borderline vertices of a segmentation mask.

    Harris peaks above ``response_floor`` of the global maximum are
    non-max suppressed; among them the four maximizing the enclosed
    quadrilateral area are kept (robust against a second, partial sheet
    in the frame). Returns a (4, 2) float array ordered TL, TR, BR, BL.
    """
    mask = as_mask(borderline_mask)
    if not mask.any():
        raise InsufficientCorners("borderline mask is empty")
    img = np.where(mask, 255, 0).astype(np.uint8)
    response = harris_response(img, params)
    rmax = float(response.max())
    if rmax <= 0:
        raise InsufficientCorners("no positive corner response in mask")

    size = 2 * params.nms_radius + 1
    local_max = ndimage.maximum_filter(response, size=size, mode="nearest")
    candidates = (response >= local_max) & (response >= params.response_floor * rmax)
    ys, xs = np.nonzero(candidates)
    if len(ys) < 4:
        raise InsufficientCorners(f"only {len(ys)} corner peaks found, need 4")

    strength = response[ys, xs]
    order = np.lexsort((xs, ys, -strength))[:_MAX_PEAKS]
    peaks = np.stack([xs[order], ys[order]], axis=1).astype(np.float64)

    best_area = 0.0
    best_quad: np.ndarray | None = None
    for combo in itertools.combinations(range(len(peaks)), 4):
        try:
            quad = order_quad(peaks[list(combo)])
        except DegenerateQuad:
            continue
        if not quad_is_convex(quad):
            continue
        area = quad_area(quad)
        if area > best_area:
            best_area = area
            best_quad = quad
    if best_quad is None or best_area <= 1e-9:
        raise DegenerateQuad("no convex quadrilateral among corner peaks")

    refined = np.array([_refine_peak(response, int(round(y)), int(round(x)))
                        for x, y in best_quad])
    return order_quad(refined)


def estimate_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Exact 4-point direct linear transform mapping src vertices to dst.

    Returns a 3x3 float matrix normalized so H[2, 2] == 1; each src
    vertex maps onto its dst partner to machine precision.
    """
    s = np.asarray(src, dtype=np.float64)
    d = np.asarray(dst, dtype=np.float64)
    if s.shape != (4, 2) or d.shape != (4, 2):
        raise GeometryError("both quads must be (4, 2) arrays")
    if quad_area(s) <= 1e-9 or quad_area(d) <= 1e-9:
        raise DegenerateQuad("cannot estimate homography from a degenerate quad")

    a = np.zeros((8, 8), dtype=np.float64)
    b = np.zeros(8, dtype=np.float64)
    for i, ((x, y), (u, v)) in enumerate(zip(s, d)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    try:
        h = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularHomography(f"4-point system is singular: {exc}") from exc
    matrix = np.append(h, 1.0).reshape(3, 3)
    if abs(np.linalg.det(matrix)) < 1e-9:
        raise SingularHomography("estimated homography is not invertible")
    return matrix


def apply_homography(h: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Map (N, 2) points through a homography."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    ones = np.ones((pts.shape[0], 1))
    mapped = np.hstack([pts, ones]) @ np.asarray(h, dtype=np.float64).T
    return mapped[:, :2] / mapped[:, 2:3]


def compose(h_ab: np.ndarray, h_bc: np.ndarray) -> np.ndarray:
    """Compose two homographies (a->b then b->c), renormalized."""
    m = np.asarray(h_bc, dtype=np.float64) @ np.asarray(h_ab, dtype=np.float64)
    if abs(m[2, 2]) < 1e-12:
        raise SingularHomography("composed homography cannot be normalized")
    return m / m[2, 2]


def _inverse(h: np.ndarray) -> np.ndarray:
    matrix = np.asarray(h, dtype=np.float64)
    if matrix.shape != (3, 3):
        raise GeometryError(f"homography must be 3x3, got {matrix.shape}")
    if abs(np.linalg.det(matrix)) < 1e-9:
        raise SingularHomography("homography is not invertible")
    return np.linalg.inv(matrix)


def _source_coords(h: np.ndarray, out_w: int, out_h: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse-map every output pixel to source coordinates."""
    hinv = _inverse(h)
    xs, ys = np.meshgrid(np.arange(out_w, dtype=np.float64),
                         np.arange(out_h, dtype=np.float64))
    denom = hinv[2, 0] * xs + hinv[2, 1] * ys + hinv[2, 2]
    finite = np.abs(denom) > 1e-12
    denom = np.where(finite, denom, 1.0)
    sx = (hinv[0, 0] * xs + hinv[0, 1] * ys + hinv[0, 2]) / denom
    sy = (hinv[1, 0] * xs + hinv[1, 1] * ys + hinv[1, 2]) / denom
    return sx, sy, finite


def warp(img: np.ndarray, h: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Warp an image by a homography with bilinear inverse mapping.

    Every output pixel (x, y) samples the source at H^-1 (x, y);
    out-of-bounds samples are 0. Identity maps are bit-exact.
    """
    arr = as_gray(img)
    if out_w < 1 or out_h < 1:
        raise DimensionError(f"output size must be >= 1x1, got {out_w}x{out_h}")
    src_h, src_w = arr.shape
    sx, sy, finite = _source_coords(h, out_w, out_h)
    valid = finite & (sx >= 0) & (sx <= src_w - 1) & (sy >= 0) & (sy <= src_h - 1)

    x0 = np.clip(np.floor(sx), 0, src_w - 1).astype(np.int64)
    y0 = np.clip(np.floor(sy), 0, src_h - 1).astype(np.int64)
    x1 = np.minimum(x0 + 1, src_w - 1)
    y1 = np.minimum(y0 + 1, src_h - 1)
    fx = np.clip(sx - x0, 0.0, 1.0)
    fy = np.clip(sy - y0, 0.0, 1.0)

    f = arr.astype(np.float64)
    top = f[y0, x0] * (1 - fx) + f[y0, x1] * fx
    bottom = f[y1, x0] * (1 - fx) + f[y1, x1] * fx
    values = top * (1 - fy) + bottom * fy
    out = np.where(valid, np.rint(values), 0.0)
    return out.astype(np.uint8)


def warp_mask(mask: np.ndarray, h: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Nearest-neighbor variant of :func:`warp` for bit masks."""
    arr = as_mask(mask)
    if out_w < 1 or out_h < 1:
        raise DimensionError(f"output size must be >= 1x1, got {out_w}x{out_h}")
    src_h, src_w = arr.shape
    sx, sy, finite = _source_coords(h, out_w, out_h)
    ix = np.rint(sx).astype(np.int64)
    iy = np.rint(sy).astype(np.int64)
    valid = finite & (ix >= 0) & (ix < src_w) & (iy >= 0) & (iy < src_h)
    ix = np.clip(ix, 0, src_w - 1)
    iy = np.clip(iy, 0, src_h - 1)
    return arr[iy, ix] & valid
