"""Sampled-lane representation, stripe rasterization, and stripe IoU.

A lane is a vector of x-coordinates sampled at a fixed ladder of image
heights (bottom of the image first). Lanes shorter than the ladder are
extended by linear extrapolation so every lane is a full N-vector; the
annotated extent is preserved in ``top_index``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, InvalidAnnotation

DEFAULT_STRIPE_WIDTH = 30


@dataclass(frozen=True, eq=False)
class SamplingGrid:
    """Shared vertical sampling ladder for all lanes in one dataset.

    y_coords are strictly decreasing pixel heights: index 0 is the sample
    nearest the camera (bottom of the image).
    """

    image_width: int
    image_height: int
    y_coords: np.ndarray

    def __post_init__(self):
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")
        ys = np.asarray(self.y_coords, dtype=np.float64)
        if ys.ndim != 1 or ys.size < 1:
            raise ValueError("y_coords must be a non-empty 1-D array")
        if not np.all(np.isfinite(ys)):
            raise ValueError("y_coords must be finite")
        if ys.size > 1 and not np.all(np.diff(ys) < 0):
            raise ValueError("y_coords must be strictly decreasing (bottom first)")
        if ys[0] >= self.image_height or ys[-1] < 0:
            raise ValueError("y_coords must lie within [0, image_height)")
        ys.setflags(write=False)
        object.__setattr__(self, "y_coords", ys)

    @property
    def n_samples(self) -> int:
        return int(self.y_coords.size)

    @classmethod
    def uniform(
        cls,
        image_width: int,
        image_height: int,
        n_samples: int,
        y_bottom: float | None = None,
        y_top: float | None = None,
    ) -> "SamplingGrid":
        """Uniformly spaced grid from y_bottom down to y_top.

        Defaults cover the lower two thirds of the image, which is where
        road surface normally sits.
        """
        if n_samples < 1:
            raise ValueError("n_samples must be positive")
        if y_bottom is None:
            y_bottom = image_height - 1.0
        if y_top is None:
            y_top = 0.35 * image_height
        if n_samples == 1:
            ys = np.array([float(y_bottom)])
        else:
            ys = np.linspace(float(y_bottom), float(y_top), n_samples)
        return cls(image_width, image_height, ys)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SamplingGrid):
            return NotImplemented
        return (
            self.image_width == other.image_width
            and self.image_height == other.image_height
            and np.array_equal(self.y_coords, other.y_coords)
        )

    def __hash__(self):
        return hash((self.image_width, self.image_height, self.y_coords.tobytes()))


@dataclass(frozen=True, eq=False)
class Lane:
    """One lane sampled on a grid.

    xs holds a finite x-coordinate for every grid height, including the
    extrapolated region; samples at indices >= top_index were not annotated.
    top_index == n_samples means the lane is annotated over the full grid.
    """

    xs: np.ndarray
    top_index: int
    grid: SamplingGrid

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        if xs.shape != (self.grid.n_samples,):
            raise ValueError("xs length must equal grid.n_samples")
        if not np.all(np.isfinite(xs)):
            raise ValueError("lane coordinates must be finite")
        if not 0 <= self.top_index <= self.grid.n_samples:
            raise ValueError("top_index out of range")
        xs.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "top_index", int(self.top_index))

    @property
    def is_empty(self) -> bool:
        return self.top_index == 0

    def valid_points(self) -> np.ndarray:
        """Annotated (x, y) pairs, bottom first, shape (top_index, 2)."""
        k = self.top_index
        return np.column_stack([self.xs[:k], self.grid.y_coords[:k]])

    def with_top_index(self, top_index: int) -> "Lane":
        return Lane(self.xs, top_index, self.grid)


@dataclass(frozen=True)
class StripeMask:
    """Row-wise rasterization of a lane widened to a fixed-width stripe.

    Covered image rows are listed in ``rows`` (ascending); on row ``rows[i]``
    the stripe occupies integer pixel columns [col_start[i], col_end[i]).
    """

    width: int
    rows: np.ndarray
    col_start: np.ndarray
    col_end: np.ndarray

    @property
    def pixel_count(self) -> int:
        return int(np.sum(self.col_end - self.col_start))


def _check_same_grid(a: Lane, b: Lane):
    if a.grid != b.grid:
        raise GridMismatch("lanes sampled on different grids")


def resample_polyline(points, grid: SamplingGrid) -> Lane:
    """Resample an annotation polyline onto the grid heights.

    Grid heights inside the polyline's y-span are linear interpolations of
    the polyline; heights outside the span are filled by extending the line
    through the two nearest annotated points. top_index marks the boundary
    between the annotated and the upward-extrapolated region.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise InvalidAnnotation("polyline needs at least 2 (x, y) points")
    if not np.all(np.isfinite(pts)):
        raise InvalidAnnotation("polyline coordinates must be finite")
    order = np.argsort(pts[:, 1], kind="stable")
    ys = pts[order, 1]
    xs = pts[order, 0]
    if ys[-1] - ys[0] <= 0:
        raise InvalidAnnotation("polyline y-span is degenerate")

    gy = grid.y_coords
    out = np.interp(gy, ys, xs)

    # extend beyond the annotated span along the end segments
    low = gy < ys[0]
    if np.any(low):
        i = int(np.searchsorted(ys, ys[0], side="right"))
        i = min(max(i, 1), len(ys) - 1)
        slope = (xs[i] - xs[0]) / (ys[i] - ys[0])
        out[low] = xs[0] + slope * (gy[low] - ys[0])
    high = gy > ys[-1]
    if np.any(high):
        j = int(np.searchsorted(ys, ys[-1], side="left")) - 1
        j = min(max(j, 0), len(ys) - 2)
        slope = (xs[-1] - xs[j]) / (ys[-1] - ys[j])
        out[high] = xs[-1] + slope * (gy[high] - ys[-1])

    # grid is bottom-first (decreasing y): the annotated block ends at the
    # last sample whose height is still at or below the polyline's far end
    inside = gy >= ys[0]
    top_index = int(np.count_nonzero(inside))
    return Lane(out, top_index, grid)


def stripe_spans(lane: Lane, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-image-row stripe column windows as full-height arrays.

    Returns (start, end) int arrays of length image_height; rows outside the
    lane's valid extent (or fully clipped) have start == end == 0. The window
    on a covered row is the ``width`` contiguous pixel columns centered on
    the lane's interpolated x, clipped to [0, image_width).
    """
    if width < 1:
        raise ValueError("stripe width must be >= 1")
    h = lane.grid.image_height
    start = np.zeros(h, dtype=np.int32)
    end = np.zeros(h, dtype=np.int32)
    k = lane.top_index
    if k == 0:
        return start, end
    y_valid = lane.grid.y_coords[:k]
    x_valid = lane.xs[:k]
    row_lo = int(np.ceil(y_valid[-1]))
    row_hi = int(np.floor(y_valid[0]))
    row_lo = max(row_lo, 0)
    row_hi = min(row_hi, h - 1)
    if row_lo > row_hi:
        return start, end
    rows = np.arange(row_lo, row_hi + 1)
    # np.interp wants ascending sample positions
    x_at_rows = np.interp(rows, y_valid[::-1], x_valid[::-1])
    s = np.floor(x_at_rows - width / 2.0 + 0.5).astype(np.int64)
    e = s + width
    s = np.clip(s, 0, lane.grid.image_width)
    e = np.clip(e, 0, lane.grid.image_width)
    empty = s >= e
    s[empty] = 0
    e[empty] = 0
    start[rows] = s
    end[rows] = e
    return start, end


def rasterize_stripe(lane: Lane, width: int = DEFAULT_STRIPE_WIDTH) -> StripeMask:
    """Rasterize a lane as a thin stripe of the given pixel width."""
    start, end = stripe_spans(lane, width)
    covered = start < end
    rows = np.nonzero(covered)[0].astype(np.int32)
    return StripeMask(width, rows, start[covered], end[covered])


def _span_iou(sa, ea, sb, eb) -> float:
    inter = np.minimum(ea, eb) - np.maximum(sa, sb)
    inter = int(np.sum(inter[inter > 0]))
    area_a = int(np.sum(ea - sa))
    area_b = int(np.sum(eb - sb))
    union = area_a + area_b - inter
    if union == 0:
        return 0.0
    return inter / union


def stripe_iou(a: Lane, b: Lane, width: int = DEFAULT_STRIPE_WIDTH) -> float:
    """Intersection over union of the two lanes' stripes.

    Computed in closed form from per-row integer column intervals, which is
    exactly equivalent to materializing the pixel masks and counting.
    Returns 0.0 when the union is empty.
    """
    _check_same_grid(a, b)
    sa, ea = stripe_spans(a, width)
    sb, eb = stripe_spans(b, width)
    return _span_iou(sa, ea, sb, eb)


def stripe_iou_pixelcount(a: Lane, b: Lane, width: int = DEFAULT_STRIPE_WIDTH) -> float:
    """Audit-mode stripe IoU that materializes boolean pixel masks."""
    _check_same_grid(a, b)
    grid = a.grid
    mask_a = np.zeros((grid.image_height, grid.image_width), dtype=bool)
    mask_b = np.zeros_like(mask_a)
    for lane, mask in ((a, mask_a), (b, mask_b)):
        stripe = rasterize_stripe(lane, width)
        for row, s, e in zip(stripe.rows, stripe.col_start, stripe.col_end):
            mask[row, s:e] = True
    union = np.count_nonzero(mask_a | mask_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(mask_a & mask_b) / union


def batch_stripe_spans(lanes, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack stripe_spans for many lanes into (K, image_height) arrays."""
    starts = []
    ends = []
    for lane in lanes:
        s, e = stripe_spans(lane, width)
        starts.append(s)
        ends.append(e)
    return np.stack(starts), np.stack(ends)


def batch_iou_one_vs_many(
    span: tuple[np.ndarray, np.ndarray],
    many: tuple[np.ndarray, np.ndarray],
) -> np.ndarray:
    """IoU of one lane's spans against a (K, H) span stack, vectorized."""
    s, e = span
    ms, me = many
    inter = np.minimum(me, e[None, :]) - np.maximum(ms, s[None, :])
    np.clip(inter, 0, None, out=inter)
    inter = inter.sum(axis=1)
    area = int(np.sum(e - s))
    areas = (me - ms).sum(axis=1)
    union = areas + area - inter
    out = np.zeros(ms.shape[0], dtype=np.float64)
    nz = union > 0
    out[nz] = inter[nz] / union[nz]
    return out
