"""Pixel-grid geometry relating the two sensor views.

The second sensor sees the common scene content translated by the
parallax shift (dx, dy), so on the pixel grid we model

    view2(x, y) ~= view1(x - dx, y - dy)

with bilinear interpolation and zero fill outside the grid.  build_shift
materializes that resampling as a sparse matrix U (at most 4 entries per
row); for integer shifts it degenerates to a partial permutation with
exact 0/1 entries.  Region masks split each view into the part both
sensors can see and the per-sensor border strips, and decompose() splits
a rendered view pair into those components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse


@dataclass
class ShiftOperator:
    """Sparse resampler computing out(x, y) = in(x - dx, y - dy)."""

    dx: float
    dy: float
    width: int
    height: int
    matrix: sparse.csr_matrix

    @property
    def transposed(self) -> sparse.csr_matrix:
        return self.matrix.T.tocsr()


def build_shift(dx: float, dy: float, width: int, height: int) -> ShiftOperator:
    """Build the bilinear shift operator for displacement (dx, dy).

    Output pixel (x, y) reads the input at (x - dx, y - dy); samples whose
    source lies outside the grid are zero-filled, so border rows have
    weight sum < 1.  Integer displacements produce a 0/1 partial
    permutation.  |dx| must be < width and |dy| < height.
    """
    if abs(dx) >= width or abs(dy) >= height:
        raise ValueError(
            f"shift ({dx}, {dy}) out of range for a {width}x{height} grid"
        )
    xt, xw = _axis_taps(np.arange(width, dtype=np.float64) - dx, width)
    yt, yw = _axis_taps(np.arange(height, dtype=np.float64) - dy, height)

    # combine the per-axis taps into up to 4 entries per output pixel
    n = width * height
    rows_idx = []
    cols_idx = []
    vals = []
    for ay in range(yt.shape[1]):
        for ax in range(xt.shape[1]):
            wgt = yw[:, ay][:, None] * xw[:, ax][None, :]
            col = yt[:, ay][:, None] * width + xt[:, ax][None, :]
            keep = wgt > 0.0
            if not keep.any():
                continue
            out_idx = np.nonzero(keep.ravel())[0]
            rows_idx.append(out_idx)
            cols_idx.append(col.ravel()[out_idx])
            vals.append(wgt.ravel()[out_idx])
    if rows_idx:
        mat = sparse.coo_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows_idx), np.concatenate(cols_idx))),
            shape=(n, n),
        ).tocsr()
    else:
        mat = sparse.csr_matrix((n, n))
    return ShiftOperator(dx=dx, dy=dy, width=width, height=height, matrix=mat)


def _axis_taps(src: np.ndarray, size: int):
    """Per-output taps (indices, weights) along one axis.  Fractional
    positions get two taps with bilinear weights; exact integers get one
    tap with weight 1.  Out-of-range taps get weight 0."""
    i0 = np.floor(src).astype(np.int64)
    frac = src - i0
    taps = np.stack([i0, i0 + 1], axis=1)
    weights = np.stack([1.0 - frac, frac], axis=1)
    inside = (taps >= 0) & (taps < size)
    weights = np.where(inside, weights, 0.0)
    taps = np.clip(taps, 0, size - 1)
    return taps, weights


def apply_shift(op: ShiftOperator, image: np.ndarray) -> np.ndarray:
    """Apply a shift operator to a (height, width) image."""
    img = np.asarray(image, dtype=np.float64)
    if img.shape != (op.height, op.width):
        raise ValueError(
            f"image shape {img.shape} does not match operator grid "
            f"{(op.height, op.width)}"
        )
    return (op.matrix @ img.ravel()).reshape(op.height, op.width)


# ---------------------------------------------------------------------------
# region bookkeeping
# ---------------------------------------------------------------------------

@dataclass
class RegionMasks:
    """Common/disjoint support masks for a two-sensor view pair.

    `common` lives on the reference (sensor 1) grid; `disjoint[k-1]` is the
    border strip only sensor k sees, on sensor k's own grid.
    """

    dx: float
    dy: float
    common: np.ndarray
    disjoint: tuple

    def common_for(self, sensor_index: int) -> np.ndarray:
        """Common-region mask expressed on the given sensor's grid."""
        if sensor_index == 1:
            return self.common
        return ~self.disjoint[sensor_index - 1]

    @property
    def common_count(self) -> int:
        return int(self.common.sum())


def build_region_masks(dx: float, dy: float, width: int, height: int) -> RegionMasks:
    """Boolean masks for the jointly visible region and per-sensor borders.

    A reference pixel (x, y) is common when the bilinear stencil of
    (x + dx, y + dy) lies fully inside the grid, i.e. the second sensor
    actually observes it; the mirrored rule with (x - dx, y - dy) places
    the common region on sensor 2's grid.
    """
    common1 = _stencil_inside(dx, dy, width, height, sign=+1.0)
    common2 = _stencil_inside(dx, dy, width, height, sign=-1.0)
    return RegionMasks(dx=dx, dy=dy, common=common1,
                       disjoint=(~common1, ~common2))


def _stencil_inside(dx, dy, width, height, sign):
    xs = np.arange(width, dtype=np.float64) + sign * dx
    ys = np.arange(height, dtype=np.float64) + sign * dy
    okx = (xs >= 0.0) & (xs <= width - 1.0)
    oky = (ys >= 0.0) & (ys <= height - 1.0)
    return oky[:, None] & okx[None, :]


def decompose(view1: np.ndarray, view2: np.ndarray, masks: RegionMasks,
              shift: ShiftOperator):
    """Split a view pair into common and per-sensor disjoint components.

    Returns (common, disjoint1, disjoint2) with view1 == common + disjoint1
    exactly and view2 == shift(common) + disjoint2 exactly on the disjoint
    strip (and up to interpolation error elsewhere).
    """
    v1 = np.asarray(view1, dtype=np.float64)
    v2 = np.asarray(view2, dtype=np.float64)
    if v1.shape != masks.common.shape or v2.shape != masks.common.shape:
        raise ValueError("view shapes must match the mask grid")
    common = np.where(masks.common, v1, 0.0)
    d1 = np.where(masks.disjoint[0], v1, 0.0)
    d2 = np.where(masks.disjoint[1], v2 - apply_shift(shift, common), 0.0)
    return common, d1, d2
