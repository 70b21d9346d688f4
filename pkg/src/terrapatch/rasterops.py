"""Raster resampling, smoothing, mosaicking, alignment, and per-band statistics.

All interpolation uses the Keys cubic-convolution kernel (a = -0.5) with
symmetric reflect padding at the edges. Nodata propagates through any sample
that contributes with nonzero weight.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .grid import BandStats, GridGeometry, Raster

#: Keys cubic-convolution parameter.
CUBIC_A = -0.5

#: Weights below this magnitude are treated as non-contributing for nodata.
_WEIGHT_EPS = 1e-12


def _cubic_weights(frac: np.ndarray) -> np.ndarray:
    """Per-sample weights of the four taps at offsets -1, 0, 1, 2.

    ``frac`` is the fractional position in [0, 1) relative to the floor
    sample. Returns shape (4, len(frac)). Weights sum to 1 exactly for the
    Keys kernel.
    """
    a = CUBIC_A
    f = np.asarray(frac, dtype=np.float64)
    s0 = 1.0 + f  # distance to tap -1, in (1, 2]
    s1 = f        # distance to tap 0, in [0, 1)
    s2 = 1.0 - f  # distance to tap +1
    s3 = 2.0 - f  # distance to tap +2

    def near(s):
        return (a + 2.0) * s**3 - (a + 3.0) * s**2 + 1.0

    def far(s):
        return a * s**3 - 5.0 * a * s**2 + 8.0 * a * s - 4.0 * a

    return np.stack([far(s0), near(s1), near(s2), far(s3)])


def _reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    """Symmetric reflection of out-of-range indices into [0, n)."""
    if n == 1:
        return np.zeros_like(idx)
    idx = np.mod(idx, 2 * n)
    return np.where(idx >= n, 2 * n - 1 - idx, idx)


def _interp_axis0(values, nodata, coords):
    """Cubic interpolation along axis 0 at fractional row coordinates.

    ``coords`` has one entry per output row; columns are carried through.
    Returns (out_values, out_nodata).
    """
    n = values.shape[0]
    i0 = np.floor(coords).astype(np.int64)
    frac = coords - i0
    w = _cubic_weights(frac)  # (4, m)
    out = np.zeros((coords.size,) + values.shape[1:], dtype=np.float64)
    bad = np.zeros_like(out, dtype=bool)
    for k in range(4):
        idx = _reflect_index(i0 + (k - 1), n)
        wk = w[k][(slice(None),) + (None,) * (values.ndim - 1)]
        out += wk * values[idx]
        contributing = np.abs(w[k]) > _WEIGHT_EPS
        bad |= nodata[idx] & contributing[(slice(None),) + (None,) * (values.ndim - 1)]
    return out, bad


def cubic_interpolate(
    raster: Raster,
    row_coords: np.ndarray,
    col_coords: np.ndarray,
    mark_outside: bool = True,
):
    """Sample a raster at fractional pixel coordinates on a separable grid.

    ``row_coords[i]`` / ``col_coords[j]`` give the input-space pixel
    coordinate of output cell (i, j); 0.0 is the center of the first
    input pixel. Returns (values, nodata_mask) arrays of shape
    (len(row_coords), len(col_coords)). With ``mark_outside``, coordinates
    more than half a pixel outside the input extent come back as nodata;
    otherwise reflect padding extrapolates them.
    """
    vals = np.where(raster.nodata_mask, 0.0, raster.values)
    out, bad = _interp_axis0(vals, raster.nodata_mask, np.asarray(row_coords, float))
    out = out.T
    bad = bad.T
    out, bad2 = _interp_axis0(out, bad, np.asarray(col_coords, float))
    out = out.T
    bad = bad2.T

    if mark_outside:
        rows, cols = raster.values.shape
        off_r = (row_coords < -0.5) | (row_coords > rows - 0.5)
        off_c = (col_coords < -0.5) | (col_coords > cols - 0.5)
        bad |= off_r[:, None]
        bad |= off_c[None, :]
    out[bad] = 0.0
    return out, bad


def resample(r: Raster, target_pixel_size: float) -> Raster:
    """Resample to a new pixel size over the same ground extent.

    Output dimensions are ceil(extent / new pixel size), so the output
    bounding box covers the input's within one target pixel.
    """
    if target_pixel_size <= 0:
        raise ValueError(f"target pixel size must be positive, got {target_pixel_size}")
    g = r.geometry
    if g.rows < 4 or g.cols < 4:
        raise ValueError("resample requires at least a 4x4 raster")
    h = g.pixel_size
    H = float(target_pixel_size)
    rows_out = max(1, math.ceil(g.rows * h / H))
    cols_out = max(1, math.ceil(g.cols * h / H))
    # Output cell centers expressed in input pixel coordinates.
    row_coords = (np.arange(rows_out) + 0.5) * (H / h) - 0.5
    col_coords = (np.arange(cols_out) + 0.5) * (H / h) - 0.5
    vals, bad = cubic_interpolate(r, row_coords, col_coords, mark_outside=False)
    out_geom = GridGeometry(g.origin_x, g.origin_y, H, rows_out, cols_out, g.crs_id)
    return Raster(out_geom, vals, bad, r.units)


def align_to(r: Raster, ref: GridGeometry) -> Raster:
    """Interpolate a raster onto a reference grid (cubic convolution).

    Cells whose centers fall outside the source extent are nodata.
    """
    g = r.geometry
    if g.crs_id != ref.crs_id:
        raise ValueError(f"CRS mismatch: {g.crs_id!r} vs {ref.crs_id!r}")
    h = g.pixel_size
    x = ref.x_centers()
    y = ref.y_centers()
    col_coords = (x - g.origin_x) / h - 0.5
    row_coords = (g.origin_y - y) / h - 0.5
    vals, bad = cubic_interpolate(r, row_coords, col_coords)
    return Raster(ref, vals, bad, r.units)


def gaussian_smooth(r: Raster, sigma: float = 1.0) -> Raster:
    """Separable Gaussian smoothing, kernel radius ceil(3*sigma).

    Nodata cells are excluded and the remaining weights renormalized;
    nodata cells themselves stay nodata. Reflect padding at the edges.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    kernel /= kernel.sum()

    valid = (~r.nodata_mask).astype(np.float64)
    num = np.where(r.nodata_mask, 0.0, r.values) * valid
    for axis in (0, 1):
        num = ndimage.correlate1d(num, kernel, axis=axis, mode="reflect")
        valid = ndimage.correlate1d(valid, kernel, axis=axis, mode="reflect")
    out = np.zeros_like(num)
    np.divide(num, valid, out=out, where=valid > 0)
    bad = r.nodata_mask | (valid <= 0)
    out[bad] = 0.0
    return Raster(r.geometry, out, bad, r.units)


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """The normalized 1-D kernel used by :func:`gaussian_smooth`."""
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def mosaic(tiles: list[Raster]) -> Raster:
    """Merge aligned tiles into one raster covering their union extent.

    Tiles must share CRS and pixel size and sit on the same grid lattice.
    Where tiles overlap, valid cells of later tiles win; uncovered cells
    are nodata.
    """
    if not tiles:
        raise ValueError("mosaic requires at least one tile")
    g0 = tiles[0].geometry
    for t in tiles[1:]:
        if not t.geometry.aligned_with(g0):
            raise ValueError("mosaic tiles must be aligned (CRS, pixel size, grid lattice)")
    h = g0.pixel_size
    xmin = min(t.geometry.origin_x for t in tiles)
    ymax = max(t.geometry.origin_y for t in tiles)
    xmax = max(t.geometry.origin_x + t.geometry.width for t in tiles)
    ymin = min(t.geometry.origin_y - t.geometry.height for t in tiles)
    cols = int(round((xmax - xmin) / h))
    rows = int(round((ymax - ymin) / h))
    geom = GridGeometry(xmin, ymax, h, rows, cols, g0.crs_id)

    values = np.zeros((rows, cols), dtype=np.float64)
    bad = np.ones((rows, cols), dtype=bool)
    for t in tiles:
        r0 = int(round((ymax - t.geometry.origin_y) / h))
        c0 = int(round((t.geometry.origin_x - xmin) / h))
        tr, tc = t.geometry.rows, t.geometry.cols
        sub_v = values[r0 : r0 + tr, c0 : c0 + tc]
        sub_b = bad[r0 : r0 + tr, c0 : c0 + tc]
        good = ~t.nodata_mask
        sub_v[good] = t.values[good]
        sub_b[good] = False
    return Raster(geom, values, bad, tiles[0].units)


def band_stats(r: Raster) -> BandStats:
    """Population mean and standard deviation over valid cells."""
    vals = r.valid_values()
    if vals.size == 0:
        raise ValueError("band_stats requires at least one valid cell")
    return BandStats(float(vals.mean()), float(vals.std(ddof=0)), int(vals.size))


def log1p_transform(r: Raster) -> Raster:
    """Apply ln(1 + v) per cell; valid values must be non-negative."""
    vals = r.valid_values()
    if vals.size and vals.min() < 0:
        raise ValueError("log1p_transform requires non-negative values")
    out = np.where(r.nodata_mask, 0.0, np.log1p(np.maximum(r.values, 0.0)))
    units = f"{r.units} log1p".strip()
    return Raster(r.geometry, out, r.nodata_mask.copy(), units)
