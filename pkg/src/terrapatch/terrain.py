"""Geomorphometric terrain derivatives and focal window statistics.

Slope and curvatures come from a least-squares quadratic surface fitted to
each 5x5 window (Evans-style). Elevation percentile and standard deviation
of slope are focal statistics over square windows applied directly to the
native-resolution DEM.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit
from scipy import ndimage

from .grid import GridGeometry, Raster
from .rasterops import align_to, gaussian_smooth, resample

WINDOW = 5  # quadratic-fit window edge, fixed by the derivative scheme

#: Resolutions (ft/px) of the multi-scale derivative channels.
DERIVATIVE_RESOLUTIONS = (5, 10, 20, 50, 100, 200)
#: Focal kernel sizes (pixels) for SDS and elevation percentile.
FOCAL_KERNELS = (5, 11, 21, 51, 101, 201)

#: Squared-gradient threshold below which curvature is defined as 0.
FLAT_EPS = 1e-12

#: Curvature channels are scaled by 100 (values in 1/feet x 100).
CURVATURE_SCALE = 100.0


class DerivativeKind(Enum):
    SLOPE = "slope"
    PROFILE_CURVATURE = "prc"
    PLANFORM_CURVATURE = "plc"


@dataclass(frozen=True)
class QuadCoeffs:
    """Coefficients of z ~ a*x^2 + b*y^2 + c*x*y + d*x + e*y + f.

    x, y are ground offsets (feet) centered on the target cell, x east
    and y north.
    """

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float


def _design_matrix() -> np.ndarray:
    """25x6 design matrix for unit-spaced window offsets, row-major.

    Row order matches flattened (drow, dcol) with drow, dcol in -2..2;
    ground y is north, so dy = -drow.
    """
    rows = []
    for drow in range(-2, 3):
        for dcol in range(-2, 3):
            x = float(dcol)
            y = float(-drow)
            rows.append([x * x, y * y, x * y, x, y, 1.0])
    return np.array(rows)


_PINV = np.linalg.pinv(_design_matrix())  # (6, 25)
#: 5x5 correlation kernels producing the six unit-spaced fit coefficients.
_COEFF_KERNELS = [_PINV[i].reshape(WINDOW, WINDOW) for i in range(6)]


def quad_fit(window: np.ndarray, pixel_size: float) -> QuadCoeffs:
    """Least-squares quadratic fit over one 5x5 window of cell values."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (WINDOW, WINDOW):
        raise ValueError(f"quad_fit expects a 5x5 window, got {window.shape}")
    z = window.ravel()
    cu = _PINV @ z  # coefficients in unit (cell) offsets
    h = float(pixel_size)
    return QuadCoeffs(
        a=cu[0] / h**2,
        b=cu[1] / h**2,
        c=cu[2] / h**2,
        d=cu[3] / h,
        e=cu[4] / h,
        f=cu[5],
    )


def _fit_coefficient_grids(dem: Raster):
    """Per-pixel fit coefficients a, b, c, d, e over the whole raster.

    Edges use odd (gradient-preserving) whole-point reflection, so planar
    surfaces keep their slope right up to the boundary. Any window touching
    a nodata cell is flagged in the returned mask.
    """
    g = dem.geometry
    if g.rows < WINDOW or g.cols < WINDOW:
        raise ValueError(f"raster smaller than the {WINDOW}x{WINDOW} fit window")
    h = g.pixel_size
    z = np.where(dem.nodata_mask, 0.0, dem.values)
    pad = WINDOW // 2
    zp = np.pad(z, pad, mode="reflect", reflect_type="odd")
    coeffs = []
    for i, scale in enumerate([h**-2, h**-2, h**-2, 1 / h, 1 / h]):
        c = ndimage.correlate(zp, _COEFF_KERNELS[i], mode="constant")
        coeffs.append(c[pad:-pad, pad:-pad] * scale)
    # "mirror" applies the same whole-point index reflection to the mask
    bad = ndimage.maximum_filter(dem.nodata_mask, size=WINDOW, mode="mirror")
    return coeffs, bad


def derivative(dem: Raster, kind: DerivativeKind) -> Raster:
    """Slope (degrees) or curvature (1/feet x 100) raster from the 5x5 fit."""
    (a, b, c, d, e), bad = _fit_coefficient_grids(dem)
    g2 = d * d + e * e
    if kind is DerivativeKind.SLOPE:
        out = np.degrees(np.arctan(np.sqrt(g2)))
        units = "degrees"
    else:
        flat = g2 < FLAT_EPS
        safe_g2 = np.where(flat, 1.0, g2)
        if kind is DerivativeKind.PROFILE_CURVATURE:
            num = -2.0 * (a * d * d + c * d * e + b * e * e)
        else:
            num = -2.0 * (a * e * e - c * d * e + b * d * d)
        out = np.where(flat, 0.0, num / safe_g2) * CURVATURE_SCALE
        units = "1/feet x100"
    out[bad] = 0.0
    return Raster(dem.geometry, out, bad, units)


def multiscale_derivatives(
    dem5ft: Raster, sigma_down: float = 1.0, sigma_up: float = 1.0
) -> list[tuple[str, Raster]]:
    """The 18 multi-resolution derivative channels on the input grid.

    For each resolution: downsample (cubic), smooth, differentiate, bring
    back to the native grid (cubic), smooth again. Slope channels are
    log1p-transformed at the end.
    """
    ref = dem5ft.geometry
    base = int(round(ref.pixel_size))
    channels: list[tuple[str, Raster]] = []
    by_kind: dict[DerivativeKind, list[tuple[str, Raster]]] = {
        k: [] for k in DerivativeKind
    }
    for res in DERIVATIVE_RESOLUTIONS:
        target = ref.pixel_size * (res / base)
        coarse = dem5ft if res == base else resample(dem5ft, target)
        coarse = gaussian_smooth(coarse, sigma_down)
        for kind in DerivativeKind:
            der = derivative(coarse, kind)
            fine = der if res == base else align_to(der, ref)
            fine = gaussian_smooth(fine, sigma_up)
            if kind is DerivativeKind.SLOPE:
                # cubic upsampling can overshoot slightly below zero
                fine = fine.with_values(
                    np.where(fine.nodata_mask, 0.0, np.log1p(np.maximum(fine.values, 0.0))),
                    units="degrees log1p",
                )
            by_kind[kind].append((f"{kind.value}_{res}", fine))
    for kind in DerivativeKind:
        channels.extend(by_kind[kind])
    return channels


@njit(cache=True)
def _ep_counts(ranks, valid, rows, cols, k, nranks):  # pragma: no cover - numba
    """Sliding-window lower/tie counts via a two-level rank histogram.

    ``ranks``/``valid`` are padded by k//2 on each side with symmetric
    reflection. Returns (lower, ties, nvalid) per output cell; entries for
    invalid centers are left at -1 in ``nvalid``.
    """
    r = k // 2
    block = max(1, int(np.sqrt(nranks)) + 1)
    nblocks = (nranks + block - 1) // block
    bins = np.zeros(nranks, dtype=np.int64)
    blocks = np.zeros(nblocks, dtype=np.int64)

    lower = np.zeros((rows, cols), dtype=np.int64)
    ties = np.zeros((rows, cols), dtype=np.int64)
    nvalid = np.full((rows, cols), -1, dtype=np.int64)

    for i in range(rows):
        count = 0
        # build window over columns [0, k)
        for wi in range(i, i + k):
            for wj in range(k):
                if valid[wi, wj]:
                    rk = ranks[wi, wj]
                    bins[rk] += 1
                    blocks[rk // block] += 1
                    count += 1
        for j in range(cols):
            if j > 0:
                for wi in range(i, i + k):
                    if valid[wi, j - 1]:
                        rk = ranks[wi, j - 1]
                        bins[rk] -= 1
                        blocks[rk // block] -= 1
                        count -= 1
                    if valid[wi, j + k - 1]:
                        rk = ranks[wi, j + k - 1]
                        bins[rk] += 1
                        blocks[rk // block] += 1
                        count += 1
            if valid[i + r, j + r]:
                rk = ranks[i + r, j + r]
                lo = 0
                nb = rk // block
                for bb in range(nb):
                    lo += blocks[bb]
                for q in range(nb * block, rk):
                    lo += bins[q]
                lower[i, j] = lo
                ties[i, j] = bins[rk] - 1
                nvalid[i, j] = count
        # tear down so the structure is empty for the next row
        for wi in range(i, i + k):
            for wj in range(cols - 1, cols - 1 + k):
                if valid[wi, wj]:
                    rk = ranks[wi, wj]
                    bins[rk] -= 1
                    blocks[rk // block] -= 1
    return lower, ties, nvalid


def _check_kernel(k: int):
    if k % 2 == 0:
        raise ValueError(f"window size must be odd, got {k}")
    if k <= 1:
        raise ValueError(f"window size must exceed 1, got {k}")


def elevation_percentile(dem: Raster, k: int) -> Raster:
    """Relative rank of each cell within its k x k neighborhood.

    EP = (cells below + 0.5 * ties) / (valid window cells - 1), in [0, 1].
    Ties among equal elevations count half. Cells are nodata when the
    center is nodata or more than half the window is invalid.
    """
    _check_kernel(k)
    r = k // 2
    vals = dem.values
    valid = ~dem.nodata_mask
    # dense ranks: equal values share a rank, so tie counts are exact
    uniq = np.unique(vals[valid]) if valid.any() else np.array([0.0])
    ranks = np.searchsorted(uniq, vals).astype(np.int64)
    ranks[~valid] = 0
    pad_ranks = np.pad(ranks, r, mode="symmetric")
    pad_valid = np.pad(valid, r, mode="symmetric")
    lower, ties, nvalid = _ep_counts(
        pad_ranks, pad_valid, vals.shape[0], vals.shape[1], k, len(uniq)
    )
    total = k * k
    invalid_in_window = total - nvalid
    bad = (nvalid < 2) | (invalid_in_window * 2 > total)
    out = np.zeros(vals.shape, dtype=np.float64)
    denom = np.where(bad, 1, nvalid - 1)
    out = (lower + 0.5 * ties) / denom
    out[bad] = 0.0
    return Raster(dem.geometry, out, bad, "fraction")


def _window_moments(values: np.ndarray, valid: np.ndarray, k: int):
    """Windowed count / mean / variance with reflect padding.

    Values are centered on their global mean before summation to limit
    cancellation in the variance.
    """
    m = valid.astype(np.float64)
    center = values[valid].mean() if valid.any() else 0.0
    v = np.where(valid, values - center, 0.0)
    ones = np.ones(k, dtype=np.float64)
    sums = []
    for arr in (m, v * m, v * v * m):
        for axis in (0, 1):
            arr = ndimage.correlate1d(arr, ones, axis=axis, mode="reflect")
        sums.append(arr)
    cnt, sv, svv = sums
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = sv / cnt
        var = svv / cnt - mean * mean
    return cnt, mean + center, np.maximum(var, 0.0)


@njit(cache=True)
def _window_var_exact(values, valid, rows, cols, k):  # pragma: no cover - numba
    """Two-pass per-window variance: immune to mean-square cancellation."""
    out = np.zeros((rows, cols), dtype=np.float64)
    cnt = np.zeros((rows, cols), dtype=np.int64)
    for i in range(rows):
        for j in range(cols):
            s = 0.0
            n = 0
            for wi in range(i, i + k):
                for wj in range(j, j + k):
                    if valid[wi, wj]:
                        s += values[wi, wj]
                        n += 1
            if n == 0:
                continue
            mean = s / n
            ss = 0.0
            for wi in range(i, i + k):
                for wj in range(j, j + k):
                    if valid[wi, wj]:
                        d = values[wi, wj] - mean
                        ss += d * d
            out[i, j] = ss / n
            cnt[i, j] = n
    return out, cnt


#: Above this per-raster work estimate (cells x window area) the focal
#: variance switches from the exact two-pass kernel to box-filter moments.
_SDS_EXACT_BUDGET = 5e8


def slope_stddev(dem: Raster, k: int) -> Raster:
    """log1p of the focal standard deviation of slope over a k x k window.

    Base slope is the 5x5 quadratic-fit slope at the DEM's native
    resolution. Small windows use an exact two-pass variance; large ones
    fall back to separable box-filter moments.
    """
    _check_kernel(k)
    slope = derivative(dem, DerivativeKind.SLOPE)
    valid = ~slope.nodata_mask
    rows, cols = slope.values.shape
    if rows * cols * k * k <= _SDS_EXACT_BUDGET:
        r = k // 2
        pad_v = np.pad(np.where(valid, slope.values, 0.0), r, mode="symmetric")
        pad_m = np.pad(valid, r, mode="symmetric")
        var, cnt = _window_var_exact(pad_v, pad_m, rows, cols, k)
        have = cnt > 0
    else:
        cnt_f, _, var = _window_moments(slope.values, valid, k)
        have = cnt_f > 0.5
    bad = ~valid | ~have
    out = np.where(bad, 0.0, np.log1p(np.sqrt(var)))
    return Raster(dem.geometry, out, bad, "degrees log1p")


def windowed_stack(dem5ft: Raster) -> list[tuple[str, Raster]]:
    """The 12 focal-statistics channels: SDS then EP at each kernel size."""
    channels = [(f"sds_{k}", slope_stddev(dem5ft, k)) for k in FOCAL_KERNELS]
    channels += [(f"ep_{k}", elevation_percentile(dem5ft, k)) for k in FOCAL_KERNELS]
    return channels


def terrain_stack(
    dem5ft: Raster, sigma_down: float = 1.0, sigma_up: float = 1.0
) -> list[tuple[str, Raster]]:
    """All 30 terrain channels: 18 multi-scale derivatives + 12 focal stats."""
    return multiscale_derivatives(dem5ft, sigma_down, sigma_up) + windowed_stack(dem5ft)
