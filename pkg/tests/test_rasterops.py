"""Tests for resampling, smoothing, mosaicking, alignment, and band stats."""

import numpy as np
import pytest

from terrapatch import (
    GridGeometry,
    Raster,
    align_to,
    band_stats,
    gaussian_smooth,
    log1p_transform,
    mosaic,
    resample,
)
from terrapatch.rasterops import gaussian_kernel_1d


def make_raster(values, pixel_size=5.0, origin=(0.0, None), nodata=None, crs="local"):
    values = np.asarray(values, dtype=float)
    rows, cols = values.shape
    oy = origin[1] if origin[1] is not None else rows * pixel_size
    geom = GridGeometry(origin[0], oy, pixel_size, rows, cols, crs)
    return Raster(geom, values, nodata)


def ramp_raster(rows=12, cols=12, pixel_size=5.0, slope=3.0):
    g = GridGeometry(0.0, rows * pixel_size, pixel_size, rows, cols)
    x = (np.arange(cols) + 0.5) * pixel_size
    return Raster(g, np.tile(slope * x, (rows, 1)))


class TestResample:
    def test_constant_preserved(self):
        r = make_raster(np.full((8, 8), 7.0))
        for target in (2.0, 10.0, 13.0):
            out = resample(r, target)
            assert np.allclose(out.values, 7.0)
            assert not out.nodata_mask.any()

    def test_linear_ramp_exact_at_new_centers(self):
        # Keys a=-0.5 reproduces linear surfaces; check interior columns
        # against direct analytic evaluation (edges feel the reflection).
        r = ramp_raster(rows=12, cols=12, slope=3.0)
        out = resample(r, 10.0)
        x_new = (np.arange(out.geometry.cols) + 0.5) * 10.0
        expected = 3.0 * x_new
        assert np.abs(out.values[:, 1:-1] - expected[1:-1]).max() < 1e-12

    def test_pipeline_resolutions(self):
        rng = np.random.default_rng(0)
        dem = make_raster(rng.normal(100, 10, (80, 80)))
        for target in (10, 20, 50, 100, 200):
            out = resample(dem, target)
            assert out.geometry.pixel_size == target
            assert out.geometry.rows == int(np.ceil(80 * 5 / target))

    def test_extent_preserved_within_one_pixel(self):
        r = make_raster(np.zeros((11, 7)))
        out = resample(r, 13.0)
        bx = out.geometry.bounds()
        ax = r.geometry.bounds()
        assert bx[0] == ax[0] and bx[3] == ax[3]
        assert 0 <= (ax[1] - bx[1]) < 13.0
        assert 0 <= (bx[2] - ax[2]) < 13.0

    def test_round_trip_linear_surface(self):
        g = GridGeometry(0.0, 100.0, 5.0, 20, 20)
        x = (np.arange(20) + 0.5) * 5.0
        y = 100.0 - (np.arange(20) + 0.5) * 5.0
        X, Y = np.meshgrid(x, y)
        r = Raster(g, 2.0 * X - 0.5 * Y + 3.0)
        back = align_to(resample(r, 10.0), g)
        # stay clear of cells whose cubic taps reach the coarse grid's
        # reflected first/last rows and columns
        inner = (slice(5, -5), slice(5, -5))
        assert np.abs(back.values[inner] - r.values[inner]).max() < 1e-9

    def test_constant_shift_commutes(self):
        rng = np.random.default_rng(1)
        vals = rng.normal(size=(16, 16))
        r = make_raster(vals)
        a = resample(r, 8.0).values
        b = resample(make_raster(vals + 11.5), 8.0).values
        assert np.abs((b - a) - 11.5).max() < 1e-12

    def test_nodata_propagates(self):
        vals = np.zeros((8, 8))
        mask = np.zeros((8, 8), bool)
        mask[3, 3] = True
        r = make_raster(vals, nodata=mask)
        out = resample(r, 2.5)
        assert out.nodata_mask.any()

    def test_errors(self):
        r = make_raster(np.zeros((8, 8)))
        with pytest.raises(ValueError):
            resample(r, -1.0)
        with pytest.raises(ValueError):
            resample(make_raster(np.zeros((2, 2))), 10.0)


class TestGaussianSmooth:
    def test_constant_identity(self):
        r = make_raster(np.full((10, 10), 4.25))
        out = gaussian_smooth(r, 1.0)
        assert np.abs(out.values - 4.25).max() < 1e-12

    def test_impulse_center_weight(self):
        vals = np.zeros((11, 11))
        vals[5, 5] = 1.0
        out = gaussian_smooth(make_raster(vals), 1.0)
        k = gaussian_kernel_1d(1.0)
        center = k[len(k) // 2]
        assert out.values[5, 5] == pytest.approx(center * center, abs=1e-15)

    def test_linear_ramp_preserved_interior(self):
        # brute-force reference: symmetric kernel annihilates odd moments
        r = ramp_raster(rows=14, cols=14, slope=2.0)
        out = gaussian_smooth(r, 1.0)
        k = gaussian_kernel_1d(1.0)
        rad = len(k) // 2
        pad = np.pad(r.values, rad, mode="symmetric")
        brute = np.zeros_like(r.values)
        for i in range(r.values.shape[0]):
            for j in range(r.values.shape[1]):
                win = pad[i : i + 2 * rad + 1, j : j + 2 * rad + 1]
                brute[i, j] = float(np.sum(win * np.outer(k, k)))
        assert np.abs(out.values - brute).max() < 1e-12
        inner = (slice(rad, -rad), slice(rad, -rad))
        assert np.abs(out.values[inner] - r.values[inner]).max() < 1e-9

    def test_nodata_renormalization(self):
        vals = np.full((9, 9), 3.0)
        mask = np.zeros((9, 9), bool)
        mask[4, 4] = True
        out = gaussian_smooth(make_raster(vals, nodata=mask), 1.0)
        assert np.abs(out.values[~out.nodata_mask] - 3.0).max() < 1e-12
        assert out.nodata_mask[4, 4]

    def test_sigma_validation(self):
        with pytest.raises(ValueError):
            gaussian_smooth(make_raster(np.zeros((5, 5))), 0.0)


class TestMosaic:
    def test_single_tile_identity(self):
        r = make_raster(np.arange(30.0).reshape(5, 6))
        out = mosaic([r])
        assert np.array_equal(out.values, r.values)
        assert out.geometry == r.geometry

    def test_adjacent_tiles(self):
        a = make_raster(np.full((10, 10), 1.0), origin=(0.0, 50.0))
        b = make_raster(np.full((10, 10), 2.0), origin=(50.0, 50.0))
        out = mosaic([a, b])
        assert out.geometry.rows == 10 and out.geometry.cols == 20
        assert not out.nodata_mask.any()
        assert out.geometry.bounds() == (0.0, 0.0, 100.0, 50.0)

    def test_overlap_last_wins(self):
        a = make_raster(np.full((10, 10), 1.0), origin=(0.0, 50.0))
        b = make_raster(np.full((10, 10), 2.0), origin=(40.0, 50.0))
        out = mosaic([a, b])
        assert np.all(out.values[:, 8:10] == 2.0)
        assert np.all(out.values[:, :8] == 1.0)

    def test_associative_on_disjoint(self):
        tiles = [
            make_raster(np.full((4, 4), float(i)), origin=(i * 20.0, 20.0))
            for i in range(3)
        ]
        ab_c = mosaic([mosaic(tiles[:2]), tiles[2]])
        a_bc = mosaic([tiles[0], mosaic(tiles[1:])])
        assert np.array_equal(ab_c.values, a_bc.values)
        assert np.array_equal(ab_c.nodata_mask, a_bc.nodata_mask)

    def test_misaligned_rejected(self):
        a = make_raster(np.zeros((4, 4)), origin=(0.0, 20.0))
        b = make_raster(np.zeros((4, 4)), origin=(2.5, 20.0))
        with pytest.raises(ValueError):
            mosaic([a, b])
        c = make_raster(np.zeros((4, 4)), pixel_size=10.0, origin=(0.0, 20.0))
        with pytest.raises(ValueError):
            mosaic([a, c])

    def test_stats_match_concatenation(self):
        rng = np.random.default_rng(7)
        a = make_raster(rng.normal(size=(6, 6)), origin=(0.0, 30.0))
        b = make_raster(rng.normal(size=(6, 6)), origin=(30.0, 30.0))
        merged = mosaic([a, b])
        both = np.concatenate([a.values.ravel(), b.values.ravel()])
        s = band_stats(merged)
        assert s.mean == pytest.approx(both.mean(), abs=1e-12)
        assert s.stddev == pytest.approx(both.std(), abs=1e-12)
        assert s.valid_count == both.size


class TestAlignTo:
    def test_identity_on_own_grid(self):
        rng = np.random.default_rng(3)
        r = make_raster(rng.normal(size=(12, 12)))
        out = align_to(r, r.geometry)
        assert np.abs(out.values - r.values).max() < 1e-12

    def test_one_pixel_shift(self):
        rng = np.random.default_rng(4)
        r = make_raster(rng.normal(size=(10, 10)))
        ref = GridGeometry(5.0, r.geometry.origin_y, 5.0, 10, 10)
        out = align_to(r, ref)
        assert np.abs(out.values[:, :-1] - r.values[:, 1:]).max() < 1e-12
        assert np.all(out.nodata_mask[:, -1])
        assert not out.nodata_mask[:, :-1].any()

    def test_fine_to_coarse_reference(self):
        # 6-inch band aligned onto the 5-ft mask grid
        fine = make_raster(np.full((120, 120), 42.0), pixel_size=0.5)
        ref = GridGeometry(0.0, 60.0, 5.0, 12, 12)
        out = align_to(fine, ref)
        assert out.geometry == ref
        assert np.abs(out.values - 42.0).max() < 1e-12

    def test_crs_mismatch(self):
        r = make_raster(np.zeros((6, 6)), crs="epsg:3089")
        ref = GridGeometry(0.0, 30.0, 5.0, 6, 6, "epsg:3091")
        with pytest.raises(ValueError):
            align_to(r, ref)


class TestBandStats:
    def test_constant(self):
        s = band_stats(make_raster(np.full((4, 4), 5.0)))
        assert (s.mean, s.stddev) == (5.0, 0.0)

    def test_hand_values(self):
        s = band_stats(make_raster(np.array([[1.0, 2.0], [3.0, 4.0]])))
        assert s.mean == 2.5
        assert s.stddev == pytest.approx(np.sqrt(1.25), abs=1e-15)

    def test_nodata_excluded(self):
        mask = np.array([[False, True, False]])
        s = band_stats(make_raster(np.array([[1.0, 0.0, 3.0]]), nodata=mask))
        assert s.mean == 2.0 and s.valid_count == 2

    def test_all_nodata_rejected(self):
        mask = np.ones((2, 2), bool)
        with pytest.raises(ValueError):
            band_stats(make_raster(np.zeros((2, 2)), nodata=mask))


class TestLog1p:
    def test_values(self):
        r = make_raster(np.array([[0.0, np.e - 1.0, 45.0]]))
        out = log1p_transform(r)
        assert out.values[0, 0] == 0.0
        assert out.values[0, 1] == pytest.approx(1.0, abs=1e-15)
        assert out.values[0, 2] == pytest.approx(np.log(46.0), abs=1e-12)
        assert out.units.endswith("log1p")

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            log1p_transform(make_raster(np.array([[-0.5]])))
