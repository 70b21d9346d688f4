"""Shared synthetic-input builders for pipeline and acceptance tests."""

import json
import os

import numpy as np
import pytest

from terrapatch.grid import GridGeometry, Raster
from terrapatch.io import write_geotiff, write_multiband_geotiff


def synthetic_dem_values(rows, cols, h):
    """Smooth rolling surface quantized to 0.1 ft, like lidar-derived DEMs."""
    x = (np.arange(cols) + 0.5) * h
    y = (np.arange(rows) + 0.5) * h
    X, Y = np.meshgrid(x, y)
    z = 30.0 * np.sin(X / 800.0) + 20.0 * np.cos(Y / 600.0) + 0.002 * X + 60.0
    return np.round(z, 1)


def write_synthetic_inputs(root, n_px=1280, h=5.0, crs="epsg:3089"):
    """Emit geology/hydro/infra GeoJSON plus DEM and imagery tiles.

    The AOI is the full (n_px * h) square tiled by three vertical strips of
    classes Qal / Qaf / Qr with shared edges (clean topology).
    """
    root = str(root)
    os.makedirs(root, exist_ok=True)
    extent = n_px * h
    cut1 = round(0.4 * extent)
    cut2 = round(0.7 * extent)

    def rect_ring(x0, x1):
        return [[x0, 0.0], [x1, 0.0], [x1, extent], [x0, extent], [x0, 0.0]]

    geology = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "id": f"g{i}",
                "properties": {"unit": unit},
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            }
            for i, (unit, ring) in enumerate(
                [
                    ("Qal", rect_ring(0.0, cut1)),
                    ("Qaf", rect_ring(cut1, cut2)),
                    ("Qr", rect_ring(cut2, extent)),
                ]
            )
        ],
    }
    geology_path = os.path.join(root, "geology.geojson")
    with open(geology_path, "w") as fh:
        json.dump(geology, fh)

    for name, coords in (
        ("hydro", [[0.0, 0.1 * extent], [extent, 0.9 * extent]]),
        ("infra", [[0.2 * extent, 0.0], [0.8 * extent, extent]]),
    ):
        doc = {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "id": f"{name}-0",
                    "properties": {"source": name},
                    "geometry": {"type": "LineString", "coordinates": coords},
                }
            ],
        }
        with open(os.path.join(root, f"{name}.geojson"), "w") as fh:
            json.dump(doc, fh)

    # DEM split into left/right tiles on the reference lattice
    dem_dir = os.path.join(root, "dem")
    os.makedirs(dem_dir, exist_ok=True)
    z = synthetic_dem_values(n_px, n_px, h)
    half = n_px // 2
    left = Raster(GridGeometry(0.0, extent, h, n_px, half, crs), z[:, :half], units="ft")
    right = Raster(
        GridGeometry(half * h, extent, h, n_px, n_px - half, crs), z[:, half:], units="ft"
    )
    write_geotiff(os.path.join(dem_dir, "tile_a.tif"), left)
    write_geotiff(os.path.join(dem_dir, "tile_b.tif"), right)

    # single 4-band imagery tile on the same lattice
    img_dir = os.path.join(root, "imagery")
    os.makedirs(img_dir, exist_ok=True)
    x = (np.arange(n_px) + 0.5) * h
    X, Y = np.meshgrid(x, x)
    g = GridGeometry(0.0, extent, h, n_px, n_px, crs)
    bands = [
        Raster(g, 120.0 + 40.0 * np.sin(X / 300.0), units="dn"),
        Raster(g, 100.0 + 30.0 * np.cos(Y / 450.0), units="dn"),
        Raster(g, 90.0 + 0.01 * X, units="dn"),
        Raster(g, 140.0 + 0.008 * Y, units="dn"),
    ]
    write_multiband_geotiff(os.path.join(img_dir, "ortho.tif"), bands)
    return geology_path


def write_config(
    root,
    out_dir,
    patch_size=256,
    n_test=8,
    n_val=4,
    seed=0,
    crs="epsg:3089",
    extra_metrics=None,
):
    root = str(root)
    lines = [
        "[inputs]",
        f"geology = {os.path.join(root, 'geology.geojson')}",
        f"dem_tiles = {os.path.join(root, 'dem')}",
        f"imagery_tiles = {os.path.join(root, 'imagery')}",
        f"hydro = {os.path.join(root, 'hydro.geojson')}",
        f"infra = {os.path.join(root, 'infra.geojson')}",
        "",
        "[output]",
        f"dir = {out_dir}",
        "map_code = syn",
        f"crs_id = {crs}",
        "",
        "[grid]",
        f"patch_size = {patch_size}",
        "overlap = 0.5",
        "pixel_size = 5.0",
        "",
        "[splits]",
        f"n_test = {n_test}",
        f"n_val = {n_val}",
        f"seed = {seed}",
    ]
    if extra_metrics:
        lines += ["", "[metrics]"]
        lines += [f"{k} = {v}" for k, v in extra_metrics.items()]
    path = os.path.join(root, "run.ini")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


@pytest.fixture(scope="session")
def small_inputs(tmp_path_factory):
    """A 320x320-px synthetic region for fast pipeline tests."""
    root = tmp_path_factory.mktemp("small_inputs")
    write_synthetic_inputs(root, n_px=320)
    return root
