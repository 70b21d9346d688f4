"""Run the full staged pipeline end-to-end on generated inputs.

Fabricates a small synthetic region (geology strips, a quantized rolling
DEM split into two tiles, a 4-band ortho image, hydro and road lines),
writes a run configuration, and drives every stage through the same entry
point the `terrapatch` command uses. Outputs land in ./pipeline_demo_out.
"""

import json
import os
import sys
import tempfile

import numpy as np

from terrapatch.cli import main as terrapatch_main
from terrapatch.grid import GridGeometry, Raster
from terrapatch.io import write_geotiff, write_multiband_geotiff

N_PX = 320  # 320 px at 5 ft/px = a 1600-ft square region
H = 5.0


def build_inputs(root):
    extent = N_PX * H
    cut1, cut2 = 0.4 * extent, 0.7 * extent

    def strip(x0, x1, unit, fid):
        ring = [[x0, 0.0], [x1, 0.0], [x1, extent], [x0, extent], [x0, 0.0]]
        return {
            "type": "Feature",
            "id": fid,
            "properties": {"unit": unit},
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        }

    with open(os.path.join(root, "geology.geojson"), "w") as fh:
        json.dump(
            {
                "type": "FeatureCollection",
                "features": [
                    strip(0.0, cut1, "Qal", "g0"),
                    strip(cut1, cut2, "Qc", "g1"),
                    strip(cut2, extent, "Qr", "g2"),
                ],
            },
            fh,
        )

    for name, coords in (
        ("hydro", [[0.0, 0.2 * extent], [extent, 0.8 * extent]]),
        ("infra", [[0.5 * extent, 0.0], [0.5 * extent, extent]]),
    ):
        with open(os.path.join(root, f"{name}.geojson"), "w") as fh:
            json.dump(
                {
                    "type": "FeatureCollection",
                    "features": [
                        {
                            "type": "Feature",
                            "id": f"{name}-0",
                            "properties": {"source": name},
                            "geometry": {"type": "LineString", "coordinates": coords},
                        }
                    ],
                },
                fh,
            )

    x = (np.arange(N_PX) + 0.5) * H
    X, Y = np.meshgrid(x, x)
    z = np.round(25.0 * np.sin(X / 500.0) + 18.0 * np.cos(Y / 400.0) + 150.0, 1)
    os.makedirs(os.path.join(root, "dem"))
    half = N_PX // 2
    write_geotiff(
        os.path.join(root, "dem", "tile_a.tif"),
        Raster(GridGeometry(0.0, extent, H, N_PX, half, "demo"), z[:, :half], units="ft"),
    )
    write_geotiff(
        os.path.join(root, "dem", "tile_b.tif"),
        Raster(GridGeometry(half * H, extent, H, N_PX, N_PX - half, "demo"), z[:, half:], units="ft"),
    )

    g = GridGeometry(0.0, extent, H, N_PX, N_PX, "demo")
    os.makedirs(os.path.join(root, "imagery"))
    write_multiband_geotiff(
        os.path.join(root, "imagery", "ortho.tif"),
        [
            Raster(g, 110.0 + 40.0 * np.sin(X / 250.0), units="dn"),
            Raster(g, 95.0 + 30.0 * np.cos(Y / 300.0), units="dn"),
            Raster(g, 90.0 + 0.01 * X, units="dn"),
            Raster(g, 130.0 + 0.01 * Y, units="dn"),
        ],
    )


def write_ini(root, out_dir):
    path = os.path.join(root, "run.ini")
    with open(path, "w") as fh:
        fh.write(
            "\n".join(
                [
                    "[inputs]",
                    f"geology = {root}/geology.geojson",
                    f"dem_tiles = {root}/dem",
                    f"imagery_tiles = {root}/imagery",
                    f"hydro = {root}/hydro.geojson",
                    f"infra = {root}/infra.geojson",
                    "[output]",
                    f"dir = {out_dir}",
                    "map_code = demo",
                    "crs_id = demo",
                    "[grid]",
                    "patch_size = 64",
                    "overlap = 0.5",
                    "pixel_size = 5.0",
                    "[splits]",
                    "n_test = 8",
                    "n_val = 4",
                    "seed = 0",
                ]
            )
            + "\n"
        )
    return path


def main():
    out_dir = os.path.abspath("pipeline_demo_out")
    with tempfile.TemporaryDirectory() as root:
        build_inputs(root)
        ini = write_ini(root, out_dir)
        print(f"running: terrapatch all --config {ini}")
        code = terrapatch_main(["all", "--config", ini])
        print(f"exit code: {code}")
        if code != 0:
            return code

    print()
    print(f"products in {out_dir}:")
    for name in sorted(os.listdir(out_dir)):
        path = os.path.join(out_dir, name)
        if os.path.isdir(path):
            print(f"  {name}/ ({len(os.listdir(path))} files)")
        else:
            print(f"  {name}")
    with open(os.path.join(out_dir, "splits.json")) as fh:
        print(f"  split counts: {json.load(fh)['counts']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
