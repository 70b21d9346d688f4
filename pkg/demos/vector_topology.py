"""Validate a geologic polygon layer, derive its AOI, and rasterize it.

Shows the three vector-side steps that precede patch generation: topology
checks (overlaps, gaps, broken rings), the union boundary polygon, and the
ordinal class-code raster burned from cell centers.
"""

import numpy as np

from terrapatch import (
    CLASS_CODES,
    GridGeometry,
    Polygon,
    PolyLine,
    clip,
    derive_aoi,
    rasterize,
    validate_topology,
)


def box(x0, y0, w, h, unit, fid):
    ring = np.array(
        [(x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h), (x0, y0)], float
    )
    return Polygon(ring, unit=unit, feature_id=fid)


# A clean layer: three units tiling a 300x200-ft map sheet.
layer = [
    box(0, 0, 120, 200, "Qal", "alluvium"),
    box(120, 0, 100, 200, "Qc", "colluvium"),
    box(220, 0, 80, 200, "Qr", "residuum"),
]

print("clean layer")
print("-----------")
report = validate_topology(layer)
print(report.summary())

print()
print("layer with a 40x200-ft overlap")
print("------------------------------")
bad = [box(0, 0, 160, 200, "Qal", "a"), box(120, 0, 180, 200, "Qr", "b")]
report = validate_topology(bad)
print(report.summary())
for ida, idb, area in report.overlaps:
    print(f"  {ida} x {idb}: {area:.1f} sq ft")

print()
print("AOI from the clean layer")
print("------------------------")
aoi = derive_aoi(layer)
print(f"  bounds: {aoi.bounds()}")
print(f"  area:   {aoi.area():.0f} sq ft")

print()
print("clip a stream line to the AOI")
print("-----------------------------")
stream = PolyLine(np.array([(-50.0, 100.0), (350.0, 120.0)]), source="hydro")
parts = clip([stream], aoi)
for p in parts:
    print(f"  kept segment from {tuple(p.vertices[0])} to {tuple(p.vertices[-1])}")

print()
print("rasterize to 10-ft cells")
print("------------------------")
geom = GridGeometry(0.0, 200.0, 10.0, 20, 30, crs_id="demo")
mask = rasterize(layer, geom, "ordinal_polygons")
codes, counts = np.unique(mask.values, return_counts=True)
for code, count in zip(codes, counts):
    name = next((k for k, v in CLASS_CODES.items() if v == code), "none")
    print(f"  code {int(code)} ({name:>4}): {count:4d} cells")
