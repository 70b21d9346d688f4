"""Overlapping patch grid, per-patch labels, channel extraction, and the patch index."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .grid import GridGeometry, Raster
from .terrain import DERIVATIVE_RESOLUTIONS, FOCAL_KERNELS
from .vector import CLASS_NAMES, NUM_CLASSES, Polygon, rect_intersection_area

#: The 38 channels of one patch, in file order.
CHANNEL_NAMES = (
    ["mask", "red", "green", "blue", "nir", "dem", "nhd", "osm"]
    + [f"slope_{r}" for r in DERIVATIVE_RESOLUTIONS]
    + [f"prc_{r}" for r in DERIVATIVE_RESOLUTIONS]
    + [f"plc_{r}" for r in DERIVATIVE_RESOLUTIONS]
    + [f"sds_{k}" for k in FOCAL_KERNELS]
    + [f"ep_{k}" for k in FOCAL_KERNELS]
)

#: A class counts as present when it covers at least one pixel-equivalent.
PRESENCE_THRESHOLD = 1.0 / (256 * 256)

#: Relative tolerance for the rect-inside-AOI area check.
CONTAINMENT_RTOL = 1e-6


@dataclass(frozen=True)
class PatchSpec:
    """One tile's identity: pixel window on the reference grid + ground rect."""

    patch_id: str
    pixel_row0: int
    pixel_col0: int
    size: int
    geo_rect: tuple  # (xmin, ymin, xmax, ymax)


@dataclass
class LabelRecord:
    patch_id: str
    onehot: np.ndarray      # (7,) bool
    proportions: np.ndarray  # (7,) float in [0, 1]


def patch_rect(geom: GridGeometry, row0: int, col0: int, size: int) -> tuple:
    h = geom.pixel_size
    xmin = geom.origin_x + col0 * h
    ymax = geom.origin_y - row0 * h
    return (xmin, ymax - size * h, xmin + size * h, ymax)


def generate_grid(
    aoi: Polygon,
    geom: GridGeometry,
    size: int = 256,
    overlap: float = 0.5,
    map_code: str = "map",
) -> list[PatchSpec]:
    """Row-major grid of size x size patches fully contained in the AOI.

    Stride is size * (1 - overlap) pixels, anchored at the AOI bounding
    box's top-left corner snapped to the reference grid. A patch is kept
    when its corners and edge midpoints fall inside the AOI and its
    rectangle-AOI intersection area equals the rectangle area.
    """
    if not (0 <= overlap < 1):
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    stride_f = size * (1.0 - overlap)
    stride = int(round(stride_f))
    if abs(stride_f - stride) > 1e-9 or stride < 1:
        raise ValueError(f"stride {stride_f} is not a whole number of pixels")
    h = geom.pixel_size
    xmin, ymin, xmax, ymax = aoi.bounds()
    if (xmax - xmin) < size * h - 1e-9 or (ymax - ymin) < size * h - 1e-9:
        raise ValueError("AOI is smaller than one patch")
    col_start = int(np.floor((xmin - geom.origin_x) / h))
    row_start = int(np.floor((geom.origin_y - ymax) / h))
    n_rows = int(np.floor(((geom.origin_y - ymin) / h - row_start - size) / stride + 1e-9)) + 1
    n_cols = int(np.floor(((xmax - geom.origin_x) / h - col_start - size) / stride + 1e-9)) + 1

    patches = []
    rect_area = (size * h) ** 2
    for pr in range(max(0, n_rows)):
        for pc in range(max(0, n_cols)):
            row0 = row_start + pr * stride
            col0 = col_start + pc * stride
            rect = patch_rect(geom, row0, col0, size)
            if not _rect_in_aoi(rect, aoi, rect_area):
                continue
            patches.append(
                PatchSpec(f"{map_code}_{pr:04d}_{pc:04d}", row0, col0, size, rect)
            )
    return patches


def _rect_in_aoi(rect, aoi: Polygon, rect_area: float) -> bool:
    xmin, ymin, xmax, ymax = rect
    xm, ym = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    probes = [
        (xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax),
        (xm, ymin), (xmax, ym), (xm, ymax), (xmin, ym),
    ]
    if not all(aoi.contains_point(x, y, inclusive=True) for x, y in probes):
        return False
    area = rect_intersection_area(aoi, rect)
    return abs(area - rect_area) <= CONTAINMENT_RTOL * rect_area


def compute_labels(patch: PatchSpec, geology: list[Polygon]) -> LabelRecord:
    """Proportional class areas and one-hot presence for one patch."""
    xmin, ymin, xmax, ymax = patch.geo_rect
    rect_area = (xmax - xmin) * (ymax - ymin)
    proportions = np.zeros(NUM_CLASSES)
    for poly in geology:
        if poly.unit is None:
            continue
        bx0, by0, bx1, by1 = poly.bounds()
        if bx1 <= xmin or bx0 >= xmax or by1 <= ymin or by0 >= ymax:
            continue
        k = CLASS_NAMES.index(poly.unit)
        proportions[k] += rect_intersection_area(poly, patch.geo_rect) / rect_area
    onehot = proportions >= PRESENCE_THRESHOLD
    return LabelRecord(patch.patch_id, onehot, proportions)


def extract_channels(
    stack: list[tuple[str, Raster]], patch: PatchSpec
) -> list[tuple[str, Raster]]:
    """Cut the patch window out of every channel raster."""
    names = [name for name, _ in stack]
    missing = [n for n in CHANNEL_NAMES if n not in names]
    if missing:
        raise ValueError(f"missing channels: {missing}")
    out = []
    by_name = dict(stack)
    for name in CHANNEL_NAMES:
        r = by_name[name]
        g = r.geometry
        r0, c0, size = patch.pixel_row0, patch.pixel_col0, patch.size
        if r0 < 0 or c0 < 0 or r0 + size > g.rows or c0 + size > g.cols:
            raise ValueError(f"patch {patch.patch_id} outside raster bounds of {name}")
        sub_geom = GridGeometry(
            g.origin_x + c0 * g.pixel_size,
            g.origin_y - r0 * g.pixel_size,
            g.pixel_size,
            size,
            size,
            g.crs_id,
        )
        out.append(
            (
                name,
                Raster(
                    sub_geom,
                    r.values[r0 : r0 + size, c0 : c0 + size].copy(),
                    r.nodata_mask[r0 : r0 + size, c0 : c0 + size].copy(),
                    r.units,
                ),
            )
        )
    return out


def write_index(
    patches: list[PatchSpec],
    labels: list[LabelRecord],
    geojson_path,
    csv_path,
):
    """Write the patch rectangles (GeoJSON) and the label table (CSV)."""
    seen = set()
    for p in patches:
        if p.patch_id in seen:
            raise ValueError(f"duplicate patch_id {p.patch_id}")
        seen.add(p.patch_id)
    features = []
    for p in patches:
        xmin, ymin, xmax, ymax = p.geo_rect
        ring = [[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax], [xmin, ymin]]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {
                    "patch_id": p.patch_id,
                    "pixel_row0": p.pixel_row0,
                    "pixel_col0": p.pixel_col0,
                    "size": p.size,
                },
            }
        )
    with open(geojson_path, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh)

    header = ["patch_id"] + list(CLASS_NAMES) + [f"p_{c}" for c in CLASS_NAMES]
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for rec in labels:
            w.writerow(
                [rec.patch_id]
                + [int(v) for v in rec.onehot]
                + [f"{v:.9f}" for v in rec.proportions]
            )


def read_index(geojson_path) -> list[PatchSpec]:
    with open(geojson_path) as fh:
        doc = json.load(fh)
    patches = []
    for feat in doc["features"]:
        props = feat["properties"]
        ring = np.asarray(feat["geometry"]["coordinates"][0])
        rect = (
            float(ring[:, 0].min()),
            float(ring[:, 1].min()),
            float(ring[:, 0].max()),
            float(ring[:, 1].max()),
        )
        patches.append(
            PatchSpec(
                props["patch_id"],
                int(props["pixel_row0"]),
                int(props["pixel_col0"]),
                int(props["size"]),
                rect,
            )
        )
    return patches


def read_labels(csv_path) -> list[LabelRecord]:
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            onehot = np.array([row[c] == "1" for c in CLASS_NAMES])
            props = np.array([float(row[f"p_{c}"]) for c in CLASS_NAMES])
            out.append(LabelRecord(row["patch_id"], onehot, props))
    return out
