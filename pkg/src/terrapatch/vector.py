"""Vector layers: geologic classes, topology checks, AOI, clipping, rasterization.

Polygon bookkeeping (union, pairwise overlap, feature clipping) is delegated
to shapely; the exact rectangle-polygon area used for patch labels lives in
:mod:`terrapatch.geometry` and is kept independent of it.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
import shapely
import shapely.geometry as sgeom
from shapely.ops import unary_union
from shapely.strtree import STRtree

from .geometry import (
    point_in_ring,
    point_on_ring,
    points_in_ring,
    rect_ring_intersection_area,
    ring_closed,
    shoelace_area,
    supercover_cells,
)
from .grid import GridGeometry, Raster

#: The seven surficial geologic map units, ordinal codes 1..7 (0 = none).
CLASS_NAMES = ("af1", "Qal", "Qaf", "Qat", "Qc", "Qca", "Qr")
CLASS_CODES = {name: i + 1 for i, name in enumerate(CLASS_NAMES)}
NUM_CLASSES = len(CLASS_NAMES)

#: Default topology tolerance: one 5-ft pixel of area.
DEFAULT_TOPOLOGY_TOL = 25.0


def class_code(name: str) -> int:
    try:
        return CLASS_CODES[name]
    except KeyError:
        raise ValueError(f"unknown geologic class {name!r}") from None


@dataclass
class Polygon:
    """Exterior ring plus optional holes, with an optional class label.

    Rings are (N, 2) arrays of ground coordinates. Orientation is
    normalized on construction (exterior CCW, holes CW); closure is
    checked by :func:`validate_topology`, not enforced here.
    """

    exterior: np.ndarray
    holes: list = field(default_factory=list)
    unit: str | None = None
    feature_id: str | None = None

    def __post_init__(self):
        self.exterior = np.asarray(self.exterior, dtype=np.float64)
        self.holes = [np.asarray(h, dtype=np.float64) for h in self.holes]
        if ring_closed(self.exterior) and shoelace_area(self.exterior) < 0:
            self.exterior = self.exterior[::-1].copy()
        self.holes = [
            h[::-1].copy() if ring_closed(h) and shoelace_area(h) > 0 else h
            for h in self.holes
        ]

    def area(self) -> float:
        a = abs(shoelace_area(self.exterior))
        return a - sum(abs(shoelace_area(h)) for h in self.holes)

    def contains_point(self, x: float, y: float, inclusive: bool = False) -> bool:
        """Point containment; ``inclusive`` counts boundary points as inside."""
        tol = 1e-9 * max(1.0, abs(x), abs(y))
        if point_in_ring(x, y, self.exterior):
            for h in self.holes:
                if point_in_ring(x, y, h):
                    return inclusive and point_on_ring(x, y, h, tol)
            return True
        return inclusive and point_on_ring(x, y, self.exterior, tol)

    def bounds(self):
        xs, ys = self.exterior[:, 0], self.exterior[:, 1]
        return float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max())

    def to_shapely(self) -> sgeom.Polygon:
        return sgeom.Polygon(self.exterior, [h for h in self.holes])


@dataclass
class PolyLine:
    """Open vertex chain with a source tag (hydro or infra)."""

    vertices: np.ndarray
    source: str = ""
    feature_id: str | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        if len(self.vertices) < 2:
            raise ValueError("polyline needs at least 2 vertices")


@dataclass
class TopologyReport:
    """Outcome of layer inspection: overlaps, gap area, broken rings."""

    overlaps: list = field(default_factory=list)  # (id_a, id_b, area)
    gap_area: float = 0.0
    invalid_rings: list = field(default_factory=list)

    @property
    def is_clean(self) -> bool:
        return not self.overlaps and self.gap_area == 0.0 and not self.invalid_rings

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["feature_id_a", "feature_id_b", "overlap_area"])
            for a, b, area in self.overlaps:
                w.writerow([a, b, f"{area:.6f}"])

    def summary(self) -> str:
        lines = [
            f"overlap pairs: {len(self.overlaps)}",
            f"gap area: {self.gap_area:.6f}",
            f"invalid rings: {len(self.invalid_rings)}",
        ]
        if self.invalid_rings:
            lines.append("invalid feature ids: " + ", ".join(map(str, self.invalid_rings)))
        lines.append("status: " + ("PASS" if self.is_clean else "FAIL"))
        return "\n".join(lines)


def validate_topology(polygons: list[Polygon], tol: float = DEFAULT_TOPOLOGY_TOL) -> TopologyReport:
    """Check a polygon layer for overlaps, gaps, and broken rings.

    Overlaps are pairwise intersection areas above ``tol``; the gap area is
    the filled union's area minus the summed polygon areas when that
    difference exceeds ``tol``.
    """
    if not polygons:
        raise ValueError("validate_topology requires a non-empty layer")
    report = TopologyReport()
    shapes = []
    ids = []
    for i, poly in enumerate(polygons):
        fid = poly.feature_id if poly.feature_id is not None else str(i)
        rings_ok = ring_closed(poly.exterior) and all(ring_closed(h) for h in poly.holes)
        shp = poly.to_shapely() if rings_ok else None
        if not rings_ok or not shp.is_valid:
            report.invalid_rings.append(fid)
            continue
        shapes.append(shp)
        ids.append(fid)
    if len(shapes) >= 2:
        tree = STRtree(shapes)
        for i, shp in enumerate(shapes):
            for j in tree.query(shp):
                j = int(j)
                if j <= i:
                    continue
                inter = shp.intersection(shapes[j])
                if inter.area > tol:
                    report.overlaps.append((ids[i], ids[j], inter.area))
    if shapes:
        union = unary_union(shapes)
        filled = _fill_holes(union)
        gap = filled.area - sum(s.area for s in shapes)
        if gap > tol:
            report.gap_area = gap
    return report


def _fill_holes(geom):
    polys = [geom] if geom.geom_type == "Polygon" else list(geom.geoms)
    return unary_union([sgeom.Polygon(p.exterior) for p in polys])


def derive_aoi(polygons: list[Polygon]) -> Polygon:
    """Union boundary of the layer: one exterior, holes permitted."""
    if not polygons:
        raise ValueError("derive_aoi requires a non-empty layer")
    union = unary_union([p.to_shapely() for p in polygons])
    if union.geom_type == "MultiPolygon":
        raise ValueError(
            f"layer is not contiguous: union has {len(union.geoms)} components"
        )
    return Polygon(
        np.asarray(union.exterior.coords),
        [np.asarray(r.coords) for r in union.interiors],
    )


def clip(features: list, aoi: Polygon) -> list:
    """Intersect features with the AOI; drop what falls outside.

    Lines are split at boundary crossings; polygons may split into parts.
    """
    shp_aoi = aoi.to_shapely()
    if shp_aoi.area == 0:
        raise ValueError("degenerate AOI (zero area)")
    out = []
    for feat in features:
        if isinstance(feat, Polygon):
            inter = feat.to_shapely().intersection(shp_aoi)
            for part in _polygon_parts(inter):
                out.append(
                    Polygon(
                        np.asarray(part.exterior.coords),
                        [np.asarray(r.coords) for r in part.interiors],
                        unit=feat.unit,
                        feature_id=feat.feature_id,
                    )
                )
        elif isinstance(feat, PolyLine):
            inter = sgeom.LineString(feat.vertices).intersection(shp_aoi)
            for part in _line_parts(inter):
                out.append(
                    PolyLine(np.asarray(part.coords), feat.source, feat.feature_id)
                )
        else:
            raise TypeError(f"unsupported feature type {type(feat)!r}")
    return out


def _polygon_parts(geom):
    if geom.is_empty:
        return []
    if geom.geom_type == "Polygon":
        return [geom] if geom.area > 0 else []
    if geom.geom_type in ("MultiPolygon", "GeometryCollection"):
        parts = []
        for g in geom.geoms:
            parts.extend(_polygon_parts(g))
        return parts
    return []


def _line_parts(geom):
    if geom.is_empty:
        return []
    if geom.geom_type == "LineString":
        return [geom] if geom.length > 0 else []
    if geom.geom_type in ("MultiLineString", "GeometryCollection"):
        parts = []
        for g in geom.geoms:
            parts.extend(_line_parts(g))
        return parts
    return []


def rasterize(features: list, geom: GridGeometry, mode: str) -> Raster:
    """Burn a vector layer onto a grid.

    ``ordinal_polygons``: each cell takes the class code of the polygon
    containing its center (0 elsewhere). ``binary_lines``: a cell is 1 iff
    a line passes through it (supercover) or, for waterbody polygons, the
    polygon contains its center.
    """
    values = np.zeros((geom.rows, geom.cols), dtype=np.float64)
    h = geom.pixel_size
    xc = geom.x_centers()
    yc = geom.y_centers()
    if mode == "ordinal_polygons":
        for feat in features:
            if not isinstance(feat, Polygon):
                raise TypeError("ordinal mode rasterizes polygons only")
            if feat.unit is None:
                raise ValueError(
                    f"polygon {feat.feature_id!r} has no class code in ordinal mode"
                )
            code = class_code(feat.unit)
            _burn_polygon(values, feat, geom, xc, yc, float(code))
        units = "class code"
    elif mode == "binary_lines":
        for feat in features:
            if isinstance(feat, PolyLine):
                v = feat.vertices
                for (x0, y0), (x1, y1) in zip(v[:-1], v[1:]):
                    for row, col in supercover_cells(
                        x0, y0, x1, y1, geom.origin_x, geom.origin_y, h, geom.rows, geom.cols
                    ):
                        values[row, col] = 1.0
            elif isinstance(feat, Polygon):
                _burn_polygon(values, feat, geom, xc, yc, 1.0)
            else:
                raise TypeError(f"unsupported feature type {type(feat)!r}")
        units = "binary"
    else:
        raise ValueError(f"unknown rasterize mode {mode!r}")
    return Raster(geom, values, np.zeros(values.shape, dtype=bool), units)


def _burn_polygon(values, poly, geom, xc, yc, code):
    xmin, ymin, xmax, ymax = poly.bounds()
    h = geom.pixel_size
    c0 = max(0, int(np.floor((xmin - geom.origin_x) / h)))
    c1 = min(geom.cols, int(np.ceil((xmax - geom.origin_x) / h)) + 1)
    r0 = max(0, int(np.floor((geom.origin_y - ymax) / h)))
    r1 = min(geom.rows, int(np.ceil((geom.origin_y - ymin) / h)) + 1)
    if c0 >= c1 or r0 >= r1:
        return
    gx, gy = np.meshgrid(xc[c0:c1], yc[r0:r1])
    inside = points_in_ring(gx, gy, poly.exterior)
    for hole in poly.holes:
        inside &= ~points_in_ring(gx, gy, hole)
    sub = values[r0:r1, c0:c1]
    sub[inside] = code


def rect_intersection_area(poly: Polygon, rect: tuple) -> float:
    """Exact area of polygon intersected with an axis-aligned rectangle.

    Sutherland-Hodgman clipping of each ring against the rectangle, then
    shoelace; hole areas subtract.
    """
    xmin, ymin, xmax, ymax = rect
    if xmax <= xmin or ymax <= ymin:
        raise ValueError("degenerate rectangle")
    area = rect_ring_intersection_area(poly.exterior, xmin, ymin, xmax, ymax)
    for hole in poly.holes:
        area -= rect_ring_intersection_area(hole, xmin, ymin, xmax, ymax)
    return area


# ---------------------------------------------------------------------------
# GeoJSON I/O


def read_geojson(path, default_source: str = "") -> list:
    """Load a FeatureCollection into Polygon / PolyLine features.

    The geologic class is read from the ``unit`` property when present.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise ValueError(f"{path}: expected a FeatureCollection")
    features = []
    for i, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        unit = props.get("unit")
        fid = str(feat.get("id", props.get("id", i)))
        source = props.get("source", default_source)
        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        coords = geom.get("coordinates", [])
        if gtype == "Polygon":
            features.append(_polygon_from_rings(coords, unit, fid))
        elif gtype == "MultiPolygon":
            for j, rings in enumerate(coords):
                features.append(_polygon_from_rings(rings, unit, f"{fid}.{j}"))
        elif gtype == "LineString":
            features.append(PolyLine(np.asarray(coords), source, fid))
        elif gtype == "MultiLineString":
            for j, line in enumerate(coords):
                features.append(PolyLine(np.asarray(line), source, f"{fid}.{j}"))
        else:
            raise ValueError(f"{path}: unsupported geometry type {gtype!r}")
    return features


def _polygon_from_rings(rings, unit, fid):
    return Polygon(np.asarray(rings[0]), [np.asarray(r) for r in rings[1:]], unit, fid)


def write_geojson(path, features: list):
    """Write Polygon / PolyLine features as a FeatureCollection."""
    out = []
    for feat in features:
        if isinstance(feat, Polygon):
            coords = [feat.exterior.tolist()] + [h.tolist() for h in feat.holes]
            geometry = {"type": "Polygon", "coordinates": coords}
            props = {}
            if feat.unit is not None:
                props["unit"] = feat.unit
        elif isinstance(feat, PolyLine):
            geometry = {"type": "LineString", "coordinates": feat.vertices.tolist()}
            props = {"source": feat.source} if feat.source else {}
        else:
            raise TypeError(f"unsupported feature type {type(feat)!r}")
        entry = {"type": "Feature", "geometry": geometry, "properties": props}
        if feat.feature_id is not None:
            entry["id"] = feat.feature_id
        out.append(entry)
    with open(path, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": out}, fh)
