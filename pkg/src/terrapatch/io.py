"""Raster file I/O: GeoTIFF (via tifffile) and ESRI ASCII grid fixtures."""

from __future__ import annotations

import numpy as np
import tifffile

from .grid import GridGeometry, Raster

_ASCII_NODATA = -9999.0

# GeoTIFF / GDAL tag ids
_TAG_PIXEL_SCALE = 33550
_TAG_TIEPOINT = 33922
_TAG_GDAL_NODATA = 42113
_TAG_DESCRIPTION = 270


def write_ascii_grid(path, raster: Raster):
    """Write the plain-text fixture format (ESRI ASCII grid layout)."""
    g = raster.geometry
    vals = np.where(raster.nodata_mask, _ASCII_NODATA, raster.values)
    with open(path, "w") as fh:
        fh.write(f"ncols {g.cols}\n")
        fh.write(f"nrows {g.rows}\n")
        fh.write(f"xllcorner {g.origin_x!r}\n")
        fh.write(f"yllcorner {g.origin_y - g.height!r}\n")
        fh.write(f"cellsize {g.pixel_size!r}\n")
        fh.write(f"NODATA_value {_ASCII_NODATA!r}\n")
        for row in vals:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_ascii_grid(path, crs_id: str = "local", units: str = "") -> Raster:
    with open(path) as fh:
        header = {}
        for _ in range(6):
            key, val = fh.readline().split()
            header[key.lower()] = float(val)
        body = fh.read().split()
    cols = int(header["ncols"])
    rows = int(header["nrows"])
    h = header["cellsize"]
    nodata = header.get("nodata_value", _ASCII_NODATA)
    values = np.array(body, dtype=np.float64).reshape(rows, cols)
    mask = values == nodata
    values = np.where(mask, 0.0, values)
    geom = GridGeometry(
        header["xllcorner"], header["yllcorner"] + rows * h, h, rows, cols, crs_id
    )
    return Raster(geom, values, mask, units)


def write_geotiff(path, raster: Raster, dtype: str = "float32"):
    """Write a single-band GeoTIFF with geotransform and nodata tags.

    Storage narrows to float32 or uint8; internal math stays float64.
    """
    g = raster.geometry
    if dtype == "float32":
        nodata = _ASCII_NODATA
        data = np.where(raster.nodata_mask, nodata, raster.values).astype(np.float32)
    elif dtype == "uint8":
        nodata = 255
        data = np.where(raster.nodata_mask, nodata, raster.values).astype(np.uint8)
    else:
        raise ValueError(f"unsupported GeoTIFF dtype {dtype!r}")
    _write_tiff(path, data, g, nodata, raster.units)


def _write_tiff(path, data, g: GridGeometry, nodata, units):
    description = f"crs_id={g.crs_id};units={units}"
    extratags = [
        (_TAG_PIXEL_SCALE, "d", 3, (g.pixel_size, g.pixel_size, 0.0)),
        (_TAG_TIEPOINT, "d", 6, (0.0, 0.0, 0.0, g.origin_x, g.origin_y, 0.0)),
        (_TAG_GDAL_NODATA, "s", 0, str(nodata)),
    ]
    kw = {}
    if data.ndim == 3:
        kw = {"photometric": "minisblack", "planarconfig": "separate"}
    tifffile.imwrite(
        path, data, extratags=extratags, description=description, software=None, **kw
    )


def write_multiband_geotiff(path, rasters: list[Raster], dtype: str = "float32"):
    """Stack aligned single-band rasters into one multi-band GeoTIFF."""
    g = rasters[0].geometry
    for r in rasters[1:]:
        if r.geometry != g:
            raise ValueError("multi-band write requires identical geometries")
    if dtype == "float32":
        nodata = _ASCII_NODATA
        data = np.stack(
            [np.where(r.nodata_mask, nodata, r.values).astype(np.float32) for r in rasters]
        )
    elif dtype == "uint8":
        nodata = 255
        data = np.stack(
            [np.where(r.nodata_mask, nodata, r.values).astype(np.uint8) for r in rasters]
        )
    else:
        raise ValueError(f"unsupported GeoTIFF dtype {dtype!r}")
    _write_tiff(path, data, g, nodata, rasters[0].units)


def read_geotiff(path) -> list[Raster]:
    """Read a GeoTIFF; returns one Raster per band."""
    with tifffile.TiffFile(path) as tif:
        page = tif.pages[0]
        data = tif.asarray().astype(np.float64)
        tags = page.tags
        scale = tags[_TAG_PIXEL_SCALE].value if _TAG_PIXEL_SCALE in tags else (1.0, 1.0, 0.0)
        tie = tags[_TAG_TIEPOINT].value if _TAG_TIEPOINT in tags else (0, 0, 0, 0.0, 0.0, 0)
        nodata = None
        if _TAG_GDAL_NODATA in tags:
            nodata = float(tags[_TAG_GDAL_NODATA].value)
        crs_id, units = "local", ""
        if _TAG_DESCRIPTION in tags:
            for part in str(tags[_TAG_DESCRIPTION].value).split(";"):
                if part.startswith("crs_id="):
                    crs_id = part[len("crs_id="):]
                elif part.startswith("units="):
                    units = part[len("units="):]
    if data.ndim == 2:
        data = data[None]
    bands = []
    rows, cols = data.shape[-2:]
    geom = GridGeometry(float(tie[3]), float(tie[4]), float(scale[0]), rows, cols, crs_id)
    for band in data:
        mask = np.zeros(band.shape, dtype=bool) if nodata is None else band == nodata
        bands.append(Raster(geom, np.where(mask, 0.0, band), mask, units))
    return bands


def read_raster(path, **kw) -> Raster:
    """Read a single-band raster from GeoTIFF or ASCII grid by extension."""
    p = str(path)
    if p.endswith((".asc", ".txt")):
        return read_ascii_grid(p, **kw)
    bands = read_geotiff(p)
    if len(bands) != 1:
        raise ValueError(f"{path}: expected a single band, found {len(bands)}")
    return bands[0]
