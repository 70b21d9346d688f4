"""Core raster data model: grid geometry, raster values + validity mask, band stats."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

#: Tolerance (in pixels) for deciding that two origins sit on the same grid lattice.
ALIGN_TOL = 1e-6


@dataclass(frozen=True)
class GridGeometry:
    """Mapping from pixel indices to ground coordinates.

    ``origin_x``/``origin_y`` are the ground coordinates of the top-left
    corner of the top-left pixel; rows increase downward (decreasing y).
    Pixels are square with side ``pixel_size`` in ground units (feet).
    """

    origin_x: float
    origin_y: float
    pixel_size: float
    rows: int
    cols: int
    crs_id: str = "local"

    def __post_init__(self):
        if self.pixel_size <= 0:
            raise ValueError(f"pixel_size must be positive, got {self.pixel_size}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"rows/cols must be >= 1, got {self.rows}x{self.cols}")

    @property
    def width(self) -> float:
        return self.cols * self.pixel_size

    @property
    def height(self) -> float:
        return self.rows * self.pixel_size

    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) ground bounding box."""
        return (
            self.origin_x,
            self.origin_y - self.height,
            self.origin_x + self.width,
            self.origin_y,
        )

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        h = self.pixel_size
        return (self.origin_x + (col + 0.5) * h, self.origin_y - (row + 0.5) * h)

    def x_centers(self) -> np.ndarray:
        h = self.pixel_size
        return self.origin_x + (np.arange(self.cols) + 0.5) * h

    def y_centers(self) -> np.ndarray:
        h = self.pixel_size
        return self.origin_y - (np.arange(self.rows) + 0.5) * h

    def aligned_with(self, other: "GridGeometry") -> bool:
        """Same CRS, same pixel size, origins offset by whole pixels."""
        if self.crs_id != other.crs_id:
            return False
        if abs(self.pixel_size - other.pixel_size) > ALIGN_TOL * self.pixel_size:
            return False
        h = self.pixel_size
        dx = (self.origin_x - other.origin_x) / h
        dy = (self.origin_y - other.origin_y) / h
        return (
            abs(dx - round(dx)) < ALIGN_TOL and abs(dy - round(dy)) < ALIGN_TOL
        )


@dataclass
class Raster:
    """Single band of 64-bit values on a grid, with a validity mask.

    ``nodata_mask`` is True where the cell holds no data. Values under the
    mask are never interpreted; valid cells must be finite.
    """

    geometry: GridGeometry
    values: np.ndarray
    nodata_mask: np.ndarray = None
    units: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.geometry.rows, self.geometry.cols):
            raise ValueError(
                f"values shape {self.values.shape} does not match geometry "
                f"{self.geometry.rows}x{self.geometry.cols}"
            )
        if self.nodata_mask is None:
            self.nodata_mask = np.zeros(self.values.shape, dtype=bool)
        else:
            self.nodata_mask = np.asarray(self.nodata_mask, dtype=bool)
            if self.nodata_mask.shape != self.values.shape:
                raise ValueError("nodata_mask shape does not match values")
        if not np.all(np.isfinite(self.values[~self.nodata_mask])):
            raise ValueError("non-finite value in a valid cell")

    @property
    def valid_mask(self) -> np.ndarray:
        return ~self.nodata_mask

    def valid_values(self) -> np.ndarray:
        return self.values[~self.nodata_mask]

    def with_values(self, values, nodata_mask=None, units=None) -> "Raster":
        """Copy of this raster with new values (same geometry)."""
        return Raster(
            self.geometry,
            values,
            self.nodata_mask.copy() if nodata_mask is None else nodata_mask,
            self.units if units is None else units,
        )

    def copy(self) -> "Raster":
        return Raster(
            self.geometry, self.values.copy(), self.nodata_mask.copy(), self.units
        )


@dataclass(frozen=True)
class BandStats:
    """Population mean / stddev over the valid cells of one band."""

    mean: float
    stddev: float
    valid_count: int

    def __post_init__(self):
        if self.valid_count < 1:
            raise ValueError("stats require at least one valid cell")
        if self.stddev < 0:
            raise ValueError("stddev must be non-negative")
