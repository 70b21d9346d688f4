"""terrapatch: terrain feature stacks, patch datasets, spatial splits, and
multilabel evaluation for surficial geologic mapping."""

from .grid import BandStats, GridGeometry, Raster
from .rasterops import (
    align_to,
    band_stats,
    gaussian_smooth,
    log1p_transform,
    mosaic,
    resample,
)
from .terrain import (
    DerivativeKind,
    QuadCoeffs,
    derivative,
    elevation_percentile,
    multiscale_derivatives,
    quad_fit,
    slope_stddev,
    terrain_stack,
    windowed_stack,
)
from .vector import (
    CLASS_CODES,
    CLASS_NAMES,
    NUM_CLASSES,
    Polygon,
    PolyLine,
    TopologyReport,
    class_code,
    clip,
    derive_aoi,
    rasterize,
    read_geojson,
    rect_intersection_area,
    validate_topology,
    write_geojson,
)
from .patches import (
    CHANNEL_NAMES,
    LabelRecord,
    PatchSpec,
    compute_labels,
    extract_channels,
    generate_grid,
    write_index,
)
from .splits import (
    SplitManifest,
    build_overlap_graph,
    dataset_stats,
    oversample,
    sample_splits,
)
from .evalkit import (
    MetricReport,
    Sample,
    ScoreTable,
    augment,
    auroc,
    average_precision,
    delta_auc,
    evaluate,
    focal_loss,
    normalize,
    per_class_metrics,
)

__version__ = "0.1.0"
