"""Stage-by-stage pipeline: config parsing, run manifests, stage execution.

Stages form a DAG of independently checkable products. Each stage records
input/output checksums in ``manifest.json``; with ``resume`` set, a stage
whose inputs are unchanged is skipped. Reruns from identical inputs are
byte-identical.
"""

from __future__ import annotations

import configparser
import glob
import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .evalkit import ScoreTable, delta_auc, evaluate, write_delta_auc_csv
from .grid import GridGeometry, Raster
from .io import read_geotiff, read_raster, write_geotiff
from .patches import (
    CHANNEL_NAMES,
    compute_labels,
    extract_channels,
    generate_grid,
    read_index,
    read_labels,
    write_index,
)
from .rasterops import align_to, mosaic
from .splits import build_overlap_graph, dataset_stats, sample_splits
from .terrain import terrain_stack
from .vector import (
    Polygon,
    PolyLine,
    clip,
    derive_aoi,
    rasterize,
    read_geojson,
    validate_topology,
    write_geojson,
)

STAGES = ("validate", "rasterize", "mosaic", "terrain", "patches", "splits", "stats", "metrics")

IMAGERY_BANDS = ("red", "green", "blue", "nir")


class PipelineError(Exception):
    pass


class ValidationFailure(PipelineError):
    """The geology layer failed topology validation."""


@dataclass
class PipelineConfig:
    """Declarative run configuration (INI key-value sections)."""

    geology: str = ""
    dem_tiles: str = ""
    imagery_tiles: str = ""
    hydro: str = ""
    infra: str = ""
    out_dir: str = "out"
    map_code: str = "map"
    crs_id: str = "local"
    patch_size: int = 256
    overlap: float = 0.5
    pixel_size: float = 5.0
    sigma_down: float = 1.0
    sigma_up: float = 1.0
    n_test: int = 1536
    n_val: int = 768
    n_test_cross: int = 0
    seed: int = 0
    cross_index: str = ""
    oversample_classes: tuple = ("Qaf", "Qat")
    oversample_factor: int = 2
    topology_tol: float = 25.0
    scores_in: str = ""
    scores_cross: str = ""
    threshold: float = 0.5
    model_name: str = "model"

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise FileNotFoundError(path)
        cfg = cls()

        def get(section, key, cast, default):
            if cp.has_option(section, key):
                return cast(cp.get(section, key))
            return default

        cfg.geology = get("inputs", "geology", str, cfg.geology)
        cfg.dem_tiles = get("inputs", "dem_tiles", str, cfg.dem_tiles)
        cfg.imagery_tiles = get("inputs", "imagery_tiles", str, cfg.imagery_tiles)
        cfg.hydro = get("inputs", "hydro", str, cfg.hydro)
        cfg.infra = get("inputs", "infra", str, cfg.infra)
        cfg.out_dir = get("output", "dir", str, cfg.out_dir)
        cfg.map_code = get("output", "map_code", str, cfg.map_code)
        cfg.crs_id = get("output", "crs_id", str, cfg.crs_id)
        cfg.patch_size = get("grid", "patch_size", int, cfg.patch_size)
        cfg.overlap = get("grid", "overlap", float, cfg.overlap)
        cfg.pixel_size = get("grid", "pixel_size", float, cfg.pixel_size)
        cfg.topology_tol = get("grid", "topology_tol", float, cfg.topology_tol)
        cfg.sigma_down = get("smoothing", "sigma_down", float, cfg.sigma_down)
        cfg.sigma_up = get("smoothing", "sigma_up", float, cfg.sigma_up)
        cfg.n_test = get("splits", "n_test", int, cfg.n_test)
        cfg.n_val = get("splits", "n_val", int, cfg.n_val)
        cfg.n_test_cross = get("splits", "n_test_cross", int, cfg.n_test_cross)
        cfg.seed = get("splits", "seed", int, cfg.seed)
        cfg.cross_index = get("splits", "cross_index", str, cfg.cross_index)
        cfg.oversample_classes = tuple(
            get("oversample", "classes", lambda s: [c.strip() for c in s.split(",")],
                list(cfg.oversample_classes))
        )
        cfg.oversample_factor = get("oversample", "factor", int, cfg.oversample_factor)
        cfg.scores_in = get("metrics", "scores_in", str, cfg.scores_in)
        cfg.scores_cross = get("metrics", "scores_cross", str, cfg.scores_cross)
        cfg.threshold = get("metrics", "threshold", float, cfg.threshold)
        cfg.model_name = get("metrics", "model_name", str, cfg.model_name)
        return cfg

    def snapshot(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in vars(self).items()}


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class RunManifest:
    """Per-run record of stage inputs, outputs, and checksums."""

    def __init__(self, out_dir):
        self.path = os.path.join(out_dir, "manifest.json")
        self.doc = {"version": __version__, "stages": {}}
        if os.path.exists(self.path):
            with open(self.path) as fh:
                self.doc = json.load(fh)

    def stage_unchanged(self, stage, inputs) -> bool:
        entry = self.doc["stages"].get(stage)
        if entry is None:
            return False
        checksums = {p: _sha256(p) for p in inputs}
        if entry["inputs"] != checksums:
            return False
        return all(os.path.exists(p) for p in entry["outputs"])

    def record(self, stage, inputs, outputs, config, duration):
        self.doc["stages"][stage] = {
            "inputs": {p: _sha256(p) for p in inputs},
            "outputs": {p: _sha256(p) for p in outputs},
            "config": config.snapshot(),
            "duration_s": round(duration, 3),
        }
        with open(self.path, "w") as fh:
            json.dump(self.doc, fh, indent=2, sort_keys=True)


class _RunLock:
    """One run at a time per output directory."""

    def __init__(self, out_dir):
        self.path = os.path.join(out_dir, ".lock")

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise PipelineError(
                f"run directory is locked ({self.path}); remove the lock if stale"
            ) from None
        os.close(fd)
        return self

    def __exit__(self, *exc):
        os.unlink(self.path)


def _reference_geometry(aoi: Polygon, cfg: PipelineConfig) -> GridGeometry:
    """Reference grid: AOI bounding box snapped outward to pixel multiples."""
    h = cfg.pixel_size
    xmin, ymin, xmax, ymax = aoi.bounds()
    ox = np.floor(xmin / h) * h
    oy = np.ceil(ymax / h) * h
    cols = int(np.ceil((xmax - ox) / h))
    rows = int(np.ceil((oy - ymin) / h))
    return GridGeometry(float(ox), float(oy), h, rows, cols, cfg.crs_id)


def _channel_path(out_dir, name):
    return os.path.join(out_dir, "channels", f"{name}.tif")


def _tiles(pattern_or_dir):
    if os.path.isdir(pattern_or_dir):
        paths = sorted(
            glob.glob(os.path.join(pattern_or_dir, "*.tif"))
            + glob.glob(os.path.join(pattern_or_dir, "*.asc"))
        )
    else:
        paths = sorted(glob.glob(pattern_or_dir))
    if not paths:
        raise FileNotFoundError(f"no tiles matching {pattern_or_dir!r}")
    return paths


# --------------------------------------------------------------------------
# stage bodies


def _stage_validate(cfg, out_dir):
    features = read_geojson(cfg.geology)
    polys = [f for f in features if isinstance(f, Polygon)]
    report = validate_topology(polys, cfg.topology_tol)
    report_csv = os.path.join(out_dir, "topology_report.csv")
    summary_txt = os.path.join(out_dir, "topology_summary.txt")
    report.write_csv(report_csv)
    with open(summary_txt, "w") as fh:
        fh.write(report.summary() + "\n")
    if not report.is_clean:
        raise ValidationFailure(report.summary())
    return [cfg.geology], [report_csv, summary_txt]


def _stage_rasterize(cfg, out_dir):
    features = read_geojson(cfg.geology)
    polys = [f for f in features if isinstance(f, Polygon)]
    aoi = derive_aoi(polys)
    geom = _reference_geometry(aoi, cfg)
    aoi_path = os.path.join(out_dir, "aoi.geojson")
    write_geojson(aoi_path, [aoi])
    mask = rasterize(polys, geom, "ordinal_polygons")
    outputs = [aoi_path, _channel_path(out_dir, "mask")]
    os.makedirs(os.path.join(out_dir, "channels"), exist_ok=True)
    write_geotiff(_channel_path(out_dir, "mask"), mask, dtype="uint8")
    inputs = [cfg.geology]
    for name, src in (("nhd", cfg.hydro), ("osm", cfg.infra)):
        feats = read_geojson(src, default_source=name)
        feats = clip(feats, aoi)
        binary = rasterize(feats, geom, "binary_lines")
        write_geotiff(_channel_path(out_dir, name), binary, dtype="uint8")
        inputs.append(src)
        outputs.append(_channel_path(out_dir, name))
    return inputs, outputs


def _read_reference(out_dir) -> GridGeometry:
    mask_path = _channel_path(out_dir, "mask")
    if not os.path.exists(mask_path):
        raise FileNotFoundError(f"{mask_path}: run the rasterize stage first")
    return read_raster(mask_path).geometry


def _stage_mosaic(cfg, out_dir):
    ref = _read_reference(out_dir)
    inputs, outputs = [], []
    dem_paths = _tiles(cfg.dem_tiles)
    dem_tiles = [read_raster(p) for p in dem_paths]
    dem = mosaic(dem_tiles)
    if dem.geometry != ref:
        dem = align_to(dem, ref)
    write_geotiff(_channel_path(out_dir, "dem"), dem)
    inputs += dem_paths
    outputs.append(_channel_path(out_dir, "dem"))

    img_paths = _tiles(cfg.imagery_tiles)
    per_band = {b: [] for b in IMAGERY_BANDS}
    for p in img_paths:
        bands = read_geotiff(p)
        if len(bands) != len(IMAGERY_BANDS):
            raise PipelineError(
                f"{p}: expected {len(IMAGERY_BANDS)} bands, found {len(bands)}"
            )
        for b, r in zip(IMAGERY_BANDS, bands):
            per_band[b].append(r)
    for b in IMAGERY_BANDS:
        band = mosaic(per_band[b])
        band = align_to(band, ref)
        write_geotiff(_channel_path(out_dir, b), band)
        outputs.append(_channel_path(out_dir, b))
    inputs += img_paths
    return inputs, outputs


def _stage_terrain(cfg, out_dir):
    dem_path = _channel_path(out_dir, "dem")
    dem = read_raster(dem_path)
    outputs = []
    for name, r in terrain_stack(dem, cfg.sigma_down, cfg.sigma_up):
        path = _channel_path(out_dir, name)
        write_geotiff(path, r)
        outputs.append(path)
    return [dem_path], outputs


def _stage_patches(cfg, out_dir, jobs=1):
    aoi_path = os.path.join(out_dir, "aoi.geojson")
    aoi = read_geojson(aoi_path)[0]
    ref = _read_reference(out_dir)
    geology = [f for f in read_geojson(cfg.geology) if isinstance(f, Polygon)]
    specs = generate_grid(aoi, ref, cfg.patch_size, cfg.overlap, cfg.map_code)
    labels = [compute_labels(p, geology) for p in specs]

    stack = []
    inputs = [aoi_path, cfg.geology]
    for name in CHANNEL_NAMES:
        path = _channel_path(out_dir, name)
        stack.append((name, read_raster(path)))
        inputs.append(path)

    patch_dir = os.path.join(out_dir, "patches")
    os.makedirs(patch_dir, exist_ok=True)
    outputs = []

    def _write_patch(spec):
        paths = []
        for name, r in extract_channels(stack, spec):
            path = os.path.join(patch_dir, f"{spec.patch_id}_{name}.tif")
            write_geotiff(path, r, dtype="uint8" if name == "mask" else "float32")
            paths.append(path)
        return paths

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for paths in pool.map(_write_patch, specs):
                outputs.extend(paths)
    else:
        for spec in specs:
            outputs.extend(_write_patch(spec))

    index_path = os.path.join(out_dir, "patches.geojson")
    labels_path = os.path.join(out_dir, "labels.csv")
    write_index(specs, labels, index_path, labels_path)
    outputs += [index_path, labels_path]
    return inputs, outputs


def _stage_splits(cfg, out_dir):
    index_path = os.path.join(out_dir, "patches.geojson")
    specs = read_index(index_path)
    graph = build_overlap_graph(specs)
    inputs = [index_path]
    cross = None
    if cfg.cross_index:
        cross = read_index(cfg.cross_index)
        inputs.append(cfg.cross_index)
    manifest = sample_splits(
        specs, graph, cfg.n_test, cfg.n_val, cfg.seed, cross, cfg.n_test_cross
    )
    splits_path = os.path.join(out_dir, "splits.json")
    with open(splits_path, "w") as fh:
        fh.write(manifest.to_json())
    return inputs, [splits_path]


def _stage_stats(cfg, out_dir):
    labels_path = os.path.join(out_dir, "labels.csv")
    labels = read_labels(labels_path)
    stats = dataset_stats(labels)
    stats_path = os.path.join(out_dir, "stats.csv")
    stats.write_csv(stats_path)
    return [labels_path], [stats_path]


def _stage_metrics(cfg, out_dir):
    if not cfg.scores_in:
        raise PipelineError("metrics stage requires [metrics] scores_in")
    table_in = ScoreTable.read_csv(cfg.scores_in)
    report_in = evaluate(table_in, cfg.threshold)
    in_path = os.path.join(out_dir, "metrics_in.csv")
    report_in.write_csv(in_path)
    inputs, outputs = [cfg.scores_in], [in_path]
    if cfg.scores_cross:
        table_cross = ScoreTable.read_csv(cfg.scores_cross)
        report_cross = evaluate(table_cross, cfg.threshold)
        cross_path = os.path.join(out_dir, "metrics_cross.csv")
        report_cross.write_csv(cross_path)
        delta_path = os.path.join(out_dir, "delta_auc.csv")
        write_delta_auc_csv(
            delta_path, {cfg.model_name: delta_auc(report_in, report_cross)}
        )
        inputs.append(cfg.scores_cross)
        outputs += [cross_path, delta_path]
    return inputs, outputs


_STAGE_FUNCS = {
    "validate": _stage_validate,
    "rasterize": _stage_rasterize,
    "mosaic": _stage_mosaic,
    "terrain": _stage_terrain,
    "patches": _stage_patches,
    "splits": _stage_splits,
    "stats": _stage_stats,
    "metrics": _stage_metrics,
}


def run_stage(stage: str, cfg: PipelineConfig, resume: bool = False, jobs: int = 1):
    """Run one pipeline stage, updating the run manifest."""
    if stage not in _STAGE_FUNCS:
        raise ValueError(f"unknown stage {stage!r}")
    out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest(out_dir)
    with _RunLock(out_dir):
        t0 = time.monotonic()
        func = _STAGE_FUNCS[stage]
        kwargs = {"jobs": jobs} if stage == "patches" else {}
        if resume:
            entry = manifest.doc["stages"].get(stage)
            if entry is not None and all(
                os.path.exists(p) for p in entry["inputs"]
            ) and manifest.stage_unchanged(stage, list(entry["inputs"])):
                return manifest
        inputs, outputs = func(cfg, out_dir, **kwargs)
        manifest.record(stage, inputs, outputs, cfg, time.monotonic() - t0)
    return manifest


def run_all(cfg: PipelineConfig, resume: bool = False, jobs: int = 1):
    """Run every stage in dependency order; metrics only when configured."""
    for stage in STAGES:
        if stage == "metrics" and not cfg.scores_in:
            continue
        run_stage(stage, cfg, resume=resume, jobs=jobs)
