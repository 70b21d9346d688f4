"""Spatially independent train/val/test splits, oversampling, dataset statistics."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .patches import LabelRecord, PatchSpec
from .vector import CLASS_NAMES, NUM_CLASSES

RNG_NAME = "numpy-pcg64"

#: Proportion histograms use this fixed bin width.
HIST_BIN_WIDTH = 0.05
HIST_BINS = int(round(1.0 / HIST_BIN_WIDTH))

SPLIT_NAMES = ("train", "val", "test_in", "test_cross", "unused")


def build_overlap_graph(patches: list[PatchSpec]) -> dict[str, set]:
    """Adjacency over patch ids: edge iff geo_rects intersect with positive area.

    Touching edges do not count.
    """
    ids = [p.patch_id for p in patches]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate patch ids")
    graph = {pid: set() for pid in ids}
    # sweep over x-sorted rectangles; candidates limited to x-overlap
    order = sorted(range(len(patches)), key=lambda i: patches[i].geo_rect[0])
    active = []
    for i in order:
        xmin, ymin, xmax, ymax = patches[i].geo_rect
        active = [j for j in active if patches[j].geo_rect[2] > xmin]
        for j in active:
            bx0, by0, bx1, by1 = patches[j].geo_rect
            if by0 < ymax and by1 > ymin:
                graph[ids[i]].add(ids[j])
                graph[ids[j]].add(ids[i])
        active.append(i)
    return graph


@dataclass
class SplitManifest:
    """Seeded, reproducible assignment of patches to splits."""

    seed: int
    generator: str
    assignments: dict  # patch_id -> split name
    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.counts:
            self.counts = dict(Counter(self.assignments.values()))

    def ids(self, split: str) -> list[str]:
        return sorted(pid for pid, s in self.assignments.items() if s == split)

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "generator": self.generator,
            "counts": {s: self.counts.get(s, 0) for s in SPLIT_NAMES},
            "splits": {s: self.ids(s) for s in SPLIT_NAMES},
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        doc = json.loads(text)
        assignments = {}
        for split, ids in doc["splits"].items():
            for pid in ids:
                assignments[pid] = split
        return cls(doc["seed"], doc["generator"], assignments)


def sample_splits(
    patches: list[PatchSpec],
    graph: dict[str, set],
    n_test: int,
    n_val: int,
    seed: int,
    cross_patches: list[PatchSpec] | None = None,
    n_test_cross: int = 0,
) -> SplitManifest:
    """Greedy seeded split: test first, then non-overlapping val, then train.

    Train keeps every remaining patch with no overlap into val or test.
    The optional cross-domain test set is drawn from a separate region's
    patches and never interacts with the overlap graph.
    """
    ids = sorted(p.patch_id for p in patches)
    if n_test > len(ids):
        raise ValueError(f"n_test={n_test} exceeds {len(ids)} patches")
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]

    test = set(order[:n_test])
    val = set()
    for pid in order[n_test:]:
        if len(val) == n_val:
            break
        if graph[pid] & test:
            continue
        val.add(pid)
    if len(val) < n_val:
        raise ValueError(
            f"requested n_val={n_val} infeasible; max achievable is {len(val)}"
        )
    blocked = test | val
    assignments = {}
    for pid in ids:
        if pid in test:
            assignments[pid] = "test_in"
        elif pid in val:
            assignments[pid] = "val"
        elif graph[pid] & blocked:
            assignments[pid] = "unused"
        else:
            assignments[pid] = "train"

    if cross_patches:
        cross_ids = sorted(p.patch_id for p in cross_patches)
        if n_test_cross > len(cross_ids):
            raise ValueError(
                f"n_test_cross={n_test_cross} exceeds {len(cross_ids)} patches"
            )
        cross_order = [cross_ids[i] for i in rng.permutation(len(cross_ids))]
        for pid in cross_order[:n_test_cross]:
            assignments[pid] = "test_cross"
    return SplitManifest(seed, RNG_NAME, assignments)


def oversample(
    train_ids: list[str],
    labels: dict[str, np.ndarray],
    target_classes: set[str] = frozenset({"Qaf", "Qat"}),
    factor: int = 2,
) -> list[str]:
    """Repeat patches that carry any target class (factor - 1) extra times."""
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    idx = []
    for cls in target_classes:
        if cls not in CLASS_NAMES:
            raise ValueError(f"unknown geologic class {cls!r}")
        idx.append(CLASS_NAMES.index(cls))
    result = list(train_ids)
    for pid in train_ids:
        onehot = labels[pid]
        if any(onehot[i] for i in idx):
            result.extend([pid] * (factor - 1))
    return result


@dataclass
class DatasetStats:
    class_counts: np.ndarray          # (7,) positive patches per class
    proportion_hists: np.ndarray      # (7, 20) counts per 0.05 bin
    classes_per_patch: dict           # n classes -> patch count

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            bins = [f"bin_{i * HIST_BIN_WIDTH:.2f}" for i in range(HIST_BINS)]
            w.writerow(["class", "count"] + bins)
            for k, name in enumerate(CLASS_NAMES):
                w.writerow(
                    [name, int(self.class_counts[k])]
                    + [int(v) for v in self.proportion_hists[k]]
                )
            w.writerow([])
            w.writerow(["classes_per_patch", "count"])
            for n in sorted(self.classes_per_patch):
                w.writerow([n, self.classes_per_patch[n]])


def dataset_stats(labels: list[LabelRecord]) -> DatasetStats:
    """Class counts, proportion histograms, and classes-per-patch histogram."""
    if not labels:
        raise ValueError("dataset_stats requires a non-empty label table")
    counts = np.zeros(NUM_CLASSES, dtype=np.int64)
    hists = np.zeros((NUM_CLASSES, HIST_BINS), dtype=np.int64)
    per_patch = Counter()
    for rec in labels:
        n = int(rec.onehot.sum())
        per_patch[n] += 1
        for k in range(NUM_CLASSES):
            if rec.onehot[k]:
                counts[k] += 1
                b = min(HIST_BINS - 1, int(rec.proportions[k] / HIST_BIN_WIDTH))
                hists[k, b] += 1
    return DatasetStats(counts, hists, dict(per_patch))
