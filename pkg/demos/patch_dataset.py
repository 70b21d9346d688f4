"""Build a labeled patch dataset with leakage-free splits.

Covers the dataset side of the pipeline: the half-overlapping patch grid,
exact area-proportional labels, the patch overlap graph, seeded spatial
splits, minority-class oversampling, and dataset statistics.
"""

import numpy as np

from terrapatch import (
    CLASS_NAMES,
    GridGeometry,
    Polygon,
    build_overlap_graph,
    compute_labels,
    dataset_stats,
    generate_grid,
    oversample,
    sample_splits,
)

# 640x640-px reference grid at 5 ft/px; AOI is the full square.
n, h = 640, 5.0
extent = n * h
geom = GridGeometry(0.0, extent, h, n, n, crs_id="demo")
ring = np.array([(0, 0), (extent, 0), (extent, extent), (0, extent), (0, 0)], float)
aoi = Polygon(ring)

# Geology: three vertical strips plus a Qat terrace lens in the middle.
def box(x0, y0, w, hh, unit):
    r = np.array([(x0, y0), (x0 + w, y0), (x0 + w, y0 + hh), (x0, y0 + hh), (x0, y0)], float)
    return Polygon(r, unit=unit)

geology = [
    box(0, 0, 0.45 * extent, extent, "Qal"),
    box(0.45 * extent, 0, 0.3 * extent, extent, "Qc"),
    box(0.75 * extent, 0, 0.25 * extent, extent, "Qr"),
]
lens = box(0.4 * extent, 0.4 * extent, 0.2 * extent, 0.2 * extent, "Qat")

print("patch grid")
print("----------")
patches = generate_grid(aoi, geom, size=128, overlap=0.5, map_code="demo")
print(f"  {len(patches)} patches of 128 px at 64-px stride")
print(f"  first: {patches[0].patch_id} rect {patches[0].geo_rect}")

print()
print("labels (area proportions over the 7 classes)")
print("--------------------------------------------")
labels = [compute_labels(p, geology + [lens]) for p in patches]
rec = labels[len(labels) // 2]
for name, on, prop in zip(CLASS_NAMES, rec.onehot, rec.proportions):
    if prop > 0:
        print(f"  {rec.patch_id} {name:>4}: {prop:6.3f} present={bool(on)}")

print()
print("spatial splits (overlap-aware)")
print("------------------------------")
graph = build_overlap_graph(patches)
interior = patches[len(patches) // 2].patch_id
print(f"  interior patch {interior} overlaps {len(graph[interior])} neighbors")
manifest = sample_splits(patches, graph, n_test=10, n_val=6, seed=42)
for split in ("train", "val", "test_in", "unused"):
    print(f"  {split:>8}: {len(manifest.ids(split))}")
# no val/train patch overlaps a test patch:
test = set(manifest.ids("test_in"))
leaks = [p for p in manifest.ids("train") + manifest.ids("val") if graph[p] & test]
print(f"  leaking assignments: {len(leaks)}")

print()
print("oversampling the rare terrace class")
print("-----------------------------------")
train_ids = manifest.ids("train")
onehots = {r.patch_id: r.onehot for r in labels}
resampled = oversample(train_ids, onehots, {"Qaf", "Qat"}, factor=2)
print(f"  train {len(train_ids)} -> {len(resampled)} entries after 2x on Qaf/Qat")

print()
print("dataset statistics")
print("------------------")
stats = dataset_stats(labels)
for name, count in zip(CLASS_NAMES, stats.class_counts):
    print(f"  {name:>4}: present in {int(count):3d} patches")
print(f"  classes per patch: {dict(sorted(stats.classes_per_patch.items()))}")
