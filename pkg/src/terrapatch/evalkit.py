"""Model-side math: normalization, label-safe augmentation, focal loss, metrics.

Scores are post-sigmoid probabilities per class; targets are presence
booleans. All metrics follow fixed conventions: threshold 0.5,
zero-denominator precision/recall/F1 defined as 0, step-wise
(non-interpolated) average precision with tied scores grouped, AUROC as the
normalized Mann-Whitney U statistic with ties counted 0.5.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .vector import CLASS_NAMES, NUM_CLASSES

PROB_CLAMP = 1e-7
DEFAULT_THRESHOLD = 0.5

AUGMENT_OPS = ("hflip", "vflip", "rot90", "rot180", "rot270")


@dataclass
class Sample:
    """One training example: stacked channels plus the 7-class target."""

    channels: np.ndarray              # (C, H, W)
    target: np.ndarray                # (7,) bool
    channel_modalities: list = field(default_factory=list)  # modality tag per channel


def normalize(sample: Sample, stats: dict) -> Sample:
    """Standardize each channel with its modality's (mean, stddev) pair."""
    if len(sample.channel_modalities) != sample.channels.shape[0]:
        raise ValueError("one modality tag per channel is required")
    out = np.empty_like(sample.channels, dtype=np.float64)
    for i, modality in enumerate(sample.channel_modalities):
        mean, std = stats[modality]
        if std <= 0:
            raise ValueError(f"modality {modality!r} has non-positive stddev")
        out[i] = (sample.channels[i] - mean) / std
    return Sample(out, sample.target.copy(), list(sample.channel_modalities))


def augment(sample: Sample, op: str) -> Sample:
    """Flip or 90-degree-rotate every channel identically; target unchanged."""
    c = sample.channels
    if op in ("rot90", "rot180", "rot270") and c.shape[-1] != c.shape[-2]:
        raise ValueError("rotations require square channels")
    if op == "hflip":
        out = c[..., :, ::-1]
    elif op == "vflip":
        out = c[..., ::-1, :]
    elif op == "rot90":
        out = np.rot90(c, k=1, axes=(-2, -1))
    elif op == "rot180":
        out = np.rot90(c, k=2, axes=(-2, -1))
    elif op == "rot270":
        out = np.rot90(c, k=3, axes=(-2, -1))
    else:
        raise ValueError(f"unknown augmentation {op!r}")
    return Sample(out.copy(), sample.target.copy(), list(sample.channel_modalities))


def focal_loss(probs, targets, alpha: float = 0.25, gamma: float = 2.0) -> np.ndarray:
    """Focal loss per sample, averaged over classes.

    Per class: -alpha_t * (1 - p_t)^gamma * ln(p_t) with p_t = p for
    positives, 1 - p for negatives; alpha_t = alpha for positives,
    1 - alpha for negatives. Probabilities are clamped away from 0 and 1.
    """
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(targets, dtype=bool)
    p_t = np.where(y, p, 1.0 - p)
    a_t = np.where(y, alpha, 1.0 - alpha)
    per_class = -a_t * (1.0 - p_t) ** gamma * np.log(p_t)
    return per_class.mean(axis=-1)


@dataclass
class ScoreTable:
    """Post-sigmoid probabilities and boolean targets, one row per patch."""

    ids: list
    scores: np.ndarray   # (N, 7) in (0, 1)
    targets: np.ndarray  # (N, 7) bool

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=bool)
        if self.scores.shape != self.targets.shape:
            raise ValueError("scores/targets shape mismatch")

    @classmethod
    def read_csv(cls, path) -> "ScoreTable":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            ids, scores, targets = [], [], []
            for row in reader:
                ids.append(row["patch_id"])
                scores.append([float(row[f"s_{c}"]) for c in CLASS_NAMES])
                targets.append([row[f"y_{c}"] == "1" for c in CLASS_NAMES])
        return cls(ids, np.array(scores), np.array(targets))

    def write_csv(self, path):
        header = (
            ["patch_id"]
            + [f"s_{c}" for c in CLASS_NAMES]
            + [f"y_{c}" for c in CLASS_NAMES]
        )
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for pid, s, y in zip(self.ids, self.scores, self.targets):
                w.writerow([pid] + [repr(float(v)) for v in s] + [int(v) for v in y])


def binary_confusion(pred: np.ndarray, target: np.ndarray):
    tp = int(np.sum(pred & target))
    fp = int(np.sum(pred & ~target))
    fn = int(np.sum(~pred & target))
    tn = int(np.sum(~pred & ~target))
    return tp, fp, fn, tn


def _safe_div(num, den):
    return num / den if den > 0 else 0.0


def average_precision(scores, targets) -> float:
    """Step-wise AP over descending-score prefixes, tied scores grouped.

    NaN when there are no positives.
    """
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets, dtype=bool)
    n_pos = int(targets.sum())
    if n_pos == 0:
        return float("nan")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    t = targets[order]
    ap = 0.0
    r_prev = 0.0
    tp = 0
    seen = 0
    i = 0
    n = len(s)
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            j += 1
        tp += int(t[i:j].sum())
        seen += j - i
        r = tp / n_pos
        p = tp / seen
        ap += (r - r_prev) * p
        r_prev = r
        i = j
    return float(ap)


def auroc(scores, targets) -> float:
    """Mann-Whitney AUROC: P(random positive outranks random negative).

    Tied score pairs count 0.5. NaN when only one class is present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets, dtype=bool)
    n_pos = int(targets.sum())
    n_neg = len(targets) - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j < len(scores) and sorted_scores[j] == sorted_scores[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j - 1) + 1.0  # average 1-based rank
        i = j
    u = float(ranks[targets].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass
class MetricReport:
    """Per-class and aggregate multilabel metrics for one score table."""

    accuracy: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    ap: np.ndarray
    auroc: np.ndarray
    hamming_loss: float
    subset_accuracy: float

    def macro(self, values: np.ndarray) -> float:
        """Unweighted mean, skipping undefined (NaN) classes."""
        finite = values[~np.isnan(values)]
        return float(finite.mean()) if finite.size else float("nan")

    @property
    def macro_f1(self) -> float:
        return self.macro(self.f1)

    @property
    def mean_ap(self) -> float:
        return self.macro(self.ap)

    def write_csv(self, path):
        rows = {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "ap": self.ap,
            "auroc": self.auroc,
        }
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric"] + list(CLASS_NAMES) + ["avg"])
            for name, vals in rows.items():
                w.writerow([name] + [f"{v:.6f}" for v in vals] + [f"{self.macro(vals):.6f}"])
            w.writerow(["hamming_loss", f"{self.hamming_loss:.6f}"])
            w.writerow(["subset_accuracy", f"{self.subset_accuracy:.6f}"])


def per_class_metrics(table: ScoreTable, threshold: float = DEFAULT_THRESHOLD):
    """Thresholded accuracy/precision/recall/F1 arrays, one entry per class."""
    if table.scores.shape[0] == 0:
        raise ValueError("empty score table")
    preds = table.scores >= threshold
    n = table.scores.shape[0]
    acc = np.zeros(NUM_CLASSES)
    prec = np.zeros(NUM_CLASSES)
    rec = np.zeros(NUM_CLASSES)
    f1 = np.zeros(NUM_CLASSES)
    for k in range(NUM_CLASSES):
        tp, fp, fn, tn = binary_confusion(preds[:, k], table.targets[:, k])
        acc[k] = (tp + tn) / n
        prec[k] = _safe_div(tp, tp + fp)
        rec[k] = _safe_div(tp, tp + fn)
        f1[k] = _safe_div(2 * prec[k] * rec[k], prec[k] + rec[k])
    return acc, prec, rec, f1


def evaluate(table: ScoreTable, threshold: float = DEFAULT_THRESHOLD) -> MetricReport:
    """Full multilabel metric suite over one score table."""
    acc, prec, rec, f1 = per_class_metrics(table, threshold)
    ap = np.array(
        [average_precision(table.scores[:, k], table.targets[:, k]) for k in range(NUM_CLASSES)]
    )
    auc = np.array(
        [auroc(table.scores[:, k], table.targets[:, k]) for k in range(NUM_CLASSES)]
    )
    preds = table.scores >= threshold
    wrong = preds != table.targets
    hamming = float(wrong.mean())
    subset = float(np.mean(~wrong.any(axis=1)))
    return MetricReport(acc, prec, rec, f1, ap, auc, hamming, subset)


def delta_auc(in_domain: MetricReport, cross_domain: MetricReport) -> np.ndarray:
    """Per-class AUC difference: in-domain minus cross-domain."""
    if in_domain.auroc.shape != cross_domain.auroc.shape:
        raise ValueError("class sets do not match")
    return in_domain.auroc - cross_domain.auroc


def write_delta_auc_csv(path, rows: dict):
    """ΔAUC table: one row per model, one column per class."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model"] + list(CLASS_NAMES))
        for model, deltas in rows.items():
            w.writerow([model] + [f"{v:.6f}" for v in deltas])
