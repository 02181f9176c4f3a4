"""Result serialization: TSV tables, weight-map volumes, SVG box plots.

All numeric TSV fields are written with 17 significant digits so reruns can
be compared byte-for-byte.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DescriptorMismatch, EmptyDistribution, IoFailure
from .features import RegionList, VoxelIndexMap
from .metrics import MetricsRecord
from .nifti import write_nifti
from .volume import Volume3D

METRICS_HEADER = ["split", "tp", "fn", "tn", "fp", "accuracy",
                  "balanced_accuracy", "sensitivity", "specificity", "auc",
                  "selected_params"]
PREDICTIONS_HEADER = ["subject_id", "split", "true_label", "predicted_label",
                      "score"]
SUMMARY_HEADER = ["metric", "mean", "sd"]
SPLITS_HEADER = ["split", "train_ids", "test_ids"]


def _g17(x):
    return format(float(x), ".17g")


def _params_str(params):
    return ",".join(f"{k}={v}" for k, v in sorted(params.items()))


def _write_tsv(path, header, rows):
    lines = ["\t".join(header)]
    lines.extend("\t".join(r) for r in rows)
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def emit_reports(result, out_dir):
    """Write metrics_per_split.tsv, subject_predictions.tsv, summary.tsv,
    splits.tsv from an ExperimentResult."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for i, (rec, params) in enumerate(zip(result.per_split_metrics,
                                          result.selected_params)):
        rows.append([str(i), str(rec.tp), str(rec.fn), str(rec.tn), str(rec.fp),
                     _g17(rec.accuracy), _g17(rec.balanced_accuracy),
                     _g17(rec.sensitivity), _g17(rec.specificity), _g17(rec.auc),
                     _params_str(params)])
    _write_tsv(out_dir / "metrics_per_split.tsv", METRICS_HEADER, rows)

    rows = [[sid, str(split), str(t), str(p), _g17(s)]
            for sid, split, t, p, s in result.predictions]
    _write_tsv(out_dir / "subject_predictions.tsv", PREDICTIONS_HEADER, rows)

    rows = [[m, _g17(result.summary[m][0]), _g17(result.summary[m][1])]
            for m in MetricsRecord.FIELDS]
    _write_tsv(out_dir / "summary.tsv", SUMMARY_HEADER, rows)

    rows = []
    for i, (train, test) in enumerate(result.plan.splits):
        rows.append([str(i),
                     ",".join(result.subject_ids[t] for t in train),
                     ",".join(result.subject_ids[t] for t in test)])
    _write_tsv(out_dir / "splits.tsv", SPLITS_HEADER, rows)


def emit_single_metrics(record: MetricsRecord, params, out_dir):
    """Cross-dataset evaluation output: one metrics row, no SD."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    row = [["0", str(record.tp), str(record.fn), str(record.tn), str(record.fp),
            _g17(record.accuracy), _g17(record.balanced_accuracy),
            _g17(record.sensitivity), _g17(record.specificity), _g17(record.auc),
            _params_str(params)]]
    _write_tsv(out_dir / "metrics.tsv", METRICS_HEADER, row)


def emit_weight_volume(linear_model, descriptor, reference_grid, out_path):
    """Paint model weights back into a volume.

    Voxel descriptors write each weight at its masked voxel (0 elsewhere);
    regional descriptors give every voxel of a region its region weight.
    `reference_grid` supplies dims/voxel size/affine, and for regional
    descriptors must be the LabelVolume atlas itself.
    """
    w = linear_model.weights
    if len(descriptor) != w.size:
        raise DescriptorMismatch(
            f"descriptor length {len(descriptor)} != weight count {w.size}")
    dims = reference_grid.dims
    flat = np.zeros(int(np.prod(dims)))
    if isinstance(descriptor, VoxelIndexMap):
        flat[descriptor.indices] = w
    elif isinstance(descriptor, RegionList):
        labels = getattr(reference_grid, "labels", None)
        if labels is None:
            raise DescriptorMismatch("regional weights need the atlas as reference grid")
        flat_labels = labels.ravel(order="F")
        for rid, weight in zip(descriptor.ids, w):
            flat[flat_labels == rid] = weight
    else:
        raise DescriptorMismatch(f"unknown descriptor type {type(descriptor).__name__}")
    vol = Volume3D(flat.reshape(dims, order="F"), reference_grid.voxel_size_mm,
                   reference_grid.affine)
    write_nifti(vol, out_path)


# --- box plots ------------------------------------------------------------------


def quartiles(values):
    """Q1, median, Q3 by linear interpolation between order statistics."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    return tuple(float(np.percentile(v, q, method="linear")) for q in (25, 50, 75))


def emit_boxplot_svg(metric_distributions, out_path,
                     width_per_box=120, height=320):
    """Static SVG with median, quartile box, 1.5*IQR whiskers, outlier dots.

    metric_distributions: ordered mapping name -> sequence of values.
    """
    items = list(metric_distributions.items())
    if not items or any(len(v) == 0 for _, v in items):
        raise EmptyDistribution("every distribution needs at least one value")

    all_vals = np.concatenate([np.asarray(v, dtype=np.float64) for _, v in items])
    lo, hi = float(all_vals.min()), float(all_vals.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    top, bottom = 20, height - 40

    def y(v):
        return bottom - (v - lo) / (hi - lo) * (bottom - top)

    width = width_per_box * len(items) + 60
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<line x1="40" y1="{top}" x2="40" y2="{bottom}" stroke="black"/>']
    for i, (name, values) in enumerate(items):
        v = np.asarray(values, dtype=np.float64)
        q1, med, q3 = quartiles(v)
        iqr = q3 - q1
        wlo_bound, whi_bound = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = v[(v >= wlo_bound) & (v <= whi_bound)]
        wlo, whi = float(inside.min()), float(inside.max())
        outliers = v[(v < wlo_bound) | (v > whi_bound)]
        cx = 60 + i * width_per_box + width_per_box / 2
        half = width_per_box * 0.25
        parts.append(f'<line x1="{cx}" y1="{y(whi)}" x2="{cx}" y2="{y(q3)}" stroke="black"/>')
        parts.append(f'<line x1="{cx}" y1="{y(q1)}" x2="{cx}" y2="{y(wlo)}" stroke="black"/>')
        parts.append(f'<rect x="{cx - half}" y="{y(q3)}" width="{2 * half}" '
                     f'height="{max(y(q1) - y(q3), 0.0)}" fill="none" stroke="black"/>')
        parts.append(f'<line x1="{cx - half}" y1="{y(med)}" x2="{cx + half}" '
                     f'y2="{y(med)}" stroke="black" stroke-width="2"/>')
        for o in outliers:
            parts.append(f'<circle cx="{cx}" cy="{y(float(o))}" r="2" fill="black"/>')
        parts.append(f'<text x="{cx}" y="{height - 20}" text-anchor="middle" '
                     f'font-size="12">{name}</text>')
    parts.append("</svg>")
    try:
        Path(out_path).write_text("\n".join(parts) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot write {out_path}: {e}") from e
