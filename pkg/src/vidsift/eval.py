"""Model evaluation: stratified splits, confusion metrics, and threshold sweeps.

Beyond the usual precision/recall/F1, the sweep tracks two operating-point
metrics: utility precision (fraction of pairs with at least one relevant
video that the model actually surfaces) and false-positive rate. Reports are
written as sweep.csv, sweep.svg and metrics.json.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import forest

DEFAULT_FPR_TARGET = 0.07


class EvalError(ValueError):
    pass


def default_thresholds() -> list[float]:
    return [round(i * 0.05, 2) for i in range(21)]


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise EvalError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    confusion: Confusion
    precision: float
    recall: float
    f1: float
    fpr: float
    utility_precision: float


@dataclass(frozen=True)
class EvalReport:
    at_half: tuple[float, float, float]
    sweep: tuple[SweepRow, ...]
    n_test_rows: int
    n_test_pairs: int
    fpr_target: float
    threshold_at_fpr_target: Optional[float]

    def __post_init__(self):
        thresholds = [row.threshold for row in self.sweep]
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise EvalError("sweep thresholds must be strictly increasing")


def split_train_test(rows, ratio: float = 0.8, seed: int = 0):
    """Stratified train/test split keeping each (pair_id, video_id) on one side.

    Per-class train counts come from largest-remainder rounding of
    ratio * class size, so a 100-row set at 43% positive really does split
    80:20.
    """
    rows = list(rows)
    if not 0.0 < ratio < 1.0:
        raise EvalError("ratio must be strictly between 0 and 1")
    if len(rows) < 10:
        raise EvalError("need at least 10 labeled rows to split")
    labels = {row.label for row in rows}
    if None in labels:
        raise EvalError("all rows must be labeled")
    if len(labels) < 2:
        raise EvalError("both classes must be present")

    # Group by the labeled unit so duplicates of one unit never straddle
    # the split; a group is stratified under its first label.
    group_rows: dict[tuple[str, str], list] = {}
    for row in rows:
        group_rows.setdefault((row.pair_id, row.video_id), []).append(row)
    group_keys = sorted(group_rows)
    group_label = {key: group_rows[key][0].label for key in group_keys}

    by_class: dict[str, list] = {}
    for key in group_keys:
        by_class.setdefault(group_label[key], []).append(key)

    n_groups = len(group_keys)
    classes = sorted(by_class)
    exact = {c: ratio * len(by_class[c]) for c in classes}
    base = {c: int(math.floor(exact[c])) for c in classes}
    target_total = int(math.floor(ratio * n_groups + 0.5))
    extras = target_total - sum(base.values())
    for c in sorted(classes, key=lambda c: (-(exact[c] - base[c]), c)):
        if extras <= 0:
            break
        if base[c] < len(by_class[c]):
            base[c] += 1
            extras -= 1

    rng = np.random.Generator(np.random.PCG64(seed))
    train_keys: set[tuple[str, str]] = set()
    for c in classes:
        keys = by_class[c]
        order = rng.permutation(len(keys))
        train_keys.update(keys[i] for i in order[: base[c]])

    train = [row for row in rows if (row.pair_id, row.video_id) in train_keys]
    test = [row for row in rows if (row.pair_id, row.video_id) not in train_keys]
    return train, test


def confusion_at(probas: Sequence[float], labels: Sequence[str], threshold: float) -> Confusion:
    """Confusion counts with predicted-positive defined as proba >= threshold."""
    if len(probas) != len(labels):
        raise EvalError("probas and labels must have equal length")
    tp = fp = tn = fn = 0
    for proba, label in zip(probas, labels):
        if not 0.0 <= proba <= 1.0:
            raise EvalError(f"probability out of range: {proba!r}")
        predicted = proba >= threshold
        actual = label == "+"
        if predicted and actual:
            tp += 1
        elif predicted:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    return Confusion(tp=tp, fp=fp, tn=tn, fn=fn)


def prf(confusion: Confusion) -> tuple[float, float, float]:
    """(precision, recall, f1), each 0 when its denominator is 0."""
    tp, fp, fn = confusion.tp, confusion.fp, confusion.fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def fpr(confusion: Confusion) -> float:
    """fp / (fp + tn); 0 when there are no actual negatives."""
    denominator = confusion.fp + confusion.tn
    return confusion.fp / denominator if denominator else 0.0


def utility_precision(rows_by_pair: dict, threshold: float) -> float:
    """Fraction of pairs with a relevant video where one is predicted relevant.

    A pair counts in the denominator when it has at least one row with true
    label "+", and in the numerator when at least one of those rows also has
    proba >= threshold. Pairs with only negative labels are ignored.
    """
    n_labeled = 0
    n_predicted = 0
    for rows in rows_by_pair.values():
        positives = [proba for proba, label in rows if label == "+"]
        if not positives:
            continue
        n_labeled += 1
        if any(proba >= threshold for proba in positives):
            n_predicted += 1
    return n_predicted / n_labeled if n_labeled else 0.0


def sweep(model, test_rows, thresholds: Optional[Sequence[float]] = None,
          fpr_target: float = DEFAULT_FPR_TARGET) -> EvalReport:
    """Evaluate the model across a threshold grid; probabilities computed once."""
    test_rows = list(test_rows)
    if not test_rows:
        raise EvalError("test set must be non-empty")
    for row in test_rows:
        if row.label is None:
            raise EvalError("test rows must be labeled")
    grid = list(thresholds) if thresholds is not None else default_thresholds()
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise EvalError("thresholds must be strictly increasing")

    probas = forest.predict_proba_many(model, test_rows)
    labels = [row.label for row in test_rows]
    by_pair: dict[str, list[tuple[float, str]]] = {}
    for proba, row in zip(probas, test_rows):
        by_pair.setdefault(row.pair_id, []).append((proba, row.label))

    rows = []
    for threshold in grid:
        confusion = confusion_at(probas, labels, threshold)
        precision, recall, f1 = prf(confusion)
        rows.append(SweepRow(
            threshold=threshold,
            confusion=confusion,
            precision=precision,
            recall=recall,
            f1=f1,
            fpr=fpr(confusion),
            utility_precision=utility_precision(by_pair, threshold),
        ))

    threshold_at_target = None
    for row in rows:
        if row.fpr <= fpr_target:
            threshold_at_target = row.threshold
            break

    return EvalReport(
        at_half=prf(confusion_at(probas, labels, 0.5)),
        sweep=tuple(rows),
        n_test_rows=len(test_rows),
        n_test_pairs=len(by_pair),
        fpr_target=fpr_target,
        threshold_at_fpr_target=threshold_at_target,
    )


def sweep_csv_text(report: EvalReport) -> str:
    lines = ["threshold,tp,fp,tn,fn,precision,recall,f1,fpr,utility_precision"]
    for row in report.sweep:
        c = row.confusion
        lines.append(",".join([
            repr(row.threshold), str(c.tp), str(c.fp), str(c.tn), str(c.fn),
            repr(row.precision), repr(row.recall), repr(row.f1),
            repr(row.fpr), repr(row.utility_precision),
        ]))
    return "\n".join(lines) + "\n"


_SVG_WIDTH = 640
_SVG_HEIGHT = 480
_SVG_LEFT, _SVG_RIGHT = 60.0, 610.0
_SVG_TOP, _SVG_BOTTOM = 40.0, 430.0


def _svg_x(t: float) -> str:
    return f"{_SVG_LEFT + t * (_SVG_RIGHT - _SVG_LEFT):.2f}"


def _svg_y(v: float) -> str:
    return f"{_SVG_BOTTOM - v * (_SVG_BOTTOM - _SVG_TOP):.2f}"


def sweep_svg_text(report: EvalReport) -> str:
    """Two-curve plot (utility precision and FPR vs threshold), deterministic bytes."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_SVG_WIDTH} {_SVG_HEIGHT}">',
        f'<rect x="0" y="0" width="{_SVG_WIDTH}" height="{_SVG_HEIGHT}" fill="white"/>',
        f'<line x1="{_svg_x(0)}" y1="{_svg_y(0)}" x2="{_svg_x(1)}" y2="{_svg_y(0)}" stroke="black"/>',
        f'<line x1="{_svg_x(0)}" y1="{_svg_y(0)}" x2="{_svg_x(0)}" y2="{_svg_y(1)}" stroke="black"/>',
    ]
    for i in range(6):
        v = round(i * 0.2, 1)
        parts.append(
            f'<text x="{_svg_x(v)}" y="{_SVG_BOTTOM + 20:.2f}" font-size="12" '
            f'text-anchor="middle">{v}</text>'
        )
        parts.append(
            f'<text x="{_SVG_LEFT - 10:.2f}" y="{_svg_y(v)}" font-size="12" '
            f'text-anchor="end">{v}</text>'
        )
    pu_points = " ".join(
        f"{_svg_x(row.threshold)},{_svg_y(row.utility_precision)}" for row in report.sweep
    )
    fpr_points = " ".join(
        f"{_svg_x(row.threshold)},{_svg_y(row.fpr)}" for row in report.sweep
    )
    parts.append(f'<polyline points="{pu_points}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
    parts.append(f'<polyline points="{fpr_points}" fill="none" stroke="#d62728" stroke-width="2"/>')
    parts.append(f'<text x="{_SVG_RIGHT - 180:.2f}" y="{_SVG_TOP - 14:.2f}" font-size="12" '
                 f'fill="#1f77b4">utility precision</text>')
    parts.append(f'<text x="{_SVG_RIGHT - 60:.2f}" y="{_SVG_TOP - 14:.2f}" font-size="12" '
                 f'fill="#d62728">fpr</text>')
    parts.append(f'<text x="{(_SVG_LEFT + _SVG_RIGHT) / 2:.2f}" y="{_SVG_BOTTOM + 40:.2f}" '
                 f'font-size="13" text-anchor="middle">threshold</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def metrics_json_text(report: EvalReport) -> str:
    precision, recall, f1 = report.at_half
    return json.dumps({
        "precision_at_half": precision,
        "recall_at_half": recall,
        "f1_at_half": f1,
        "n_test_rows": report.n_test_rows,
        "n_test_pairs": report.n_test_pairs,
        "fpr_target": report.fpr_target,
        "threshold_at_fpr_target": report.threshold_at_fpr_target,
    }, indent=2, sort_keys=True) + "\n"


def emit_report(report: EvalReport, out_dir) -> dict[str, str]:
    """Write sweep.csv, sweep.svg and metrics.json under out_dir; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    outputs = {
        "sweep.csv": sweep_csv_text(report),
        "sweep.svg": sweep_svg_text(report),
        "metrics.json": metrics_json_text(report),
    }
    paths = {}
    for name, text in outputs.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        paths[name] = path
    return paths
