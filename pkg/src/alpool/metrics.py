"""Evaluation: ROC curve, AUC, accuracy, and multi-seed strategy comparison.

AUC follows the Mann-Whitney convention: the fraction of (positive,
negative) pairs where the positive outscores the negative, ties counted
as 0.5. The trapezoidal area under the tie-grouped ROC curve equals that
statistic exactly, which the tests check against a brute-force pairwise
oracle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import MetricsError


def _validate_binary(labels, scores) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise MetricsError(
            "LENGTH_MISMATCH", f"labels {y.shape} vs scores {s.shape}",
            labels=int(y.size), scores=int(s.size),
        )
    if not np.all(np.isfinite(s)):
        raise MetricsError("NON_FINITE_SCORE", "scores contain non-finite values")
    pos = int((y == 1).sum())
    neg = int((y == 0).sum())
    if pos + neg != y.size:
        raise MetricsError("INVALID_LABEL", "labels must be 0 or 1")
    if pos == 0 or neg == 0:
        raise MetricsError("SINGLE_CLASS", "need at least one positive and one negative label")
    return y.astype(np.int64), s


def auc(labels, scores) -> float:
    """Probability a random positive outranks a random negative (ties 0.5)."""
    y, s = _validate_binary(labels, scores)
    order = np.argsort(s, kind="stable")
    sorted_scores = s[order]
    ranks = np.empty(s.size, dtype=np.float64)
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # average rank for the tie group, 1-based
        ranks[order[i: j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    n_pos = int((y == 1).sum())
    n_neg = y.size - n_pos
    rank_sum = float(ranks[y == 1].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class RocCurve:
    """Operating points (fpr, tpr) at each distinct threshold, (0,0) to (1,1)."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # score cut at each interior point, NaN at the (0,0) anchor

    def area(self) -> float:
        trapezoid = getattr(np, "trapezoid", np.trapz)
        return float(trapezoid(self.tpr, self.fpr))


def roc_curve(labels, scores) -> RocCurve:
    y, s = _validate_binary(labels, scores)
    order = np.argsort(-s, kind="stable")
    s_desc = s[order]
    y_desc = y[order]
    distinct = np.nonzero(np.diff(s_desc))[0]
    cut_idx = np.concatenate([distinct, [y.size - 1]])
    tps = np.cumsum(y_desc)[cut_idx]
    fps = np.cumsum(1 - y_desc)[cut_idx]
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    fpr = np.concatenate([[0.0], fps / n_neg])
    tpr = np.concatenate([[0.0], tps / n_pos])
    thresholds = np.concatenate([[np.nan], s_desc[cut_idx]])
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds)


def accuracy(labels, predicted) -> float:
    y = np.asarray(labels)
    p = np.asarray(predicted)
    if y.shape != p.shape or y.ndim != 1 or y.size == 0:
        raise MetricsError("LENGTH_MISMATCH", f"labels {y.shape} vs predictions {p.shape}")
    return float((y == p).mean())


@dataclass(frozen=True)
class ComparisonRow:
    round: int
    metric: str  # "val_auc" | "test_auc"
    means: dict[str, float]
    stds: dict[str, float]
    mean_diff: float | None  # first strategy minus second, None unless exactly 2
    sign_positive: int | None  # seeds where diff > 0
    n_seeds: int


@dataclass(frozen=True)
class ComparisonReport:
    strategies: tuple[str, ...]
    rows: tuple[ComparisonRow, ...]
    low_confidence: bool = field(default=False)  # fewer than 2 seeds


_METRIC_ATTRS = ("val_auc", "test_auc")


def compare_strategies(histories: Mapping[str, Sequence[Sequence]]) -> ComparisonReport:
    """Aggregate per-strategy, per-seed round histories into a paired report.

    ``histories[strategy]`` is a list (one per seed) of round-record
    sequences; records expose ``round``, ``val_auc`` and ``test_auc``
    attributes (engine history records) or the same keys on a mapping.
    Seeds are paired by position, so round counts must align everywhere.
    """
    if not histories:
        raise MetricsError("MISALIGNED_HISTORIES", "no histories given")
    strategies = tuple(histories)
    seed_counts = {s: len(histories[s]) for s in strategies}
    n_seeds = seed_counts[strategies[0]]
    if any(c != n_seeds for c in seed_counts.values()) or n_seeds == 0:
        raise MetricsError("MISALIGNED_HISTORIES", f"seed counts differ: {seed_counts}")

    def get(record, attr: str):
        return record[attr] if isinstance(record, dict) else getattr(record, attr)

    round_counts = {len(h) for runs in histories.values() for h in runs}
    if len(round_counts) != 1:
        raise MetricsError("MISALIGNED_HISTORIES", f"round counts differ: {sorted(round_counts)}")
    n_rounds = round_counts.pop()
    if n_rounds == 0:
        raise MetricsError("MISALIGNED_HISTORIES", "histories are empty")

    # canonical order for the paired difference: uncertainty first when present
    ordered = strategies
    if len(strategies) == 2 and "random" in strategies and strategies[0] == "random":
        ordered = (strategies[1], strategies[0])

    rows = []
    for r in range(n_rounds):
        round_no = get(histories[ordered[0]][0][r], "round")
        for metric in _METRIC_ATTRS:
            values = {
                s: np.array([float(get(histories[s][i][r], metric)) for i in range(n_seeds)])
                for s in ordered
            }
            means = {s: float(v.mean()) for s, v in values.items()}
            stds = {s: float(v.std()) for s, v in values.items()}
            mean_diff = None
            sign_positive = None
            if len(ordered) == 2:
                diffs = values[ordered[0]] - values[ordered[1]]
                mean_diff = float(diffs.mean())
                sign_positive = int((diffs > 0).sum())
            rows.append(
                ComparisonRow(
                    round=int(round_no), metric=metric, means=means, stds=stds,
                    mean_diff=mean_diff, sign_positive=sign_positive, n_seeds=n_seeds,
                )
            )
    return ComparisonReport(
        strategies=ordered, rows=tuple(rows), low_confidence=n_seeds < 2
    )


def write_comparison_csv(report: ComparisonReport, path) -> None:
    """Wide per-round table plus a long plot-ready companion ``<path>.long.csv``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["round", "metric"]
        for s in report.strategies:
            header += [f"mean_{s}", f"std_{s}"]
        header += ["mean_diff", "sign_positive", "n_seeds", "low_confidence"]
        writer.writerow(header)
        for row in report.rows:
            cells: list = [row.round, row.metric]
            for s in report.strategies:
                cells += [repr(row.means[s]), repr(row.stds[s])]
            cells += [
                "" if row.mean_diff is None else repr(row.mean_diff),
                "" if row.sign_positive is None else row.sign_positive,
                row.n_seeds,
                int(report.low_confidence),
            ]
            writer.writerow(cells)

    long_path = str(path) + ".long.csv"
    with open(long_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "round", "metric", "stat", "value"])
        for row in report.rows:
            for s in report.strategies:
                writer.writerow([s, row.round, row.metric, "mean", repr(row.means[s])])
                writer.writerow([s, row.round, row.metric, "std", repr(row.stds[s])])
