"""Committee disagreement scoring: entropy, pairwise KL, ranking, band filters.

Conventions fixed here (they cannot be recovered from first principles and
must stay consistent for reproducible rankings):

* natural log everywhere (scores are in nats),
* ``0 * ln 0 = 0`` for entropy and for zero-mass KL terms,
* KL denominators are smoothed with ``eps = 1e-12`` so externally supplied
  distributions with exact zeros stay finite,
* KL is summed over all ordered member pairs (K*(K-1) terms), which makes
  the total symmetric in the committee without preferring a direction,
* ranking ties break by ascending sample id,
* top-fraction selection uses a ceiling, band drops use a floor.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import UncertaintyError

KL_EPS = 1e-12
DIST_SUM_TOL = 1e-9


def _as_dist(p, name: str = "p") -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise UncertaintyError("INVALID_DISTRIBUTION", f"{name} must be a non-empty 1-D vector")
    if np.any(arr < 0):
        raise UncertaintyError(
            "INVALID_DISTRIBUTION", f"{name} has a negative entry", entry=float(arr.min())
        )
    total = float(arr.sum())
    if abs(total - 1.0) > DIST_SUM_TOL:
        raise UncertaintyError("INVALID_DISTRIBUTION", f"{name} sums to {total}, not 1", sum=total)
    return arr


def entropy(p) -> float:
    """Shannon entropy -sum(p ln p) in nats; lies in [0, ln C]."""
    arr = _as_dist(p)
    nz = arr[arr > 0]
    return float(-(nz * np.log(nz)).sum())


def kl_divergence(p, q) -> float:
    """KL(p || q) = sum p ln(p / (q + eps)) in nats, >= -1e-12 up to smoothing."""
    pa = _as_dist(p, "p")
    qa = np.asarray(q, dtype=np.float64)
    if qa.shape != pa.shape:
        raise UncertaintyError(
            "LENGTH_MISMATCH", f"p has {pa.size} entries, q has {qa.size}",
            p_len=int(pa.size), q_len=int(qa.size),
        )
    _as_dist(qa, "q")
    mask = pa > 0
    return float((pa[mask] * (np.log(pa[mask]) - np.log(qa[mask] + KL_EPS))).sum())


@dataclass(frozen=True)
class ScoreBreakdown:
    """Per-sample acquisition score: sum of member entropies plus all ordered-pair KLs."""

    entropy_sum: float
    kl_sum: float
    score: float


def uncertainty_score(dists: Sequence) -> ScoreBreakdown:
    """Score one sample from its K committee distributions (K >= 2)."""
    if len(dists) < 2:
        raise UncertaintyError("INVALID_DISTRIBUTION", "committee needs at least 2 members", k=len(dists))
    members = [_as_dist(d, f"member {k}") for k, d in enumerate(dists)]
    width = members[0].size
    for k, m in enumerate(members[1:], start=1):
        if m.size != width:
            raise UncertaintyError(
                "LENGTH_MISMATCH", f"member {k} has {m.size} classes, member 0 has {width}"
            )
    entropy_sum = sum(entropy(m) for m in members)
    kl_sum = 0.0
    for i, pi in enumerate(members):
        for j, pj in enumerate(members):
            if i != j:
                kl_sum += kl_divergence(pi, pj)
    return ScoreBreakdown(entropy_sum=entropy_sum, kl_sum=kl_sum, score=entropy_sum + kl_sum)


def score_committee(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized scoring of a whole pool.

    ``probs`` has shape (K, n, C): member k's predicted distribution for each
    of n samples. Returns (entropy_sums, kl_sums, scores), each shape (n,).
    Agrees with per-sample :func:`uncertainty_score` to float roundoff.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 3 or probs.shape[0] < 2:
        raise UncertaintyError(
            "INVALID_DISTRIBUTION", "expected probabilities of shape (K >= 2, n, C)",
            shape=tuple(probs.shape),
        )
    k = probs.shape[0]
    logs = np.where(probs > 0, np.log(np.maximum(probs, 1e-300)), 0.0)
    entropy_sums = -(probs * logs).sum(axis=(0, 2))
    log_smooth = np.log(probs + KL_EPS)
    kl_sums = np.zeros(probs.shape[1])
    for i in range(k):
        for j in range(k):
            if i != j:
                terms = probs[i] * (logs[i] - log_smooth[j])
                kl_sums += np.where(probs[i] > 0, terms, 0.0).sum(axis=1)
    return entropy_sums, kl_sums, entropy_sums + kl_sums


def rank_descending(scores: Mapping[int, float]) -> list[int]:
    """Sample ids sorted by score descending, ties broken by ascending id."""
    for sample_id, value in scores.items():
        if not math.isfinite(value):
            raise UncertaintyError(
                "NON_FINITE_SCORE", f"sample {sample_id} has score {value}", sample_id=sample_id
            )
    return sorted(scores, key=lambda i: (-scores[i], i))


def _snap(x: float) -> float:
    # Counteracts float noise in fraction*count products (0.3*10 must mean 3).
    r = round(x)
    return float(r) if abs(x - r) < 1e-9 else x


def ceil_fraction(fraction: float, count: int) -> int:
    return int(math.ceil(_snap(fraction * count)))


def floor_fraction(fraction: float, count: int) -> int:
    return int(math.floor(_snap(fraction * count)))


def select_top(ranking: Sequence[int], fraction: float, pool_size: int) -> list[int]:
    """First ceil(fraction * pool_size) ids of the ranking, capped at its length."""
    if not (0.0 < fraction <= 1.0):
        raise UncertaintyError("INVALID_FRACTION", f"fraction {fraction} not in (0, 1]", fraction=fraction)
    take = min(ceil_fraction(fraction, pool_size), len(ranking))
    return list(ranking[:take])


def band_filter(
    ranking: Sequence[int],
    drop_top: float = 0.0,
    drop_bottom: float = 0.0,
    band: tuple[float, float] | None = None,
) -> list[int]:
    """Outlier drops and percentile-band selection over a descending ranking.

    Removes floor(drop_top * n) highest-score and floor(drop_bottom * n)
    lowest-score ids first; if ``band`` = [lo, hi) is given, keeps positions
    [floor(lo*m), floor(hi*m)) of the m remaining ids.
    """
    if drop_top < 0 or drop_bottom < 0 or drop_top + drop_bottom >= 1:
        raise UncertaintyError(
            "INVALID_FRACTIONS", f"drop fractions ({drop_top}, {drop_bottom}) must be >= 0 and sum below 1",
        )
    n = len(ranking)
    kept = list(ranking[floor_fraction(drop_top, n): n - floor_fraction(drop_bottom, n)])
    if band is None:
        return kept
    lo, hi = band
    if not (0.0 <= lo < hi <= 1.0):
        raise UncertaintyError("INVALID_FRACTIONS", f"band [{lo}, {hi}) is not inside [0, 1]")
    m = len(kept)
    return kept[floor_fraction(lo, m): floor_fraction(hi, m)]


@dataclass(frozen=True)
class SampleScore:
    sample_id: int
    dists: np.ndarray  # (K, C) committee distributions for this sample
    entropy_sum: float
    kl_sum: float
    score: float


@dataclass(frozen=True)
class UncertaintyReport:
    """All scored samples of one round plus their descending ranking."""

    entries: tuple[SampleScore, ...]
    ranking: tuple[int, ...]

    def by_id(self) -> dict[int, SampleScore]:
        return {e.sample_id: e for e in self.entries}

    def rank_of(self) -> dict[int, int]:
        """1-based rank per sample id."""
        return {sid: pos + 1 for pos, sid in enumerate(self.ranking)}


def build_report(sample_ids: Sequence[int], probs: np.ndarray) -> UncertaintyReport:
    """Score every sample of a pool and rank the ids descending.

    ``probs`` is (K, n, C) aligned with ``sample_ids``.
    """
    entropy_sums, kl_sums, scores = score_committee(probs)
    if len(sample_ids) != probs.shape[1]:
        raise UncertaintyError(
            "LENGTH_MISMATCH", f"{len(sample_ids)} ids for {probs.shape[1]} probability rows"
        )
    entries = tuple(
        SampleScore(
            sample_id=int(sid),
            dists=probs[:, i, :].copy(),
            entropy_sum=float(entropy_sums[i]),
            kl_sum=float(kl_sums[i]),
            score=float(scores[i]),
        )
        for i, sid in enumerate(sample_ids)
    )
    ranking = rank_descending({int(sid): float(scores[i]) for i, sid in enumerate(sample_ids)})
    return UncertaintyReport(entries=entries, ranking=tuple(ranking))


def write_report_csv(report: UncertaintyReport, path) -> None:
    """CSV rows (sample_id, entropy_sum, kl_sum, score, rank) sorted by rank."""
    by_id = report.by_id()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "entropy_sum", "kl_sum", "score", "rank"])
        for rank, sid in enumerate(report.ranking, start=1):
            e = by_id[sid]
            writer.writerow([sid, repr(e.entropy_sum), repr(e.kl_sum), repr(e.score), rank])


def read_report_scores(path) -> dict[int, dict[str, float]]:
    """Reload the CSV emitted by :func:`write_report_csv` (scores only, no dists)."""
    out: dict[int, dict[str, float]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[int(row["sample_id"])] = {
                "entropy_sum": float(row["entropy_sum"]),
                "kl_sum": float(row["kl_sum"]),
                "score": float(row["score"]),
                "rank": int(row["rank"]),
            }
    return out
