"""Datasets, ingestion (IDX, CSV, synthetic), splitting, and preprocessing.

A :class:`Dataset` is an immutable value: its arrays are frozen at
construction and label updates produce new instances. The labeled /
unlabeled / validation / test partition lives in :class:`PoolState`,
which the engine replaces wholesale as the loop advances.

Unlabeled rows use the sentinel :data:`UNKNOWN` (-1). Splitting always
routes unlabeled rows into the training cohort, because they cannot be
evaluated and a real pool ingests them precisely to be queried later.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

UNKNOWN = -1

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True, eq=False)
class Dataset:
    samples: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64, UNKNOWN where not annotated
    class_count: int
    sample_ids: np.ndarray  # (n,) int64, unique, order-stable
    payloads: tuple[bytes, ...] | None = None  # raw per-sample bytes (e.g. pixels)
    payload_shape: tuple[int, int] | None = None  # (rows, cols) when payloads are images

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        ids = np.asarray(self.sample_ids, dtype=np.int64)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sample_ids", ids)
        if samples.ndim != 2 or samples.shape[1] < 1:
            raise DataError("SHAPE_MISMATCH", f"samples must be (n, d >= 1), got {samples.shape}")
        n = samples.shape[0]
        if labels.shape != (n,) or ids.shape != (n,):
            raise DataError("SHAPE_MISMATCH", "labels and sample_ids must have one entry per sample")
        if self.class_count < 2:
            raise DataError("INVALID_CLASS_COUNT", f"class_count {self.class_count} must be >= 2")
        known = labels[labels != UNKNOWN]
        if known.size and (known.min() < 0 or known.max() >= self.class_count):
            raise DataError(
                "INVALID_LABEL", f"labels must lie in [0, {self.class_count}) or be UNKNOWN"
            )
        if np.unique(ids).size != n:
            raise DataError("DUPLICATE_ID", "sample_ids must be unique")
        if self.payloads is not None and len(self.payloads) != n:
            raise DataError("SHAPE_MISMATCH", "payloads must have one entry per sample")
        samples.flags.writeable = False
        labels.flags.writeable = False
        ids.flags.writeable = False
        object.__setattr__(self, "_row_of", {int(s): i for i, s in enumerate(ids)})

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    @property
    def feature_count(self) -> int:
        return int(self.samples.shape[1])

    def rows_for(self, ids: Sequence[int]) -> np.ndarray:
        try:
            return np.array([self._row_of[int(i)] for i in ids], dtype=np.int64)
        except KeyError as exc:
            raise DataError("UNKNOWN_ID", f"sample id {exc.args[0]} not in dataset") from None

    def features_for(self, ids: Sequence[int]) -> np.ndarray:
        return self.samples[self.rows_for(ids)]

    def labels_for(self, ids: Sequence[int]) -> np.ndarray:
        return self.labels[self.rows_for(ids)]

    def label_of(self, sample_id: int) -> int:
        return int(self.labels[self.rows_for([sample_id])[0]])

    def payload_of(self, sample_id: int) -> bytes | None:
        if self.payloads is None:
            return None
        return self.payloads[self.rows_for([sample_id])[0]]

    def with_labels(self, answers: Mapping[int, int]) -> "Dataset":
        """New dataset with the given sample ids relabeled."""
        labels = self.labels.copy()
        for sid, lab in answers.items():
            if not (0 <= int(lab) < self.class_count):
                raise DataError("INVALID_LABEL", f"label {lab} out of range for sample {sid}")
            labels[self.rows_for([sid])[0]] = int(lab)
        return Dataset(self.samples, labels, self.class_count, self.sample_ids,
                       self.payloads, self.payload_shape)

    def take(self, row_mask: np.ndarray) -> "Dataset":
        payloads = None
        if self.payloads is not None:
            payloads = tuple(p for p, keep in zip(self.payloads, row_mask) if keep)
        return Dataset(self.samples[row_mask].copy(), self.labels[row_mask].copy(),
                       self.class_count, self.sample_ids[row_mask].copy(),
                       payloads, self.payload_shape)


@dataclass(frozen=True)
class PoolState:
    labeled_ids: frozenset[int]
    unlabeled_ids: frozenset[int]
    validation_ids: frozenset[int]
    test_ids: frozenset[int]

    def __post_init__(self):
        groups = [self.labeled_ids, self.unlabeled_ids, self.validation_ids, self.test_ids]
        total = sum(len(g) for g in groups)
        if len(frozenset().union(*groups)) != total:
            raise DataError("OVERLAPPING_SPLITS", "pool partitions must be pairwise disjoint")

    @property
    def training_cohort(self) -> frozenset[int]:
        return self.labeled_ids | self.unlabeled_ids

    def mark_labeled(self, ids: Iterable[int]) -> "PoolState":
        moving = frozenset(int(i) for i in ids)
        missing = moving - self.unlabeled_ids
        if missing:
            raise DataError("UNKNOWN_ID", f"ids {sorted(missing)} are not in the unlabeled pool")
        return PoolState(self.labeled_ids | moving, self.unlabeled_ids - moving,
                         self.validation_ids, self.test_ids)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    validation_fraction: float
    test_fraction: float
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        parts = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if any(not (0.0 < p < 1.0) for p in parts):
            raise DataError("INVALID_FRACTIONS", f"split fractions {parts} must each lie in (0, 1)")
        if abs(sum(parts) - 1.0) > 1e-9:
            raise DataError("INVALID_FRACTIONS", f"split fractions {parts} must sum to 1")


def _largest_remainder(count: int, fractions: Sequence[float]) -> list[int]:
    ideals = [f * count for f in fractions]
    base = [int(np.floor(v + 1e-9)) for v in ideals]
    short = count - sum(base)
    remainders = sorted(
        range(len(fractions)), key=lambda i: (-(ideals[i] - base[i]), i)
    )
    for i in remainders[:short]:
        base[i] += 1
    return base


def split(dataset: Dataset, spec: SplitSpec) -> PoolState:
    """Disjoint train/validation/test cover of all sample ids.

    Stratified splits keep per-class proportions within one sample of the
    global proportions. Rows with UNKNOWN labels always land in the
    training cohort.
    """
    rng = np.random.default_rng(spec.seed)
    fractions = (spec.train_fraction, spec.validation_fraction, spec.test_fraction)
    train: list[int] = []
    val: list[int] = []
    test: list[int] = []

    unknown_ids = dataset.sample_ids[dataset.labels == UNKNOWN]
    train.extend(int(i) for i in unknown_ids)

    if spec.stratified:
        groups = [
            dataset.sample_ids[dataset.labels == c] for c in range(dataset.class_count)
        ]
        groups = [g for g in groups if g.size]
    else:
        groups = [dataset.sample_ids[dataset.labels != UNKNOWN]]

    for group in groups:
        counts = _largest_remainder(group.size, fractions)
        if spec.stratified and any(c == 0 for c in counts):
            raise DataError(
                "INSUFFICIENT_SAMPLES",
                f"a class with {group.size} samples cannot cover all three splits "
                f"at fractions {fractions}",
            )
        order = rng.permutation(group.size)
        shuffled = group[order]
        train.extend(int(i) for i in shuffled[: counts[0]])
        val.extend(int(i) for i in shuffled[counts[0]: counts[0] + counts[1]])
        test.extend(int(i) for i in shuffled[counts[0] + counts[1]:])

    return PoolState(
        labeled_ids=frozenset(),
        unlabeled_ids=frozenset(train),
        validation_ids=frozenset(val),
        test_ids=frozenset(test),
    )


def balance(dataset: Dataset, seed: int = 0) -> Dataset:
    """Undersample majority classes until every class count equals the minimum.

    Rows with UNKNOWN labels are kept untouched; the surviving rows stay in
    their original order, so an already balanced dataset passes through
    unchanged.
    """
    labels = dataset.labels
    present = [c for c in range(dataset.class_count) if int((labels == c).sum())]
    if len(present) < 2:
        raise DataError("SINGLE_CLASS", "balancing needs at least two labeled classes")
    target = min(int((labels == c).sum()) for c in present)
    rng = np.random.default_rng(seed)
    keep = labels == UNKNOWN
    for c in present:
        rows = np.nonzero(labels == c)[0]
        if rows.size > target:
            rows = np.sort(rng.choice(rows, size=target, replace=False))
        keep[rows] = True
    return dataset.take(keep)


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature training statistics; constant features map to 0."""

    mean: np.ndarray
    std: np.ndarray  # population standard deviation; 0 for constant features

    def apply(self, dataset: Dataset) -> Dataset:
        inv = np.where(self.std > 0, 1.0 / np.where(self.std > 0, self.std, 1.0), 0.0)
        transformed = (dataset.samples - self.mean) * inv
        return Dataset(transformed, dataset.labels.copy(), dataset.class_count,
                       dataset.sample_ids.copy(), dataset.payloads, dataset.payload_shape)


def normalize(dataset: Dataset, stat_ids: Sequence[int] | None = None) -> tuple[Dataset, FeatureStats]:
    """Standardize each feature to mean 0, variance 1 (population std).

    Statistics come from ``stat_ids`` rows when given (the training cohort,
    to keep validation/test leakage-free) and are applied to every row.
    """
    rows = dataset.samples if stat_ids is None else dataset.features_for(sorted(stat_ids))
    if rows.shape[0] < 2:
        raise DataError("INSUFFICIENT_SAMPLES", "normalization needs at least 2 samples")
    stats = FeatureStats(mean=rows.mean(axis=0), std=rows.std(axis=0))
    return stats.apply(dataset), stats


def generate_synthetic(
    n_per_class: int,
    class_count: int,
    means: Sequence[Sequence[float]],
    stddev: float,
    seed: int = 0,
) -> Dataset:
    """Isotropic Gaussian blobs, ``n_per_class`` samples around each mean."""
    if len(means) != class_count:
        raise DataError(
            "DIMENSION_MISMATCH", f"{len(means)} means given for {class_count} classes"
        )
    mean_rows = [np.asarray(m, dtype=np.float64) for m in means]
    dim = mean_rows[0].size
    if any(m.ndim != 1 or m.size != dim for m in mean_rows):
        raise DataError("DIMENSION_MISMATCH", "all class means must share one dimension")
    if stddev < 0 or n_per_class < 1:
        raise DataError("INVALID_CONFIG", "stddev must be >= 0 and n_per_class >= 1")
    rng = np.random.default_rng(seed)
    blocks = [m + stddev * rng.standard_normal((n_per_class, dim)) for m in mean_rows]
    samples = np.vstack(blocks)
    labels = np.repeat(np.arange(class_count, dtype=np.int64), n_per_class)
    return Dataset(samples, labels, class_count, np.arange(samples.shape[0], dtype=np.int64))


def load_idx(images_path, labels_path, class_count: int | None = None) -> Dataset:
    """MNIST-style IDX pair: big-endian magic + dims, one byte per pixel/label.

    Features are pixels scaled to [0, 1]; the raw pixel bytes are kept as
    per-sample payloads for annotator display.
    """
    def read_header(fh, fmt, path, what):
        size = struct.calcsize(fmt)
        raw = fh.read(size)
        if len(raw) < size:
            raise DataError("TRUNCATED_FILE", f"{path} ends inside the {what}", file=str(path))
        return struct.unpack(fmt, raw)

    with open(images_path, "rb") as fh:
        (magic,) = read_header(fh, ">I", images_path, "magic")
        if magic != IDX_IMAGE_MAGIC:
            raise DataError(
                "BAD_MAGIC", f"{images_path} has magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}",
                file=str(images_path),
            )
        count, rows, cols = read_header(fh, ">III", images_path, "dimension header")
        pixel_bytes = fh.read(count * rows * cols)
        if len(pixel_bytes) < count * rows * cols:
            raise DataError(
                "TRUNCATED_FILE",
                f"{images_path} holds {len(pixel_bytes)} pixel bytes, expected {count * rows * cols}",
                file=str(images_path),
            )

    with open(labels_path, "rb") as fh:
        (magic,) = read_header(fh, ">I", labels_path, "magic")
        if magic != IDX_LABEL_MAGIC:
            raise DataError(
                "BAD_MAGIC", f"{labels_path} has magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}",
                file=str(labels_path),
            )
        (label_count,) = read_header(fh, ">I", labels_path, "count header")
        if label_count != count:
            raise DataError(
                "COUNT_MISMATCH",
                f"{labels_path} holds {label_count} labels for {count} images in {images_path}",
                file=str(labels_path),
            )
        label_bytes = fh.read(label_count)
        if len(label_bytes) < label_count:
            raise DataError(
                "TRUNCATED_FILE", f"{labels_path} holds {len(label_bytes)} labels, expected {label_count}",
                file=str(labels_path),
            )

    pixels = np.frombuffer(pixel_bytes, dtype=np.uint8).reshape(count, rows * cols)
    labels = np.frombuffer(label_bytes, dtype=np.uint8).astype(np.int64)
    inferred = int(labels.max()) + 1 if labels.size else 0
    c = class_count if class_count is not None else max(inferred, 2)
    item = rows * cols
    payloads = tuple(pixel_bytes[i * item: (i + 1) * item] for i in range(count))
    return Dataset(pixels / 255.0, labels, c, np.arange(count, dtype=np.int64),
                   payloads, (rows, cols))


def load_csv(path, label_column: str = "label", class_count: int | None = None) -> Dataset:
    """Header-row CSV with numeric features; empty label cells mean UNKNOWN."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("TRUNCATED_FILE", f"{path} is empty", file=str(path)) from None
        if label_column not in header:
            raise DataError(
                "MISSING_COLUMN", f"{path} has no column {label_column!r}",
                file=str(path), column=label_column,
            )
        label_idx = header.index(label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]
        rows: list[list[float]] = []
        labels: list[int] = []
        for row_no, row in enumerate(reader, start=2):
            cell = row[label_idx].strip() if label_idx < len(row) else ""
            if cell == "":
                labels.append(UNKNOWN)
            else:
                try:
                    value = int(cell)
                except ValueError:
                    raise DataError(
                        "INVALID_LABEL", f"{path} row {row_no}: label {cell!r} is not an integer",
                        file=str(path), row=row_no,
                    ) from None
                if value < 0:
                    raise DataError(
                        "INVALID_LABEL", f"{path} row {row_no}: label {value} is negative",
                        file=str(path), row=row_no,
                    )
                labels.append(value)
            features = []
            for col_no, cell_value in enumerate(row):
                if col_no == label_idx:
                    continue
                try:
                    features.append(float(cell_value))
                except ValueError:
                    raise DataError(
                        "NON_NUMERIC_FEATURE",
                        f"{path} row {row_no}, column {header[col_no]!r}: {cell_value!r}",
                        file=str(path), row=row_no, column=header[col_no],
                    ) from None
            rows.append(features)

    if not rows:
        raise DataError("TRUNCATED_FILE", f"{path} has a header but no data rows", file=str(path))
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataError("SHAPE_MISMATCH", f"{path} has ragged rows (widths {sorted(widths)})",
                        file=str(path))
    label_arr = np.array(labels, dtype=np.int64)
    known = label_arr[label_arr != UNKNOWN]
    inferred = int(known.max()) + 1 if known.size else 0
    c = class_count if class_count is not None else max(inferred, 2)
    return Dataset(np.array(rows, dtype=np.float64), label_arr, c,
                   np.arange(len(rows), dtype=np.int64))


def save_csv(dataset: Dataset, path, label_column: str = "label") -> None:
    """Inverse of :func:`load_csv`; floats use repr so reloads are exact."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        names = [f"f{i}" for i in range(dataset.feature_count)]
        writer.writerow(names + [label_column])
        for row, label in zip(dataset.samples, dataset.labels):
            cells = [repr(float(v)) for v in row]
            cells.append("" if label == UNKNOWN else str(int(label)))
            writer.writerow(cells)
