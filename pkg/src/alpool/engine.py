"""The active-learning session: seed, committee, scoring, labeling, budget.

One round is: fine-tune K committee members from the shared warm-start
base at distinct learning rates, score candidate samples by committee
disagreement, queue the most informative fraction for labeling, absorb the
oracle's answers, then retrain the final model on everything labeled so
far. The ledger counts distinct labeled ids, so queries that land on
already-labeled samples cost nothing.

All randomness derives from (session seed, role, round, index) so a
session transcript is a pure function of its config, dataset and seeds.
Exactly one owner mutates a session; datasets and pool states are
immutable values it replaces as the loop advances.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import metrics, model, uncertainty
from .data import UNKNOWN, Dataset, PoolState
from .errors import EngineError

UNCERTAINTY = "uncertainty"
RANDOM = "random"

SIMULATED = "simulated"
HUMAN = "human"

POOL = "pool"
COHORT = "cohort"

SEEDING = "SEEDING"
TRAINING = "TRAINING"
SCORING = "SCORING"
AWAITING_LABELS = "AWAITING_LABELS"
DONE = "DONE"

# roles for seed derivation, so independent draws never share a stream
_ROLE_SEED_CHOICE = 0
_ROLE_MEMBER = 1
_ROLE_RANDOM_QUERY = 2
_ROLE_FINAL = 3


def derive_seed(*parts: int) -> int:
    """Stable scalar seed from integer parts (session seed, role, round, ...)."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


@dataclass(frozen=True)
class SessionConfig:
    model: model.ModelConfig
    train: model.TrainConfig = model.TrainConfig()
    initial_fraction: float = 0.30
    select_fraction: float = 0.30
    committee_lrs: tuple[float, ...] = (0.001, 0.0005, 0.0001)
    strategy: str = UNCERTAINTY
    rounds: int = 1
    seed: int = 0
    oracle: str = SIMULATED
    select_from: str = POOL  # candidate set: unlabeled pool, or the whole cohort
    select_basis: str = COHORT  # denominator for the select_fraction count
    target_val_auc: float | None = None  # optional early stop once validation AUC reaches it

    def __post_init__(self):
        if not (0.0 < self.initial_fraction < 1.0 and 0.0 < self.select_fraction < 1.0):
            raise EngineError("INVALID_CONFIG", "fractions must lie in (0, 1)")
        lrs = tuple(float(lr) for lr in self.committee_lrs)
        object.__setattr__(self, "committee_lrs", lrs)
        if len(lrs) < 2 or len(set(lrs)) != len(lrs) or any(lr <= 0 for lr in lrs):
            raise EngineError(
                "INVALID_CONFIG", "committee_lrs must be at least 2 distinct positive rates"
            )
        if self.strategy not in (UNCERTAINTY, RANDOM):
            raise EngineError("INVALID_CONFIG", f"unknown strategy {self.strategy!r}")
        if self.oracle not in (SIMULATED, HUMAN):
            raise EngineError("INVALID_CONFIG", f"unknown oracle {self.oracle!r}")
        if self.rounds < 1:
            raise EngineError("INVALID_CONFIG", f"rounds {self.rounds} must be >= 1")
        if self.select_from not in (POOL, COHORT) or self.select_basis not in (POOL, COHORT):
            raise EngineError("INVALID_CONFIG", "select_from/select_basis must be 'pool' or 'cohort'")


@dataclass(frozen=True)
class BudgetLedger:
    train_cohort_size: int
    initially_labeled: int
    queried_total: int
    distinct_labeled: int

    @property
    def savings_fraction(self) -> float:
        return 1.0 - self.distinct_labeled / self.train_cohort_size


@dataclass(frozen=True)
class RoundRecord:
    round: int
    labeled_count: int
    val_auc: float
    test_auc: float
    savings: float


@dataclass
class AlSession:
    config: SessionConfig
    dataset: Dataset
    pool: PoolState
    base_model: model.Classifier
    phase: str = TRAINING
    round: int = 1
    committee: tuple[model.Classifier, ...] = ()
    final_model: model.Classifier | None = None
    report: uncertainty.UncertaintyReport | None = None
    pending_queries: tuple[int, ...] = ()
    initially_labeled: int = 0
    queried_total: int = 0
    history: list[RoundRecord] = field(default_factory=list)

    @property
    def budget(self) -> BudgetLedger:
        return BudgetLedger(
            train_cohort_size=len(self.pool.training_cohort),
            initially_labeled=self.initially_labeled,
            queried_total=self.queried_total,
            distinct_labeled=len(self.pool.labeled_ids),
        )


class SimulatedOracle:
    """Answers label queries from the dataset's ground truth."""

    def __init__(self, dataset: Dataset):
        self._dataset = dataset

    def label_for(self, sample_id: int) -> int:
        label = self._dataset.label_of(sample_id)
        if label == UNKNOWN:
            raise EngineError(
                "MISSING_GROUND_TRUTH", f"sample {sample_id} has no ground-truth label",
                sample_id=sample_id,
            )
        return label


def _require_phase(session: AlSession, expected: str) -> None:
    if session.phase != expected:
        raise EngineError(
            "WRONG_PHASE", f"operation requires phase {expected}, session is {session.phase}",
            expected=expected, actual=session.phase,
        )


def seed_session(
    dataset: Dataset,
    pool: PoolState,
    config: SessionConfig,
    base_model: model.Classifier | None = None,
    initial_labeled_ids: Sequence[int] | None = None,
) -> AlSession:
    """Label the seed fraction of the training cohort and arm the loop.

    The seed is a seeded uniform draw over cohort ids whose ground-truth
    label is known (with full ground truth that is the whole cohort, which
    is the simulated setting). ``initial_labeled_ids`` overrides the draw
    for constructed experiments.
    """
    cohort = sorted(pool.training_cohort)
    if not cohort:
        raise EngineError("EMPTY_COHORT", "training cohort is empty")
    if pool.labeled_ids:
        raise EngineError("INVALID_POOL", "seed_session expects a pool with nothing labeled yet")
    if dataset.feature_count != config.model.feature_count:
        raise EngineError(
            "SHAPE_MISMATCH",
            f"dataset has {dataset.feature_count} features, model expects {config.model.feature_count}",
        )
    if dataset.class_count != config.model.class_count:
        raise EngineError(
            "SHAPE_MISMATCH",
            f"dataset has {dataset.class_count} classes, model expects {config.model.class_count}",
        )
    if config.oracle == SIMULATED:
        eval_ids = sorted(pool.validation_ids | pool.test_ids)
        known = dataset.labels_for(cohort + eval_ids) != UNKNOWN
        if not bool(np.all(known)):
            raise EngineError(
                "MISSING_GROUND_TRUTH", "a simulated oracle needs ground truth for every sample"
            )

    if initial_labeled_ids is not None:
        chosen = [int(i) for i in initial_labeled_ids]
        if len(set(chosen)) != len(chosen) or not set(chosen) <= set(cohort):
            raise EngineError("UNKNOWN_ID", "initial_labeled_ids must be distinct cohort ids")
    else:
        want = uncertainty.ceil_fraction(config.initial_fraction, len(cohort))
        candidates = [i for i in cohort if dataset.label_of(i) != UNKNOWN]
        if len(candidates) < want:
            raise EngineError(
                "MISSING_GROUND_TRUTH",
                f"seed needs {want} labeled samples, only {len(candidates)} have labels",
            )
        rng = np.random.default_rng(derive_seed(config.seed, _ROLE_SEED_CHOICE))
        chosen = sorted(int(i) for i in rng.choice(candidates, size=want, replace=False))
    if any(dataset.label_of(i) == UNKNOWN for i in chosen):
        raise EngineError("MISSING_GROUND_TRUTH", "seed samples must have known labels")

    session = AlSession(
        config=config,
        dataset=dataset,
        pool=pool.mark_labeled(chosen),
        base_model=base_model if base_model is not None else model.init(config.model),
        phase=TRAINING,
        initially_labeled=len(chosen),
    )
    return session


def train_committee(session: AlSession) -> AlSession:
    """Fine-tune one committee member per learning rate from the shared base."""
    _require_phase(session, TRAINING)
    labeled = sorted(session.pool.labeled_ids)
    if not labeled:
        raise EngineError("EMPTY_LABELED_SET", "cannot train a committee with no labeled samples")
    x = session.dataset.features_for(labeled)
    y = session.dataset.labels_for(labeled)
    cfg = session.config
    members = []
    for k, lr in enumerate(cfg.committee_lrs):
        train_cfg = model.with_seed(
            cfg.train, derive_seed(cfg.seed, _ROLE_MEMBER, session.round, k), lr
        )
        members.append(model.fine_tune(session.base_model, x, y, train_cfg))
    session.committee = tuple(members)
    session.phase = SCORING
    return session


def _choose_selection(
    strategy: str,
    ranking: Sequence[int],
    scope_ids: Sequence[int],
    select_fraction: float,
    basis_size: int,
    rng_seed: int,
) -> list[int]:
    """The ids to query this round; RANDOM ignores the ranking entirely."""
    count = min(uncertainty.ceil_fraction(select_fraction, basis_size), len(scope_ids))
    if count == 0:
        return []
    if strategy == UNCERTAINTY:
        return uncertainty.select_top(ranking, select_fraction, basis_size)
    rng = np.random.default_rng(rng_seed)
    drawn = rng.choice(np.array(sorted(scope_ids), dtype=np.int64), size=count, replace=False)
    return [int(i) for i in drawn]


def score_pool(session: AlSession) -> AlSession:
    """Score candidates by committee disagreement and queue this round's queries."""
    _require_phase(session, SCORING)
    if not session.committee:
        raise EngineError("EMPTY_COMMITTEE", "score_pool requires a trained committee")
    cfg = session.config
    pool = session.pool
    scope_ids = sorted(pool.unlabeled_ids if cfg.select_from == POOL else pool.training_cohort)

    if scope_ids:
        x = session.dataset.features_for(scope_ids)
        probs = np.stack([model.predict_proba(m, x) for m in session.committee])
        session.report = uncertainty.build_report(scope_ids, probs)
    else:
        session.report = uncertainty.UncertaintyReport(entries=(), ranking=())

    basis = len(pool.training_cohort) if cfg.select_basis == COHORT else len(scope_ids)
    selection = _choose_selection(
        cfg.strategy,
        session.report.ranking,
        scope_ids,
        cfg.select_fraction,
        basis,
        derive_seed(cfg.seed, _ROLE_RANDOM_QUERY, session.round),
    )
    selected = set(selection)
    # queue in ranking order (most informative first); drop already-labeled ids
    pending = [i for i in session.report.ranking if i in selected and i in pool.unlabeled_ids]
    session.pending_queries = tuple(pending)
    session.queried_total += len(pending)
    session.phase = AWAITING_LABELS
    if not pending:
        _finish_round(session)
    return session


def submit_labels(session: AlSession, answers: Sequence[tuple[int, int]]) -> AlSession:
    """Apply oracle answers atomically; finishing the batch closes the round."""
    _require_phase(session, AWAITING_LABELS)
    pending = set(session.pending_queries)
    seen: set[int] = set()
    validated: dict[int, int] = {}
    for sample_id, label in answers:
        sid, lab = int(sample_id), int(label)
        if sid not in pending or sid in seen:
            raise EngineError(
                "UNEXPECTED_SAMPLE", f"sample {sid} is not awaiting a label", sample_id=sid
            )
        if not (0 <= lab < session.dataset.class_count):
            raise EngineError(
                "INVALID_LABEL",
                f"label {lab} out of range for {session.dataset.class_count} classes",
                sample_id=sid, label=lab,
            )
        seen.add(sid)
        validated[sid] = lab
    if not validated:
        return session
    session.dataset = session.dataset.with_labels(validated)
    session.pool = session.pool.mark_labeled(validated)
    session.pending_queries = tuple(i for i in session.pending_queries if i not in seen)
    if not session.pending_queries:
        _finish_round(session)
    return session


def cancel_pending(session: AlSession) -> AlSession:
    """Drop unanswered queries and close the round with what is labeled.

    Cancelled queries leave the ledger: queried_total counts answered
    queries only, so walking away from a batch costs nothing.
    """
    _require_phase(session, AWAITING_LABELS)
    session.queried_total -= len(session.pending_queries)
    session.pending_queries = ()
    _finish_round(session)
    return session


def _auc_on(session: AlSession, clf: model.Classifier, ids: frozenset[int]) -> float:
    if session.dataset.class_count != 2 or not ids:
        return math.nan
    ordered = sorted(ids)
    y = session.dataset.labels_for(ordered)
    mask = y != UNKNOWN
    y = y[mask]
    if y.size == 0 or np.unique(y).size < 2:
        return math.nan
    x = session.dataset.features_for(ordered)[mask]
    scores = model.predict_proba(clf, x)[:, 1]
    return metrics.auc(y, scores)


def _finish_round(session: AlSession) -> None:
    cfg = session.config
    labeled = sorted(session.pool.labeled_ids)
    x = session.dataset.features_for(labeled)
    y = session.dataset.labels_for(labeled)
    middle_lr = sorted(cfg.committee_lrs)[len(cfg.committee_lrs) // 2]
    train_cfg = model.with_seed(
        cfg.train, derive_seed(cfg.seed, _ROLE_FINAL, session.round), middle_lr
    )
    session.final_model = model.fine_tune(session.base_model, x, y, train_cfg)
    record = RoundRecord(
        round=session.round,
        labeled_count=len(labeled),
        val_auc=_auc_on(session, session.final_model, session.pool.validation_ids),
        test_auc=_auc_on(session, session.final_model, session.pool.test_ids),
        savings=session.budget.savings_fraction,
    )
    session.history.append(record)
    reached_target = (
        cfg.target_val_auc is not None
        and math.isfinite(record.val_auc)
        and record.val_auc >= cfg.target_val_auc
    )
    if session.round >= cfg.rounds or reached_target:
        session.phase = DONE
    else:
        session.round += 1
        session.phase = TRAINING


def run_to_completion(session: AlSession) -> AlSession:
    """Drive a simulated session through all rounds without human input."""
    if session.config.oracle != SIMULATED:
        raise EngineError("SIMULATED_ONLY", "run_to_completion needs a simulated oracle")
    oracle = SimulatedOracle(session.dataset)
    while session.phase != DONE:
        if session.phase == TRAINING:
            train_committee(session)
        elif session.phase == SCORING:
            score_pool(session)
        elif session.phase == AWAITING_LABELS:
            answers = [(sid, oracle.label_for(sid)) for sid in session.pending_queries]
            submit_labels(session, answers)
        else:
            raise EngineError("WRONG_PHASE", f"cannot drive phase {session.phase}")
    return session


def budget_report(session: AlSession) -> BudgetLedger:
    return session.budget


# --- config (de)serialization -------------------------------------------------

def model_config_to_dict(cfg: model.ModelConfig) -> dict:
    return {
        "feature_count": cfg.feature_count,
        "class_count": cfg.class_count,
        "architecture": cfg.architecture,
        "hidden_units": cfg.hidden_units,
        "seed": cfg.seed,
    }


def train_config_to_dict(cfg: model.TrainConfig) -> dict:
    return {
        "learning_rate": cfg.learning_rate,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "mode": cfg.mode,
        "seed": cfg.seed,
    }


def session_config_to_dict(cfg: SessionConfig) -> dict:
    return {
        "model": model_config_to_dict(cfg.model),
        "train": train_config_to_dict(cfg.train),
        "initial_fraction": cfg.initial_fraction,
        "select_fraction": cfg.select_fraction,
        "committee_lrs": list(cfg.committee_lrs),
        "strategy": cfg.strategy,
        "rounds": cfg.rounds,
        "seed": cfg.seed,
        "oracle": cfg.oracle,
        "select_from": cfg.select_from,
        "select_basis": cfg.select_basis,
        "target_val_auc": cfg.target_val_auc,
    }


def session_config_from_dict(raw: Mapping) -> SessionConfig:
    try:
        model_cfg = model.ModelConfig(**dict(raw["model"]))
        train_cfg = model.TrainConfig(**dict(raw.get("train", {})))
        rest = {k: v for k, v in raw.items() if k not in ("model", "train")}
        if "committee_lrs" in rest:
            rest["committee_lrs"] = tuple(rest["committee_lrs"])
        return SessionConfig(model=model_cfg, train=train_cfg, **rest)
    except TypeError as exc:
        raise EngineError("INVALID_CONFIG", f"bad session config: {exc}") from None


# --- persistence ---------------------------------------------------------------

_HISTORY_COLUMNS = ["round", "labeled_count", "val_auc", "test_auc", "savings"]


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _write_json(path: Path, payload) -> None:
    _atomic_write(path, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode())


def write_history_csv(history: Sequence[RoundRecord], path) -> None:
    rows = [",".join(_HISTORY_COLUMNS)]
    for r in history:
        rows.append(
            f"{r.round},{r.labeled_count},{r.val_auc!r},{r.test_auc!r},{r.savings!r}"
        )
    _atomic_write(Path(path), ("\n".join(rows) + "\n").encode())


def read_history_csv(path) -> list[RoundRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _HISTORY_COLUMNS:
            raise EngineError(
                "MALFORMED_HISTORY", f"{path} has columns {reader.fieldnames}", file=str(path)
            )
        for row in reader:
            try:
                records.append(
                    RoundRecord(
                        round=int(row["round"]),
                        labeled_count=int(row["labeled_count"]),
                        val_auc=float(row["val_auc"]),
                        test_auc=float(row["test_auc"]),
                        savings=float(row["savings"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise EngineError(
                    "MALFORMED_HISTORY", f"{path}: {exc}", file=str(path)
                ) from None
    return records


def save_session(session: AlSession, directory) -> None:
    """Persist a session as a directory (config/pool/labels/state JSON,
    weight binaries, history CSV). The dataset is stored by the caller."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_json(directory / "config.json", session_config_to_dict(session.config))
    pool = session.pool
    _write_json(directory / "pool.json", {
        "labeled": sorted(pool.labeled_ids),
        "unlabeled": sorted(pool.unlabeled_ids),
        "validation": sorted(pool.validation_ids),
        "test": sorted(pool.test_ids),
    })
    labels = {
        str(i): int(session.dataset.label_of(i)) for i in sorted(pool.labeled_ids)
    }
    _write_json(directory / "labels.json", labels)
    scores = None
    ranking = None
    if session.report is not None:
        scores = {
            str(e.sample_id): [e.entropy_sum, e.kl_sum, e.score] for e in session.report.entries
        }
        ranking = list(session.report.ranking)
    _write_json(directory / "state.json", {
        "phase": session.phase,
        "round": session.round,
        "initially_labeled": session.initially_labeled,
        "queried_total": session.queried_total,
        "pending": list(session.pending_queries),
        "scores": scores,
        "ranking": ranking,
    })
    write_history_csv(session.history, directory / "history.csv")
    model.save_weights(session.base_model, directory / "base.weights")
    for k, member in enumerate(session.committee):
        model.save_weights(member, directory / f"committee_{k}.weights")
    if session.final_model is not None:
        model.save_weights(session.final_model, directory / "final.weights")


def load_session(directory, dataset: Dataset) -> AlSession:
    """Rebuild a session from :func:`save_session` output plus its dataset."""
    directory = Path(directory)
    with open(directory / "config.json") as fh:
        config = session_config_from_dict(json.load(fh))
    with open(directory / "pool.json") as fh:
        pool_raw = json.load(fh)
    pool = PoolState(
        labeled_ids=frozenset(pool_raw["labeled"]),
        unlabeled_ids=frozenset(pool_raw["unlabeled"]),
        validation_ids=frozenset(pool_raw["validation"]),
        test_ids=frozenset(pool_raw["test"]),
    )
    with open(directory / "labels.json") as fh:
        labels = {int(k): int(v) for k, v in json.load(fh).items()}
    if labels:
        dataset = dataset.with_labels(labels)
    with open(directory / "state.json") as fh:
        state = json.load(fh)

    report = None
    if state["scores"] is not None:
        entries = tuple(
            uncertainty.SampleScore(
                sample_id=sid,
                dists=np.empty((0, dataset.class_count)),
                entropy_sum=float(v[0]), kl_sum=float(v[1]), score=float(v[2]),
            )
            # JSON keys are strings; restore ascending-id entry order
            for sid, v in sorted(
                ((int(k), v) for k, v in state["scores"].items()), key=lambda kv: kv[0]
            )
        )
        report = uncertainty.UncertaintyReport(entries=entries, ranking=tuple(state["ranking"]))

    committee = []
    for k in range(len(config.committee_lrs)):
        path = directory / f"committee_{k}.weights"
        if path.exists():
            committee.append(model.load_weights(path))
    final_path = directory / "final.weights"
    session = AlSession(
        config=config,
        dataset=dataset,
        pool=pool,
        base_model=model.load_weights(directory / "base.weights"),
        phase=state["phase"],
        round=int(state["round"]),
        committee=tuple(committee),
        final_model=model.load_weights(final_path) if final_path.exists() else None,
        report=report,
        pending_queries=tuple(int(i) for i in state["pending"]),
        initially_labeled=int(state["initially_labeled"]),
        queried_total=int(state["queried_total"]),
        history=read_history_csv(directory / "history.csv"),
    )
    return session
