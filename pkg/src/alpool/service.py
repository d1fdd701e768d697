"""HTTP facade over the engine for live annotation sessions.

Sessions and datasets live in a data directory; every completed mutating
request is persisted before the response goes out, so a killed and
restarted service reconstructs identical session state from disk.

Mutations on one session are serialized by a per-session lock. Status
projections take the same lock so a reader can never observe a half
applied batch or a status mixing two rounds.
"""

from __future__ import annotations

import base64
import json
import math
import shutil
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from fastapi import FastAPI, Form, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from . import data, engine, model
from .errors import AlError, DataError, EngineError

_HTTP_STATUS = {
    "UNKNOWN_DATASET": 404,
    "UNKNOWN_SESSION": 404,
    "WRONG_PHASE": 409,
    "UNEXPECTED_SAMPLE": 422,
    "INVALID_LABEL": 422,
    "INVALID_CONFIG": 422,
}


def _clean(value: Any) -> Any:
    """JSON-safe projection: non-finite floats become null."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


@dataclass
class _SessionEntry:
    session: engine.AlSession
    meta: dict
    directory: Path
    lock: threading.Lock = field(default_factory=threading.Lock)


class ServiceState:
    """Everything the endpoints share: the store directory and live sessions."""

    def __init__(self, data_dir):
        self.root = Path(data_dir)
        (self.root / "datasets").mkdir(parents=True, exist_ok=True)
        (self.root / "sessions").mkdir(parents=True, exist_ok=True)
        self._datasets: dict[str, data.Dataset] = {}
        self._sessions: dict[str, _SessionEntry] = {}
        self._registry_lock = threading.Lock()
        for directory in sorted((self.root / "sessions").iterdir()):
            if (directory / "session_meta.json").exists():
                self._restore_session(directory)

    # -- datasets ------------------------------------------------------------

    def dataset_meta(self, dataset_id: str) -> dict:
        path = self.root / "datasets" / dataset_id / "meta.json"
        if not path.exists():
            raise EngineError("UNKNOWN_DATASET", f"no dataset {dataset_id}", dataset_id=dataset_id)
        with open(path) as fh:
            return json.load(fh)

    def store_dataset(self, kind: str, files: dict[str, bytes], options: dict) -> tuple[str, dict]:
        dataset_id = uuid.uuid4().hex[:12]
        directory = self.root / "datasets" / dataset_id
        directory.mkdir(parents=True)
        for name, blob in files.items():
            engine._atomic_write(directory / name, blob)
        meta = {"kind": kind, "files": sorted(files), **options}
        try:
            loaded = self._load_raw(directory, meta)  # validate before accepting
        except AlError:
            shutil.rmtree(directory, ignore_errors=True)
            raise
        meta["n_samples"] = loaded.n_samples
        meta["feature_count"] = loaded.feature_count
        meta["class_count"] = loaded.class_count
        if not meta.get("class_names"):
            meta["class_names"] = [str(c) for c in range(loaded.class_count)]
        engine._write_json(directory / "meta.json", meta)
        self._datasets[dataset_id] = loaded
        return dataset_id, meta

    def _load_raw(self, directory: Path, meta: Mapping) -> data.Dataset:
        if meta["kind"] == "idx":
            return data.load_idx(
                directory / "images.idx", directory / "labels.idx",
                class_count=meta.get("class_count"),
            )
        return data.load_csv(
            directory / "data.csv",
            label_column=meta.get("label_column", "label"),
            class_count=meta.get("class_count"),
        )

    def dataset(self, dataset_id: str) -> data.Dataset:
        if dataset_id not in self._datasets:
            meta = self.dataset_meta(dataset_id)
            self._datasets[dataset_id] = self._load_raw(
                self.root / "datasets" / dataset_id, meta
            )
        return self._datasets[dataset_id]

    # -- sessions ------------------------------------------------------------

    def entry(self, session_id: str) -> _SessionEntry:
        found = self._sessions.get(session_id)
        if found is None:
            raise EngineError("UNKNOWN_SESSION", f"no session {session_id}", session_id=session_id)
        return found

    def _prepared_dataset(self, meta: Mapping, pool: data.PoolState | None) -> data.Dataset:
        """Rebuild the exact training view: raw bytes, then balance, then
        normalization with statistics from the training cohort."""
        ds = self.dataset(meta["dataset_id"])
        if meta.get("balance"):
            ds = data.balance(ds, seed=int(meta.get("balance_seed", 0)))
        if meta.get("normalize"):
            stat_ids = sorted(pool.training_cohort) if pool is not None else None
            ds, _ = data.normalize(ds, stat_ids=stat_ids)
        return ds

    def create_session(self, body: Mapping) -> _SessionEntry:
        dataset_id = body.get("dataset_id")
        if not isinstance(dataset_id, str):
            raise EngineError("INVALID_CONFIG", "dataset_id is required")
        self.dataset_meta(dataset_id)  # 404 before any work

        raw_cfg = dict(body.get("config") or {})
        meta = {
            "dataset_id": dataset_id,
            "split": body.get("split"),
            "balance": bool(body.get("balance", False)),
            "balance_seed": int(body.get("balance_seed", 0)),
            "normalize": bool(body.get("normalize", False)),
            "partial_batch_fraction": body.get("partial_batch_fraction"),
            "round_batch_size": 0,
        }
        frac = meta["partial_batch_fraction"]
        if frac is not None and not (isinstance(frac, (int, float)) and 0 < frac <= 1):
            raise EngineError("INVALID_CONFIG", "partial_batch_fraction must lie in (0, 1]")

        ds = self.dataset(dataset_id)
        if meta["balance"]:
            ds = data.balance(ds, seed=meta["balance_seed"])
        if meta["split"] is not None:
            try:
                spec = data.SplitSpec(**meta["split"])
            except TypeError as exc:
                raise EngineError("INVALID_CONFIG", f"bad split: {exc}") from None
            pool = data.split(ds, spec)
        else:
            pool = data.PoolState(
                frozenset(), frozenset(int(i) for i in ds.sample_ids), frozenset(), frozenset()
            )
        if meta["normalize"]:
            ds, _ = data.normalize(ds, stat_ids=sorted(pool.training_cohort))

        model_raw = dict(raw_cfg.pop("model", None) or {})
        model_raw.setdefault("feature_count", ds.feature_count)
        model_raw.setdefault("class_count", ds.class_count)
        raw_cfg["model"] = model_raw
        try:
            config = engine.session_config_from_dict(raw_cfg)
        except AlError:
            raise
        except Exception as exc:
            raise EngineError("INVALID_CONFIG", f"bad session config: {exc}") from None

        session = engine.seed_session(ds, pool, config)
        if config.oracle == engine.SIMULATED:
            engine.run_to_completion(session)
        else:
            _drive(session)
        meta["round_batch_size"] = len(session.pending_queries)

        session_id = uuid.uuid4().hex[:12]
        directory = self.root / "sessions" / session_id
        entry = _SessionEntry(session=session, meta=meta, directory=directory)
        self.persist(entry)
        with self._registry_lock:
            self._sessions[session_id] = entry
        entry.meta["session_id"] = session_id
        return entry

    def persist(self, entry: _SessionEntry) -> None:
        engine.save_session(entry.session, entry.directory)
        meta = {k: v for k, v in entry.meta.items() if k != "session_id"}
        engine._write_json(entry.directory / "session_meta.json", meta)

    def _restore_session(self, directory: Path) -> None:
        with open(directory / "session_meta.json") as fh:
            meta = json.load(fh)
        with open(directory / "pool.json") as fh:
            pool_raw = json.load(fh)
        pool = data.PoolState(
            labeled_ids=frozenset(pool_raw["labeled"]),
            unlabeled_ids=frozenset(pool_raw["unlabeled"]),
            validation_ids=frozenset(pool_raw["validation"]),
            test_ids=frozenset(pool_raw["test"]),
        )
        ds = self._prepared_dataset(meta, pool)
        session = engine.load_session(directory, ds)
        meta["session_id"] = directory.name
        self._sessions[directory.name] = _SessionEntry(
            session=session, meta=meta, directory=directory
        )


def session_status(entry: _SessionEntry) -> dict:
    session = entry.session
    budget = session.budget
    latest = session.history[-1] if session.history else None
    return _clean({
        "session_id": entry.meta.get("session_id", entry.directory.name),
        "phase": session.phase,
        "round": session.round,
        "strategy": session.config.strategy,
        "oracle": session.config.oracle,
        "rounds": session.config.rounds,
        "pending_count": len(session.pending_queries),
        "class_count": session.dataset.class_count,
        "budget": {
            "train_cohort_size": budget.train_cohort_size,
            "initially_labeled": budget.initially_labeled,
            "queried_total": budget.queried_total,
            "distinct_labeled": budget.distinct_labeled,
            "savings_fraction": budget.savings_fraction,
        },
        "latest": None if latest is None else {
            "round": latest.round,
            "labeled_count": latest.labeled_count,
            "val_auc": latest.val_auc,
            "test_auc": latest.test_auc,
            "savings": latest.savings,
        },
    })


def _query_items(state: ServiceState, entry: _SessionEntry, limit: int | None) -> list[dict]:
    session = entry.session
    if session.phase != engine.AWAITING_LABELS or session.report is None:
        return []
    chosen = session.pending_queries if limit is None else session.pending_queries[:max(limit, 0)]
    by_id = session.report.by_id()
    ranks = session.report.rank_of()
    meta = state.dataset_meta(entry.meta["dataset_id"])
    class_names = meta.get("class_names") or [
        str(c) for c in range(session.dataset.class_count)
    ]
    items = []
    for sid in chosen:
        payload_bytes = session.dataset.payload_of(sid)
        if payload_bytes is not None:
            rows, cols = session.dataset.payload_shape
            payload = {
                "kind": "image",
                "data": base64.b64encode(payload_bytes).decode("ascii"),
                "rows": rows,
                "cols": cols,
            }
        else:
            payload = {
                "kind": "features",
                "data": [float(v) for v in session.dataset.features_for([sid])[0]],
            }
        score = by_id[sid]
        items.append({
            "sample_id": sid,
            "payload": payload,
            "score": score.score,
            "entropy_sum": score.entropy_sum,
            "kl_sum": score.kl_sum,
            "rank": ranks[sid],
            "class_count": session.dataset.class_count,
            "class_names": class_names,
        })
    return _clean(items)


def _drive(session: engine.AlSession) -> None:
    """Advance a human-oracle session until it needs labels or is done.

    Each pass either arms a non-empty query batch (stop), or the empty
    selection closed the round, which bounds the loop by the round budget.
    """
    while session.phase == engine.TRAINING:
        engine.train_committee(session)
        engine.score_pool(session)


def _maybe_close_partial_batch(entry: _SessionEntry) -> None:
    frac = entry.meta.get("partial_batch_fraction")
    session = entry.session
    if frac is None or session.phase != engine.AWAITING_LABELS:
        return
    batch = int(entry.meta.get("round_batch_size", 0))
    answered = batch - len(session.pending_queries)
    if batch > 0 and answered / batch >= float(frac):
        engine.cancel_pending(session)


def create_app(data_dir, ui_dir=None) -> FastAPI:
    state = ServiceState(data_dir)
    app = FastAPI(title="alpool", docs_url=None, redoc_url=None)
    app.state.store = state
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(AlError)
    async def _al_error(_request: Request, exc: AlError):
        status = _HTTP_STATUS.get(exc.code, 400)
        return JSONResponse(
            status_code=status,
            content={"code": exc.code, "message": exc.message, "detail": _clean(exc.detail)},
        )

    @app.post("/api/datasets", status_code=201)
    async def upload_dataset(
        images: UploadFile | None = None,
        labels: UploadFile | None = None,
        csv: UploadFile | None = None,
        class_count: int | None = Form(None),
        class_names: str | None = Form(None),
        label_column: str = Form("label"),
    ):
        options: dict[str, Any] = {"label_column": label_column}
        if class_count is not None:
            options["class_count"] = class_count
        if class_names:
            options["class_names"] = [n.strip() for n in class_names.split(",") if n.strip()]
        if csv is not None:
            files = {"data.csv": await csv.read()}
            kind = "csv"
        elif images is not None and labels is not None:
            files = {"images.idx": await images.read(), "labels.idx": await labels.read()}
            kind = "idx"
        else:
            raise DataError("INVALID_UPLOAD", "send either a csv file or an images+labels pair")
        dataset_id, meta = state.store_dataset(kind, files, options)
        return {"dataset_id": dataset_id, **_clean(meta)}

    @app.post("/api/sessions", status_code=201)
    async def create_session(body: dict):
        entry = state.create_session(body)
        with entry.lock:
            return session_status(entry)

    @app.get("/api/sessions/{session_id}")
    async def get_session(session_id: str):
        entry = state.entry(session_id)
        with entry.lock:
            return session_status(entry)

    @app.get("/api/sessions/{session_id}/queue")
    async def get_queue(session_id: str, limit: int | None = None):
        entry = state.entry(session_id)
        with entry.lock:
            return {
                "phase": entry.session.phase,
                "items": _query_items(state, entry, limit),
            }

    @app.post("/api/sessions/{session_id}/labels")
    async def post_labels(session_id: str, answers: list[dict]):
        entry = state.entry(session_id)
        pairs = []
        for item in answers:
            if not isinstance(item, dict) or "sample_id" not in item or "label" not in item:
                raise EngineError("INVALID_LABEL", "each item needs sample_id and label")
            pairs.append((int(item["sample_id"]), int(item["label"])))
        with entry.lock:
            round_before = entry.session.round
            engine.submit_labels(entry.session, pairs)
            _maybe_close_partial_batch(entry)
            _drive(entry.session)
            if entry.session.round != round_before:
                # a fresh batch was armed; its size anchors the partial-batch rule
                entry.meta["round_batch_size"] = len(entry.session.pending_queries)
            state.persist(entry)
            return session_status(entry)

    @app.get("/api/sessions/{session_id}/metrics")
    async def get_metrics(session_id: str, format: str = "json"):
        entry = state.entry(session_id)
        with entry.lock:
            history = list(entry.session.history)
            status = session_status(entry)
        if format == "csv":
            lines = ["round,labeled_count,val_auc,test_auc,savings"]
            for r in history:
                lines.append(
                    f"{r.round},{r.labeled_count},{r.val_auc!r},{r.test_auc!r},{r.savings!r}"
                )
            return PlainTextResponse("\n".join(lines) + "\n", media_type="text/csv")
        return {
            "rounds": _clean([
                {
                    "round": r.round,
                    "labeled_count": r.labeled_count,
                    "val_auc": r.val_auc,
                    "test_auc": r.test_auc,
                    "savings": r.savings,
                }
                for r in history
            ]),
            "budget": status["budget"],
        }

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
