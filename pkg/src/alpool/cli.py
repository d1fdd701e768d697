"""Batch experiment runner: strategy comparisons, band studies, reports, serving.

Experiments are described by a JSON spec file; a handful of flags override
individual fields. Every output is written atomically with repr-formatted
floats, so rerunning an identical spec reproduces byte-identical files.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import data, engine, metrics, model, uncertainty
from .errors import AlError


class UsageError(Exception):
    """Bad flags or unusable spec content; maps to exit code 2."""


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: dict
    session: dict = field(default_factory=dict)
    split: dict | None = None
    normalize: bool = False
    balance: bool = False
    seeds: tuple[int, ...] = (0,)
    strategies: tuple[str, ...] = (engine.UNCERTAINTY,)
    bands: tuple[tuple[float, float], ...] = ()
    drop_top: float = 0.0
    drop_bottom: float = 0.0
    output_dir: str = "out"

    def __post_init__(self):
        if not self.seeds:
            raise UsageError("spec needs at least one seed")
        if not self.strategies:
            raise UsageError("spec needs at least one strategy")
        for s in self.strategies:
            if s not in (engine.UNCERTAINTY, engine.RANDOM):
                raise UsageError(f"unknown strategy {s!r}")
        if len(set(self.strategies)) != len(self.strategies):
            raise UsageError("strategies must be distinct")
        drops_ok = (0 <= self.drop_top < 1 and 0 <= self.drop_bottom < 1
                    and self.drop_top + self.drop_bottom < 1)
        if not drops_ok:
            raise UsageError("drop fractions must be non-negative and sum below 1")
        for lo, hi in self.bands:
            if not (0 <= lo < hi <= 1):
                raise UsageError(f"band [{lo}, {hi}) must satisfy 0 <= lo < hi <= 1")
        if self.session.get("oracle", engine.SIMULATED) != engine.SIMULATED:
            raise UsageError("batch experiments need the simulated oracle")


def load_spec(path, overrides: dict | None = None) -> ExperimentSpec:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"spec file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"spec file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict) or "dataset" not in raw:
        raise UsageError(f"spec file {path} must be a JSON object with a 'dataset' entry")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    known = {
        "dataset", "session", "split", "normalize", "balance",
        "seeds", "strategies", "bands", "drop_top", "drop_bottom", "output_dir",
    }
    unknown = set(raw) - known
    if unknown:
        raise UsageError(f"unknown spec fields: {sorted(unknown)}")
    for seq_key in ("seeds", "strategies"):
        if seq_key in raw:
            raw[seq_key] = tuple(raw[seq_key])
    if "bands" in raw:
        raw["bands"] = tuple((float(lo), float(hi)) for lo, hi in raw["bands"])
    return ExperimentSpec(**raw)


def build_dataset(source: dict, seed: int) -> data.Dataset:
    """Materialize the dataset for one experiment seed.

    Synthetic data is regenerated per seed; file sources are fixed and the
    seed only drives the split and session randomness.
    """
    kind = source.get("kind")
    if kind == "synthetic":
        return data.generate_synthetic(
            n_per_class=int(source["n_per_class"]),
            class_count=int(source["class_count"]),
            means=source["means"],
            stddev=float(source["stddev"]),
            seed=seed,
        )
    if kind == "csv":
        return data.load_csv(
            source["path"],
            label_column=source.get("label_column", "label"),
            class_count=source.get("class_count"),
        )
    if kind == "idx":
        return data.load_idx(
            source["images"], source["labels"], class_count=source.get("class_count")
        )
    raise UsageError(f"dataset kind must be synthetic, csv or idx, got {kind!r}")


def _session_config(spec: ExperimentSpec, dataset: data.Dataset, strategy: str, seed: int):
    raw = json.loads(json.dumps(spec.session))  # deep copy
    model_raw = dict(raw.pop("model", None) or {})
    model_raw.setdefault("feature_count", dataset.feature_count)
    model_raw.setdefault("class_count", dataset.class_count)
    model_raw.setdefault("seed", seed)
    raw["model"] = model_raw
    raw["strategy"] = strategy
    raw["seed"] = seed
    return engine.session_config_from_dict(raw)


def _prepare(spec: ExperimentSpec, seed: int) -> tuple[data.Dataset, data.PoolState]:
    ds = build_dataset(spec.dataset, seed)
    if spec.balance:
        ds = data.balance(ds, seed=seed)
    if spec.split is not None:
        split_raw = dict(spec.split)
        split_raw.setdefault("seed", seed)
        pool = data.split(ds, data.SplitSpec(**split_raw))
    else:
        pool = data.PoolState(
            frozenset(), frozenset(int(i) for i in ds.sample_ids), frozenset(), frozenset()
        )
    if spec.normalize:
        ds, _ = data.normalize(ds, stat_ids=sorted(pool.training_cohort))
    return ds, pool


def _say(quiet: bool, message: str) -> None:
    if not quiet:
        print(message)


def run_experiment(spec: ExperimentSpec, quiet: bool = False) -> Path:
    """One full simulated session per (strategy x seed); aggregate afterwards."""
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    histories: dict[str, list] = {s: [] for s in spec.strategies}
    budget_rows = []
    for strategy in spec.strategies:
        for seed in spec.seeds:
            ds, pool = _prepare(spec, seed)
            config = _session_config(spec, ds, strategy, seed)
            session = engine.seed_session(ds, pool, config)
            engine.run_to_completion(session)
            run_dir = out / f"{strategy}_seed{seed}"
            run_dir.mkdir(parents=True, exist_ok=True)
            engine.write_history_csv(session.history, run_dir / "history.csv")
            budget = session.budget
            engine._write_json(run_dir / "run.json", {
                "strategy": strategy,
                "seed": seed,
                "config": engine.session_config_to_dict(config),
                "budget": {
                    "train_cohort_size": budget.train_cohort_size,
                    "initially_labeled": budget.initially_labeled,
                    "queried_total": budget.queried_total,
                    "distinct_labeled": budget.distinct_labeled,
                    "savings_fraction": budget.savings_fraction,
                },
            })
            model.save_weights(session.final_model, run_dir / "final.weights")
            histories[strategy].append(session.history)
            budget_rows.append((strategy, seed, budget))
            _say(quiet, f"{strategy} seed {seed}: "
                        f"labeled {budget.distinct_labeled}/{budget.train_cohort_size}, "
                        f"test AUC {session.history[-1].test_auc:.4f}")

    report = metrics.compare_strategies(histories)
    metrics.write_comparison_csv(report, out / "comparison.csv")

    lines = ["strategy,seed,train_cohort_size,initially_labeled,queried_total,"
             "distinct_labeled,savings_fraction"]
    for strategy, seed, budget in budget_rows:
        lines.append(
            f"{strategy},{seed},{budget.train_cohort_size},{budget.initially_labeled},"
            f"{budget.queried_total},{budget.distinct_labeled},{budget.savings_fraction!r}"
        )
    engine._atomic_write(out / "budgets.csv", ("\n".join(lines) + "\n").encode())
    _say(quiet, f"wrote {out / 'comparison.csv'}")
    return out


def _train_on_ids(session, ids: Sequence[int], seed: int):
    """Final-model fit on exactly these cohort ids, in ascending-id order."""
    ordered = sorted(int(i) for i in ids)
    x = session.dataset.features_for(ordered)
    y = session.dataset.labels_for(ordered)
    cfg = session.config
    middle_lr = sorted(cfg.committee_lrs)[len(cfg.committee_lrs) // 2]
    train_cfg = model.with_seed(cfg.train, engine.derive_seed(seed, 3, 1), middle_lr)
    return model.fine_tune(session.base_model, x, y, train_cfg)


def run_band_study(spec: ExperimentSpec, quiet: bool = False) -> Path:
    """Score the whole cohort with the seed-trained committee, then train one
    final model per percentile band of the ranking (plus a full-cohort
    baseline) and tabulate validation/test AUC against band position."""
    if not spec.bands:
        raise UsageError("band study needs a non-empty 'bands' grid")
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for seed in spec.seeds:
        ds, pool = _prepare(spec, seed)
        config = _session_config(spec, ds, engine.UNCERTAINTY, seed)
        session = engine.seed_session(ds, pool, config)
        engine.train_committee(session)

        cohort = sorted(session.pool.training_cohort)
        probs = np.stack([
            model.predict_proba(m, session.dataset.features_for(cohort))
            for m in session.committee
        ])
        report = uncertainty.build_report(cohort, probs)
        kept = uncertainty.band_filter(
            report.ranking, drop_top=spec.drop_top, drop_bottom=spec.drop_bottom
        )

        def evaluate(tag, lo, hi, ids):
            clf = _train_on_ids(session, ids, seed)
            val = engine._auc_on(session, clf, session.pool.validation_ids)
            test = engine._auc_on(session, clf, session.pool.test_ids)
            rows.append((seed, tag, lo, hi, len(ids), val, test))
            _say(quiet, f"seed {seed} band {tag}: n={len(ids)}, test AUC {test:.4f}")

        evaluate("baseline", 0.0, 1.0, cohort)
        for lo, hi in spec.bands:
            band_ids = uncertainty.band_filter(kept, band=(lo, hi))
            evaluate(f"{lo!r}-{hi!r}", lo, hi, band_ids)

    lines = ["seed,band,lo,hi,train_size,val_auc,test_auc"]
    for seed, tag, lo, hi, size, val, test in rows:
        lines.append(f"{seed},{tag},{lo!r},{hi!r},{size},{val!r},{test!r}")
    engine._atomic_write(out / "bands.csv", ("\n".join(lines) + "\n").encode())
    _say(quiet, f"wrote {out / 'bands.csv'}")
    return out


def write_report(run_dirs: Sequence[str], out_dir) -> Path:
    """Consolidate run directories into a long-format table plus plot data."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = []
    for raw in run_dirs:
        directory = Path(raw)
        meta_path = directory / "run.json"
        strategy, seed = directory.name, 0
        if meta_path.exists():
            with open(meta_path) as fh:
                meta = json.load(fh)
            strategy = meta.get("strategy", strategy)
            seed = int(meta.get("seed", 0))
        history = engine.read_history_csv(directory / "history.csv")
        runs.append((strategy, seed, history))
    runs.sort(key=lambda r: (r[0], r[1]))

    lines = ["strategy,seed,round,metric,value"]
    for strategy, seed, history in runs:
        for record in history:
            for metric_name in ("val_auc", "test_auc", "savings"):
                value = getattr(record, metric_name)
                lines.append(f"{strategy},{seed},{record.round},{metric_name},{value!r}")
    engine._atomic_write(out / "report.csv", ("\n".join(lines) + "\n").encode())

    for metric_name in ("val_auc", "test_auc"):
        blocks = ["# round mean std (per strategy block)"]
        for strategy in sorted({r[0] for r in runs}):
            per_round: dict[int, list[float]] = {}
            for s, _, history in runs:
                if s != strategy:
                    continue
                for record in history:
                    per_round.setdefault(record.round, []).append(
                        getattr(record, metric_name)
                    )
            blocks.append(f'# strategy "{strategy}"')
            for round_no in sorted(per_round):
                values = np.array(per_round[round_no])
                blocks.append(f"{round_no} {values.mean()!r} {values.std()!r}")
            blocks.append("")
        engine._atomic_write(
            out / f"report_{metric_name}.dat", ("\n".join(blocks) + "\n").encode()
        )
    return out


def _cmd_run(args) -> int:
    spec = load_spec(args.config, _spec_overrides(args))
    run_experiment(spec, quiet=args.quiet)
    return 0


def _cmd_bandstudy(args) -> int:
    spec = load_spec(args.config, _spec_overrides(args))
    run_band_study(spec, quiet=args.quiet)
    return 0


def _cmd_report(args) -> int:
    out = write_report(args.run_dirs, args.out or "report")
    if not args.quiet:
        print(f"wrote {out / 'report.csv'}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    addr = args.addr or os.environ.get("AL_ADDR", "127.0.0.1:8000")
    host, _, port_raw = addr.rpartition(":")
    if not host or not port_raw.isdigit():
        raise UsageError(f"--addr must look like host:port, got {addr!r}")
    data_dir = args.data_dir or os.environ.get("AL_DATA_DIR", "al_data")
    app = create_app(data_dir, ui_dir=args.ui)
    uvicorn.run(app, host=host, port=int(port_raw), log_level="warning" if args.quiet else "info")
    return 0


def _spec_overrides(args) -> dict:
    overrides: dict = {}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["seeds"] = [args.seed]
    if getattr(args, "strategy", None):
        overrides["strategies"] = [args.strategy]
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alpool", description="pool-based active learning experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory override")
        p.add_argument("--seed", type=int, help="run a single seed instead of the config's list")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    run_p = sub.add_parser("run", help="strategy comparison over seeds")
    run_p.add_argument("--config", required=True, help="experiment spec (JSON)")
    run_p.add_argument("--strategy", choices=[engine.UNCERTAINTY, engine.RANDOM],
                       help="run a single strategy instead of the config's list")
    common(run_p)
    run_p.set_defaults(func=_cmd_run)

    band_p = sub.add_parser("bandstudy", help="AUC by uncertainty-ranking band")
    band_p.add_argument("--config", required=True, help="experiment spec (JSON)")
    common(band_p)
    band_p.set_defaults(func=_cmd_bandstudy)

    report_p = sub.add_parser("report", help="consolidate run directories")
    report_p.add_argument("run_dirs", nargs="*", help="run directories with history.csv")
    common(report_p)
    report_p.set_defaults(func=_cmd_report)

    serve_p = sub.add_parser("serve", help="launch the annotation HTTP service")
    serve_p.add_argument("--addr", help="listen address host:port (or AL_ADDR)")
    serve_p.add_argument("--data-dir", help="persistence directory (or AL_DATA_DIR)")
    serve_p.add_argument("--ui", help="static UI directory to mount at /")
    common(serve_p)
    serve_p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
