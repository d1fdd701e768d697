"""Command-line runner: experiments, band studies, reports, exit codes."""

import csv
import json

import numpy as np
import pytest

from alpool.cli import main
from alpool.data import generate_synthetic, save_csv


def base_spec(out_dir, **overrides):
    spec = {
        "dataset": {
            "kind": "synthetic",
            "n_per_class": 50,
            "class_count": 2,
            "means": [[-1.5, -1.5], [1.5, 1.5]],
            "stddev": 1.0,
        },
        "split": {"train_fraction": 0.6, "validation_fraction": 0.2,
                  "test_fraction": 0.2},
        "session": {
            "train": {"epochs": 2, "batch_size": 16},
            "committee_lrs": [0.05, 0.02, 0.01],
            "rounds": 1,
        },
        "seeds": [0, 1],
        "strategies": ["uncertainty", "random"],
        "output_dir": str(out_dir),
    }
    spec.update(overrides)
    return spec


def write_spec(tmp_path, spec, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(spec, indent=2))
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestRun:
    def test_produces_run_dirs_and_comparison(self, tmp_path):
        out = tmp_path / "out"
        spec_path = write_spec(tmp_path, base_spec(out))
        assert main(["run", "--config", str(spec_path), "--quiet"]) == 0
        for strategy in ("uncertainty", "random"):
            for seed in (0, 1):
                run_dir = out / f"{strategy}_seed{seed}"
                assert (run_dir / "history.csv").exists()
                assert (run_dir / "run.json").exists()
                assert (run_dir / "final.weights").exists()
        assert (out / "comparison.csv").exists()
        assert (out / "budgets.csv").exists()
        rows = read_rows(out / "budgets.csv")
        assert len(rows) == 4
        for row in rows:
            assert row["savings_fraction"] == repr(0.4)

    def test_rerun_is_byte_identical(self, tmp_path):
        out = tmp_path / "out"
        spec_path = write_spec(tmp_path, base_spec(out))
        assert main(["run", "--config", str(spec_path), "--quiet"]) == 0
        first = {
            p.name: p.read_bytes()
            for p in out.rglob("*") if p.is_file()
        }
        assert main(["run", "--config", str(spec_path), "--quiet"]) == 0
        second = {
            p.name: p.read_bytes()
            for p in out.rglob("*") if p.is_file()
        }
        assert first == second

    def test_seed_and_strategy_overrides(self, tmp_path):
        out = tmp_path / "out"
        spec_path = write_spec(tmp_path, base_spec(out))
        code = main(["run", "--config", str(spec_path), "--seed", "5",
                     "--strategy", "random", "--quiet"])
        assert code == 0
        dirs = sorted(p.name for p in out.iterdir() if p.is_dir())
        assert dirs == ["random_seed5"]

    def test_unknown_strategy_exits_2(self, tmp_path, capsys):
        spec = base_spec(tmp_path / "out", strategies=["entropy-only"])
        spec_path = write_spec(tmp_path, spec)
        assert main(["run", "--config", str(spec_path), "--quiet"]) == 2
        assert "entropy-only" in capsys.readouterr().err

    def test_missing_spec_exits_2(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json"), "--quiet"]) == 2

    def test_invalid_json_exits_2(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["run", "--config", str(path), "--quiet"]) == 2

    def test_human_oracle_rejected(self, tmp_path):
        spec = base_spec(tmp_path / "out")
        spec["session"]["oracle"] = "human"
        spec_path = write_spec(tmp_path, spec)
        assert main(["run", "--config", str(spec_path), "--quiet"]) == 2

    def test_csv_dataset_source(self, tmp_path):
        ds = generate_synthetic(30, 2, [[-1.5, -1.5], [1.5, 1.5]], 1.0, seed=3)
        csv_path = tmp_path / "data.csv"
        save_csv(ds, csv_path)
        out = tmp_path / "out"
        spec = base_spec(out, dataset={"kind": "csv", "path": str(csv_path)},
                         seeds=[0], strategies=["uncertainty"])
        spec_path = write_spec(tmp_path, spec)
        assert main(["run", "--config", str(spec_path), "--quiet"]) == 0
        assert (out / "uncertainty_seed0" / "history.csv").exists()


class TestBandStudy:
    def test_band_rows_and_baseline(self, tmp_path):
        out = tmp_path / "bands"
        spec = base_spec(out, seeds=[0], bands=[[0.0, 0.3], [0.3, 0.6], [0.6, 0.9]])
        spec_path = write_spec(tmp_path, spec)
        assert main(["bandstudy", "--config", str(spec_path), "--quiet"]) == 0
        rows = read_rows(out / "bands.csv")
        assert [r["band"] for r in rows] == ["baseline", "0.0-0.3", "0.3-0.6", "0.6-0.9"]

    def test_full_band_equals_baseline(self, tmp_path):
        out = tmp_path / "bands"
        spec = base_spec(out, seeds=[0, 1], bands=[[0.0, 1.0]],
                         drop_top=0.0, drop_bottom=0.0)
        spec_path = write_spec(tmp_path, spec)
        assert main(["bandstudy", "--config", str(spec_path), "--quiet"]) == 0
        rows = read_rows(out / "bands.csv")
        by_seed = {}
        for row in rows:
            by_seed.setdefault(row["seed"], {})[row["band"]] = row
        for seed, group in by_seed.items():
            base, full = group["baseline"], group["0.0-1.0"]
            assert base["train_size"] == full["train_size"]
            assert abs(float(base["val_auc"]) - float(full["val_auc"])) < 1e-12
            assert abs(float(base["test_auc"]) - float(full["test_auc"])) < 1e-12

    def test_drops_shrink_training_set(self, tmp_path):
        out = tmp_path / "bands"
        spec = base_spec(out, seeds=[0], bands=[[0.0, 1.0]],
                         drop_top=0.1, drop_bottom=0.1)
        spec_path = write_spec(tmp_path, spec)
        assert main(["bandstudy", "--config", str(spec_path), "--quiet"]) == 0
        rows = read_rows(out / "bands.csv")
        n = int(next(r for r in rows if r["band"] == "baseline")["train_size"])
        banded = int(next(r for r in rows if r["band"] == "0.0-1.0")["train_size"])
        assert banded == n - 2 * (n // 10)

    def test_disjoint_grid_covers_every_sample(self, tmp_path):
        out = tmp_path / "bands"
        bands = [[0.0, 0.25], [0.25, 0.5], [0.5, 0.75], [0.75, 1.0]]
        spec = base_spec(out, seeds=[0], bands=bands)
        spec_path = write_spec(tmp_path, spec)
        assert main(["bandstudy", "--config", str(spec_path), "--quiet"]) == 0
        rows = read_rows(out / "bands.csv")
        total = sum(int(r["train_size"]) for r in rows if r["band"] != "baseline")
        baseline = int(next(r for r in rows if r["band"] == "baseline")["train_size"])
        assert total == baseline

    def test_missing_bands_exits_2(self, tmp_path):
        spec = base_spec(tmp_path / "bands", seeds=[0])
        spec_path = write_spec(tmp_path, spec)
        assert main(["bandstudy", "--config", str(spec_path), "--quiet"]) == 2

    def test_rerun_byte_identical(self, tmp_path):
        out = tmp_path / "bands"
        spec = base_spec(out, seeds=[0], bands=[[0.0, 0.5], [0.5, 1.0]])
        spec_path = write_spec(tmp_path, spec)
        main(["bandstudy", "--config", str(spec_path), "--quiet"])
        first = (out / "bands.csv").read_bytes()
        main(["bandstudy", "--config", str(spec_path), "--quiet"])
        assert (out / "bands.csv").read_bytes() == first


class TestReport:
    def run_experiment(self, tmp_path, rounds=2):
        out = tmp_path / "out"
        spec = base_spec(out, seeds=[0, 1, 2])
        spec["session"]["rounds"] = rounds
        spec["session"]["select_fraction"] = 0.1
        spec_path = write_spec(tmp_path, spec)
        assert main(["run", "--config", str(spec_path), "--quiet"]) == 0
        return sorted(str(p) for p in out.iterdir() if p.is_dir())

    def test_long_format_row_count(self, tmp_path):
        run_dirs = self.run_experiment(tmp_path, rounds=2)
        report_dir = tmp_path / "report"
        code = main(["report", *run_dirs, "--out", str(report_dir), "--quiet"])
        assert code == 0
        rows = read_rows(report_dir / "report.csv")
        # 2 strategies x 3 seeds x 2 rounds x 3 metrics
        assert len(rows) == 36
        auc_rows = [r for r in rows if r["metric"] == "test_auc"]
        assert len(auc_rows) == 12
        assert (report_dir / "report_val_auc.dat").exists()
        assert (report_dir / "report_test_auc.dat").exists()

    def test_deterministic_ordering(self, tmp_path):
        run_dirs = self.run_experiment(tmp_path, rounds=1)
        a_dir, b_dir = tmp_path / "ra", tmp_path / "rb"
        main(["report", *run_dirs, "--out", str(a_dir), "--quiet"])
        main(["report", *reversed(run_dirs), "--out", str(b_dir), "--quiet"])
        assert (a_dir / "report.csv").read_bytes() == (b_dir / "report.csv").read_bytes()

    def test_empty_list_gives_header_only(self, tmp_path):
        report_dir = tmp_path / "report"
        assert main(["report", "--out", str(report_dir), "--quiet"]) == 0
        text = (report_dir / "report.csv").read_text()
        assert text == "strategy,seed,round,metric,value\n"

    def test_corrupt_history_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad_run"
        bad.mkdir()
        (bad / "history.csv").write_text("round,nope\n1,2\n")
        code = main(["report", str(bad), "--out", str(tmp_path / "r"), "--quiet"])
        assert code == 1
        assert "history.csv" in capsys.readouterr().err

    def test_missing_directory_exits_1(self, tmp_path):
        code = main(["report", str(tmp_path / "ghost"), "--out", str(tmp_path / "r"),
                     "--quiet"])
        assert code == 1


class TestComparisonContent:
    def test_uncertainty_listed_first(self, tmp_path):
        out = tmp_path / "out"
        spec = base_spec(out, strategies=["random", "uncertainty"], seeds=[0])
        spec_path = write_spec(tmp_path, spec)
        assert main(["run", "--config", str(spec_path), "--quiet"]) == 0
        header = (out / "comparison.csv").read_text().splitlines()[0]
        assert header.index("mean_uncertainty") < header.index("mean_random")
