"""Command-line interface: subcommands, config files, exit codes, and
reproducible outputs."""

import os

import numpy as np
import pytest

import miml_al.objective
from miml_al.cli import main, read_config


def run_cli(*args):
    return main(list(args))


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


class TestGenSynthetic:
    def test_writes_files(self, tmp_path):
        out = tmp_path / "data"
        assert run_cli("gen-synthetic", "--bags", "10", "--classes", "3", "--dim", "4",
                       "--out", str(out)) == 0
        features = (out / "features.csv").read_text().strip().split("\n")
        labels = (out / "labels.csv").read_text().strip().split("\n")
        assert len(labels) == 10
        assert all(len(line.split(",")) == 4 for line in labels)  # id + C columns
        ids = {line.split(",")[0] for line in features}
        assert len(ids) == 10

    def test_line_count_matches_instances(self, tmp_path):
        out = tmp_path / "data"
        run_cli("gen-synthetic", "--bags", "7", "--min-bag-size", "2", "--max-bag-size", "2",
                "--out", str(out))
        features = (out / "features.csv").read_text().strip().split("\n")
        assert len(features) == 14

    def test_regeneration_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            run_cli("gen-synthetic", "--bags", "6", "--seed", "9", "--out", str(out))
        assert read_bytes(a / "features.csv") == read_bytes(b / "features.csv")
        assert read_bytes(a / "labels.csv") == read_bytes(b / "labels.csv")

    def test_missing_out_is_validation_error(self, capsys):
        assert run_cli("gen-synthetic", "--bags", "5") == 1
        assert "--out" in capsys.readouterr().err


class TestTrain:
    def _gen(self, tmp_path, **kw):
        out = tmp_path / "data"
        args = ["gen-synthetic", "--out", str(out)]
        for key, val in kw.items():
            args += ["--" + key.replace("_", "-"), str(val)]
        assert run_cli(*args) == 0
        return out / "features.csv", out / "labels.csv"

    def test_writes_weights_and_trace(self, tmp_path):
        fpath, lpath = self._gen(tmp_path, bags=12, classes=3, dim=4)
        out = tmp_path / "model"
        assert run_cli("train", "--features", str(fpath), "--labels", str(lpath),
                       "--max-epochs", "80", "--out", str(out)) == 0
        trace = (out / "trace.csv").read_text().strip().split("\n")
        assert trace[0] == "epoch,objective,grad_norm"
        objs = [float(line.split(",")[1]) for line in trace[1:]]
        assert all(a >= b - 1e-12 for a, b in zip(objs, objs[1:]))
        w = np.loadtxt(out / "weights.csv", delimiter=",")
        assert w.shape == (3, 5)  # class index + d columns

    def test_unlabeled_dataset_trains_to_zero(self, tmp_path):
        fpath, lpath = self._gen(tmp_path, bags=5, classes=3, dim=2)
        masked = tmp_path / "masked.csv"
        lines = [line.split(",")[0] + ",-1,-1,-1" for line in lpath.read_text().strip().split("\n")]
        masked.write_text("\n".join(lines) + "\n")
        out = tmp_path / "model"
        assert run_cli("train", "--features", str(fpath), "--labels", str(masked),
                       "--out", str(out)) == 0
        w = np.loadtxt(out / "weights.csv", delimiter=",")[:, 1:]
        np.testing.assert_array_equal(w, 0.0)

    def test_missing_labels_file(self, tmp_path, capsys):
        fpath, _ = self._gen(tmp_path, bags=5)
        missing = tmp_path / "nope.csv"
        assert run_cli("train", "--features", str(fpath), "--labels", str(missing),
                       "--out", str(tmp_path / "m")) == 1
        assert "nope.csv" in capsys.readouterr().err

    def test_standardize_writes_scaling(self, tmp_path):
        fpath, lpath = self._gen(tmp_path, bags=8)
        out = tmp_path / "model"
        assert run_cli("train", "--features", str(fpath), "--labels", str(lpath),
                       "--standardize", "--max-epochs", "30", "--out", str(out)) == 0
        assert (out / "scaling.csv").exists()


class TestEvaluate:
    def test_prints_metrics(self, tmp_path, capsys):
        data = tmp_path / "data"
        run_cli("gen-synthetic", "--bags", "10", "--out", str(data))
        model = tmp_path / "model"
        run_cli("train", "--features", str(data / "features.csv"),
                "--labels", str(data / "labels.csv"), "--max-epochs", "60", "--out", str(model))
        assert run_cli("evaluate", "--features", str(data / "features.csv"),
                       "--labels", str(data / "labels.csv"),
                       "--weights", str(model / "weights.csv")) == 0
        out = capsys.readouterr().out
        assert "bag_accuracy=" in out and "one_error=" in out

    def test_scaling_roundtrip(self, tmp_path, capsys):
        """Weights trained with --standardize evaluate consistently when the
        scaling file is replayed."""
        data = tmp_path / "data"
        run_cli("gen-synthetic", "--bags", "10", "--out", str(data))
        model = tmp_path / "model"
        run_cli("train", "--features", str(data / "features.csv"),
                "--labels", str(data / "labels.csv"), "--standardize",
                "--max-epochs", "60", "--out", str(model))
        assert run_cli("evaluate", "--features", str(data / "features.csv"),
                       "--labels", str(data / "labels.csv"),
                       "--weights", str(model / "weights.csv"),
                       "--scaling", str(model / "scaling.csv"),
                       "--subset-accuracy",
                       "--out", str(tmp_path / "row.csv")) == 0
        assert "subset_accuracy=" in capsys.readouterr().out
        header = (tmp_path / "row.csv").read_text().split("\n")[0]
        assert header.endswith("subset_accuracy")


class TestActiveRun:
    def _run(self, tmp_path, name, *extra):
        out = tmp_path / name
        code = run_cli("active-run", "--bags", "16", "--classes", "3", "--dim", "3",
                       "--criterion", "unc-pair", "--queries", "6", "--folds", "2",
                       "--init-fraction", "0.25", "--max-epochs", "40", "--grad-tol", "1e-4",
                       "--eval-every", "2", "--out", str(out), *extra)
        return code, out

    def test_outputs_per_run_and_aggregate(self, tmp_path):
        code, out = self._run(tmp_path, "runs")
        assert code == 0
        for fold in (0, 1):
            assert (out / f"queries_f{fold}_s0.csv").exists()
            assert (out / f"curves_f{fold}_s0.csv").exists()
        agg = (out / "curves_mean.csv").read_text().strip().split("\n")
        assert agg[0].startswith("cost,bag_accuracy_mean,bag_accuracy_std")

    def test_zero_queries_single_row_per_fold(self, tmp_path):
        out = tmp_path / "runs0"
        assert run_cli("active-run", "--bags", "10", "--classes", "3", "--dim", "3",
                       "--queries", "0", "--folds", "2", "--init-fraction", "0.5",
                       "--max-epochs", "30", "--out", str(out)) == 0
        for fold in (0, 1):
            lines = (out / f"curves_f{fold}_s0.csv").read_text().strip().split("\n")
            assert len(lines) == 2  # header + the initial-model row

    def test_reruns_byte_identical(self, tmp_path):
        _, out_a = self._run(tmp_path, "a", "--seed", "4")
        _, out_b = self._run(tmp_path, "b", "--seed", "4")
        for name in sorted(os.listdir(out_a)):
            assert read_bytes(out_a / name) == read_bytes(out_b / name), name

    def test_validation_failure_exit_code(self, tmp_path):
        out = tmp_path / "bad"
        code = run_cli("active-run", "--bags", "6", "--classes", "3", "--dim", "2",
                       "--queries", "500", "--folds", "2", "--out", str(out))
        assert code == 1

    def test_input_files_never_mutated(self, tmp_path):
        data = tmp_path / "data"
        run_cli("gen-synthetic", "--bags", "12", "--classes", "3", "--dim", "3",
                "--out", str(data))
        before = {name: read_bytes(data / name) for name in ("features.csv", "labels.csv")}
        assert run_cli("active-run", "--features", str(data / "features.csv"),
                       "--labels", str(data / "labels.csv"), "--criterion", "rand-pair",
                       "--queries", "4", "--folds", "2", "--init-fraction", "0.25",
                       "--max-epochs", "30", "--out", str(tmp_path / "runs")) == 0
        for name, content in before.items():
            assert read_bytes(data / name) == content


class TestConfigFile:
    def test_config_supplies_values(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bags=9\nclasses=3\ndim=2\nseed=5\n# comment line\n")
        out = tmp_path / "data"
        assert run_cli("gen-synthetic", "--config", str(cfg), "--out", str(out)) == 0
        labels = (out / "labels.csv").read_text().strip().split("\n")
        assert len(labels) == 9

    def test_cli_overrides_config(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bags=9\n")
        out = tmp_path / "data"
        assert run_cli("gen-synthetic", "--config", str(cfg), "--bags", "4",
                       "--out", str(out)) == 0
        labels = (out / "labels.csv").read_text().strip().split("\n")
        assert len(labels) == 4

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bogus_knob=1\n")
        assert run_cli("gen-synthetic", "--config", str(cfg), "--out", str(tmp_path / "x")) == 1
        assert "bogus_knob" in capsys.readouterr().err

    def test_read_config_rejects_duplicates(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bags=3\nbags=4\n")
        with pytest.raises(ValueError, match="duplicate"):
            read_config(cfg)


class TestVerify:
    def test_passes_on_clean_build(self, capsys):
        assert run_cli("verify", "--samples", "20") == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out
        assert "checks passed" in out

    def test_injected_bug_fails(self, monkeypatch, capsys):
        real = miml_al.objective.pair_gradient

        def broken(w, bag, c, label, lam=0.0):
            g = real(w, bag, c, label, lam)
            return g + 0.01

        monkeypatch.setattr(miml_al.objective, "pair_gradient", broken)
        assert run_cli("verify", "--samples", "20") == 1
        assert "FAIL" in capsys.readouterr().out


class TestTopLevel:
    def test_no_subcommand_shows_help(self, capsys):
        assert main([]) == 1

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

    def test_unknown_flag_is_validation_error(self):
        assert main(["gen-synthetic", "--frobnicate"]) == 1
