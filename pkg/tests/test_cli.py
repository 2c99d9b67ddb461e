import csv
import json

import numpy as np
import pytest

from ecgssl.cli import (
    CONFIG_VERSION,
    RunConfig,
    load_run_config,
    main,
    make_run_dir,
)
from ecgssl.errors import ValidationError
from ecgssl.io import read_manifest


def _run_dirs(base):
    return sorted(p for p in base.iterdir() if p.is_dir())


def _synth(tmp_path, count=4, duration=30.5, seed=None):
    argv = ["--out", str(tmp_path / "runs"), "synth",
            "--count", str(count), "--duration", str(duration)]
    if seed is not None:
        argv = ["--seed", str(seed)] + argv
    assert main(argv) == 0
    return _run_dirs(tmp_path / "runs")[-1] / "data"


class TestConfig:
    def test_defaults(self):
        cfg = load_run_config(None, {})
        assert cfg == RunConfig()

    def test_file_parsing(self, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text("# comment\nlr = 0.01\nkfolds = 4  # inline comment\n\n"
                     "split_by_subject = true\n")
        cfg = load_run_config(p, {})
        assert cfg.lr == 0.01
        assert cfg.kfolds == 4
        assert cfg.split_by_subject is True

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text("learning_rate = 0.1\n")
        with pytest.raises(ValidationError):
            load_run_config(p, {})

    def test_malformed_line_rejected(self, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text("just some words\n")
        with pytest.raises(ValidationError):
            load_run_config(p, {})

    def test_overrides_beat_file(self, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text("seed = 5\n")
        cfg = load_run_config(p, {"seed": 9})
        assert cfg.seed == 9

    def test_none_overrides_ignored(self, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text("seed = 5\n")
        cfg = load_run_config(p, {"seed": None})
        assert cfg.seed == 5

    def test_newer_version_rejected(self, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text(f"config_version = {CONFIG_VERSION + 1}\n")
        with pytest.raises(ValidationError):
            load_run_config(p, {})

    def test_train_config_conversion(self):
        cfg = RunConfig(lr=0.01, kfolds=3)
        tc = cfg.train_config()
        assert tc.lr == 0.01
        assert tc.kfolds == 3
        assert abs(sum(tc.alphas) - 1.0) < 1e-9

    def test_run_dir_allocation(self, tmp_path):
        a = make_run_dir(tmp_path / "runs")
        b = make_run_dir(tmp_path / "runs")
        assert a != b
        assert a.is_dir() and b.is_dir()


class TestSynth:
    def test_writes_manifest_and_echo(self, tmp_path):
        data = _synth(tmp_path, count=4)
        recs = read_manifest(data)
        assert len(recs) == 4
        assert (data.parent / "resolved-config.txt").exists()

    def test_two_populations(self, tmp_path):
        data = _synth(tmp_path, count=6)
        recs = read_manifest(data)
        scores = [r.condition_labels["arousal"] for r in recs]
        assert scores == [3.0] * 3 + [7.0] * 3

    def test_deterministic_given_seed(self, tmp_path):
        d1 = _synth(tmp_path / "a", count=2, seed=5)
        d2 = _synth(tmp_path / "b", count=2, seed=5)
        r1, r2 = read_manifest(d1), read_manifest(d2)
        for a, b in zip(r1, r2):
            np.testing.assert_array_equal(a.samples, b.samples)

    def test_seed_changes_data(self, tmp_path):
        d1 = _synth(tmp_path / "a", count=2, seed=5)
        d2 = _synth(tmp_path / "b", count=2, seed=6)
        assert not np.array_equal(read_manifest(d1)[0].samples,
                                  read_manifest(d2)[0].samples)


class TestTransform:
    def test_csv_layout(self, tmp_path):
        data = _synth(tmp_path, count=2, duration=20.5)
        out = tmp_path / "tr"
        assert main(["--out", str(out), "transform", "--data", str(data)]) == 0
        csv_path = _run_dirs(out)[-1] / "transformed.csv"
        with csv_path.open() as f:
            rows = list(csv.reader(f))
        assert rows[0][:2] == ["segment_index", "task_id"]
        assert len(rows[0]) == 2 + 2560
        # 2 recordings x 2 segments x 7 tasks
        assert len(rows) - 1 == 4 * 7
        task_ids = [int(r[1]) for r in rows[1:]]
        assert task_ids == list(range(7)) * 4


class TestPretrain:
    def test_model_and_trace(self, tmp_path):
        data = _synth(tmp_path, count=2, duration=20.5)
        out = tmp_path / "pre"
        assert main(["--out", str(out), "pretrain", "--data", str(data),
                     "--pretext-epochs", "2"]) == 0
        run = _run_dirs(out)[-1]
        assert (run / "pretext-model.ecgssl").exists()
        with (run / "loss-trace.csv").open() as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["epoch", "task_id", "mean_loss"]
        assert len(rows) - 1 == 2 * 7
        losses = [float(r[2]) for r in rows[1:]]
        assert all(np.isfinite(losses))


class TestTrainEval:
    def test_full_pipeline(self, tmp_path):
        data = _synth(tmp_path, count=4, duration=30.5)
        pre_out = tmp_path / "pre"
        main(["--out", str(pre_out), "pretrain", "--data", str(data),
              "--pretext-epochs", "1"])
        model = _run_dirs(pre_out)[-1] / "pretext-model.ecgssl"
        ev_out = tmp_path / "ev"
        assert main(["--out", str(ev_out), "train-eval", "--data", str(data),
                     "--pretext-model", str(model), "--emotion-epochs", "2",
                     "--kfolds", "3", "--supervised-baseline"]) == 0
        run = _run_dirs(ev_out)[-1]
        with (run / "report.csv").open() as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["fold", "target", "accuracy", "f1"]
        assert len(rows) - 1 == 3 * 3  # 3 folds x 3 targets
        assert (run / "baseline-report.csv").exists()
        summary = json.loads((run / "summary.json").read_text())
        assert set(summary["mean"]) == {"arousal", "valence", "stress"}
        assert "baseline_mean" in summary
        assert summary["config"]["emotion_epochs"] == 2

    def test_rejects_non_pretext_model(self, tmp_path):
        from ecgssl.models import build_trunk, save_model

        data = _synth(tmp_path, count=4, duration=20.5)
        model = tmp_path / "trunk.ecgssl"
        save_model(build_trunk(seed=0), "trunk", model)
        rc = main(["--out", str(tmp_path / "ev"), "train-eval", "--data", str(data),
                   "--pretext-model", str(model), "--emotion-epochs", "1",
                   "--kfolds", "2"])
        assert rc == 2


class TestGradcheckCommand:
    def test_passes(self, capsys):
        assert main(["gradcheck"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 9
        assert "FAIL" not in out


class TestErrors:
    def test_missing_data_exits_2(self, tmp_path):
        rc = main(["--out", str(tmp_path), "transform", "--data",
                   str(tmp_path / "nope")])
        assert rc == 2

    def test_bad_config_exits_2(self, tmp_path):
        cfgp = tmp_path / "cfg.txt"
        cfgp.write_text("bogus_key = 1\n")
        rc = main(["--config", str(cfgp), "--out", str(tmp_path), "gradcheck"])
        assert rc == 2

    def test_config_echo_is_complete(self, tmp_path):
        _synth(tmp_path, count=2, duration=20.5)
        echo = (_run_dirs(tmp_path / "runs")[-1] / "resolved-config.txt").read_text()
        import dataclasses

        for f in dataclasses.fields(RunConfig):
            assert f.name in echo
