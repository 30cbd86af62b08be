import json
import os
import shutil
import struct

import pytest

from eegsr import cli, config

TINY = {
    "synth": {"n_subjects": 1, "n_sentences": 4},
    "kpca": {"pool_cap": 300},
    "train": {"epochs": 3},
}


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def tiny_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "c.json"
    path.write_text(json.dumps(TINY))
    return str(path)


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory, tiny_config):
    dirs = []
    for i in range(2):
        work = str(tmp_path_factory.mktemp(f"run{i}"))
        assert cli.main(["run-all", "--config", tiny_config, "--seed", "7", "--work-dir", work]) == 0
        dirs.append(work)
    return dirs


class TestRunAll:
    def test_reports_identical(self, two_runs):
        a, b = (_read(os.path.join(d, "eval", "report.csv")) for d in two_runs)
        assert a == b

    def test_all_artifacts_identical(self, two_runs):
        for rel in ("kpca/projector.kpca", "lm/char4.clm", "model/checkpoint.eegc",
                    "model/loss_curve.csv", "decode/hypotheses.csv", "split.json"):
            assert _read(os.path.join(two_runs[0], rel)) == _read(os.path.join(two_runs[1], rel)), rel

    def test_report_rows(self, two_runs):
        lines = _read(os.path.join(two_runs[0], "eval", "report.csv")).decode().splitlines()
        assert lines[0] == "k,total_sentences,unique_sentences,total_words,unique_words,letters,wer,cer"
        assert [int(row.split(",")[0]) for row in lines[1:]] == [5, 10, 15, 20, 25, 30]

    def test_side_outputs(self, two_runs):
        work = two_runs[0]
        curve = _read(os.path.join(work, "model", "loss_curve.csv")).decode().splitlines()
        assert curve[0] == "epoch,mean_loss" and len(curve) == 4
        ev = _read(os.path.join(work, "kpca", "explained_variance.csv")).decode().splitlines()
        assert ev[0] == "n_components,cumulative_ratio"
        for sub in ("raw", "preprocessed", "features", "kpca", "model", "decode", "eval"):
            echoed = json.loads(_read(os.path.join(work, sub, "config.json")))
            assert echoed["seed"] == 7 and echoed["train"]["epochs"] == 3

    def test_stage_by_stage_matches(self, tmp_path, two_runs, tiny_config, capsys):
        work = str(tmp_path)
        for stage in ("synth", "preprocess", "features", "kpca-fit", "kpca-transform",
                      "lm-train", "train", "decode", "eval"):
            assert cli.main([stage, "--config", tiny_config, "--seed", "7", "--work-dir", work]) == 0
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 9 and out[0].startswith("synth:")
        assert _read(os.path.join(work, "eval", "report.csv")) == _read(
            os.path.join(two_runs[0], "eval", "report.csv")
        )
        assert _read(os.path.join(work, "model", "checkpoint.eegc")) == _read(
            os.path.join(two_runs[0], "model", "checkpoint.eegc")
        )

    def test_stage_idempotent(self, two_runs, tiny_config):
        work = two_runs[1]
        target = os.path.join(work, "reduced", "s01_sess1_sent01.eegf")
        before = _read(target)
        assert cli.main(["kpca-transform", "--config", tiny_config, "--seed", "7", "--work-dir", work]) == 0
        assert _read(target) == before


class TestErrors:
    def test_decode_without_checkpoint(self, tmp_path, capsys):
        code = cli.main(["decode", "--work-dir", str(tmp_path)])
        assert code != 0
        err = capsys.readouterr().err
        assert "decode" in err and "checkpoint" in err

    def test_stale_checkpoint_version(self, tmp_path, two_runs, tiny_config, capsys):
        work = str(tmp_path)
        shutil.copy(os.path.join(two_runs[0], "split.json"), work)
        for sub in ("reduced", "lm", "model"):
            shutil.copytree(os.path.join(two_runs[0], sub), os.path.join(work, sub))
        ckpt = os.path.join(work, "model", "checkpoint.eegc")
        raw = bytearray(_read(ckpt))
        raw[4:8] = struct.pack("<I", 99)
        with open(ckpt, "wb") as fh:
            fh.write(raw)
        code = cli.main(["decode", "--config", tiny_config, "--work-dir", work])
        assert code == 3
        assert "version 99" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"train": {"epochz": 3}}))
        assert cli.main(["eval", "--config", str(path), "--work-dir", str(tmp_path)]) == 2

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["no-such-stage"])
        assert info.value.code == 2


class TestConfig:
    def test_overrides(self):
        args = cli.build_parser().parse_args(["train", "--epochs", "5", "--lm-weight", "0.3", "--seed", "2"])
        cfg = cli.resolve_config(args)
        assert cfg.train.epochs == 5 and cfg.decode.lm_weight == 0.3 and cfg.seed == 2
        assert cfg.train.batch_size == 32

    def test_json_round_trip(self, tmp_path):
        cfg = config.override(config.PipelineConfig(), "kpca", pool_cap=123)
        path = tmp_path / "c.json"
        path.write_text(cfg.to_json())
        assert config.load_config(str(path)) == cfg
