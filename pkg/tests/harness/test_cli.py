import csv
import json

import pytest

from harness.cli import build_parser, main


def _write_config(path, config):
    path.write_text("# written by the test\n" + config.canonical_text(include_all=True), encoding="utf-8")
    return path


class TestParser:
    def test_missing_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exit_info:
            main([])
        assert exit_info.value.code == 2
        err = capsys.readouterr().err
        assert err.startswith("usage:")
        assert "error: UsageError:" in err

    def test_unknown_mode(self, capsys):
        with pytest.raises(SystemExit) as exit_info:
            main(["eval", "--ckpt", "m.isk", "--episodes", "2", "--mode", "beam", "--out", "r.csv"])
        assert exit_info.value.code == 2
        assert "error: UsageError:" in capsys.readouterr().err

    def test_gen_tasks(self):
        args = build_parser().parse_args(["gen", "--task", "cluttered", "--count", "1", "--seed", "0", "--out", "x"])
        assert args.task == "cluttered"
        assert args.preset is None


class TestCommands:
    def test_bad_config_key_is_a_usage_error(self, tmp_path, capsys):
        path = tmp_path / "bad.conf"
        path.write_text("task=features\ncolour=red\n")
        assert main(["train", "--config", str(path)]) == 2
        err = capsys.readouterr().err
        assert "usage:" in err
        assert err.strip().endswith("error: ConfigError: unknown config key 'colour'")

    def test_missing_checkpoint(self, tmp_path, capsys):
        code = main(["eval", "--ckpt", str(tmp_path / "absent.isk"), "--episodes", "2", "--out", "r.csv"])
        assert code == 1
        assert "error: FileNotFoundError:" in capsys.readouterr().err

    def test_train_then_eval(self, tmp_path, features_config, capsys):
        path = _write_config(tmp_path / "features.conf", features_config)
        assert main(["train", "--config", str(path)]) == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["update"] == features_config.updates
        assert (tmp_path / "model.isk").exists()
        assert (tmp_path / "metrics.csv").exists()

        out = tmp_path / "report.csv"
        assert main(["eval", "--ckpt", "model.isk", "--episodes", "3", "--out", str(out)]) == 0
        report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert report["episodes"] == 3
        with open(out, newline="") as f:
            assert next(csv.reader(f)) == ["metric", "t", "value"]

    def test_resume_with_changed_config_fails(self, tmp_path, features_config, capsys):
        path = _write_config(tmp_path / "features.conf", features_config)
        assert main(["train", "--config", str(path)]) == 0
        capsys.readouterr()
        changed = _write_config(tmp_path / "changed.conf", features_config.updated(lam=0.5))
        assert main(["train", "--config", str(changed), "--resume", "model.isk"]) == 1
        assert "error: ConfigDigestError:" in capsys.readouterr().err

    def test_gen_blockworld(self, tmp_path, capsys):
        out = tmp_path / "scenes"
        code = main(["gen", "--task", "blockworld", "--count", "2", "--seed", "9", "--out", str(out),
                     "--preset", "blockworld32"])
        assert code == 0
        assert (out / "blockworld00000.pgm").read_bytes().startswith(b"P5\n32 32\n255\n")
        assert (out / "blockworld00001.pgm").exists()
        records = [json.loads(line) for line in (out / "index.jsonl").read_text().splitlines()]
        assert [r["file"] for r in records] == ["blockworld00000.pgm", "blockworld00001.pgm"]
        assert all(r["label"] in (0, 1) for r in records)

    def test_gen_rejects_foreign_preset(self, tmp_path, capsys):
        code = main(["gen", "--task", "blockworld", "--count", "1", "--seed", "0", "--out", str(tmp_path),
                     "--preset", "hangman"])
        assert code == 2
        assert "error: ConfigError:" in capsys.readouterr().err

    def test_gen_is_repeatable(self, tmp_path, capsys):
        for name in ("a", "b"):
            argv = ["gen", "--task", "blockworld", "--count", "2", "--seed", "7", "--out", str(tmp_path / name),
                    "--preset", "blockworld32"]
            assert main(argv) == 0
        for file in ("blockworld00000.pgm", "blockworld00001.pgm", "index.jsonl"):
            assert (tmp_path / "a" / file).read_bytes() == (tmp_path / "b" / file).read_bytes()
