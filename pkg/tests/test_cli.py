import json
import re
import subprocess
import sys

import numpy as np
import pytest

from qcgan.cli import grid_shape, main
from qcgan.metrics import read_pgm


def write_config(tmp_path, data_dir, out_dir="run", **train):
    cfg = {"data_dir": str(data_dir), "out_dir": str(tmp_path / out_dir), "eval_samples": 40}
    cfg.update(train)
    path = tmp_path / f"{out_dir}.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture(scope="module")
def trained(tmp_path_factory, digits_dir):
    tmp = tmp_path_factory.mktemp("trained")
    cfg = write_config(tmp, digits_dir, iterations=40, eval_every=20)
    assert main(["train", "--config", str(cfg)]) == 0
    return tmp, cfg


class TestAudit:
    def test_default(self, capsys):
        assert main(["audit"]) == 0
        out = capsys.readouterr().out
        assert re.search(r"qcgan\s+QuantumLayer\s+60\s+60", out)
        assert re.search(r"qcgan\s+Linear\s+25872\s+25872", out)
        assert "MISMATCH" not in out

    def test_perturbed_depth(self, capsys):
        assert main(["audit", "--depth", "3"]) != 0
        assert "MISMATCH" in capsys.readouterr().out

    def test_module_entry(self):
        proc = subprocess.run([sys.executable, "-m", "qcgan", "audit"], capture_output=True, text=True)
        assert proc.returncode == 0 and "25872" in proc.stdout


class TestTrain:
    def test_zero_iterations(self, tmp_path, digits_dir):
        cfg = write_config(tmp_path, digits_dir, iterations=0)
        assert main(["train", "--config", str(cfg)]) == 0
        assert (tmp_path / "run/metrics.csv").read_text() == "iteration,loss_d,loss_g,fid\n"
        assert (tmp_path / "run/checkpoint.json").exists()

    def test_missing_data_dir(self, tmp_path, capsys):
        cfg = write_config(tmp_path, tmp_path / "no_such_dir", iterations=1)
        assert main(["train", "--config", str(cfg)]) != 0
        assert "no_such_dir" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, digits_dir, capsys):
        cfg = write_config(tmp_path, digits_dir, learning_rate=0.1)
        assert main(["train", "--config", str(cfg)]) == 1
        assert "learning_rate" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        assert main(["train", "--config", str(path)]) == 1

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["train"])
        assert exc.value.code == 1

    def test_corrupt_data(self, tmp_path):
        data = tmp_path / "data"
        data.mkdir()
        (data / "train-images-idx3-ubyte").write_bytes(b"\x00\x00\x08\x03\x00")
        (data / "train-labels-idx1-ubyte").write_bytes(b"\x00\x00\x08\x01\x00\x00\x00\x00")
        cfg = write_config(tmp_path, data, iterations=1)
        assert main(["train", "--config", str(cfg)]) == 2

    def test_same_seed_identical(self, tmp_path, digits_dir):
        for name in ("a", "b"):
            cfg = write_config(tmp_path, digits_dir, out_dir=name, iterations=10, eval_every=5)
            assert main(["train", "--config", str(cfg)]) == 0
        assert (tmp_path / "a/metrics.csv").read_bytes() == (tmp_path / "b/metrics.csv").read_bytes()

    def test_resume(self, tmp_path, digits_dir):
        full = write_config(tmp_path, digits_dir, out_dir="full", iterations=10, eval_every=5)
        assert main(["train", "--config", str(full)]) == 0
        first = write_config(tmp_path, digits_dir, out_dir="split", iterations=5, eval_every=5)
        assert main(["train", "--config", str(first)]) == 0
        second = write_config(tmp_path, digits_dir, out_dir="split", iterations=10, eval_every=5, resume=True)
        assert main(["train", "--config", str(second)]) == 0
        assert (tmp_path / "full/metrics.csv").read_bytes() == (tmp_path / "split/metrics.csv").read_bytes()


class TestGenerate:
    def test_single_image(self, trained, tmp_path):
        run, _ = trained
        out = tmp_path / "one.pgm"
        assert main(["generate", "--checkpoint", str(run / "run/checkpoint.json"), "--count", "1", "--out", str(out)]) == 0
        assert read_pgm(out).shape == (8, 8)

    def test_same_seed_identical(self, trained, tmp_path):
        ckpt = str(trained[0] / "run/checkpoint.json")
        for name in ("a.pgm", "b.pgm"):
            assert main(["generate", "--checkpoint", ckpt, "--count", "9", "--seed", "3", "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()
        assert read_pgm(tmp_path / "a.pgm").shape == (28, 28)

    def test_trained_not_flat(self, trained, tmp_path):
        out = tmp_path / "g.pgm"
        main(["generate", "--checkpoint", str(trained[0] / "run/checkpoint.json"), "--out", str(out)])
        tiles = read_pgm(out).astype(int)
        assert np.abs(tiles[:8, :8] - 128).max() > 20

    def test_malformed_checkpoint(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"version": 1, "hyper"')
        assert main(["generate", "--checkpoint", str(bad), "--out", str(tmp_path / "x.pgm")]) == 2

    def test_bad_count(self, trained, tmp_path):
        ckpt = str(trained[0] / "run/checkpoint.json")
        assert main(["generate", "--checkpoint", ckpt, "--count", "0", "--out", str(tmp_path / "x.pgm")]) == 1

    @pytest.mark.parametrize("count,shape", [(1, (1, 1)), (2, (1, 2)), (16, (4, 4)), (17, (4, 5))])
    def test_grid_shape(self, count, shape):
        assert grid_shape(count) == shape


class TestEvaluate:
    def test_real_vs_real(self, trained, capsys):
        _, cfg = trained
        assert main(["evaluate", "--config", str(cfg), "--real-vs-real"]) == 0
        line = capsys.readouterr().out.strip()
        assert re.fullmatch(r"fid=[0-9.eE+-]+", line)
        assert float(line[4:]) <= 1e-8

    def test_trained_beats_untrained(self, trained, tmp_path, digits_dir, capsys):
        run, cfg = trained
        untrained = write_config(tmp_path, digits_dir, iterations=0, eval_samples=40)
        main(["train", "--config", str(untrained)])
        capsys.readouterr()
        values = []
        for ckpt in (tmp_path / "run/checkpoint.json", run / "run/checkpoint.json"):
            assert main(["evaluate", "--config", str(cfg), "--checkpoint", str(ckpt)]) == 0
            values.append(float(capsys.readouterr().out.strip()[4:]))
        assert values[1] < values[0]

    def test_needs_checkpoint(self, trained):
        with pytest.raises(SystemExit) as exc:
            main(["evaluate", "--config", str(trained[1])])
        assert exc.value.code == 1
