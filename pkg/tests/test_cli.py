import numpy as np
import pytest

from pulsegan import cli, io
from pulsegan.evaluation import REPORT_HEADER
from pulsegan.nn import layers

FAST = """\
corpus.families = bimodal, broad
corpus.subjects_per_family = 2, 1
corpus.duration_sec = 30
net.enc_channels = 2, 2, 2, 2, 2, 2
net.disc_channels = 2, 2, 2, 2, 2, 2
train.epochs = 1
"""


@pytest.fixture
def fast_cfg(tmp_path):
    p = tmp_path / "fast.cfg"
    p.write_text(FAST)
    return p


def files_under(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != "pulsegan.log"}


def run_stages(cfg, out):
    assert cli.main(["synth", "--config", str(cfg), "--out", str(out / "corpus")]) == 0
    assert cli.main(["extract-chrom", "--config", str(cfg), "--corpus", str(out / "corpus"),
                     "--out", str(out / "windows")]) == 0
    assert cli.main(["train", "--config", str(cfg), "--windows", str(out / "windows"),
                     "--out", str(out / "models")]) == 0
    for mode in ("pulsegan", "dae"):
        assert cli.main(["denoise", "--config", str(cfg), "--checkpoint",
                         str(out / "models" / f"{mode}.ckpt"), "--windows", str(out / "windows"),
                         "--out", str(out / "denoised")]) == 0
    assert cli.main(["evaluate", "--config", str(cfg), "--windows", str(out / "windows"),
                     "--denoised", str(out / "denoised"), "--out", str(out / "eval")]) == 0
    assert cli.main(["report", "--config", str(cfg), "--eval", str(out / "eval"),
                     "--out", str(out / "report")]) == 0


class TestWorkflow:
    def test_stages_are_idempotent(self, fast_cfg, tmp_path, capsys):
        run_stages(fast_cfg, tmp_path / "a")
        run_stages(fast_cfg, tmp_path / "b")
        a, b = files_under(tmp_path / "a"), files_under(tmp_path / "b")
        assert a.keys() == b.keys()
        assert a == b
        header, rows = io.read_table(tmp_path / "a" / "report" / "report.csv")
        assert header == REPORT_HEADER
        assert [r[0] for r in rows] == ["chrom", "dae", "pulsegan"]
        assert "HR_mae" in capsys.readouterr().out

    def test_seed_changes_corpus(self, fast_cfg, tmp_path):
        for seed in (0, 1):
            assert cli.main(["synth", "--config", str(fast_cfg), "--seed", str(seed),
                             "--out", str(tmp_path / str(seed))]) == 0
        a = (tmp_path / "0" / "subject_000" / "rgb.csv").read_bytes()
        b = (tmp_path / "1" / "subject_000" / "rgb.csv").read_bytes()
        assert a != b

    def test_config_echoed_and_log_appended(self, fast_cfg, tmp_path):
        out = tmp_path / "c"
        for _ in range(2):
            cli.main(["synth", "--config", str(fast_cfg), "--out", str(out)])
        assert "train.epochs = 1" in (out / "config.cfg").read_text()
        text = (out / "pulsegan.log").read_text()
        assert text.count("corpus:") == 2


class TestExitCodes:
    def test_no_arguments(self):
        assert cli.main([]) == cli.EXIT_INVALID

    def test_missing_out(self):
        assert cli.main(["synth"]) == cli.EXIT_INVALID

    def test_unknown_config_key(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("train.speed = 3\n")
        assert cli.main(["synth", "--config", str(p), "--out", str(tmp_path / "o")]) == 1

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["synth", "--config", str(tmp_path / "nope.cfg"),
                         "--out", str(tmp_path / "o")]) == 1

    def test_negative_seed(self, tmp_path):
        assert cli.main(["synth", "--seed", "-1", "--out", str(tmp_path)]) == 1

    def test_missing_inputs(self, tmp_path):
        assert cli.main(["train", "--windows", str(tmp_path / "none"), "--out", str(tmp_path)]) == 1

    def test_bad_log_level(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.LOG_ENV, "chatty")
        assert cli.main(["synth", "--out", str(tmp_path)]) == 1

    def test_corrupt_checkpoint_is_runtime_failure(self, tmp_path):
        ck = tmp_path / "x.ckpt"
        ck.write_bytes(b"garbage")
        (tmp_path / "w").mkdir()
        io.write_windows(tmp_path / "w" / "rough_test.csv", [0], [0], np.zeros((1, 300)))
        assert cli.main(["denoise", "--checkpoint", str(ck), "--windows", str(tmp_path / "w"),
                         "--out", str(tmp_path / "o")]) == cli.EXIT_RUNTIME


class TestGradCheck:
    def test_passes(self, tmp_path, capsys):
        code = cli.main(["grad-check", "--case", "conv1d", "--case", "tanh",
                         "--config", "smoke", "--out", str(tmp_path)])
        assert code == 0
        header, rows = io.read_table(tmp_path / "gradcheck.csv")
        assert len(rows) == 4
        assert "4/4 configurations passed" in capsys.readouterr().out

    def test_broken_layer_fails(self, monkeypatch, capsys):
        original = layers.Conv1d.backward
        monkeypatch.setattr(layers.Conv1d, "backward", lambda self, gy: 0.9 * original(self, gy))
        assert cli.main(["grad-check", "--case", "conv1d", "--config", "smoke"]) == cli.EXIT_GRADCHECK
        assert "FAIL" in capsys.readouterr().out

    def test_unknown_case(self):
        assert cli.main(["grad-check", "--case", "lstm"]) == cli.EXIT_INVALID
