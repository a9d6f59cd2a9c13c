import numpy as np
import pytest

from jedmimo.cli import load_flat_config, main
from jedmimo.model import complex_normal
from jedmimo.weights import save_score_weights


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSimulate:
    def test_smoke_and_exit_zero(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        code, stdout, _ = _run(
            [
                "simulate", "--n-rx", "4", "--n-users", "2", "--pilots", "4",
                "--data", "4", "--snr", "20", "--trials", "2", "--methods", "lmmse",
                "--levels", "20", "--seed", "1", "--out", str(out),
            ],
            capsys,
        )
        assert code == 0
        assert out.exists()
        assert "wrote" in stdout

    def test_unknown_method_is_config_error(self, tmp_path, capsys):
        code, _, stderr = _run(
            ["simulate", "--methods", "nope", "--out", str(tmp_path / "r.csv"), "--trials", "1"],
            capsys,
        )
        assert code == 2
        assert "category=config" in stderr

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "n-rx = 4\nn_users = 2\npilots = 4\ndata = 4\nsnr = 20\n"
            "trials = 3\nmethods = ls\nlevels = 20\nseed = 9\n"
            f"out = {tmp_path / 'from_cfg.csv'}\n"
        )
        code, _, _ = _run(
            ["simulate", "--config", str(cfg), "--trials", "2"], capsys
        )
        assert code == 0
        text = (tmp_path / "from_cfg.csv").read_text()
        assert "# config: trials=2" in text   # flag wins
        assert "# config: seed=9" in text     # file value kept

    def test_resolved_config_echoed(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        _run(
            ["simulate", "--n-rx", "4", "--n-users", "2", "--pilots", "4", "--data", "4",
             "--snr", "20", "--trials", "1", "--methods", "ls", "--levels", "20",
             "--out", str(out)],
            capsys,
        )
        text = out.read_text()
        assert "# snr_definition: sigma0^2=n_users/10^(snr_db/10)" in text
        for key in ("n_rx", "methods", "seed", "levels"):
            assert f"# config: {key}=" in text


class TestBaselineCommand:
    def test_runs_classical_set(self, tmp_path, capsys):
        out = tmp_path / "b.csv"
        code, _, _ = _run(
            ["baseline", "--n-rx", "4", "--n-users", "2", "--pilots", "6",
             "--data", "4", "--snr", "10", "--trials", "2", "--out", str(out)],
            capsys,
        )
        assert code == 0
        body = out.read_text()
        for m in ("ls", "lmmse", "mmse-csi"):
            assert f"aggregate,{m}," in body


class TestGenChannels:
    def test_deterministic_bytes(self, tmp_path, capsys):
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        for path in (a, b):
            code, _, _ = _run(
                ["gen-channels", "--n-rx", "4", "--n-users", "2",
                 "--count", "10", "--seed", "5", "--out", str(path)],
                capsys,
            )
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_count_zero_rejected(self, tmp_path, capsys):
        code, _, stderr = _run(
            ["gen-channels", "--count", "0", "--out", str(tmp_path / "x.bin")], capsys
        )
        assert code == 2
        assert "category=config" in stderr

    def test_header_matches_request(self, tmp_path, capsys):
        from jedmimo.datasets import read_channel_dataset

        path = tmp_path / "c.bin"
        _run(
            ["gen-channels", "--n-rx", "3", "--n-users", "2", "--count", "7",
             "--seed", "2", "--out", str(path)],
            capsys,
        )
        header, mats = read_channel_dataset(path)
        assert header["count"] == 7 and header["n_rx"] == 3 and header["n_users"] == 2
        assert mats.shape == (7, 3, 2)


class TestValidatePrior:
    def test_analytic_self_test_passes(self, capsys):
        code, stdout, _ = _run(
            ["validate-prior", "--weights", "analytic", "--n-rx", "3", "--n-users", "2",
             "--samples", "4", "--sigma-levels", "3"],
            capsys,
        )
        assert code == 0
        assert "mean relative error: 0.0000" in stdout
        assert "PASS" in stdout

    def test_corrupted_weights_reported(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        from jedmimo.weights import ACT_IDENTITY, ACT_TANH, ScoreModelWeights

        d = 2 * 3 * 2
        w = ScoreModelWeights(
            layer_dims=(d + 1, 8, d),
            weights=(
                rng.standard_normal((8, d + 1)).astype(np.float32).astype(float),
                rng.standard_normal((d, 8)).astype(np.float32).astype(float),
            ),
            biases=(np.zeros(8), np.zeros(d)),
            activations=(ACT_TANH, ACT_IDENTITY),
        )
        path = tmp_path / "w.bin"
        save_score_weights(path, w)
        blob = bytearray(path.read_bytes())
        blob[-30] ^= 0x55
        path.write_bytes(bytes(blob))
        code, _, stderr = _run(
            ["validate-prior", "--weights", str(path), "--n-rx", "3", "--n-users", "2"],
            capsys,
        )
        assert code == 7
        assert "category=format" in stderr

    def test_random_network_fails_tolerance(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        from jedmimo.weights import ACT_IDENTITY, ACT_TANH, ScoreModelWeights

        d = 2 * 3 * 2
        w = ScoreModelWeights(
            layer_dims=(d + 1, 8, d),
            weights=(
                0.1 * rng.standard_normal((8, d + 1)).astype(np.float32).astype(float),
                0.1 * rng.standard_normal((d, 8)).astype(np.float32).astype(float),
            ),
            biases=(np.zeros(8), np.zeros(d)),
            activations=(ACT_TANH, ACT_IDENTITY),
        )
        path = tmp_path / "w.bin"
        save_score_weights(path, w)
        code, stdout, _ = _run(
            ["validate-prior", "--weights", str(path), "--n-rx", "3", "--n-users", "2",
             "--samples", "8"],
            capsys,
        )
        assert code == 1
        assert "FAIL" in stdout


def test_load_flat_config(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\nkey-one = a b\n\nkey_two=3 # trailing\n")
    assert load_flat_config(cfg) == {"key_one": "a b", "key_two": "3"}


def test_workers_env_var(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("JEDMIMO_WORKERS", "2")
    out = tmp_path / "w.csv"
    code = main(
        ["simulate", "--n-rx", "4", "--n-users", "2", "--pilots", "4", "--data", "4",
         "--snr", "20", "--trials", "2", "--methods", "ls", "--levels", "20",
         "--out", str(out)]
    )
    assert code == 0
    assert out.exists()
