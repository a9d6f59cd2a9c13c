import json
import math

import numpy as np
import pytest
import torch

from jedtrainer import ScoreNet, TrainSpec, dsm_loss, train, write_channels
from jedtrainer.io import read_score_weights
from jedtrainer.model import conditioning_constants, real_stack


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "chans.bin"
    rng = np.random.default_rng(0)
    mats = (rng.standard_normal((400, 3, 2)) + 1j * rng.standard_normal((400, 3, 2))) / np.sqrt(2)
    write_channels(path, mats, "iid_gaussian", seed=0)
    return str(path)


def _tiny_spec(small_dataset, tmp_path, **kw):
    base = dict(
        dataset=small_dataset, out=str(tmp_path / "w.bin"),
        hidden=(32, 32, 32), steps=60, distill_steps=60, polish_steps=10,
        batch_size=32, val_split=0.25, seed=1,
    )
    base.update(kw)
    return TrainSpec(**base)


class TestSpecValidation:
    def test_rejects_bad_ladder(self, small_dataset, tmp_path):
        with pytest.raises(ValueError):
            _tiny_spec(small_dataset, tmp_path, sigma_first=0.001, sigma_last=30.0)

    def test_rejects_bad_split(self, small_dataset, tmp_path):
        with pytest.raises(ValueError):
            _tiny_spec(small_dataset, tmp_path, val_split=1.5)

    def test_rejects_unknown_weighting(self, small_dataset, tmp_path):
        with pytest.raises(ValueError):
            _tiny_spec(small_dataset, tmp_path, weighting="cubic")

    def test_ladder_is_geometric(self, small_dataset, tmp_path):
        ladder = _tiny_spec(small_dataset, tmp_path).ladder()
        ratios = ladder[1:] / ladder[:-1]
        assert np.allclose(ratios, ratios[0])
        assert ladder[0] == 30.0 and ladder[-1] == pytest.approx(0.001)


class TestShortTraining:
    def test_one_step_run_exports_loadable_weights(self, small_dataset, tmp_path):
        spec = _tiny_spec(small_dataset, tmp_path, steps=1, distill_steps=1, polish_steps=0)
        res = train(spec)
        back = read_score_weights(spec.out)
        assert back["layer_dims"] == (2 * 3 * 2 + 1, 32, 32, 32, 2 * 3 * 2)
        assert len(res.history) >= 2

    def test_metrics_log_records(self, small_dataset, tmp_path):
        log = tmp_path / "m.jsonl"
        spec = _tiny_spec(small_dataset, tmp_path, metrics_log=str(log))
        train(spec)
        records = [json.loads(l) for l in log.read_text().splitlines()]
        assert records
        assert {"epoch", "step", "train_loss", "val_loss"} <= set(records[0])
        stages = {r["stage"] for r in records}
        assert {"dsm", "distill", "polish"} <= stages

    def test_metric_level_determinism(self, small_dataset, tmp_path):
        r1 = train(_tiny_spec(small_dataset, tmp_path))
        r2 = train(_tiny_spec(small_dataset, tmp_path))
        assert r1.val_loss == pytest.approx(r2.val_loss, rel=1e-6)

    def test_exported_weights_reproduce_network(self, small_dataset, tmp_path):
        spec = _tiny_spec(small_dataset, tmp_path)
        res = train(spec)
        back = read_score_weights(spec.out)

        # run the exported parameters by hand and compare to the torch net
        rng = np.random.default_rng(5)
        h = rng.standard_normal(12).astype(np.float32)
        sigma = 0.37
        z = np.concatenate([
            h * back["input_scale"],
            [(math.log(sigma) - back["cond_offset"]) * back["cond_scale"]],
        ]).astype(np.float64)
        for i, (w, b) in enumerate(zip(back["weights"], back["biases"])):
            z = w.astype(np.float64) @ z + b
            if back["activations"][i] == 4:
                z = z / (1.0 + np.exp(-z))
        with torch.no_grad():
            want = res.net(torch.from_numpy(h).unsqueeze(0), torch.tensor([sigma])).numpy()[0]
        np.testing.assert_allclose(z, want, atol=1e-5)

    def test_training_reduces_dsm_loss_below_zero_net(self, small_dataset, tmp_path):
        spec = _tiny_spec(small_dataset, tmp_path, steps=800, distill_steps=800,
                          polish_steps=100)
        res = train(spec)
        ladder = torch.from_numpy(spec.ladder().astype(np.float32))
        rng = np.random.default_rng(0)
        mats = (rng.standard_normal((400, 3, 2)) + 1j * rng.standard_normal((400, 3, 2))) / np.sqrt(2)
        batch = torch.from_numpy(real_stack(mats))
        gen = torch.Generator().manual_seed(9)
        loss_teacher = dsm_loss(batch, res.teacher, ladder, "sigma2", gen)
        gen = torch.Generator().manual_seed(9)
        loss_zero = dsm_loss(batch, lambda x, s: torch.zeros_like(x), ladder, "sigma2", gen)
        assert loss_teacher.item() < loss_zero.item()
