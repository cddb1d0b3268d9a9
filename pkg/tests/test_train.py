"""Training-loop tests: determinism, state isolation, short-run learning."""

import numpy as np
import pytest
import torch

from interkey.codec import CodecConfig
from interkey.data import SyntheticSpineConfig, generate_synthetic_spine
from interkey.model import ModelConfig
from interkey.morphology import MorphologyConfig
from interkey.simulate import ClickBudgetDistribution, make_training_example
from interkey.train import TrainConfig, prepare_samples, train_model

CODEC = CodecConfig()


@pytest.fixture(scope="module")
def small_manifest(tmp_path_factory):
    cfg = SyntheticSpineConfig(num_samples=24, seed=3)
    return generate_synthetic_spine(cfg, tmp_path_factory.mktemp("train_synth"))


class TestPreparedSamples:
    def test_shapes(self, small_manifest):
        samples = prepare_samples(small_manifest, "train", CODEC)
        assert samples
        s = samples[0]
        assert s.image.shape == (1, 64, 64)
        assert s.target_hm.shape == (small_manifest.k, 64, 64)
        assert s.gt_coords.shape == (small_manifest.k, 2)

    def test_prev_pred_isolated_between_samples(self, small_manifest):
        # prev-pred tensors built for one image never alias another's
        samples = prepare_samples(small_manifest, "train", CODEC)
        dist = ClickBudgetDistribution(k=small_manifest.k, decay=0.5)
        rng = np.random.default_rng(0)
        prev_a = torch.full((small_manifest.k, 64, 64), 0.25)
        ex_a = make_training_example(samples[0].gt, prev_a, dist, CODEC, 64, 64, rng)
        ex_b = make_training_example(samples[1].gt, None, dist, CODEC, 64, 64, rng)
        assert torch.equal(ex_a.prev_pred, prev_a)
        assert ex_b.prev_pred.abs().max() == 0


class TestTrainModel:
    def test_short_run_learns_and_is_deterministic(self, small_manifest, tmp_path):
        model_cfg = ModelConfig(k=small_manifest.k, input_size=(64, 64))
        tcfg = TrainConfig(max_epochs=3, patience=10, seed=5)
        bundles = []
        for run in range(2):
            bundles.append(train_model(small_manifest, model_cfg, CODEC,
                                       MorphologyConfig(), tcfg,
                                       out_path=tmp_path / f"m{run}.ckpt"))
        s1 = bundles[0].model.state_dict()
        s2 = bundles[1].model.state_dict()
        assert all(torch.equal(s1[k], s2[k]) for k in s1)
        assert bundles[0].train_steps == bundles[1].train_steps > 0

    def test_size_mismatch_rejected(self, small_manifest):
        model_cfg = ModelConfig(k=small_manifest.k, input_size=(32, 32))
        with pytest.raises(ValueError, match="image size"):
            train_model(small_manifest, model_cfg, CODEC, MorphologyConfig(),
                        TrainConfig(max_epochs=1))
