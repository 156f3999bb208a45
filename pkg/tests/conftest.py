from pathlib import Path

import numpy as np
import pytest

from glmotion.config import RunConfig
from glmotion.model.gl_base import ModelConfig
from glmotion.mpdp import MpdpConfig
from glmotion.synth_generator import synth_generate

FIXTURES = Path(__file__).parent / 'fixtures'


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def toy_model_cfg():
    return ModelConfig(joints=3, persons=1, embed_dim=4, blocks=1, spatial_heads=2, temporal_heads=2, t_max=4)


@pytest.fixture
def small_model_cfg():
    """A network small enough for a handful of training steps in a unit test."""
    return ModelConfig(joints=4, persons=1, embed_dim=4, blocks=1, spatial_heads=2, temporal_heads=2,
                       mlp_hidden=16, t_max=16)


@pytest.fixture
def small_mpdp_cfg():
    return MpdpConfig(intervals=(1, 2))


@pytest.fixture
def small_run_cfg():
    return RunConfig(epochs=2, batch_size=4, seed=7, checkpoint_every=1, probe_epochs=5, probe_batch_size=8,
                     finetune_epochs=2, label_fraction=0.5)


@pytest.fixture
def small_dataset():
    """Eight labeled sequences, two classes, K=4, P=1, 6 to 8 frames."""
    return synth_generate(np.random.default_rng(3), n_classes=2, n_per_class=4, K=4, P=1, T_range=(6, 8))
