import json

import numpy as np
import pytest

from glmotion.errors import FormatError
from glmotion.model import ModelConfig, ModelParams
from glmotion.model.checkpoint import HEADER_KEY, load_checkpoint, read_header, save_checkpoint
from glmotion.mpdp import MpdpConfig, MpdpHeads


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, toy_model_cfg, rng, tmp_path):
        params = ModelParams.init(toy_model_cfg, rng)
        params['pos.M'].data = rng.normal(size=params['pos.M'].shape)
        mpdp_cfg = MpdpConfig(intervals=(1, 2), lambda_sigma=0.5)
        heads = MpdpHeads.init(mpdp_cfg, toy_model_cfg.tokens, toy_model_cfg.frame_dim, rng)
        path = save_checkpoint(tmp_path / 'run' / 'ck.npz', params, heads, meta={'epoch': 3})

        ck = load_checkpoint(path)
        assert ck.model_cfg == toy_model_cfg
        assert ck.params.checksum() == params.checksum()
        assert [name for name, _ in ck.params.named()] == [name for name, _ in params.named()]
        assert ck.heads.checksum() == heads.checksum()
        assert ck.mpdp_cfg.intervals == (1, 2)
        assert ck.mpdp_cfg.lambda_sigma == 0.5
        np.testing.assert_array_equal(ck.mpdp_cfg.magnitude_edges, mpdp_cfg.magnitude_edges)
        assert ck.meta == {'epoch': 3}

    def test_without_heads(self, toy_model_cfg, rng, tmp_path):
        params = ModelParams.init(toy_model_cfg, rng)
        ck = load_checkpoint(save_checkpoint(tmp_path / 'ck.npz', params))
        assert ck.heads is None and ck.mpdp_cfg is None
        assert read_header(tmp_path / 'ck.npz')['head_count'] == 0

    @pytest.mark.parametrize('intervals, count', [((1,), 2), ((1, 5, 10), 6)])
    def test_head_count(self, toy_model_cfg, rng, tmp_path, intervals, count):
        params = ModelParams.init(toy_model_cfg, rng)
        heads = MpdpHeads.init(MpdpConfig(intervals=intervals), toy_model_cfg.tokens, toy_model_cfg.frame_dim, rng)
        save_checkpoint(tmp_path / 'ck.npz', params, heads)
        assert read_header(tmp_path / 'ck.npz')['head_count'] == count

    def test_frozen_table_stays_frozen(self, rng, tmp_path):
        cfg = ModelConfig(joints=3, embed_dim=4, blocks=1, spatial_heads=2, temporal_heads=2, t_max=4,
                          positional_mode='fixed_sinusoidal')
        ck = load_checkpoint(save_checkpoint(tmp_path / 'ck.npz', ModelParams.init(cfg, rng)))
        assert not ck.params['pos.M'].requires_grad
        assert ck.params.count() == ModelParams.init(cfg, rng).count()

    def test_foreign_archive(self, tmp_path):
        np.savez(tmp_path / 'other.npz', weights=np.zeros(3))
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path / 'other.npz')

    def test_version_mismatch(self, toy_model_cfg, rng, tmp_path):
        path = save_checkpoint(tmp_path / 'ck.npz', ModelParams.init(toy_model_cfg, rng))
        with np.load(path) as archive:
            arrays = {key: archive[key] for key in archive.files}
        header = json.loads(arrays[HEADER_KEY].tobytes().decode('utf-8'))
        header['version'] = 99
        arrays[HEADER_KEY] = np.frombuffer(json.dumps(header).encode('utf-8'), dtype=np.uint8)
        np.savez(path, **arrays)
        with pytest.raises(FormatError):
            read_header(path)

    def test_missing_tensor(self, toy_model_cfg, rng, tmp_path):
        path = save_checkpoint(tmp_path / 'ck.npz', ModelParams.init(toy_model_cfg, rng))
        with np.load(path) as archive:
            arrays = {key: archive[key] for key in archive.files if key != 'model/final.W_1'}
        np.savez(path, **arrays)
        with pytest.raises(FormatError):
            load_checkpoint(path)
