import numpy as np
import pytest

from glmotion.errors import ConfigError
from glmotion.positional import (POSITIONAL_MODES, FixedSinusoidal, TrainableOnce, TrainableTight,
                                 get_positional)


class TestStrategies:
    def test_registry(self):
        assert get_positional('trainable_tight') is TrainableTight
        assert get_positional('trainable_once') is TrainableOnce
        assert get_positional('fixed_sinusoidal') is FixedSinusoidal
        assert set(POSITIONAL_MODES) == {'trainable_tight', 'trainable_once', 'fixed_sinusoidal'}

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            get_positional('learned')

    def test_tight_adds_everywhere(self):
        assert all(TrainableTight.adds_spatial(n) and TrainableTight.adds_temporal(n) for n in range(4))
        assert np.all(TrainableTight.init_table(3, 2, 4) == 0.0)

    @pytest.mark.parametrize('strategy', [TrainableOnce, FixedSinusoidal])
    def test_once_adds_first_spatial_only(self, strategy):
        assert strategy.adds_spatial(0)
        assert not any(strategy.adds_spatial(n) for n in range(1, 4))
        assert not any(strategy.adds_temporal(n) for n in range(4))

    def test_trainable_flags(self):
        assert TrainableTight.trainable and TrainableOnce.trainable
        assert not FixedSinusoidal.trainable

    def test_sinusoid_table(self):
        table = FixedSinusoidal.init_table(5, 3, 4)
        assert table.shape == (5, 3, 4)
        flat = table.reshape(15, 4)
        np.testing.assert_allclose(flat[0], [0.0, 1.0, 0.0, 1.0])
        u = 7
        np.testing.assert_allclose(flat[u, 0], np.sin(u))
        np.testing.assert_allclose(flat[u, 1], np.cos(u))
        np.testing.assert_allclose(flat[u, 2], np.sin(u / 100.0))
        np.testing.assert_allclose(flat[u, 3], np.cos(u / 100.0))

    def test_dtype(self):
        assert FixedSinusoidal.init_table(2, 2, 2, np.float32).dtype == np.float32
