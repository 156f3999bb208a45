import numpy as np
import pytest

from glmotion.autodiff import Tensor
from glmotion.errors import ConfigError, NumericError
from glmotion.training import ExponentialDecay, MetricsLog, OptimState, clip_grad_norm, optimizer_step


def _param(values, grad):
    t = Tensor(np.array(values, dtype=float), requires_grad=True, name='w')
    t.grad = np.array(grad, dtype=float)
    return t


class TestOptimizer:
    def test_first_adam_step_moves_by_lr(self):
        p = _param([1.0, -2.0], [1.0, -3.0])
        optimizer_step([p], OptimState('adam', lr=0.1))
        np.testing.assert_allclose(p.data, [1.0 - 0.1 / (1 + 1e-8), -2.0 + 0.1 / (1 + 1e-8)], rtol=1e-12)

    def test_adamw_decays_weights(self):
        p = _param([2.0], [0.0])
        optimizer_step([p], OptimState('adamw', lr=0.1, weight_decay=0.5))
        np.testing.assert_allclose(p.data, [2.0 - 0.1 * 0.5 * 2.0])

    def test_adam_ignores_weight_decay(self):
        p = _param([2.0], [0.0])
        optimizer_step([p], OptimState('adam', lr=0.1, weight_decay=0.5))
        np.testing.assert_array_equal(p.data, [2.0])

    def test_missing_gradient_counts_as_zero(self):
        p = Tensor(np.ones(3), requires_grad=True)
        optimizer_step([p], OptimState('adam', lr=0.1))
        np.testing.assert_array_equal(p.data, np.ones(3))

    def test_non_finite_gradient_aborts(self):
        good = _param([1.0], [1.0])
        bad = _param([1.0], [np.nan])
        state = OptimState('adam', lr=0.1)
        with pytest.raises(NumericError):
            optimizer_step([good, bad], state)
        np.testing.assert_array_equal(good.data, [1.0])
        assert state.step == 0 and state.m == {}

    def test_moments_persist(self):
        p = _param([0.0], [1.0])
        state = OptimState('adam', lr=0.1)
        optimizer_step([p], state)
        optimizer_step([p], state)
        assert state.step == 2
        assert p.data[0] == pytest.approx(-0.2, rel=1e-6)

    def test_snapshot_survives_step(self):
        p = _param([1.0], [1.0])
        snapshot = p.data
        optimizer_step([p], OptimState('adam', lr=0.1))
        np.testing.assert_array_equal(snapshot, [1.0])

    @pytest.mark.parametrize('kwargs', [{'algorithm': 'sgd'}, {'lr': -1.0}, {'betas': (0.9, 1.0)}])
    def test_invalid_state(self, kwargs):
        with pytest.raises(ConfigError):
            OptimState(**kwargs)


class TestClipping:
    def test_clip_to_bound(self):
        a, b = _param([0.0], [3.0]), _param([0.0, 0.0], [0.0, 4.0])
        norm = clip_grad_norm([a, b], 1.0)
        assert norm == pytest.approx(5.0)
        total = np.sqrt(np.sum(a.grad ** 2) + np.sum(b.grad ** 2))
        assert total == pytest.approx(1.0, rel=1e-9)
        np.testing.assert_allclose(b.grad, [0.0, 0.8], rtol=1e-9)

    def test_small_norm_untouched(self):
        a = _param([0.0], [0.5])
        assert clip_grad_norm([a], 1.0) == pytest.approx(0.5)
        np.testing.assert_array_equal(a.grad, [0.5])

    def test_measure_only(self):
        a = _param([0.0], [30.0])
        assert clip_grad_norm([a, Tensor(np.zeros(2), requires_grad=True)], None) == pytest.approx(30.0)
        np.testing.assert_array_equal(a.grad, [30.0])


class TestSchedule:
    def test_exponential_decay(self):
        schedule = ExponentialDecay(5e-4, 0.99)
        assert schedule(0) == 5e-4
        assert schedule(10) == pytest.approx(5e-4 * 0.99 ** 10)


class TestMetricsLog:
    def test_header_and_records(self, tmp_path):
        log = MetricsLog((1, 5), tmp_path / 'metrics.log')
        accuracy = {'dir': {1: 0.5, 5: 0.25}, 'mag': {1: 1.0, 5: 0.0}}
        line = log.append(1, 3.25, accuracy, 5e-4, 0)
        assert log.header() == '# epoch, loss, dir_acc@1, dir_acc@5, mag_acc@1, mag_acc@5, lr, wall_ms\n'
        assert line == '1, 3.25, 0.500000, 0.250000, 1.000000, 0.000000, 0.0005, 0\n'
        assert (tmp_path / 'metrics.log').read_text() == log.text
        assert log.records[0]['loss'] == 3.25

    def test_in_memory(self, tmp_path):
        log = MetricsLog((1,))
        log.append(1, 1.0, {'dir': {1: 1.0}, 'mag': {1: 1.0}}, 0.1, 12.7)
        assert log.records[0]['wall_ms'] == 12
        path = log.write(tmp_path / 'copy.log')
        assert path.read_text().count('\n') == 2
