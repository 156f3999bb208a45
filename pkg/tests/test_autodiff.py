import threading

import numpy as np
import pytest

from glmotion.autodiff import (MASK_FILL, Tape, Tensor, add, backward, concat, cross_entropy_logits, gelu, getitem,
                               grad_check, layer_norm, linear, matmul, mean, no_grad, reshape, scale,
                               softmax_masked, sum, swapaxes)
from glmotion.autodiff.ad_tensor import make_output
from glmotion.errors import DeterminismError, MaskError, NumericError, ShapeError, StateError


def _param(rng, *shape, name=None):
    return Tensor(rng.normal(size=shape), requires_grad=True, name=name)


class TestTensor:
    def test_default_dtype_is_float64(self):
        assert Tensor([1, 2, 3]).data.dtype == np.float64

    def test_requested_dtype_is_kept(self):
        assert Tensor([1.0], dtype=np.float32).data.dtype == np.float32

    def test_no_grad_records_nothing(self, rng):
        x = _param(rng, 3)
        with Tape() as tape:
            with no_grad():
                y = scale(x, 2.0)
            assert len(tape) == 0
        assert not y.requires_grad

    def test_backward_twice_raises(self, rng):
        x = _param(rng, 3)
        with Tape():
            loss = sum(scale(x, 2.0))
            backward(loss)
            with pytest.raises(StateError):
                backward(loss)

    def test_reset_tape_allows_reuse(self, rng):
        x = _param(rng, 3)
        with Tape() as tape:
            backward(sum(x * x))
            tape.reset()
            x.zero_grad()
            backward(sum(scale(x, 3.0)))
        np.testing.assert_allclose(x.grad, 3.0)

    def test_non_scalar_loss_rejected(self, rng):
        x = _param(rng, 3)
        with Tape():
            with pytest.raises(ShapeError):
                backward(scale(x, 1.0))

    def test_loss_without_graph_rejected(self):
        with pytest.raises(StateError):
            backward(Tensor(1.0))

    def test_fan_out_gradients_add(self, rng):
        x = _param(rng, 4)
        with Tape():
            backward(sum(add(x, x)))
        np.testing.assert_array_equal(x.grad, np.full(4, 2.0))

    def test_tapes_are_thread_local(self, rng):
        x = _param(rng, 3)
        lengths = []

        def work():
            with Tape() as tape:
                scale(x, 2.0)
                lengths.append(len(tape))

        with Tape() as tape:
            worker = threading.Thread(target=work)
            worker.start()
            worker.join()
            assert len(tape) == 0
        assert lengths == [1]


class TestOps:
    def test_trailing_axes_broadcast(self, rng):
        a = _param(rng, 2, 3, 4)
        b = _param(rng, 4)
        with Tape():
            backward(sum(add(a, b)))
        np.testing.assert_array_equal(b.grad, np.full(4, 6.0))

    def test_leading_axes_broadcast_rejected(self, rng):
        with pytest.raises(ShapeError):
            add(Tensor(rng.normal(size=(2, 3))), Tensor(rng.normal(size=(2, 1))))

    def test_division_by_zero(self):
        with pytest.raises(NumericError):
            Tensor([1.0]) / Tensor([0.0])

    def test_matmul_shapes(self, rng):
        shared = matmul(Tensor(rng.normal(size=(2, 5, 3))), Tensor(rng.normal(size=(3, 4))))
        batched = matmul(Tensor(rng.normal(size=(2, 5, 3))), Tensor(rng.normal(size=(2, 3, 4))))
        assert shared.shape == batched.shape == (2, 5, 4)
        with pytest.raises(ShapeError):
            matmul(Tensor(rng.normal(size=(2, 5, 3))), Tensor(rng.normal(size=(4, 3))))
        with pytest.raises(ShapeError):
            matmul(Tensor(rng.normal(size=(2, 5, 3))), Tensor(rng.normal(size=(3, 3, 4))))

    def test_softmax_rows_sum_to_one(self, rng):
        y = softmax_masked(Tensor(rng.normal(size=(3, 5))))
        np.testing.assert_allclose(y.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_softmax_masked_entries_are_exact_zeros(self, rng):
        mask = np.array([True, True, False, False])
        y = softmax_masked(Tensor(rng.normal(size=(3, 4))), mask)
        assert np.all(y.data[:, 2:] == 0.0)
        np.testing.assert_allclose(y.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_softmax_fully_masked_row(self, rng):
        with pytest.raises(MaskError):
            softmax_masked(Tensor(rng.normal(size=(2, 3))), np.zeros(3, dtype=bool))

    def test_mask_fill_is_finite(self):
        assert np.isfinite(MASK_FILL) and MASK_FILL < -1e29

    def test_layer_norm_normalises(self, rng):
        x = Tensor(rng.normal(3.0, 2.0, size=(4, 6)))
        y = layer_norm(x, Tensor(np.ones(6)), Tensor(np.zeros(6)), eps=0.0)
        np.testing.assert_allclose(y.data.mean(axis=-1), 0.0, atol=1e-12)
        np.testing.assert_allclose(y.data.var(axis=-1), 1.0, atol=1e-9)

    def test_layer_norm_constant_row_without_eps(self):
        with pytest.raises(NumericError):
            layer_norm(Tensor(np.ones((2, 3))), Tensor(np.ones(3)), Tensor(np.zeros(3)), eps=0.0)

    def test_cross_entropy_uniform_logits(self):
        loss = cross_entropy_logits(Tensor(np.zeros((5, 27))), np.arange(5))
        assert loss.item() == pytest.approx(np.log(27), abs=1e-12)

    def test_cross_entropy_rejects_out_of_range_target(self):
        with pytest.raises(IndexError):
            cross_entropy_logits(Tensor(np.zeros((2, 3))), [0, 3])

    def test_cross_entropy_rejects_empty_batch(self):
        with pytest.raises(ShapeError):
            cross_entropy_logits(Tensor(np.zeros((0, 3))), np.zeros(0, dtype=int))


class TestGradCheck:
    @pytest.mark.parametrize('name, fn, shapes', [
        ('matmul_shared', lambda a, b: sum(matmul(a, b)), [(2, 3, 4), (4, 5)]),
        ('matmul_batched', lambda a, b: sum(matmul(a, b)), [(2, 3, 4), (2, 4, 5)]),
        ('mul_div', lambda a, b: sum(a * b / (b * b + 1.0)), [(3, 4), (4,)]),
        ('swapaxes_reshape', lambda a: sum(reshape(swapaxes(a, -1, -2), (6, 2)) * reshape(a, (6, 2))), [(2, 2, 3)]),
        ('getitem_concat',
         lambda a, b: sum(concat([getitem(a, np.array([0, 0, 2])), b], axis=0) * concat([b, b, a[1:2], b], axis=0)),
         [(3, 2), (1, 2)]),
        ('mean', lambda a: mean(a * a, axis=1).sum(), [(3, 4)]),
        ('gelu', lambda a: sum(gelu(a) * a), [(3, 4)]),
    ])
    def test_primitives(self, rng, name, fn, shapes):
        xs = [_param(rng, *s) for s in shapes]
        report = grad_check(lambda inputs: fn(*inputs), xs, step=1e-6, tol=1e-5)
        assert report.passed, (name, report.per_tensor)

    def test_softmax_masked(self, rng):
        x = _param(rng, 2, 3, 5)
        w = Tensor(rng.normal(size=(2, 3, 5)))
        mask = np.array([True, False, True, True, False])
        report = grad_check(lambda t: sum(softmax_masked(t, mask) * w), x, step=1e-6, tol=1e-5)
        assert report.passed

    def test_layer_norm_and_linear(self, rng):
        x, g, b = _param(rng, 3, 6), _param(rng, 6), _param(rng, 6)
        w, c = _param(rng, 6, 2), _param(rng, 2)
        target = np.array([0, 1, 1])
        report = grad_check(lambda t: cross_entropy_logits(linear(layer_norm(t[0], t[1], t[2]), t[3], t[4]), target),
                            [x, g, b, w, c], step=1e-6, tol=1e-5)
        assert report.passed

    def test_max_entries_limits_work(self, rng):
        x = _param(rng, 10, 10)
        report = grad_check(lambda t: sum(t * t), x, max_entries=7)
        assert report.checked == 7

    def test_nondeterministic_function(self, rng):
        x = _param(rng, 3)
        calls = []

        def drifting(t):
            calls.append(None)
            return sum(t * t) + float(len(calls))
        with pytest.raises(DeterminismError):
            grad_check(drifting, x)

    def test_wrong_backward_is_reported(self, rng):
        x = _param(rng, 4)

        def square_missing_factor(t):
            return make_output(t.data ** 2, 'square', (t,), lambda g: (g * t.data,))
        report = grad_check(lambda t: sum(square_missing_factor(t)), x, step=1e-6, tol=1e-3)
        assert not report.passed
        assert report.max_rel_error == pytest.approx(0.5, abs=1e-3)


class TestLinearity:
    @pytest.mark.parametrize('a, b', [(1.0, 1.0), (2.5, -0.5), (0.0, 3.0)])
    def test_gradient_of_combination(self, rng, a, b):
        x = _param(rng, 3, 4)
        w = Tensor(rng.normal(size=(4, 2)))

        def f(t):
            return sum(t * t * t)

        def g(t):
            return sum(gelu(matmul(t, w)))

        grads = []
        for fn in (f, g, lambda t: add(scale(f(t), a), scale(g(t), b))):
            x.zero_grad()
            with Tape():
                backward(fn(x))
            grads.append(x.grad.copy())
        np.testing.assert_allclose(grads[2], a * grads[0] + b * grads[1], rtol=1e-12, atol=1e-12)
