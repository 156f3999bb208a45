import numpy as np
import pytest

from glmotion.errors import FormatError, LengthError
from glmotion.sequence import RawSequence, disentangle, pad_and_mask, reassemble
from glmotion.sequence_transformer import Augment
from glmotion.utils.coords import get_distances_between_coords, speed_histogram


def _seq(rng, t=5, p=2, k=4, center=1, label=3, seq_id='s'):
    return RawSequence(rng.normal(size=(t, p, k, 3)), center_joint=center, label=label, id=seq_id)


class TestRawSequence:
    def test_shape_properties(self, rng):
        s = _seq(rng, t=7, p=2, k=5)
        assert (s.frames, s.persons, s.joints) == (7, 2, 5)

    @pytest.mark.parametrize('shape', [(0, 1, 3, 3), (3, 1, 1, 3), (3, 1, 3, 2), (3, 3, 3)])
    def test_rejects_bad_shapes(self, shape):
        with pytest.raises(FormatError):
            RawSequence(np.zeros(shape))

    def test_rejects_center_outside_range(self):
        with pytest.raises(FormatError):
            RawSequence(np.zeros((2, 1, 3, 3)), center_joint=3)

    def test_rejects_nan(self):
        coords = np.zeros((2, 1, 3, 3))
        coords[1, 0, 2, 1] = np.nan
        with pytest.raises(FormatError):
            RawSequence(coords)


class TestDisentangle:
    def test_global_local_definition(self, rng):
        s = _seq(rng, center=1)
        d = disentangle(s)
        q = s.coords
        np.testing.assert_allclose(d.g, q[:, :, 1] - q[0:1, :, 1])
        np.testing.assert_allclose(d.r[:, :, 0], q[:, :, 0] - q[:, :, 1])
        np.testing.assert_allclose(d.r[:, :, 2], q[:, :, 3] - q[:, :, 1])
        assert np.all(d.g[0] == 0.0)

    def test_round_trip(self, rng):
        s = _seq(rng)
        back = reassemble(disentangle(s), s.coords[0, :, s.center_joint])
        np.testing.assert_allclose(back.coords, s.coords, atol=1e-12)
        assert back.label == s.label and back.id == s.id

    def test_entangled_round_trip_without_origin(self, rng):
        s = _seq(rng)
        back = reassemble(disentangle(s, 'entangled'), None)
        np.testing.assert_array_equal(back.coords, s.coords)

    def test_local_only_zeroes_translation(self, rng):
        d = disentangle(_seq(rng), 'local_only')
        assert np.all(d.g == 0.0)
        with pytest.raises(FormatError):
            reassemble(d, np.zeros((2, 3)))

    def test_local_offsets_ignore_translation(self, rng):
        s = _seq(rng)
        moved = s.with_coords(s.coords + np.array([1.0, -2.0, 0.5]))
        np.testing.assert_allclose(disentangle(moved).r, disentangle(s).r, atol=1e-12)
        np.testing.assert_allclose(disentangle(moved).g, disentangle(s).g, atol=1e-12)

    def test_unknown_mode(self, rng):
        with pytest.raises(ValueError):
            disentangle(_seq(rng), 'polar')


class TestPadAndMask:
    def test_padding(self, rng):
        seqs = [disentangle(_seq(rng, t=t, seq_id=f's{t}')) for t in (3, 5)]
        batch = pad_and_mask(seqs, 6)
        assert batch.g.shape == (2, 6, 2, 3)
        assert batch.r.shape == (2, 6, 2, 3, 3)
        np.testing.assert_array_equal(batch.lengths, [3, 5])
        np.testing.assert_array_equal(batch.valid_mask[0], [True, True, True, False, False, False])
        assert np.all(batch.g[0, 3:] == 0.0) and np.all(batch.r[1, 5:] == 0.0)
        assert batch.ids == ['s3', 's5']
        np.testing.assert_array_equal(batch.labels, [3, 3])

    def test_labels_only_when_all_labeled(self, rng):
        seqs = [disentangle(_seq(rng)), disentangle(_seq(rng, label=None))]
        assert pad_and_mask(seqs, 5).labels is None

    def test_too_long(self, rng):
        with pytest.raises(LengthError):
            pad_and_mask([disentangle(_seq(rng, t=7))], 6)

    def test_mixed_shapes(self, rng):
        with pytest.raises(ValueError):
            pad_and_mask([disentangle(_seq(rng, k=4)), disentangle(_seq(rng, k=5))], 6)


class TestAugment:
    def test_shear_has_unit_diagonal(self, rng):
        s = Augment.shear_matrix(rng, 0.5)
        np.testing.assert_array_equal(np.diag(s), np.ones(3))
        assert np.all(np.abs(s[~np.eye(3, dtype=bool)]) <= 0.5)

    def test_shear_determinant(self, rng):
        s = Augment.shear_matrix(rng, 0.5)
        a, b, c = s[0, 1], s[0, 2], s[1, 0]
        d, e, f = s[1, 2], s[2, 0], s[2, 1]
        closed_form = 1 - d * f - a * (c - d * e) + b * (c * f - e)
        assert np.linalg.det(s) == pytest.approx(closed_form, abs=1e-12)

    def test_zero_amplitude_is_identity(self, rng):
        s = _seq(rng)
        out = Augment.shear(s, rng, 0.0)
        np.testing.assert_array_equal(out.coords, s.coords)
        assert out.coords is not s.coords

    def test_shear_is_linear_map(self, rng):
        s = _seq(rng)
        out = Augment.shear(s, np.random.default_rng(5), 0.3)
        matrix = Augment.shear_matrix(np.random.default_rng(5), 0.3)
        np.testing.assert_allclose(out.coords[2, 1, 3], matrix @ s.coords[2, 1, 3])

    def test_interpolate_keeps_endpoints(self, rng):
        s = _seq(rng, t=6)
        out = Augment.interpolate(s, 11)
        assert out.frames == 11
        np.testing.assert_allclose(out.coords[0], s.coords[0])
        np.testing.assert_allclose(out.coords[-1], s.coords[-1])
        np.testing.assert_allclose(out.coords[2], s.coords[1])

    def test_interpolate_midpoints(self):
        coords = np.arange(3, dtype=float)[:, None, None, None] * np.ones((3, 1, 2, 3))
        out = Augment.interpolate(RawSequence(coords), 5)
        np.testing.assert_allclose(out.coords[:, 0, 0, 0], [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_interpolate_short(self, rng):
        with pytest.raises(LengthError):
            Augment.interpolate(_seq(rng, t=1), 4)
        with pytest.raises(LengthError):
            Augment.interpolate(_seq(rng, t=4), 1)

    def test_resample_length_range(self, rng):
        s = _seq(rng, t=20)
        lengths = {Augment.resample_interp(s, rng, 0.1).frames for _ in range(50)}
        assert lengths <= set(range(18, 23))
        assert len(lengths) > 1

    def test_resample_clamped_to_t_max(self, rng):
        s = _seq(rng, t=20)
        assert all(Augment.resample_interp(s, rng, 0.1, t_max=19).frames <= 19 for _ in range(20))

    def test_corrupt_all_and_none(self, rng):
        s = _seq(rng)
        assert np.all(Augment.corrupt_joints(s, rng, 1.0).coords == 0.0)
        np.testing.assert_array_equal(Augment.corrupt_joints(s, rng, 0.0).coords, s.coords)

    def test_corrupt_zeroes_whole_joints(self, rng):
        s = RawSequence(np.ones((50, 2, 5, 3)))
        out = Augment.corrupt_joints(s, rng, 0.3).coords
        zero = np.all(out == 0.0, axis=-1)
        assert np.all(zero | np.all(out == 1.0, axis=-1))
        assert 0.15 < zero.mean() < 0.45

    def test_corrupt_proportion_range(self, rng):
        with pytest.raises(ValueError):
            Augment.corrupt_joints(_seq(rng), rng, 1.5)

    def test_sample_fixed_length(self, rng):
        assert Augment.sample_fixed_length(_seq(rng, t=9), 4).frames == 4
        single = Augment.sample_fixed_length(_seq(rng, t=1), 3)
        assert single.frames == 3
        np.testing.assert_array_equal(single.coords[0], single.coords[2])

    def test_input_not_modified(self, rng):
        s = _seq(rng)
        before = s.coords.copy()
        Augment.shear(s, rng)
        Augment.corrupt_joints(s, rng, 0.5)
        Augment.resample_interp(s, rng)
        np.testing.assert_array_equal(s.coords, before)


class TestCoords:
    def test_distances(self):
        coords = np.array([[0.0, 0.0, 0.0], [3.0, 4.0, 0.0], [3.0, 4.0, 1.0]])
        np.testing.assert_allclose(get_distances_between_coords(coords), [5.0, 1.0])

    def test_distances_single_frame(self):
        assert get_distances_between_coords(np.zeros((1, 2, 3))).shape == (0, 2)

    def test_speed_histogram(self):
        coords = np.zeros((3, 1, 2, 3))
        coords[1:, :, :, 0] = 0.06
        hist = speed_histogram(coords, bins=4, max_speed=0.1)
        assert hist.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(hist, [0.5, 0.0, 0.5, 0.0])
