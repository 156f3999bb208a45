import numpy as np
import pytest

from glmotion.synth_generator import (FAMILIES, global_trajectory, nearest_neighbor_accuracy, rest_skeleton,
                                      synth_generate)


class TestSynthGenerate:
    def test_shapes_labels_and_ids(self, rng):
        seqs = synth_generate(rng, n_classes=3, n_per_class=2, K=5, P=2, T_range=(10, 12))
        assert len(seqs) == 6
        assert [s.label for s in seqs] == [0, 0, 1, 1, 2, 2]
        assert seqs[3].id == 'synth_c01_00001'
        for s in seqs:
            assert 10 <= s.frames <= 12
            assert (s.persons, s.joints, s.center_joint) == (2, 5, 0)

    def test_same_seed_same_data(self):
        a = synth_generate(np.random.default_rng(9), 2, 3, 4, 1, (5, 9))
        b = synth_generate(np.random.default_rng(9), 2, 3, 4, 1, (5, 9))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.coords, y.coords)

    def test_noise_free_local_pose(self, rng):
        seqs = synth_generate(rng, 2, 1, 4, 1, (6, 6), noise=0.0, families=['stationary', 'stationary'])
        center = seqs[0].coords[:, 0, 0]
        np.testing.assert_allclose(center, np.repeat(center[:1], 6, axis=0))

    @pytest.mark.parametrize('random_phase', [False, True])
    def test_phase_per_sequence(self, rng, random_phase):
        seqs = synth_generate(rng, 2, 2, 4, 1, (6, 6), noise=0.0, families=['stationary', 'stationary'],
                              random_phase=random_phase)
        first, second = (s.coords[:, 0] - s.coords[:, 0, :1] for s in seqs[:2])
        assert np.allclose(first, second) != random_phase

    def test_rejects_single_class(self, rng):
        with pytest.raises(ValueError):
            synth_generate(rng, 1, 4, 4, 1, (5, 6))

    def test_rejects_bad_length_range(self, rng):
        with pytest.raises(ValueError):
            synth_generate(rng, 2, 4, 4, 1, (6, 5))

    def test_families_must_match_classes(self, rng):
        with pytest.raises(ValueError):
            synth_generate(rng, 3, 1, 4, 1, (5, 6), families=['line'])


class TestTrajectories:
    def test_rest_pose_centered(self):
        rest = rest_skeleton(6)
        assert rest.shape == (6, 3)
        assert np.all(rest[0] == 0.0)

    @pytest.mark.parametrize('family', FAMILIES)
    def test_starts_at_origin(self, family):
        path = global_trajectory(family, 20, 1)
        assert path.shape == (20, 3)
        np.testing.assert_allclose(path[0], 0.0, atol=1e-15)

    def test_line_speed(self):
        steps = np.linalg.norm(np.diff(global_trajectory('line', 10, 2), axis=0), axis=1)
        np.testing.assert_allclose(steps, 0.02)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            global_trajectory('spiral', 5, 0)


class TestNearestNeighbor:
    def test_speed_profiles_separate_classes(self):
        rng = np.random.default_rng(0)
        seqs = synth_generate(rng, 2, 20, 5, 1, (30, 40), families=['stationary', 'line'], freqs=[0.5, 2.0])
        train = seqs[0:10] + seqs[20:30]
        test = seqs[10:20] + seqs[30:40]
        assert nearest_neighbor_accuracy(train, test) >= 0.9

    def test_empty(self):
        with pytest.raises(ValueError):
            nearest_neighbor_accuracy([], [])
