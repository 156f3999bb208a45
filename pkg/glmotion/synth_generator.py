"""
This module provides functions for generating labeled synthetic skeleton datasets.

Functions:
- rest_skeleton: Returns the fixed rest pose shared by every generated sequence.
- global_trajectory: Generates the center-joint path of one trajectory family.
- synth_generate: Generates a class-conditioned dataset of RawSequence objects.
- nearest_neighbor_accuracy: 1-nearest-neighbor baseline on speed histograms.
"""

import logging

import numpy as np

from glmotion.sequence import RawSequence
from glmotion.utils.coords import speed_histogram

logger = logging.getLogger(__name__)

FAMILIES = ('stationary', 'line', 'circle')

LOCAL_AMPLITUDE = 0.15   # meters
LINE_SPEED = 0.02        # meters per frame
CIRCLE_RADIUS = 0.5      # meters


def rest_skeleton(K):
    """
    Returns a deterministic rest pose with the center joint at the origin.

    Non-center joints sit on a rising helix of radius 0.3 m around the center.

    Args:
        K (int): Number of joints, at least 2.

    Returns:
        numpy.ndarray: Rest offsets of shape (K, 3); row 0 is the center joint.
    """
    rest = np.zeros((K, 3))
    k = np.arange(1, K)
    angle = 2 * np.pi * k / (K - 1)
    rest[1:, 0] = 0.3 * np.cos(angle)
    rest[1:, 1] = 0.3 * np.sin(angle)
    rest[1:, 2] = 0.1 * k
    return rest


def global_trajectory(family, T, class_index, fps=30):
    """
    Generates the global translation of one trajectory family, starting at the origin.

    Args:
        family (str): 'stationary', 'line' or 'circle'.
        T (int): Number of frames.
        class_index (int): Selects the heading of lines and the turning direction of circles.
        fps (float): Frames per second.

    Returns:
        numpy.ndarray: Array of shape (T, 3).
    """
    t = np.arange(T, dtype=np.float64)
    if family == 'stationary':
        return np.zeros((T, 3))
    if family == 'line':
        heading = 0.9 * class_index
        direction = np.array([np.cos(heading), np.sin(heading), 0.0])
        return LINE_SPEED * t[:, None] * direction[None, :]
    if family == 'circle':
        sign = 1.0 if class_index % 2 == 0 else -1.0
        omega = sign * 2 * np.pi * 0.25 / fps
        path = np.zeros((T, 3))
        path[:, 0] = CIRCLE_RADIUS * (np.cos(omega * t) - 1.0)
        path[:, 1] = CIRCLE_RADIUS * np.sin(omega * t)
        return path
    raise ValueError(f'unknown trajectory family {family!r}, expected one of {FAMILIES}')


def _local_motion(rest, T, freq, phase, fps):
    """Sinusoidal offsets around the rest pose, shape (T, K, 3); the center joint stays put."""
    K = rest.shape[0]
    t = np.arange(T, dtype=np.float64)[:, None]
    joint_phase = phase + 2 * np.pi * np.arange(K) / K
    wave = LOCAL_AMPLITUDE * np.sin(2 * np.pi * freq * t / fps + joint_phase[None, :])
    axes = np.zeros((K, 3))
    axes[np.arange(K), np.arange(K) % 3] = 1.0
    local = rest[None, :, :] + wave[:, :, None] * axes[None, :, :]
    local[:, 0, :] = 0.0
    return local


def synth_generate(rng, n_classes, n_per_class, K, P, T_range, noise=0.01, fps=30, families=None, freqs=None,
                   random_phase=False):
    """
    Generates a class-conditioned synthetic dataset.

    Class c moves its center joint along ``families[c]`` and oscillates its
    other joints at ``freqs[c]`` Hz with a class-specific phase, or with a
    phase drawn per sequence when `random_phase` is set. Each
    sequence gets a random origin, a length drawn uniformly from
    `T_range` (inclusive) and additive Gaussian coordinate noise. Joint 0
    is the center joint.

    Args:
        rng (numpy.random.Generator): Source of randomness.
        n_classes (int): Number of classes, at least 2.
        n_per_class (int): Sequences generated per class.
        K (int): Joints per person.
        P (int): Persons per frame.
        T_range (tuple): Inclusive (min, max) sequence length.
        noise (float): Standard deviation of the coordinate noise, in meters.
        fps (float): Frames per second.
        families (list of str, optional): Trajectory family per class. Default cycles through FAMILIES.
        freqs (list of float, optional): Local oscillation frequency per class. Default 0.5 * (c + 1).
        random_phase (bool): Draw the oscillation phase uniformly per sequence. With stationary
            families and lengths spanning whole cycles, classes then differ only in speed.

    Returns:
        list: RawSequence objects ordered by class, then by sample.
    """
    if n_classes < 2:
        raise ValueError(f'synth_generate needs at least 2 classes, got {n_classes}')
    t_min, t_max = int(T_range[0]), int(T_range[1])
    if not 1 <= t_min <= t_max:
        raise ValueError(f'invalid length range {T_range}')
    if families is None:
        families = [FAMILIES[c % len(FAMILIES)] for c in range(n_classes)]
    if freqs is None:
        freqs = [0.5 * (c + 1) for c in range(n_classes)]
    if len(families) != n_classes or len(freqs) != n_classes:
        raise ValueError('families and freqs must give one entry per class')

    rest = rest_skeleton(K)
    seqs = []
    for c in range(n_classes):
        for i in range(n_per_class):
            T = int(rng.integers(t_min, t_max + 1))
            phase = rng.uniform(0.0, 2 * np.pi) if random_phase else 0.7 * c
            coords = np.empty((T, P, K, 3))
            g = global_trajectory(families[c], T, c, fps)
            local = _local_motion(rest, T, freqs[c], phase, fps)
            for p in range(P):
                origin = rng.uniform(-1.0, 1.0, size=3)
                coords[:, p] = origin + g[:, None, :] + local
            if noise > 0:
                coords = coords + rng.normal(0.0, noise, size=coords.shape)
            seqs.append(RawSequence(coords, center_joint=0, label=c, id=f'synth_c{c:02d}_{i:05d}'))
    logger.info('generated %d synthetic sequences in %d classes', len(seqs), n_classes)
    return seqs


def nearest_neighbor_accuracy(train, test, bins=16, max_speed=0.1):
    """
    Accuracy of a 1-nearest-neighbor classifier on per-sequence speed histograms (L1 distance).

    Args:
        train (list of RawSequence): Labeled reference sequences.
        test (list of RawSequence): Labeled query sequences.
        bins (int): Histogram bins.
        max_speed (float): Histogram range, in meters per frame.

    Returns:
        float: Fraction of test sequences whose nearest training histogram has the same label.
    """
    if not train or not test:
        raise ValueError('nearest_neighbor_accuracy needs non-empty train and test sets')
    train_h = np.stack([speed_histogram(s.coords, bins, max_speed) for s in train])
    train_y = np.array([s.label for s in train])
    correct = 0
    for s in test:
        h = speed_histogram(s.coords, bins, max_speed)
        nearest = np.argmin(np.abs(train_h - h[None, :]).sum(axis=1))
        correct += int(train_y[nearest] == s.label)
    return correct / len(test)
