import math

import numpy as np

from glmotion.errors import LengthError
from glmotion.sequence import RawSequence


class Augment:
    """
    Random and deterministic transformations of a RawSequence.

    Every method returns a new sequence; the input is never modified.
    Random methods take an explicit numpy Generator so callers control
    reproducibility.
    """
    def __init__(self):
        pass

    @staticmethod
    def shear_matrix(rng, amplitude=0.5):
        """
        Draws a 3x3 shear matrix with unit diagonal.

        Args:
            rng (numpy.random.Generator): Source of randomness.
            amplitude (float): Off-diagonal entries are uniform in [-amplitude, amplitude].

        Returns:
            numpy.ndarray: The (3, 3) matrix.
        """
        if amplitude < 0:
            raise ValueError(f'shear amplitude must be non-negative, got {amplitude}')
        s = np.eye(3)
        off_diagonal = ~np.eye(3, dtype=bool)
        s[off_diagonal] = rng.uniform(-amplitude, amplitude, size=6)
        return s

    @staticmethod
    def shear(seq, rng, amplitude=0.5):
        """
        Applies one shear matrix S to every coordinate of the sequence (q -> S q).

        Args:
            seq (RawSequence): The sequence to shear.
            rng (numpy.random.Generator): Source of randomness.
            amplitude (float): Bound of the off-diagonal entries. 0 gives the identity.

        Returns:
            RawSequence: The sheared sequence.
        """
        if amplitude == 0:
            return seq.with_coords(seq.coords.copy())
        s = Augment.shear_matrix(rng, amplitude)
        return Augment.apply_linear(seq, s)

    @staticmethod
    def apply_linear(seq, matrix):
        """Applies a fixed 3x3 matrix to every coordinate."""
        matrix = np.asarray(matrix, dtype=np.float64)
        coords = np.einsum('ij,tpkj->tpki', matrix, seq.coords)
        return seq.with_coords(coords)

    @staticmethod
    def interpolate(seq, new_length):
        """
        Linearly resamples a sequence to `new_length` frames on a uniform time grid.

        The first and last frames are reproduced exactly.

        Args:
            seq (RawSequence): Sequence with at least 2 frames.
            new_length (int): Number of output frames, at least 2.

        Returns:
            RawSequence: The resampled sequence.
        """
        t = seq.frames
        if t < 2:
            raise LengthError(f'interpolation needs at least 2 frames, sequence {seq.id!r} has {t}')
        if new_length < 2:
            raise LengthError(f'cannot resample to {new_length} frames')
        if new_length == t:
            return seq.with_coords(seq.coords.copy())

        grid = np.linspace(0.0, t - 1, new_length)
        lower = np.minimum(np.floor(grid).astype(np.int64), t - 2)
        w = (grid - lower)[:, None, None, None]
        coords = (1.0 - w) * seq.coords[lower] + w * seq.coords[lower + 1]
        return seq.with_coords(coords)

    @staticmethod
    def resample_interp(seq, rng, frac=0.10, t_max=None):
        """
        Resamples to a random length within +/- `frac` of the original.

        The new length T' is uniform over the integers in
        [ceil((1-frac) T), floor((1+frac) T)], clamped to [2, t_max].

        Args:
            seq (RawSequence): Sequence with at least 2 frames.
            rng (numpy.random.Generator): Source of randomness.
            frac (float): Relative length range.
            t_max (int, optional): Upper clamp of the new length.

        Returns:
            RawSequence: The resampled sequence.

        Raises:
            LengthError: If the sequence has fewer than 2 frames.
        """
        t = seq.frames
        if t < 2:
            raise LengthError(f'interpolation needs at least 2 frames, sequence {seq.id!r} has {t}')
        # tolerance keeps e.g. 0.9 * 10 from rounding up to 10
        low = math.ceil((1.0 - frac) * t - 1e-9)
        high = math.floor((1.0 + frac) * t + 1e-9)
        high = max(high, low)
        new_length = int(rng.integers(low, high + 1))
        upper = t_max if t_max is not None else new_length
        new_length = min(max(new_length, 2), max(upper, 2))
        return Augment.interpolate(seq, new_length)

    @staticmethod
    def corrupt_joints(seq, rng, proportion):
        """
        Sets each (frame, person, joint) coordinate triple to (0, 0, 0) with
        probability `proportion`, independently.

        Args:
            seq (RawSequence): The sequence to corrupt.
            rng (numpy.random.Generator): Source of randomness.
            proportion (float): Corruption probability in [0, 1].

        Returns:
            RawSequence: The corrupted sequence.
        """
        if not 0.0 <= proportion <= 1.0:
            raise ValueError(f'corruption proportion must be in [0, 1], got {proportion}')
        coords = seq.coords.copy()
        if proportion > 0:
            hit = rng.random(coords.shape[:3]) < proportion
            coords[hit] = 0.0
        return seq.with_coords(coords)

    @staticmethod
    def sample_fixed_length(seq, n):
        """
        Deterministically resamples a sequence to exactly `n` frames, the
        fixed-length input used instead of natural-speed sequences.

        A single-frame sequence is repeated.
        """
        if seq.frames == 1:
            return seq.with_coords(np.repeat(seq.coords, n, axis=0))
        return Augment.interpolate(seq, n)
