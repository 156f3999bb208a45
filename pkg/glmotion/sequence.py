from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from glmotion.errors import FormatError, LengthError

DISENTANGLE_MODES = ('global_local', 'local_only', 'entangled')


@dataclass
class RawSequence:
    """
    A skeleton motion sequence in absolute coordinates.

    Attributes:
    -----------
    coords : numpy.ndarray
        Joint coordinates in meters, shape (T, P, K, 3).
    center_joint : int
        Index c of the joint whose trajectory is the global translation.
    label : int or None
        Action class id, None for unlabeled data.
    id : str
        Identifier, usually the source file stem.

    frames, persons, joints : int
        T, P and K, derived from `coords`.
    """
    coords: np.ndarray
    center_joint: int = 0
    label: Optional[int] = None
    id: str = ''

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 4 or self.coords.shape[-1] != 3:
            raise FormatError(f'coords must have shape (T, P, K, 3), got {self.coords.shape}')
        t, p, k, _ = self.coords.shape
        if t < 1:
            raise FormatError(f'sequence {self.id!r} has no frames')
        if p < 1:
            raise FormatError(f'sequence {self.id!r} has no persons')
        if k < 2:
            raise FormatError(f'sequence {self.id!r} needs at least 2 joints, got {k}')
        if not 0 <= self.center_joint < k:
            raise FormatError(f'center joint {self.center_joint} outside [0, {k})')
        if not np.all(np.isfinite(self.coords)):
            raise FormatError(f'sequence {self.id!r} contains non-finite coordinates')
        if self.label is not None:
            self.label = int(self.label)

    @property
    def frames(self) -> int:
        return self.coords.shape[0]

    @property
    def persons(self) -> int:
        return self.coords.shape[1]

    @property
    def joints(self) -> int:
        return self.coords.shape[2]

    def with_coords(self, coords) -> 'RawSequence':
        """Copy of this sequence with replaced coordinates."""
        return RawSequence(coords, self.center_joint, self.label, self.id)


@dataclass
class DisentangledSequence:
    """
    Global translation and local offsets of a sequence.

    Attributes:
        g (numpy.ndarray): Global translation per person, shape (T, P, 3).
        r (numpy.ndarray): Offsets of the non-center joints, shape (T, P, K-1, 3).
        center_joint (int): Center joint index of the source sequence.
        label (int or None): Action class id.
        id (str): Identifier.
        mode (str): Which entry of DISENTANGLE_MODES produced it.
    """
    g: np.ndarray
    r: np.ndarray
    center_joint: int = 0
    label: Optional[int] = None
    id: str = ''
    mode: str = 'global_local'

    @property
    def frames(self) -> int:
        return self.g.shape[0]

    @property
    def persons(self) -> int:
        return self.g.shape[1]

    @property
    def joints_local(self) -> int:
        return self.r.shape[2]

    def positions(self) -> np.ndarray:
        """Global slot followed by local joints, shape (T, P, K, 3)."""
        return np.concatenate([self.g[:, :, None, :], self.r], axis=2)


@dataclass
class Batch:
    """
    Sequences padded to a common length.

    Attributes:
        g (numpy.ndarray): (B, T_max, P, 3), zero in padded frames.
        r (numpy.ndarray): (B, T_max, P, K-1, 3), zero in padded frames.
        valid_mask (numpy.ndarray): (B, T_max) bool, True for real frames.
        lengths (numpy.ndarray): (B,) number of real frames.
        labels (numpy.ndarray or None): (B,) class ids when every sequence is labeled.
        ids (list): Sequence identifiers in batch order.
    """
    g: np.ndarray
    r: np.ndarray
    valid_mask: np.ndarray
    lengths: np.ndarray
    labels: Optional[np.ndarray] = None
    ids: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.g.shape[0]

    @property
    def t_max(self) -> int:
        return self.g.shape[1]


def _non_center(k: int, c: int) -> np.ndarray:
    return np.array([j for j in range(k) if j != c], dtype=np.int64)


def disentangle(seq: RawSequence, mode: str = 'global_local') -> DisentangledSequence:
    """
    Split a sequence into global translation and local joint offsets.

    ``global_local`` gives g_t = q_t^c - q_0^c and r_t^k = q_t^k - q_t^c with the
    center joint removed and the other joints kept in their original order.
    ``local_only`` keeps r and zeroes g. ``entangled`` keeps absolute
    coordinates: the center joint goes to the global slot, the other joints
    to the local slots.

    Args:
        seq (RawSequence): The sequence to split.
        mode (str): One of DISENTANGLE_MODES.

    Returns:
        DisentangledSequence: The split sequence.
    """
    if mode not in DISENTANGLE_MODES:
        raise ValueError(f'unknown disentangle mode {mode!r}, expected one of {DISENTANGLE_MODES}')
    q = seq.coords
    c = seq.center_joint
    others = _non_center(seq.joints, c)
    center = q[:, :, c, :]

    if mode == 'entangled':
        g = center.copy()
        r = q[:, :, others, :].copy()
    else:
        r = q[:, :, others, :] - center[:, :, None, :]
        if mode == 'global_local':
            g = center - center[0:1]
        else:
            g = np.zeros_like(center)
    return DisentangledSequence(g=g, r=r, center_joint=c, label=seq.label, id=seq.id, mode=mode)


def reassemble(d: DisentangledSequence, origin) -> RawSequence:
    """
    Rebuild absolute coordinates from a disentangled sequence.

    Args:
        d (DisentangledSequence): Output of `disentangle`.
        origin (array-like): q_0^c per person, shape (P, 3). Ignored for ``entangled``.

    Returns:
        RawSequence: The reconstructed sequence.

    Raises:
        FormatError: For ``local_only`` sequences, which lost the translation.
    """
    t, p, k_local, _ = d.r.shape
    k = k_local + 1
    c = d.center_joint
    others = _non_center(k, c)
    q = np.empty((t, p, k, 3))

    if d.mode == 'entangled':
        q[:, :, c, :] = d.g
        q[:, :, others, :] = d.r
    elif d.mode == 'global_local':
        origin = np.asarray(origin, dtype=np.float64).reshape(p, 3)
        center = d.g + origin[None]
        q[:, :, c, :] = center
        q[:, :, others, :] = d.r + center[:, :, None, :]
    else:
        raise FormatError(f'sequence {d.id!r} was disentangled with mode {d.mode!r} and cannot be reassembled')
    return RawSequence(q, c, d.label, d.id)


def pad_and_mask(seqs, t_max: int) -> Batch:
    """
    Stack disentangled sequences into a zero-padded batch with a frame mask.

    Args:
        seqs (list of DisentangledSequence): Sequences sharing P and K.
        t_max (int): Padded length.

    Returns:
        Batch: Padded arrays; valid_mask is a contiguous prefix of each row.

    Raises:
        LengthError: If a sequence is longer than `t_max`.
        ValueError: If the sequences disagree on persons or joints.
    """
    if not seqs:
        raise ValueError('cannot batch an empty list of sequences')
    p, k_local = seqs[0].persons, seqs[0].joints_local
    b = len(seqs)
    g = np.zeros((b, t_max, p, 3))
    r = np.zeros((b, t_max, p, k_local, 3))
    valid = np.zeros((b, t_max), dtype=bool)
    lengths = np.zeros(b, dtype=np.int64)

    for i, s in enumerate(seqs):
        if s.frames > t_max:
            raise LengthError(f'sequence {s.id!r} has {s.frames} frames, more than T_max={t_max}')
        if s.persons != p or s.joints_local != k_local:
            raise ValueError(f'sequence {s.id!r} has P={s.persons}, K-1={s.joints_local}; batch expects P={p}, K-1={k_local}')
        g[i, :s.frames] = s.g
        r[i, :s.frames] = s.r
        valid[i, :s.frames] = True
        lengths[i] = s.frames

    labels = None
    if all(s.label is not None for s in seqs):
        labels = np.array([s.label for s in seqs], dtype=np.int64)
    return Batch(g=g, r=r, valid_mask=valid, lengths=lengths, labels=labels, ids=[s.id for s in seqs])
