"""
Multi-interval pose displacement prediction.

For every frame t, person p, token k (0 = global translation, 1..K-1 =
local joints) and interval n, the displacement of that token between
frames t-n and t is classified twice: by direction (27 classes, three
per axis) and by magnitude (C_sigma log-spaced bins). Frame indices are
0-based here, so frames t < n have no predecessor and get a zero
displacement.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from glmotion.autodiff import concat, cross_entropy_logits, getitem, linear, reshape
from glmotion.errors import ConfigError, MaskError, ShapeError
from glmotion.model.gl_base import ParamStore, uniform_weight

DIRECTION_CLASSES = 27
NEUTRAL_DIRECTION = 13


@dataclass
class MpdpConfig:
    """
    Settings of the displacement targets and loss.

    Attributes:
        intervals (tuple): Positive, distinct frame offsets n.
        magnitude_classes (int): Number of magnitude bins C_sigma.
        eps_dir (float): Per-axis no-movement threshold, meters.
        lambda_delta (float): Weight of the direction loss.
        lambda_sigma (float): Weight of the magnitude loss; 0 disables it.
        magnitude_edges (numpy.ndarray, optional): C_sigma-1 ascending bin edges.
            Default is log-spaced from `eps_dir` to 1 m.
    """
    intervals: Tuple[int, ...] = (1, 5, 10)
    magnitude_classes: int = 8
    eps_dir: float = 0.005
    lambda_delta: float = 1.0
    lambda_sigma: float = 1.0
    magnitude_edges: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.intervals = tuple(int(n) for n in self.intervals)
        if not self.intervals:
            raise ConfigError('at least one interval is required')
        if any(n < 1 for n in self.intervals) or len(set(self.intervals)) != len(self.intervals):
            raise ConfigError(f'intervals must be positive and distinct, got {self.intervals}')
        if self.magnitude_classes < 1:
            raise ConfigError(f'magnitude_classes must be positive, got {self.magnitude_classes}')
        if self.eps_dir < 0:
            raise ConfigError(f'eps_dir must be non-negative, got {self.eps_dir}')
        if self.lambda_delta < 0 or self.lambda_sigma < 0:
            raise ConfigError('loss weights must be non-negative')
        if self.magnitude_edges is None:
            if self.magnitude_classes > 1 and self.eps_dir <= 0:
                raise ConfigError('default magnitude edges need eps_dir > 0')
            self.magnitude_edges = np.geomspace(self.eps_dir, 1.0, self.magnitude_classes - 1) \
                if self.magnitude_classes > 1 else np.zeros(0)
        self.magnitude_edges = np.asarray(self.magnitude_edges, dtype=np.float64)
        if self.magnitude_edges.shape != (self.magnitude_classes - 1,):
            raise ConfigError(f'expected {self.magnitude_classes - 1} magnitude edges, got {self.magnitude_edges.size}')
        if np.any(self.magnitude_edges <= 0) or np.any(np.diff(self.magnitude_edges) <= 0):
            raise ConfigError('magnitude edges must be positive and strictly ascending')

    @property
    def direction_classes(self) -> int:
        return DIRECTION_CLASSES

    def to_dict(self) -> dict:
        return {
            'intervals': list(self.intervals),
            'magnitude_classes': self.magnitude_classes,
            'eps_dir': self.eps_dir,
            'lambda_delta': self.lambda_delta,
            'lambda_sigma': self.lambda_sigma,
            'magnitude_edges': self.magnitude_edges.tolist(),
        }


@dataclass
class MpdpTargets:
    """
    Class labels of a batch.

    Attributes:
        dir_class (numpy.ndarray): ``[B, T, P, K, n_intervals]`` direction classes.
        mag_class (numpy.ndarray): Same shape, magnitude bins.
        loss_mask (numpy.ndarray): ``[B, T]`` bool, False at padded frames.
    """
    dir_class: np.ndarray
    mag_class: np.ndarray
    loss_mask: np.ndarray


def direction_class(disp, eps_dir):
    """
    Direction class of displacements.

    Each axis is 0 below -eps_dir, 2 above +eps_dir and 1 in between
    (inclusive); the class is 9*s_x + 3*s_y + s_z.

    Args:
        disp (array-like): ``[..., 3]`` displacements.
        eps_dir (float): No-movement threshold.

    Returns:
        numpy.ndarray: Integer classes of shape ``disp.shape[:-1]``.
    """
    d = np.asarray(disp, dtype=np.float64)
    s = np.where(d < -eps_dir, 0, np.where(d > eps_dir, 2, 1))
    return 9 * s[..., 0] + 3 * s[..., 1] + s[..., 2]


def magnitude_class(disp, edges):
    """
    Magnitude bin of displacements: the number of edges <= |disp|.

    Bin i covers [e_i, e_{i+1}); bin 0 starts at 0 and the last bin is open-ended.

    Args:
        disp (array-like): ``[..., 3]`` displacements.
        edges (array-like): Ascending bin edges.

    Returns:
        numpy.ndarray: Integer bins of shape ``disp.shape[:-1]``.
    """
    m = np.linalg.norm(np.asarray(disp, dtype=np.float64), axis=-1)
    return np.searchsorted(np.asarray(edges, dtype=np.float64), m, side='right')


def _displacements(positions, n):
    """Displacement over n frames along axis 1 of ``[B, T, ...]``; zero for t < n."""
    disp = np.zeros_like(positions)
    if n < positions.shape[1]:
        disp[:, n:] = positions[:, n:] - positions[:, :-n]
    return disp


def _targets_from_positions(positions, valid, cfg):
    dir_class = np.empty(positions.shape[:-1] + (len(cfg.intervals),), dtype=np.int64)
    mag_class = np.empty_like(dir_class)
    for i, n in enumerate(cfg.intervals):
        disp = _displacements(positions, n)
        dir_class[..., i] = direction_class(disp, cfg.eps_dir)
        mag_class[..., i] = magnitude_class(disp, cfg.magnitude_edges)
    invalid = ~valid
    dir_class[invalid] = NEUTRAL_DIRECTION
    mag_class[invalid] = 0
    return MpdpTargets(dir_class=dir_class, mag_class=mag_class, loss_mask=valid.copy())


def build_targets(d, cfg: MpdpConfig) -> MpdpTargets:
    """
    Targets of one disentangled sequence.

    The global token uses g, local token k uses r^k; both as given by the
    sequence's disentangle mode.

    Args:
        d (DisentangledSequence): The sequence.
        cfg (MpdpConfig): Target settings.

    Returns:
        MpdpTargets: With a leading batch axis of size 1 and an all-true mask.
    """
    positions = d.positions()[None]
    valid = np.ones((1, d.frames), dtype=bool)
    return _targets_from_positions(positions, valid, cfg)


def batch_targets(batch, cfg: MpdpConfig) -> MpdpTargets:
    """Targets of a padded Batch; padded frames carry neutral labels and a false mask."""
    positions = np.concatenate([batch.g[:, :, :, None, :], batch.r], axis=3)
    return _targets_from_positions(positions, batch.valid_mask, cfg)


class MpdpHeads(ParamStore):
    """
    One linear direction head and one linear magnitude head per interval.

    Names are ``dir.{n}.W`` (P*K*D, P*K*27), ``dir.{n}.b``, ``mag.{n}.W``
    (P*K*D, P*K*C_sigma) and ``mag.{n}.b`` for every interval n.
    """

    def __init__(self, cfg: MpdpConfig, tokens: int):
        super().__init__()
        self.cfg = cfg
        self.tokens = tokens

    @classmethod
    def init(cls, cfg: MpdpConfig, tokens, frame_dim, rng=None, zero=False, dtype=np.float64):
        """
        Allocate the heads.

        Args:
            cfg (MpdpConfig): Target settings.
            tokens (int): P*K.
            frame_dim (int): Width P*K*D of F.
            rng (numpy.random.Generator, optional): Required unless `zero`.
            zero (bool): Zero weights and biases, giving uniform predictions.
            dtype: numpy dtype.

        Returns:
            MpdpHeads: The heads.
        """
        heads = cls(cfg, tokens)
        for kind, classes in (('dir', DIRECTION_CLASSES), ('mag', cfg.magnitude_classes)):
            for n in cfg.intervals:
                width = tokens * classes
                w = np.zeros((frame_dim, width), dtype=dtype) if zero else uniform_weight(rng, frame_dim, width, dtype)
                heads.add(f'{kind}.{n}.W', w)
                heads.add(f'{kind}.{n}.b', np.zeros(width, dtype=dtype))
        return heads

    def head_count(self) -> int:
        """Number of weight matrices, two per interval."""
        return sum(1 for name in self.tensors if name.endswith('.W'))


def heads_forward(F, heads: MpdpHeads, persons, joints):
    """
    Raw logits of every head.

    Args:
        F (Tensor): ``[B, T, P*K*D]``.
        heads (MpdpHeads): Head weights.
        persons (int): P.
        joints (int): K.

    Returns:
        tuple: Direction logits ``[B, T, P, K, n_intervals, 27]`` and magnitude
        logits ``[B, T, P, K, n_intervals, C_sigma]``.

    Raises:
        ShapeError: If F does not match the heads.
    """
    cfg = heads.cfg
    if persons * joints != heads.tokens:
        raise ShapeError(f'heads were built for {heads.tokens} tokens, got P*K={persons * joints}')
    first = heads[f'dir.{cfg.intervals[0]}.W']
    if F.ndim != 3 or F.shape[2] != first.shape[0]:
        raise ShapeError(f'F must be [B, T, {first.shape[0]}], got {F.shape}')
    b, t = F.shape[0], F.shape[1]

    out = []
    for kind, classes in (('dir', DIRECTION_CLASSES), ('mag', cfg.magnitude_classes)):
        per_interval = []
        for n in cfg.intervals:
            logits = linear(F, heads[f'{kind}.{n}.W'], heads[f'{kind}.{n}.b'])
            per_interval.append(reshape(logits, (b, t, persons, joints, 1, classes)))
        out.append(concat(per_interval, axis=4) if len(per_interval) > 1 else per_interval[0])
    return out[0], out[1]


def _valid_rows(logits, targets, valid):
    """Flatten ``[B, T, ..., C]`` logits and labels to the rows of valid frames."""
    classes = logits.shape[-1]
    per_frame = int(np.prod(logits.shape[2:-1]))
    frame_index = np.flatnonzero(valid.reshape(-1))
    rows = (frame_index[:, None] * per_frame + np.arange(per_frame)[None, :]).reshape(-1)
    flat = reshape(logits, (-1, classes))
    return getitem(flat, rows), targets.reshape(-1)[rows]


def mpdp_loss(dir_logits, mag_logits, targets: MpdpTargets, cfg: MpdpConfig):
    """
    Total pretraining loss.

    Per valid (frame, person, interval) triple the direction and magnitude
    cross entropies are averaged uniformly over the K tokens; the weighted
    sum ``lambda_delta * L_dir + lambda_sigma * L_mag`` is then averaged over
    all valid triples of the batch.

    Args:
        dir_logits (Tensor): From `heads_forward`.
        mag_logits (Tensor): From `heads_forward`.
        targets (MpdpTargets): Labels and frame mask.
        cfg (MpdpConfig): Loss weights.

    Returns:
        Tensor: Scalar loss.

    Raises:
        MaskError: If no frame is valid.
        ShapeError: If logits and targets disagree.
    """
    valid = np.asarray(targets.loss_mask, dtype=bool)
    if not valid.any():
        raise MaskError('every frame of the batch is masked')
    if dir_logits.shape[:-1] != targets.dir_class.shape or mag_logits.shape[:-1] != targets.mag_class.shape:
        raise ShapeError(f'logits {dir_logits.shape}/{mag_logits.shape} do not match targets {targets.dir_class.shape}')

    rows, labels = _valid_rows(dir_logits, targets.dir_class, valid)
    loss = cross_entropy_logits(rows, labels, weight=cfg.lambda_delta)
    if cfg.lambda_sigma != 0:
        rows, labels = _valid_rows(mag_logits, targets.mag_class, valid)
        loss = loss + cross_entropy_logits(rows, labels, weight=cfg.lambda_sigma)
    return loss


def mpdp_accuracy(dir_logits, mag_logits, targets: MpdpTargets, cfg: MpdpConfig) -> dict:
    """
    Top-1 accuracy per interval over valid frames.

    Returns:
        dict: ``{'dir': {n: acc}, 'mag': {n: acc}}``.
    """
    valid = np.asarray(targets.loss_mask, dtype=bool)
    result = {'dir': {}, 'mag': {}}
    for kind, logits, labels in (('dir', dir_logits, targets.dir_class), ('mag', mag_logits, targets.mag_class)):
        pred = np.argmax(logits.data, axis=-1)
        for i, n in enumerate(cfg.intervals):
            hit = pred[..., i] == labels[..., i]
            result[kind][n] = float(hit[valid].mean()) if valid.any() else 0.0
    return result
