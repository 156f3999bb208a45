"""
Post-hoc interpretation of a trained network.

Attention maps are averaged over the first sequences of a dataset, in
dataset order. Temporal maps keep the leading ``window`` frames; shorter
sequences contribute their valid prefix and every cell is divided by the
number of sequences that reached it. Exports are CSV matrices (header row
of key indices) and standalone SVG heatmaps.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from glmotion.autodiff import no_grad  # noqa: E402
from glmotion.errors import DataError, ShapeError  # noqa: E402
from glmotion.model.gl_transformer import model_forward  # noqa: E402
from glmotion.training.pretrain import prepare_batch  # noqa: E402

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 300
DEFAULT_WINDOW = 30


@dataclass
class AttentionSummary:
    """
    Averaged attention of one network over a set of sequences.

    Attributes:
        spatial (list): Per block, ``[h_s, P*K, P*K]`` mean spatial map.
        temporal (list): Per block, ``[h_t, W, W]`` mean temporal map over the first W frames.
        temporal_counts (numpy.ndarray): ``[W, W]`` number of sequences behind every temporal cell.
        distances (numpy.ndarray): ``[blocks, h_t]`` mean attended frame distance.
        n_samples (int): Sequences averaged.
    """
    spatial: List[np.ndarray] = field(default_factory=list)
    temporal: List[np.ndarray] = field(default_factory=list)
    temporal_counts: np.ndarray = None
    distances: np.ndarray = None
    n_samples: int = 0

    @property
    def window(self) -> int:
        return self.temporal_counts.shape[0]


def attended_distance_per_query(attn):
    """
    Attention-weighted frame distance of every query row.

    Args:
        attn (numpy.ndarray): ``[..., T, T]`` attention, rows are queries.

    Returns:
        numpy.ndarray: ``[..., T]`` with ``sum_k a[t, k] * |t - k|``.
    """
    attn = np.asarray(attn, dtype=np.float64)
    if attn.ndim < 2 or attn.shape[-1] != attn.shape[-2]:
        raise ShapeError(f'attention must be square in its last two axes, got {attn.shape}')
    t = np.arange(attn.shape[-1])
    return np.sum(attn * np.abs(t[:, None] - t[None, :]), axis=-1)


def mean_attended_distance(attn, valid_length=None):
    """
    Mean attended frame distance over the query frames.

    Args:
        attn (numpy.ndarray): ``[..., T, T]`` row-stochastic attention.
        valid_length (int, optional): Only the leading ``valid_length`` queries and keys are used.

    Returns:
        numpy.ndarray or float: One value per leading index.
    """
    attn = np.asarray(attn, dtype=np.float64)
    if valid_length is not None:
        attn = attn[..., :valid_length, :valid_length]
    result = attended_distance_per_query(attn).mean(axis=-1)
    return float(result) if result.ndim == 0 else result


def average_attention(seqs, params, model_cfg, run_cfg, n_samples=DEFAULT_SAMPLES, window=DEFAULT_WINDOW,
                      batch_size=32) -> AttentionSummary:
    """
    Average post-softmax attention over the first `n_samples` sequences.

    The temporal window shrinks to the longest sequence used when every
    sequence is shorter than `window`.

    Args:
        seqs (list of RawSequence): Evaluation data in dataset order.
        params (ModelParams): Network weights.
        model_cfg (ModelConfig): Network hyperparameters.
        run_cfg (RunConfig): Input and disentangle settings.
        n_samples (int): Number of leading sequences to average.
        window (int): Temporal frames kept.
        batch_size (int): Sequences per forward pass.

    Returns:
        AttentionSummary: Averaged maps and distances.

    Raises:
        DataError: If no sequence is available.
    """
    used = seqs[:n_samples]
    if not used:
        raise DataError('cannot average attention over an empty dataset')
    if window < 1:
        raise ValueError(f'window must be positive, got {window}')

    spatial_sum = [np.zeros((model_cfg.spatial_heads, model_cfg.tokens, model_cfg.tokens))
                   for _ in range(model_cfg.blocks)]
    temporal_sum = [np.zeros((model_cfg.temporal_heads, window, window)) for _ in range(model_cfg.blocks)]
    counts = np.zeros((window, window), dtype=np.int64)
    distance_sum = np.zeros((model_cfg.blocks, model_cfg.temporal_heads))
    longest = 0

    with no_grad():
        for start in range(0, len(used), batch_size):
            batch = prepare_batch(used[start:start + batch_size], run_cfg, model_cfg)
            out = model_forward(batch, params, model_cfg, capture_attention=True)
            for b, length in enumerate(batch.lengths):
                length = int(length)
                w = min(length, window)
                longest = max(longest, w)
                counts[:w, :w] += 1
                for n in range(model_cfg.blocks):
                    spatial_sum[n] += out.spatial_maps[n][b]
                    temporal = out.temporal_maps[n][b]
                    temporal_sum[n][:, :w, :w] += temporal[:, :w, :w]
                    distance_sum[n] += mean_attended_distance(temporal, valid_length=w)

    total = len(used)
    summary = AttentionSummary(
        spatial=[s / total for s in spatial_sum],
        temporal=[(s / np.maximum(counts, 1))[:, :longest, :longest] for s in temporal_sum],
        temporal_counts=counts[:longest, :longest],
        distances=distance_sum / total,
        n_samples=total,
    )
    logger.info('averaged attention over %d sequences, temporal window %d', total, longest)
    return summary


def posemb_similarity(M):
    """
    Cosine similarity between every pair of positional-embedding vectors.

    Args:
        M (numpy.ndarray or Tensor): ``[T, P*K, D]`` positional table.

    Returns:
        numpy.ndarray: ``[T, P*K, T, P*K]``; entries involving a zero-norm vector are NaN.
    """
    M = np.asarray(getattr(M, 'data', M), dtype=np.float64)
    if M.ndim != 3:
        raise ShapeError(f'positional table must be [T, P*K, D], got {M.shape}')
    t, j, d = M.shape
    flat = M.reshape(t * j, d)
    norms = np.linalg.norm(flat, axis=1)
    with np.errstate(invalid='ignore', divide='ignore'):
        sim = (flat @ flat.T) / np.outer(norms, norms)
    zero = norms == 0
    sim[zero, :] = np.nan
    sim[:, zero] = np.nan
    return sim.reshape(t, j, t, j)


def write_matrix_csv(path, matrix) -> Path:
    """Write a 2-D matrix row-major with a header row of column (key) indices."""
    path = Path(path)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    header = ','.join(str(i) for i in range(matrix.shape[1]))
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, matrix, delimiter=',', fmt='%.10g', header=header, comments='')
    return path


def write_heatmap_svg(path, matrix, title='', xlabel='key', ylabel='query') -> Path:
    """Standalone SVG heatmap with a linear color map and its value range in the colorbar."""
    path = Path(path)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    finite = matrix[np.isfinite(matrix)]
    vmin, vmax = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)

    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(np.ma.masked_invalid(matrix), cmap='viridis', vmin=vmin, vmax=vmax,
                   interpolation='nearest', aspect='auto')
    cbar = fig.colorbar(im, ax=ax)
    cbar.set_label(f'range [{vmin:.4g}, {vmax:.4g}]')
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format='svg')
    plt.close(fig)
    return path


def export_attention(summary: AttentionSummary, out_dir, svg=True) -> list:
    """
    Write every averaged map and the distance table under `out_dir`.

    Files: ``spatial_b{n}_h{i}.csv``, ``temporal_b{n}_h{i}.csv`` (plus
    ``.svg`` when `svg` is set) and ``distances.csv``.

    Returns:
        list: Written paths.
    """
    out_dir = Path(out_dir)
    written = []
    for kind, maps in (('spatial', summary.spatial), ('temporal', summary.temporal)):
        for n, block in enumerate(maps):
            for i, head in enumerate(block):
                stem = out_dir / f'{kind}_b{n}_h{i}'
                written.append(write_matrix_csv(stem.with_suffix('.csv'), head))
                if svg:
                    written.append(write_heatmap_svg(stem.with_suffix('.svg'), head,
                                                     title=f'{kind} attention, block {n}, head {i}'))

    txt = 'block,head,mean_attended_distance\n'
    for n, row in enumerate(summary.distances):
        for i, value in enumerate(row):
            txt += f'{n},{i},{value:.10g}\n'
    distances = out_dir / 'distances.csv'
    distances.write_text(txt, encoding='utf-8')
    written.append(distances)
    logger.info('wrote %d attention exports to %s', len(written), out_dir)
    return written


def export_posemb(M, out_dir, anchors=None, svg=True) -> list:
    """
    Write positional-embedding similarity slices.

    Every anchor ``(t, j)`` gives one ``[T, P*K]`` slice, the similarity of
    ``M[t, j]`` to all vectors, as ``posemb_t{t}_j{j}.csv`` (and ``.svg``).

    Args:
        M (numpy.ndarray or Tensor): ``[T, P*K, D]`` positional table.
        out_dir (str or Path): Target directory.
        anchors (list of tuple, optional): Defaults to every token of frame 0.
        svg (bool): Also write heatmaps.

    Returns:
        list: Written paths.
    """
    sim = posemb_similarity(M)
    t_max, tokens = sim.shape[:2]
    anchors = [(0, j) for j in range(tokens)] if anchors is None else anchors
    out_dir = Path(out_dir)
    written = []
    for t, j in anchors:
        if not (0 <= t < t_max and 0 <= j < tokens):
            raise IndexError(f'anchor ({t}, {j}) outside table of shape ({t_max}, {tokens})')
        stem = out_dir / f'posemb_t{t:03d}_j{j:02d}'
        written.append(write_matrix_csv(stem.with_suffix('.csv'), sim[t, j]))
        if svg:
            written.append(write_heatmap_svg(stem.with_suffix('.svg'), sim[t, j],
                                             title=f'cosine similarity to M[{t}, {j}]',
                                             xlabel='joint token', ylabel='frame'))
    logger.info('wrote %d positional-embedding exports to %s', len(written), out_dir)
    return written
