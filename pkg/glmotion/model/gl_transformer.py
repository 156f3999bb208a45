from dataclasses import dataclass, field
from typing import List

import numpy as np

from glmotion.autodiff import Tensor, add, concat, gelu, layer_norm, linear, matmul, reshape
from glmotion.errors import MaskError, ShapeError
from glmotion.model.gl_attention import spatial_mha, temporal_mha
from glmotion.positional import get_positional



@dataclass
class ForwardOutput:
    """
    Result of `model_forward`.

    Attributes:
        F (Tensor): Final per-frame representation ``[B, T, P*K*D]``.
        spatial_maps (list): Per block, spatial attention ``[B, h_s, P*K, P*K]``
            averaged over each sequence's valid frames. Empty unless captured.
        temporal_maps (list): Per block, temporal attention ``[B, h_t, T, T]``. Empty unless captured.
        block_outputs (list): Per block, Z^n as a numpy array ``[B, T, P*K, D]``. Empty unless captured.
    """
    F: Tensor
    spatial_maps: List[np.ndarray] = field(default_factory=list)
    temporal_maps: List[np.ndarray] = field(default_factory=list)
    block_outputs: List[np.ndarray] = field(default_factory=list)


def embed_frame(g, r, params):
    """
    Embed global translations and local offsets into joint tokens.

    Per person the token order is the global token followed by the K-1
    local joints; persons follow in index order. Any leading axes are kept.

    Args:
        g (Tensor or array-like): ``[..., P, 3]`` global translation.
        r (Tensor or array-like): ``[..., P, K-1, 3]`` local offsets.
        params (ModelParams): Network weights.

    Returns:
        Tensor: Tokens ``[..., P*K, D]``.
    """
    g = g if isinstance(g, Tensor) else Tensor(g, dtype=params['embed.W_g'].data.dtype)
    r = r if isinstance(r, Tensor) else Tensor(r, dtype=params['embed.W_r'].data.dtype)
    g_tok = linear(reshape(g, g.shape[:-1] + (1, 3)), params['embed.W_g'], params['embed.b_g'])
    r_tok = linear(r, params['embed.W_r'], params['embed.b_r'])
    tokens = concat([g_tok, r_tok], axis=-2)
    lead = tokens.shape[:-3]
    return reshape(tokens, lead + (tokens.shape[-3] * tokens.shape[-2], tokens.shape[-1]))


def _mlp(x, params, prefix):
    hidden = gelu(linear(x, params[f'{prefix}.W_1'], params[f'{prefix}.b_1']))
    return linear(hidden, params[f'{prefix}.W_2'], params[f'{prefix}.b_2'])


def _ln(x, params, prefix, cfg):
    return layer_norm(x, params[f'{prefix}.ln.gamma'], params[f'{prefix}.ln.beta'], cfg.ln_eps)


def gl_block(z, M, valid_mask, params, cfg, block_index, capture=None):
    """
    One block: spatial attention per frame, temporal attention over frames, then an MLP.

    With Z the block input and M the positional table of the batch frames::

        X    = Z + M                       (if the strategy adds M spatially here)
        S    = spatial-MHA(LN(X)) + X
        Y    = vec(S) + vec(M)             (if the strategy adds M temporally here)
        Zbar = temporal-MHA(LN(Y)) + Y
        out  = MLP(LN(Zbar)) + Zbar

    Args:
        z (Tensor): Block input ``[B, T, P*K, D]``.
        M (Tensor): Positional table ``[T_max, P*K, D]``; its first T frames are used.
        valid_mask (numpy.ndarray): ``[B, T]`` bool.
        params (ModelParams): Network weights.
        cfg (ModelConfig): Network hyperparameters.
        block_index (int): 0-based block number.
        capture (dict, optional): Receives ``spatial`` and ``temporal`` attention Tensors.

    Returns:
        Tensor: Block output ``[B, T, P*K, D]``.
    """
    strategy = get_positional(cfg.positional_mode)
    b, t = z.shape[0], z.shape[1]
    m_t = M[:t] if strategy.adds_spatial(block_index) or strategy.adds_temporal(block_index) else None
    prefix = f'block{block_index}'

    x = add(z, m_t) if strategy.adds_spatial(block_index) else z
    s_out, s_attn = spatial_mha(_ln(x, params, f'{prefix}.spatial', cfg), params, f'{prefix}.spatial', cfg)
    s = add(s_out, x)

    s_vec = reshape(s, (b, t, cfg.frame_dim))
    y = add(s_vec, reshape(m_t, (t, cfg.frame_dim))) if strategy.adds_temporal(block_index) else s_vec
    t_out, t_attn = temporal_mha(_ln(y, params, f'{prefix}.temporal', cfg), valid_mask, params,
                                 f'{prefix}.temporal', cfg)
    z_bar = add(t_out, y)

    out = add(_mlp(_ln(z_bar, params, f'{prefix}.mlp', cfg), params, f'{prefix}.mlp'), z_bar)
    if capture is not None:
        capture['spatial'] = s_attn
        capture['temporal'] = t_attn
    return reshape(out, (b, t, cfg.tokens, cfg.embed_dim))


def _check_batch(batch, cfg):
    b, t, p, _ = batch.g.shape
    if p != cfg.persons or batch.r.shape[3] != cfg.joints - 1:
        raise ShapeError(f'batch has P={p}, K={batch.r.shape[3] + 1}; model expects P={cfg.persons}, K={cfg.joints}')
    if t > cfg.t_max:
        raise ShapeError(f'batch has {t} frames, model T_max is {cfg.t_max}')
    if batch.valid_mask.shape != (b, t):
        raise ShapeError(f'valid_mask shape {batch.valid_mask.shape} does not match batch ({b}, {t})')


def _frame_average(attn, valid_mask):
    """Average ``[B, T, h, n, n]`` spatial maps over each sequence's valid frames."""
    w = valid_mask.astype(attn.dtype)
    w = w / np.maximum(w.sum(axis=1, keepdims=True), 1.0)
    return np.einsum('bt,bthij->bhij', w, attn)


def model_forward(batch, params, cfg, capture_attention=False) -> ForwardOutput:
    """
    Run the network on a padded batch.

    Args:
        batch (Batch): Padded disentangled sequences.
        params (ModelParams): Network weights.
        cfg (ModelConfig): Network hyperparameters.
        capture_attention (bool): Keep post-softmax attention maps and block outputs.

    Returns:
        ForwardOutput: The final representation and optional captures.

    Raises:
        ShapeError: If the batch does not match the config.
        MaskError: If a sequence has no valid frame.
    """
    _check_batch(batch, cfg)
    dtype = cfg.np_dtype
    z = embed_frame(Tensor(batch.g, dtype=dtype), Tensor(batch.r, dtype=dtype), params)
    M = params['pos.M']

    result = ForwardOutput(F=None)
    for n in range(cfg.blocks):
        capture = {} if capture_attention else None
        z = gl_block(z, M, batch.valid_mask, params, cfg, n, capture)
        if capture_attention:
            result.spatial_maps.append(_frame_average(capture['spatial'].data, batch.valid_mask))
            result.temporal_maps.append(capture['temporal'].data.copy())
            result.block_outputs.append(z.data.copy())

    z_vec = reshape(z, (batch.size, batch.t_max, cfg.frame_dim))
    result.F = _mlp(z_vec, params, 'final')
    return result


def pooled_representation(out, valid_mask):
    """
    Mean of F over the valid frames of each sequence.

    Args:
        out (ForwardOutput or Tensor): Forward result, or F itself ``[B, T, W]``.
        valid_mask (numpy.ndarray): ``[B, T]`` bool.

    Returns:
        Tensor: ``[B, W]``.

    Raises:
        MaskError: If a sequence has no valid frame.
    """
    F = out.F if isinstance(out, ForwardOutput) else out
    valid = np.asarray(valid_mask, dtype=bool)
    counts = valid.sum(axis=1)
    if np.any(counts == 0):
        raise MaskError('cannot pool a sequence without valid frames')
    weights = (valid / counts[:, None]).astype(F.data.dtype)[:, None, :]
    pooled = matmul(Tensor(weights, dtype=F.data.dtype), F)
    return reshape(pooled, (F.shape[0], F.shape[2]))
