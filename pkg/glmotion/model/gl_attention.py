"""
Multi-head self-attention over joint tokens (spatial) and frame tokens (temporal).

Both modules share `multi_head_attention`, which works on any leading axes:
the spatial module sees ``[B, T, P*K, D]`` (one attention per frame), the
temporal module sees ``[B, T, P*K*D]`` (one attention per sequence).
"""

import numpy as np

from glmotion.autodiff import matmul, reshape, scale, softmax_masked, swapaxes


def _split_heads(x, heads, head_dim):
    """``[..., n, h*d]`` -> ``[..., h, n, d]``."""
    lead = x.shape[:-1]
    x = reshape(x, lead + (heads, head_dim))
    return swapaxes(x, -3, -2)


def _merge_heads(x):
    """``[..., h, n, d]`` -> ``[..., n, h*d]``."""
    x = swapaxes(x, -3, -2)
    return reshape(x, x.shape[:-2] + (x.shape[-2] * x.shape[-1],))


def multi_head_attention(x, w_q, w_k, w_v, w_h, heads, head_dim, mask=None):
    """
    Scaled dot-product self-attention with `heads` heads and an output projection.

    Args:
        x (Tensor): Tokens, ``[..., n, width]``.
        w_q, w_k, w_v (Tensor): Projections ``[width, heads*head_dim]``; column block i belongs to head i.
        w_h (Tensor): Output projection ``[heads*head_dim, width]``.
        heads (int): Number of heads.
        head_dim (int): Per-head size d.
        mask (numpy.ndarray, optional): Boolean key mask broadcastable to ``[..., heads, n, n]``.

    Returns:
        tuple: (output Tensor ``[..., n, width]``, attention Tensor ``[..., heads, n, n]``).
    """
    q = _split_heads(matmul(x, w_q), heads, head_dim)
    k = _split_heads(matmul(x, w_k), heads, head_dim)
    v = _split_heads(matmul(x, w_v), heads, head_dim)
    logits = scale(matmul(q, swapaxes(k, -1, -2)), 1.0 / np.sqrt(head_dim))
    attn = softmax_masked(logits, mask)
    out = _merge_heads(matmul(attn, v))
    return matmul(out, w_h), attn


def person_mask(persons, joints):
    """``[P*K, P*K]`` mask that only lets tokens attend within their own person."""
    owner = np.repeat(np.arange(persons), joints)
    return owner[:, None] == owner[None, :]


def spatial_mha(x, params, prefix, cfg):
    """
    Spatial multi-head attention of every frame.

    Args:
        x (Tensor): Layer-normalised tokens ``[B, T, P*K, D]``.
        params (ModelParams): Network weights.
        prefix (str): Parameter prefix, e.g. ``block0.spatial``.
        cfg (ModelConfig): Network hyperparameters.

    Returns:
        tuple: (output ``[B, T, P*K, D]``, attention ``[B, T, h_s, P*K, P*K]``).
    """
    mask = None if cfg.p2p_attention else person_mask(cfg.persons, cfg.joints)
    return multi_head_attention(x, params[f'{prefix}.W_Q'], params[f'{prefix}.W_K'], params[f'{prefix}.W_V'],
                                params[f'{prefix}.W_H'], cfg.spatial_heads, cfg.d_s, mask)


def temporal_mha(x, valid_mask, params, prefix, cfg):
    """
    Temporal multi-head attention over the frames of each sequence.

    Padded frames are masked as keys; their query rows are still computed.

    Args:
        x (Tensor): Layer-normalised frame vectors ``[B, T, P*K*D]``.
        valid_mask (numpy.ndarray): ``[B, T]`` bool, True for real frames.
        params (ModelParams): Network weights.
        prefix (str): Parameter prefix, e.g. ``block0.temporal``.
        cfg (ModelConfig): Network hyperparameters.

    Returns:
        tuple: (output ``[B, T, P*K*D]``, attention ``[B, h_t, T, T]``).

    Raises:
        MaskError: If a sequence has no valid frame.
    """
    mask = np.asarray(valid_mask, dtype=bool)[:, None, None, :]
    return multi_head_attention(x, params[f'{prefix}.W_Q'], params[f'{prefix}.W_K'], params[f'{prefix}.W_V'],
                                params[f'{prefix}.W_H'], cfg.temporal_heads, cfg.d_t, mask)
