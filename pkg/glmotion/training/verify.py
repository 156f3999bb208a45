"""Finite-difference verification of the full pretraining loss on a toy network."""

import logging

import numpy as np

from glmotion.autodiff import grad_check
from glmotion.model.gl_base import ModelConfig, ModelParams
from glmotion.model.gl_transformer import model_forward
from glmotion.mpdp import MpdpConfig, MpdpHeads, batch_targets, heads_forward, mpdp_loss
from glmotion.sequence import RawSequence, disentangle, pad_and_mask

logger = logging.getLogger(__name__)


def toy_configs(positional_mode='trainable_tight', p2p_attention=True):
    """K=3, P=1, D=4, one block, two heads each, T_max=4, intervals {1, 2}."""
    model_cfg = ModelConfig(joints=3, persons=1, embed_dim=4, blocks=1, spatial_heads=2, temporal_heads=2,
                            t_max=4, positional_mode=positional_mode, p2p_attention=p2p_attention)
    mpdp_cfg = MpdpConfig(intervals=(1, 2))
    return model_cfg, mpdp_cfg


def toy_batch(rng, model_cfg, lengths=(4, 3)):
    """Random-walk sequences padded to T_max; the default has one padded frame."""
    seqs = []
    for i, length in enumerate(lengths):
        steps = rng.normal(0.0, 0.05, size=(length, model_cfg.persons, model_cfg.joints, 3))
        seqs.append(RawSequence(np.cumsum(steps, axis=0), center_joint=0, id=f'toy{i}'))
    return pad_and_mask([disentangle(s) for s in seqs], model_cfg.t_max)


def toy_gradcheck(seed=0, tol=1e-3, step=1e-6, max_entries=None, positional_mode='trainable_tight'):
    """
    Check every trainable gradient of the MPDP loss on the toy network.

    The positional table and heads are random so no gradient is trivially
    zero.

    Returns:
        GradCheckReport: Worst relative error per parameter.
    """
    rng = np.random.default_rng(seed)
    model_cfg, mpdp_cfg = toy_configs(positional_mode)
    params = ModelParams.init(model_cfg, rng)
    if params['pos.M'].requires_grad:
        params['pos.M'].data = rng.normal(0.0, 0.1, size=params['pos.M'].shape)
    heads = MpdpHeads.init(mpdp_cfg, model_cfg.tokens, model_cfg.frame_dim, rng)
    batch = toy_batch(rng, model_cfg)
    targets = batch_targets(batch, mpdp_cfg)

    def loss_fn(_):
        out = model_forward(batch, params, model_cfg)
        dir_logits, mag_logits = heads_forward(out.F, heads, model_cfg.persons, model_cfg.joints)
        return mpdp_loss(dir_logits, mag_logits, targets, mpdp_cfg)

    tensors = params.parameters() + heads.parameters()
    report = grad_check(loss_fn, tensors, step=step, tol=tol, max_entries=max_entries, rng=rng)
    logger.info('toy gradient check over %d entries: max relative error %.3e (%s)',
                report.checked, report.max_rel_error, 'passed' if report.passed else 'FAILED')
    return report
