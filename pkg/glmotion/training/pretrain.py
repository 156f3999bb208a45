"""
Unsupervised pretraining with the displacement-prediction objective.

Each epoch shuffles the dataset with the run seed, augments every
sequence (shear, length resampling, optional joint corruption),
disentangles and pads it, and takes one AdamW step per batch. Sequence
preparation runs on a thread pool capped by ``GLMOTION_THREADS``; every
sequence draws from its own RNG stream spawned from the run seed, so the
result does not depend on the number of threads.
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from glmotion.autodiff import Tape, backward
from glmotion.errors import DataError, LengthError
from glmotion.model.checkpoint import save_checkpoint
from glmotion.model.gl_base import ModelParams
from glmotion.model.gl_transformer import model_forward
from glmotion.mpdp import MpdpHeads, batch_targets, heads_forward, mpdp_accuracy, mpdp_loss
from glmotion.sequence import disentangle, pad_and_mask
from glmotion.sequence_transformer import Augment
from glmotion.training.metrics_log import MetricsLog
from glmotion.training.optim import ExponentialDecay, OptimState, clip_grad_norm, optimizer_step

logger = logging.getLogger(__name__)

THREADS_ENV = 'GLMOTION_THREADS'
METRICS_NAME = 'metrics.log'
FINAL_CHECKPOINT = 'checkpoint.npz'


def worker_count() -> int:
    """Worker threads for data preparation: ``GLMOTION_THREADS`` or min(4, cpu count)."""
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            logger.warning('ignoring non-integer %s=%r', THREADS_ENV, value)
    return min(4, os.cpu_count() or 1)


def prepare_sequence(seq, run_cfg, t_max, rng=None, augment=False):
    """
    Turn one RawSequence into the disentangled model input.

    Args:
        seq (RawSequence): Source sequence.
        run_cfg (RunConfig): Augmentation, input and disentangle settings.
        t_max (int): Upper bound of resampled lengths.
        rng (numpy.random.Generator, optional): Required when `augment` is True.
        augment (bool): Apply the training-time augmentations.

    Returns:
        DisentangledSequence: The prepared sequence.
    """
    if augment:
        if run_cfg.shear > 0:
            seq = Augment.shear(seq, rng, run_cfg.shear)
        if run_cfg.interp_frac > 0 and seq.frames >= 2:
            seq = Augment.resample_interp(seq, rng, run_cfg.interp_frac, t_max)
        if run_cfg.corrupt > 0:
            seq = Augment.corrupt_joints(seq, rng, run_cfg.corrupt)
    n = run_cfg.sampled_length
    if n is not None:
        seq = Augment.sample_fixed_length(seq, n)
    return disentangle(seq, run_cfg.disentangle_mode)


def prepare_batch(seqs, run_cfg, model_cfg, seeds=None, augment=False, pool=None):
    """
    Prepare and pad a list of sequences.

    The batch is padded to its longest member, which must not exceed the
    model's T_max.

    Args:
        seqs (list of RawSequence): Batch members.
        run_cfg (RunConfig): Preparation settings.
        model_cfg (ModelConfig): Supplies T_max.
        seeds (list of numpy.random.SeedSequence, optional): One per sequence, required when augmenting.
        augment (bool): Apply training-time augmentation.
        pool (ThreadPoolExecutor, optional): Runs the preparation concurrently.

    Returns:
        Batch: The padded batch.

    Raises:
        LengthError: If a prepared sequence is longer than T_max.
    """
    if augment and (seeds is None or len(seeds) != len(seqs)):
        raise ValueError('augmentation needs one seed per sequence')
    rngs = [np.random.default_rng(s) for s in seeds] if augment else [None] * len(seqs)

    def work(item):
        seq, rng = item
        return prepare_sequence(seq, run_cfg, model_cfg.t_max, rng, augment)

    items = list(zip(seqs, rngs))
    prepared = list(pool.map(work, items)) if pool is not None else [work(item) for item in items]
    longest = max(d.frames for d in prepared)
    if longest > model_cfg.t_max:
        raise LengthError(f'sequence with {longest} frames exceeds T_max={model_cfg.t_max}')
    return pad_and_mask(prepared, longest)


def _mean_accuracy(accs, intervals):
    return {kind: {n: float(np.mean([a[kind][n] for a in accs])) for n in intervals} for kind in ('dir', 'mag')}


@dataclass
class PretrainResult:
    """
    Outcome of `pretrain`.

    Attributes:
        params (ModelParams): Trained network weights.
        heads (MpdpHeads): Trained prediction heads.
        log (MetricsLog): Per-epoch metrics.
        step_losses (list): Loss of every optimizer step.
        steps (int): Optimizer steps taken.
        checkpoint (Path or None): Final checkpoint, when an output directory was given.
    """
    params: ModelParams
    heads: MpdpHeads
    log: MetricsLog
    step_losses: list = field(default_factory=list)
    steps: int = 0
    checkpoint: Optional[Path] = None


def pretrain(seqs, model_cfg, mpdp_cfg, run_cfg, out_dir=None, params=None, heads=None) -> PretrainResult:
    """
    Pretrain network and heads on unlabeled sequences.

    Args:
        seqs (list of RawSequence): Training data; labels are ignored.
        model_cfg (ModelConfig): Network hyperparameters.
        mpdp_cfg (MpdpConfig): Target and loss settings.
        run_cfg (RunConfig): Loop settings.
        out_dir (str or Path, optional): Receives ``metrics.log`` and checkpoints.
        params (ModelParams, optional): Starting weights; freshly initialised if omitted.
        heads (MpdpHeads, optional): Starting heads; freshly initialised if omitted.

    Returns:
        PretrainResult: Trained weights and metrics.

    Raises:
        DataError: If `seqs` is empty.
    """
    if not seqs:
        raise DataError('cannot pretrain on an empty dataset')
    out_dir = Path(out_dir) if out_dir is not None else None
    root = np.random.SeedSequence(run_cfg.seed)
    init_seed, shuffle_seed, augment_seed = root.spawn(3)
    init_rng = np.random.default_rng(init_seed)
    shuffle_rng = np.random.default_rng(shuffle_seed)

    if params is None:
        params = ModelParams.init(model_cfg, init_rng)
    if heads is None:
        heads = MpdpHeads.init(mpdp_cfg, model_cfg.tokens, model_cfg.frame_dim, init_rng, dtype=model_cfg.np_dtype)
    trainable = params.parameters() + heads.parameters()
    state = OptimState('adamw', lr=run_cfg.lr, weight_decay=run_cfg.weight_decay)
    schedule = ExponentialDecay(run_cfg.lr, run_cfg.lr_decay)
    log = MetricsLog(mpdp_cfg.intervals, out_dir / METRICS_NAME if out_dir is not None else None)
    result = PretrainResult(params=params, heads=heads, log=log)
    logger.info('pretraining %d sequences, %d trainable parameters, %d epochs',
                len(seqs), sum(p.size for p in trainable), run_cfg.epochs)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        for epoch in range(1, run_cfg.epochs + 1):
            if run_cfg.max_steps is not None and result.steps >= run_cfg.max_steps:
                break
            state.lr = schedule(epoch - 1)
            started = time.perf_counter()
            order = shuffle_rng.permutation(len(seqs))
            losses, accs = [], []

            for start in range(0, len(seqs), run_cfg.batch_size):
                if run_cfg.max_steps is not None and result.steps >= run_cfg.max_steps:
                    break
                chunk = [seqs[i] for i in order[start:start + run_cfg.batch_size]]
                batch = prepare_batch(chunk, run_cfg, model_cfg, augment_seed.spawn(len(chunk)),
                                      augment=run_cfg.augment, pool=pool)
                targets = batch_targets(batch, mpdp_cfg)

                params.zero_grad()
                heads.zero_grad()
                with Tape():
                    out = model_forward(batch, params, model_cfg)
                    dir_logits, mag_logits = heads_forward(out.F, heads, model_cfg.persons, model_cfg.joints)
                    loss = mpdp_loss(dir_logits, mag_logits, targets, mpdp_cfg)
                    backward(loss)
                clip_grad_norm(trainable, run_cfg.grad_clip)
                optimizer_step(trainable, state)

                result.steps += 1
                result.step_losses.append(loss.item())
                losses.append(loss.item())
                accs.append(mpdp_accuracy(dir_logits, mag_logits, targets, mpdp_cfg))

            if not losses:
                break
            wall_ms = round((time.perf_counter() - started) * 1000) if run_cfg.log_wall_time else 0
            accuracy = _mean_accuracy(accs, mpdp_cfg.intervals)
            mean_loss = float(np.mean(losses))
            log.append(epoch, mean_loss, accuracy, state.lr, wall_ms)
            logger.info('epoch %d loss %.5f dir_acc %s lr %.3g', epoch, mean_loss,
                        ' '.join(f'{accuracy["dir"][n]:.3f}' for n in mpdp_cfg.intervals), state.lr)

            if out_dir is not None and run_cfg.checkpoint_every and epoch % run_cfg.checkpoint_every == 0:
                save_checkpoint(out_dir / f'checkpoint_e{epoch:04d}.npz', params, heads,
                                meta={'epoch': epoch, 'steps': result.steps, 'seed': run_cfg.seed,
                                      'disentangle_mode': run_cfg.disentangle_mode})

    if out_dir is not None:
        result.checkpoint = save_checkpoint(out_dir / FINAL_CHECKPOINT, params, heads,
                                            meta={'epoch': len(log.records), 'steps': result.steps,
                                                  'seed': run_cfg.seed, 'disentangle_mode': run_cfg.disentangle_mode})
    return result
