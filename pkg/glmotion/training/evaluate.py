"""
Evaluation protocols on top of a pretrained network.

* `linear_probe` trains a single affine classifier on frozen, mask-pooled
  features (plain Adam, constant lr).
* `finetune_semi` trains the whole network plus classifier on a
  class-stratified fraction of the labels (AdamW).
* `run_ablation` pretrains and probes a list of named configurations over
  several seeds and reports mean probe accuracies.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from glmotion.autodiff import Tape, Tensor, backward, cross_entropy_logits, linear, no_grad
from glmotion.config import build_configs
from glmotion.errors import DataError, DeterminismError
from glmotion.model.gl_base import uniform_weight
from glmotion.model.gl_transformer import model_forward, pooled_representation
from glmotion.training.optim import OptimState, clip_grad_norm, optimizer_step
from glmotion.training.pretrain import prepare_batch, pretrain

logger = logging.getLogger(__name__)

ABLATION_VARIANTS = {
    'disentangled_1_5_10': {'intervals': [1, 5, 10], 'disentangle_mode': 'global_local'},
    'disentangled_1': {'intervals': [1], 'disentangle_mode': 'global_local'},
    'entangled_1': {'intervals': [1], 'disentangle_mode': 'entangled'},
}


@dataclass
class ProbeResult:
    """
    Attributes:
    -----------
    accuracy : float
        Top-1 accuracy on the held-out split.
    train_accuracy : float
        Top-1 accuracy on the training split after the last epoch.
    n_classes : int
        Width of the classifier.
    checksum : str
        Backbone checksum, identical before and after probe training.
    losses : list
        Mean training loss per epoch.
    """
    accuracy: float
    train_accuracy: float
    n_classes: int
    checksum: str
    losses: list = field(default_factory=list)


@dataclass
class FinetuneResult:
    accuracy: float
    n_train: int
    label_fraction: float
    losses: list = field(default_factory=list)


def _labels(seqs, split):
    labels = [s.label for s in seqs]
    if any(label is None for label in labels):
        raise DataError(f'every {split} sequence needs a label')
    return np.array(labels, dtype=np.int64)


def _check_classes(y_train, y_test):
    missing = sorted(set(y_test.tolist()) - set(y_train.tolist()))
    if missing:
        raise DataError(f'classes {missing} appear in the test split but not in the training split')


def _classifier(rng, width, n_classes, dtype):
    W = Tensor(uniform_weight(rng, width, n_classes, dtype), requires_grad=True, dtype=dtype, name='classifier.W')
    b = Tensor(np.zeros(n_classes, dtype=dtype), requires_grad=True, dtype=dtype, name='classifier.b')
    return W, b


def _accuracy(logits, y) -> float:
    return float(np.mean(np.argmax(logits, axis=1) == y))


def extract_features(seqs, params, model_cfg, run_cfg, batch_size=256):
    """
    Frozen forward pass and masked mean pooling.

    Args:
        seqs (list of RawSequence): Sequences to embed, without augmentation.
        params (ModelParams): Network weights.
        model_cfg (ModelConfig): Network hyperparameters.
        run_cfg (RunConfig): Input and disentangle settings.
        batch_size (int): Sequences per forward pass.

    Returns:
        numpy.ndarray: Pooled features ``[n, P*K*D]``.
    """
    if not seqs:
        raise DataError('no sequences to extract features from')
    chunks = []
    with no_grad():
        for start in range(0, len(seqs), batch_size):
            batch = prepare_batch(seqs[start:start + batch_size], run_cfg, model_cfg)
            out = model_forward(batch, params, model_cfg)
            chunks.append(pooled_representation(out, batch.valid_mask).data)
    return np.concatenate(chunks, axis=0)


def linear_probe(train_seqs, test_seqs, params, model_cfg, run_cfg) -> ProbeResult:
    """
    Linear evaluation of a frozen backbone.

    Raises:
        DataError: If a split is empty or unlabeled, or a test class is absent from training.
        DeterminismError: If the backbone changed during probe training.
    """
    if not train_seqs or not test_seqs:
        raise DataError('linear probe needs non-empty train and test splits')
    y_train, y_test = _labels(train_seqs, 'training'), _labels(test_seqs, 'test')
    _check_classes(y_train, y_test)
    n_classes = int(max(y_train.max(), y_test.max())) + 1

    checksum = params.checksum()
    x_train = extract_features(train_seqs, params, model_cfg, run_cfg)
    x_test = extract_features(test_seqs, params, model_cfg, run_cfg)

    rng = np.random.default_rng(run_cfg.seed)
    dtype = model_cfg.np_dtype
    W, b = _classifier(rng, x_train.shape[1], n_classes, dtype)
    state = OptimState('adam', lr=run_cfg.probe_lr, weight_decay=0.0)
    losses = []
    for epoch in range(run_cfg.probe_epochs):
        order = rng.permutation(len(x_train))
        epoch_losses = []
        for start in range(0, len(order), run_cfg.probe_batch_size):
            idx = order[start:start + run_cfg.probe_batch_size]
            W.zero_grad()
            b.zero_grad()
            with Tape():
                loss = cross_entropy_logits(linear(Tensor(x_train[idx], dtype=dtype), W, b), y_train[idx])
                backward(loss)
            optimizer_step([W, b], state)
            epoch_losses.append(loss.item())
        losses.append(float(np.mean(epoch_losses)))

    if params.checksum() != checksum:
        raise DeterminismError('backbone parameters changed during linear probe training')
    result = ProbeResult(
        accuracy=_accuracy(x_test @ W.data + b.data, y_test),
        train_accuracy=_accuracy(x_train @ W.data + b.data, y_train),
        n_classes=n_classes,
        checksum=checksum,
        losses=losses,
    )
    logger.info('linear probe: train %.4f, test %.4f over %d classes',
                result.train_accuracy, result.accuracy, n_classes)
    return result


def stratified_subset(seqs, fraction, rng):
    """
    Draw ``round(fraction * n_c)`` sequences from every class c.

    The selection keeps dataset order.

    Raises:
        DataError: If a sequence is unlabeled or a class would get no sample.
    """
    by_class = defaultdict(list)
    for i, s in enumerate(seqs):
        if s.label is None:
            raise DataError(f'sequence {s.id!r} has no label')
        by_class[s.label].append(i)

    chosen = []
    for label in sorted(by_class):
        members = by_class[label]
        k = int(round(fraction * len(members)))
        if k == 0:
            raise DataError(f'label fraction {fraction} leaves class {label} ({len(members)} sequences) empty')
        picks = rng.choice(len(members), size=k, replace=False)
        chosen.extend(members[j] for j in picks)
    return [seqs[i] for i in sorted(chosen)]


def finetune_semi(train_seqs, test_seqs, params, model_cfg, run_cfg, label_fraction=None) -> FinetuneResult:
    """
    Fine-tune network and classifier end to end on a labeled subset.

    The given parameters are copied first, so the pretrained weights stay
    untouched.

    Args:
        train_seqs (list of RawSequence): Labeled training split.
        test_seqs (list of RawSequence): Labeled evaluation split.
        params (ModelParams): Pretrained (or random) backbone.
        model_cfg (ModelConfig): Network hyperparameters.
        run_cfg (RunConfig): finetune_lr, finetune_epochs, batch_size and augmentation.
        label_fraction (float, optional): Overrides ``run_cfg.label_fraction``.

    Returns:
        FinetuneResult: Test accuracy and the subset size.
    """
    fraction = run_cfg.label_fraction if label_fraction is None else label_fraction
    if not train_seqs or not test_seqs:
        raise DataError('fine-tuning needs non-empty train and test splits')
    y_test = _labels(test_seqs, 'test')
    root = np.random.SeedSequence(run_cfg.seed)
    subset_seed, init_seed, shuffle_seed, augment_seed = root.spawn(4)

    subset = stratified_subset(train_seqs, fraction, np.random.default_rng(subset_seed))
    y_train = _labels(subset, 'training')
    _check_classes(y_train, y_test)
    n_classes = int(max(y_train.max(), y_test.max())) + 1
    logger.info('fine-tuning on %d of %d labeled sequences (fraction %g)', len(subset), len(train_seqs), fraction)

    params = params.copy()
    dtype = model_cfg.np_dtype
    W, b = _classifier(np.random.default_rng(init_seed), model_cfg.frame_dim, n_classes, dtype)
    trainable = params.parameters() + [W, b]
    state = OptimState('adamw', lr=run_cfg.finetune_lr, weight_decay=run_cfg.weight_decay)
    shuffle_rng = np.random.default_rng(shuffle_seed)

    losses = []
    for epoch in range(run_cfg.finetune_epochs):
        order = shuffle_rng.permutation(len(subset))
        epoch_losses = []
        for start in range(0, len(order), run_cfg.batch_size):
            chunk = [subset[i] for i in order[start:start + run_cfg.batch_size]]
            batch = prepare_batch(chunk, run_cfg, model_cfg, augment_seed.spawn(len(chunk)), augment=run_cfg.augment)
            params.zero_grad()
            W.zero_grad()
            b.zero_grad()
            with Tape():
                out = model_forward(batch, params, model_cfg)
                logits = linear(pooled_representation(out, batch.valid_mask), W, b)
                loss = cross_entropy_logits(logits, batch.labels)
                backward(loss)
            clip_grad_norm(trainable, run_cfg.grad_clip)
            optimizer_step(trainable, state)
            epoch_losses.append(loss.item())
        losses.append(float(np.mean(epoch_losses)))
        logger.debug('fine-tune epoch %d loss %.5f', epoch + 1, losses[-1])

    x_test = extract_features(test_seqs, params, model_cfg, run_cfg)
    accuracy = _accuracy(x_test @ W.data + b.data, y_test)
    logger.info('fine-tuned accuracy %.4f', accuracy)
    return FinetuneResult(accuracy=accuracy, n_train=len(subset), label_fraction=fraction, losses=losses)


def run_ablation(train_seqs, test_seqs, settings, variants=None, seeds=(0, 1, 2)) -> dict:
    """
    Pretrain and probe every named variant for every seed.

    The outcome is a report; no ordering between variants is enforced.

    Args:
        train_seqs, test_seqs (list of RawSequence): Labeled splits.
        settings (dict): Resolved flat settings shared by all variants.
        variants (dict, optional): Name to flat-setting overrides, defaults to ABLATION_VARIANTS.
        seeds (iterable of int): Seeds run per variant.

    Returns:
        dict: ``{name: {'accuracies': [...], 'mean': float}}`` in variant order.
    """
    variants = ABLATION_VARIANTS if variants is None else variants
    first = train_seqs[0]
    report = {}
    for name, overrides in variants.items():
        accuracies = []
        for seed in seeds:
            flat = dict(settings)
            flat.update(overrides)
            flat['seed'] = seed
            model_cfg, mpdp_cfg, run_cfg = build_configs(flat, first.joints, first.persons)
            trained = pretrain(train_seqs, model_cfg, mpdp_cfg, run_cfg)
            accuracies.append(linear_probe(train_seqs, test_seqs, trained.params, model_cfg, run_cfg).accuracy)
        report[name] = {'accuracies': accuracies, 'mean': float(np.mean(accuracies))}
        logger.info('ablation %s: mean probe accuracy %.4f over seeds %s', name, report[name]['mean'], list(seeds))
    return report
