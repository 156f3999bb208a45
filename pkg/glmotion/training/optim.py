"""Adam / AdamW updates, exponential learning-rate decay and gradient clipping."""

import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from glmotion.errors import ConfigError, NumericError

logger = logging.getLogger(__name__)

ALGORITHMS = ('adamw', 'adam')


@dataclass
class OptimState:
    """
    Moment estimates and hyperparameters of one optimizer.

    Attributes:
        algorithm (str): ``adamw`` (decoupled weight decay) or ``adam`` (no decay).
        lr (float): Current learning rate.
        betas (tuple): Exponential decay rates of the first and second moments.
        eps (float): Denominator offset.
        weight_decay (float): Decoupled decay coefficient, used by ``adamw`` only.
        step (int): Number of updates applied so far.
        m, v (dict): First and second moments keyed by parameter position.
    """
    algorithm: str = 'adamw'
    lr: float = 5e-4
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    step: int = 0
    m: dict = field(default_factory=dict, repr=False)
    v: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f'unknown optimizer {self.algorithm!r}, expected one of {ALGORITHMS}')
        if self.lr < 0 or self.eps < 0 or self.weight_decay < 0:
            raise ConfigError('lr, eps and weight_decay must be non-negative')
        if not all(0.0 <= b < 1.0 for b in self.betas):
            raise ConfigError(f'betas must lie in [0, 1), got {self.betas}')


def optimizer_step(params, state: OptimState) -> None:
    """
    Apply one bias-corrected Adam or AdamW update to every tensor in `params`.

    A tensor without a gradient is treated as having a zero gradient. New
    arrays are assigned, so previously taken snapshots of ``.data`` stay valid.

    Args:
        params (list of Tensor): Trainable tensors, always passed in the same order.
        state (OptimState): Optimizer state, updated in place.

    Raises:
        NumericError: If any gradient is non-finite; no parameter is changed.
    """
    grads = []
    for i, p in enumerate(params):
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise NumericError(f'non-finite gradient for parameter {p.name or i}; step aborted')
        grads.append(g)

    state.step += 1
    b1, b2 = state.betas
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        m = b1 * state.m.get(i, 0.0) + (1.0 - b1) * g
        v = b2 * state.v.get(i, 0.0) + (1.0 - b2) * g * g
        state.m[i], state.v[i] = m, v
        update = (m / c1) / (np.sqrt(v / c2) + state.eps)
        if state.algorithm == 'adamw' and state.weight_decay:
            update = update + state.weight_decay * p.data
        p.data = (p.data - state.lr * update).astype(p.data.dtype)


def clip_grad_norm(params, max_norm) -> float:
    """
    Rescale gradients so their global L2 norm is at most `max_norm`.

    Args:
        params (list of Tensor): Tensors whose ``.grad`` is clipped.
        max_norm (float or None): Bound; None only measures.

    Returns:
        float: The global norm before clipping.
    """
    total = float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params if p.grad is not None)))
    if max_norm is not None and total > max_norm:
        factor = max_norm / (total + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * factor
    return total


class ExponentialDecay:
    """Learning rate ``initial * factor ** epoch``."""

    def __init__(self, initial, factor):
        self.initial = initial
        self.factor = factor

    def __call__(self, epoch) -> float:
        return self.initial * self.factor ** epoch
