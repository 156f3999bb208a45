import logging
from dataclasses import dataclass, field

import numpy as np

from glmotion.autodiff.ad_tensor import Tape, Tensor, backward, no_grad
from glmotion.errors import DeterminismError, ShapeError

logger = logging.getLogger(__name__)


@dataclass
class GradCheckReport:
    """
    Outcome of a finite-difference gradient check.

    Attributes:
        max_rel_error (float): Largest relative error over every checked entry.
        tol (float): Threshold the check was run against.
        passed (bool): ``max_rel_error < tol``.
        per_tensor (dict): Largest relative error per input, keyed by tensor name or position.
        checked (int): Number of entries compared.
    """
    max_rel_error: float
    tol: float
    passed: bool
    per_tensor: dict = field(default_factory=dict)
    checked: int = 0


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3) -> np.ndarray:
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def _evaluate(f, inputs) -> float:
    with no_grad():
        out = f(inputs)
    if out.size != 1:
        raise ShapeError(f'grad_check needs a scalar-valued function, got shape {out.shape}')
    return float(out.data.reshape(()))


def grad_check(f, x, step: float = 1e-5, tol: float = 1e-5, max_entries=None, rng=None,
               floor: float = 1e-3) -> GradCheckReport:
    """
    Compare analytic gradients of `f` against central finite differences.

    Args:
        f (callable): Maps `x` to a scalar Tensor. Must be deterministic.
        x (Tensor or list of Tensor): Inputs to differentiate; each needs ``requires_grad``.
        step (float): Finite-difference step.
        tol (float): Pass threshold for the maximum relative error.
        max_entries (int, optional): Check at most this many randomly chosen entries per tensor.
        rng (numpy.random.Generator, optional): Chooses the entries when `max_entries` is set.
        floor (float): Lower bound of the relative-error denominator.

    Returns:
        GradCheckReport: The comparison summary.

    Raises:
        DeterminismError: If two evaluations of `f` at the same point differ.
    """
    tensors = list(x) if isinstance(x, (list, tuple)) else [x]
    rng = rng if rng is not None else np.random.default_rng(0)

    first = _evaluate(f, x)
    if _evaluate(f, x) != first:
        raise DeterminismError('function returned different values for identical inputs')

    for t in tensors:
        t.zero_grad()
    with Tape():
        loss = f(x)
        backward(loss)

    per_tensor = {}
    worst = 0.0
    checked = 0
    for position, t in enumerate(tensors):
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat_count = t.data.size
        indices = np.arange(flat_count)
        if max_entries is not None and flat_count > max_entries:
            indices = np.sort(rng.choice(flat_count, size=max_entries, replace=False))
        errors = []
        for flat in indices:
            idx = np.unravel_index(flat, t.data.shape)
            original = t.data[idx]
            t.data[idx] = original + step
            plus = _evaluate(f, x)
            t.data[idx] = original - step
            minus = _evaluate(f, x)
            t.data[idx] = original
            numeric = (plus - minus) / (2 * step)
            errors.append(relative_error(np.asarray(analytic[idx]), np.asarray(numeric), floor))
        key = t.name if t.name else str(position)
        tensor_worst = float(np.max(errors)) if errors else 0.0
        per_tensor[key] = tensor_worst
        worst = max(worst, tensor_worst)
        checked += len(indices)

    report = GradCheckReport(max_rel_error=worst, tol=tol, passed=worst < tol,
                             per_tensor=per_tensor, checked=checked)
    logger.debug('grad_check: %d entries, max relative error %.3e', checked, worst)
    return report
