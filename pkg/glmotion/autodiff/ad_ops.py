"""
Differentiable operations over `Tensor`.

Broadcasting is deliberately narrow: the second operand of an elementwise
operation may be a Python scalar, a tensor of identical shape, or a tensor
whose shape equals the trailing axes of the first operand (a bias vector,
a positional table shared across the batch). Everything else is a
`ShapeError`.

Masks passed to `softmax_masked` are plain boolean arrays (True = keep) and
follow numpy broadcasting, since no gradient flows through them.
"""

import numpy as np

from glmotion.autodiff.ad_tensor import Tensor, make_output
from glmotion.errors import MaskError, NumericError, ShapeError

ELEMENTWISE_KINDS = ('add', 'sub', 'mul', 'div', 'scale')

# stands in for -inf before exponentiation
MASK_FILL = -1e30

_GELU_C = np.sqrt(2.0 / np.pi)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _is_scalar(b) -> bool:
    return not isinstance(b, Tensor) and np.ndim(b) == 0


def _lead_axes(a: Tensor, b: Tensor) -> int:
    """Number of leading axes of `a` that `b` is broadcast over."""
    if a.shape == b.shape:
        return 0
    if b.ndim <= a.ndim and a.shape[a.ndim - b.ndim:] == b.shape:
        return a.ndim - b.ndim
    raise ShapeError(f'cannot combine shapes {a.shape} and {b.shape}: only equal or trailing-axes shapes are allowed')


def _reduce_lead(g: np.ndarray, lead: int) -> np.ndarray:
    if lead == 0:
        return g
    return g.reshape((-1,) + g.shape[lead:]).sum(axis=0)


def elementwise(op_kind: str, a, b) -> Tensor:
    """
    Apply an elementwise arithmetic operation.

    Args:
        op_kind (str): One of ``add``, ``sub``, ``mul``, ``div``, ``scale``.
        a (Tensor): Left operand; its shape is the result shape.
        b (Tensor or float): Scalar, same-shape tensor, or trailing-axes tensor.

    Returns:
        Tensor: The result, shaped like `a`.

    Raises:
        ShapeError: If the shapes cannot be combined.
        NumericError: On division by an exact zero.
    """
    if op_kind not in ELEMENTWISE_KINDS:
        raise ValueError(f'unknown elementwise op {op_kind!r}')
    a = as_tensor(a)

    if _is_scalar(b):
        s = float(b)
        if op_kind == 'add':
            return make_output(a.data + s, op_kind, (a,), lambda g: (g,))
        if op_kind == 'sub':
            return make_output(a.data - s, op_kind, (a,), lambda g: (g,))
        if op_kind in ('mul', 'scale'):
            return make_output(a.data * s, op_kind, (a,), lambda g: (g * s,))
        if s == 0.0:
            raise NumericError('division by zero')
        return make_output(a.data / s, op_kind, (a,), lambda g: (g / s,))

    b = as_tensor(b)
    lead = _lead_axes(a, b)
    if op_kind == 'add':
        return make_output(a.data + b.data, op_kind, (a, b),
                           lambda g: (g, _reduce_lead(g, lead)))
    if op_kind == 'sub':
        return make_output(a.data - b.data, op_kind, (a, b),
                           lambda g: (g, -_reduce_lead(g, lead)))
    if op_kind in ('mul', 'scale'):
        return make_output(a.data * b.data, op_kind, (a, b),
                           lambda g: (g * b.data, _reduce_lead(g * a.data, lead)))
    if np.any(b.data == 0):
        raise NumericError('division by zero')
    return make_output(a.data / b.data, op_kind, (a, b),
                       lambda g: (g / b.data, _reduce_lead(-g * a.data / (b.data * b.data), lead)))


def add(a, b) -> Tensor:
    return elementwise('add', a, b)


def sub(a, b) -> Tensor:
    return elementwise('sub', a, b)


def mul(a, b) -> Tensor:
    return elementwise('mul', a, b)


def div(a, b) -> Tensor:
    return elementwise('div', a, b)


def scale(a, s: float) -> Tensor:
    return elementwise('scale', a, s)


def matmul(a, b) -> Tensor:
    """
    Matrix product.

    Two forms are supported: ``[..., m, k] @ [k, n]`` (a weight shared over
    leading axes) and ``[..., m, k] @ [..., k, n]`` with identical leading axes.

    Raises:
        ShapeError: If inner dimensions or leading axes disagree.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f'matmul needs at least 2-d operands, got {a.shape} and {b.shape}')
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f'matmul inner dimensions differ: {a.shape} @ {b.shape}')

    if b.ndim == 2:
        def backward_shared(g):
            k, n = b.shape
            da = g @ b.data.T
            db = a.data.reshape(-1, k).T @ g.reshape(-1, n)
            return da, db
        return make_output(a.data @ b.data, 'matmul', (a, b), backward_shared)

    if a.ndim != b.ndim or a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f'matmul leading axes differ: {a.shape} @ {b.shape}')

    def backward_batched(g):
        da = np.matmul(g, np.swapaxes(b.data, -1, -2))
        db = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return da, db
    return make_output(np.matmul(a.data, b.data), 'matmul', (a, b), backward_batched)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_output(np.transpose(a.data, axes), 'transpose', (a,),
                       lambda g: (np.transpose(g, inverse),))


def swapaxes(a, axis1: int, axis2: int) -> Tensor:
    a = as_tensor(a)
    axes = list(range(a.ndim))
    axes[axis1], axes[axis2] = axes[axis2], axes[axis1]
    return transpose(a, axes)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f'cannot reshape {a.shape} to {tuple(shape)}') from exc
    return make_output(out, 'reshape', (a,), lambda g: (g.reshape(a.shape),))


def getitem(a, key) -> Tensor:
    a = as_tensor(a)

    def backward_fn(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        return (full,)
    return make_output(np.array(a.data[key]), 'getitem', (a,), backward_fn)


def concat(tensors, axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f'cannot concatenate shapes {[t.shape for t in tensors]} on axis {axis}') from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward_fn(g):
        return tuple(np.split(g, bounds, axis=axis))
    return make_output(out, 'concat', tuple(tensors), backward_fn)


def sum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)

    def backward_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape),)
    return make_output(np.sum(a.data, axis=axis, keepdims=keepdims), 'sum', (a,), backward_fn)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def softmax_masked(logits, mask=None) -> Tensor:
    """
    Softmax over the last axis with optional key masking.

    Masked logits are replaced by `MASK_FILL` before normalisation and the
    corresponding probabilities are then forced to exactly 0.

    Args:
        logits (Tensor): Scores, ``[..., n]``.
        mask (array-like of bool, optional): True where an entry may receive
            probability; must broadcast to ``logits.shape``.

    Returns:
        Tensor: Probabilities of the same shape as `logits`.

    Raises:
        MaskError: If a row has no unmasked entry.
    """
    logits = as_tensor(logits)
    x = logits.data
    keep = None
    if mask is not None:
        try:
            keep = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        except ValueError as exc:
            raise ShapeError(f'mask shape {np.shape(mask)} does not broadcast to {x.shape}') from exc
        if not np.all(keep.any(axis=-1)):
            raise MaskError('softmax row with every entry masked')
        x = np.where(keep, x, MASK_FILL)

    e = np.exp(x - x.max(axis=-1, keepdims=True))
    if keep is not None:
        e = np.where(keep, e, 0.0)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward_fn(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)
    return make_output(y, 'softmax_masked', (logits,), backward_fn)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """
    Normalise the last axis to zero mean and unit variance, then apply
    ``gamma * x_hat + beta``.

    Raises:
        ShapeError: If `gamma`/`beta` do not match the last axis.
        NumericError: If the variance can be zero with ``eps == 0``.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f'layer_norm parameters {gamma.shape}/{beta.shape} do not match last axis {d}')
    if eps < 0:
        raise NumericError(f'layer_norm eps must be non-negative, got {eps}')
    if eps == 0 and d == 1:
        raise NumericError('layer_norm over a single channel needs eps > 0')

    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    if eps == 0 and np.any(var == 0):
        raise NumericError('layer_norm on a constant row with eps == 0')
    inv = 1.0 / np.sqrt(var + eps)
    x_hat = xc * inv

    def backward_fn(g):
        dx_hat = g * gamma.data
        dx = inv / d * (d * dx_hat
                        - dx_hat.sum(axis=-1, keepdims=True)
                        - x_hat * (dx_hat * x_hat).sum(axis=-1, keepdims=True))
        dgamma = (g * x_hat).reshape(-1, d).sum(axis=0)
        dbeta = g.reshape(-1, d).sum(axis=0)
        return dx, dgamma, dbeta
    return make_output(x_hat * gamma.data + beta.data, 'layer_norm', (x, gamma, beta), backward_fn)


def gelu(x) -> Tensor:
    """GELU, tanh approximation."""
    x = as_tensor(x)
    v = x.data
    inner = _GELU_C * (v + 0.044715 * v ** 3)
    t = np.tanh(inner)

    def backward_fn(g):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * v * v)
        return (g * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * d_inner),)
    return make_output(0.5 * v * (1.0 + t), 'gelu', (x,), backward_fn)


def linear(x, weight, bias=None) -> Tensor:
    out = matmul(x, weight)
    if bias is not None:
        out = add(out, bias)
    return out


def cross_entropy_logits(logits, target, weight: float = 1.0) -> Tensor:
    """
    Weighted mean cross entropy computed from raw logits.

    Args:
        logits (Tensor): Scores, ``[B, C]``.
        target (array-like of int): Class index per row, ``[B]``.
        weight (float): Multiplier applied to the mean.

    Returns:
        Tensor: Scalar ``weight * mean_b(-log softmax(logits)[b, target[b]])``.

    Raises:
        ShapeError: If the shapes disagree or the batch is empty.
        IndexError: If a target is outside ``[0, C)``.
    """
    logits = as_tensor(logits)
    if logits.ndim != 2:
        raise ShapeError(f'cross entropy expects [B, C] logits, got {logits.shape}')
    n, c = logits.shape
    target = np.asarray(target, dtype=np.int64)
    if target.shape != (n,):
        raise ShapeError(f'target shape {target.shape} does not match batch {n}')
    if n == 0:
        raise ShapeError('cross entropy over an empty batch')
    if np.any(target < 0) or np.any(target >= c):
        raise IndexError(f'target outside [0, {c})')

    x = logits.data
    rows = np.arange(n)
    top = x.max(axis=1, keepdims=True)
    lse = np.log(np.exp(x - top).sum(axis=1, keepdims=True)) + top
    loss = weight * np.mean(lse[:, 0] - x[rows, target])

    def backward_fn(g):
        p = np.exp(x - lse)
        p[rows, target] -= 1.0
        return (p * (g * weight / n),)
    return make_output(np.asarray(loss), 'cross_entropy', (logits,), backward_fn)
