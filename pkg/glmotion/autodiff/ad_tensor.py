import threading
from contextlib import contextmanager

import numpy as np

from glmotion.errors import ShapeError, StateError

DEFAULT_DTYPE = np.float64

_state = threading.local()


def _tape_stack():
    if not hasattr(_state, 'tapes'):
        _state.tapes = [Tape()]
    return _state.tapes


def grad_enabled() -> bool:
    return getattr(_state, 'grad_enabled', True)


@contextmanager
def no_grad():
    """
    Disable graph recording on the current thread.

    Operations evaluated inside the block return tensors with
    ``requires_grad=False`` and nothing is appended to any tape.
    """
    previous = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def current_tape() -> 'Tape':
    """Return the innermost active tape of the current thread."""
    return _tape_stack()[-1]


def reset_tape() -> None:
    """Clear the current thread's innermost tape so it can be reused."""
    current_tape().reset()


class Node:
    """
    One recorded operation.

    Attributes:
        op (str): Operation kind, e.g. ``'matmul'``.
        inputs (tuple): Input tensors, in argument order.
        backward_fn (callable): Maps the output gradient to one gradient (or None) per input.
        output (Tensor): The tensor this node produced.
        tape (Tape): The tape the node was recorded on.
    """
    __slots__ = ('op', 'inputs', 'backward_fn', 'output', 'tape')

    def __init__(self, op, inputs, backward_fn, tape):
        self.op = op
        self.inputs = tuple(inputs)
        self.backward_fn = backward_fn
        self.output = None
        self.tape = tape


class Tape:
    """
    An ordered record of operations for reverse-mode differentiation.

    Nodes are appended as operations run, so inputs always precede the
    nodes that consume them. A tape supports a single `backward` pass;
    `reset` makes it usable again.

    Tapes are thread local. Use a tape as a context manager to give one
    training step its own graph:

        >>> with Tape():
        ...     loss = model_loss(params)
        ...     backward(loss)
    """

    def __init__(self):
        self.nodes = []
        self.consumed = False

    def record(self, node: Node) -> None:
        if self.consumed:
            raise StateError('cannot record on a tape that has already been differentiated; reset it first')
        self.nodes.append(node)

    def reset(self) -> None:
        self.nodes = []
        self.consumed = False

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def __len__(self):
        return len(self.nodes)


class Tensor:
    """
    A dense n-dimensional array that can take part in an autodiff graph.

    Attributes:
        data (numpy.ndarray): The values, float64 unless another dtype is requested.
        requires_grad (bool): Whether gradients flow to this tensor.
        grad (numpy.ndarray or None): Accumulated gradient, same shape as `data`.
        name (str or None): Optional label used by parameter stores and reports.
    """
    __array_priority__ = 1000

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.array(data, dtype=dtype or DEFAULT_DTYPE)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._node = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def graph_edge(self):
        """The node that produced this tensor, or None for leaves."""
        return self._node

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def detach(self) -> 'Tensor':
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        label = f' name={self.name!r}' if self.name else ''
        return f'Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})'

    # operators delegate to glmotion.autodiff.ad_ops

    def __add__(self, other):
        from glmotion.autodiff import ad_ops
        return ad_ops.add(self, other)

    def __sub__(self, other):
        from glmotion.autodiff import ad_ops
        return ad_ops.sub(self, other)

    def __mul__(self, other):
        from glmotion.autodiff import ad_ops
        return ad_ops.mul(self, other)

    def __truediv__(self, other):
        from glmotion.autodiff import ad_ops
        return ad_ops.div(self, other)

    def __neg__(self):
        from glmotion.autodiff import ad_ops
        return ad_ops.scale(self, -1.0)

    def __matmul__(self, other):
        from glmotion.autodiff import ad_ops
        return ad_ops.matmul(self, other)

    def __getitem__(self, key):
        from glmotion.autodiff import ad_ops
        return ad_ops.getitem(self, key)

    def reshape(self, *shape):
        from glmotion.autodiff import ad_ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ad_ops.reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        from glmotion.autodiff import ad_ops
        return ad_ops.sum(self, axis=axis, keepdims=keepdims)


def make_output(data, op, inputs, backward_fn) -> Tensor:
    """
    Wrap an operation result and record it on the current tape when needed.

    A node is recorded only when gradients are enabled and at least one
    input requires a gradient.
    """
    tracked = grad_enabled() and any(isinstance(t, Tensor) and t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data)
    out.requires_grad = tracked
    out.grad = None
    out.name = None
    out._node = None
    if tracked:
        tape = current_tape()
        node = Node(op, inputs, backward_fn, tape)
        node.output = out
        tape.record(node)
        out._node = node
    return out


def backward(loss: Tensor) -> None:
    """
    Back-propagate from a scalar loss through its tape.

    Every tensor reachable from `loss` with ``requires_grad`` receives
    ``grad = d loss / d tensor``. Leaf tensors accumulate across calls,
    intermediate tensors are overwritten. Gradients from fan-out add up.

    Args:
        loss (Tensor): A tensor with exactly one element produced on a live tape.

    Raises:
        ShapeError: If `loss` has more than one element.
        StateError: If `loss` is not attached to a tape or the tape was already differentiated.
    """
    if loss.size != 1:
        raise ShapeError(f'backward needs a scalar loss, got shape {loss.shape}')
    node = loss._node
    if node is None:
        raise StateError('loss is not attached to a live tape (no input requires grad, or recorded under no_grad)')
    tape = node.tape
    if tape.consumed:
        raise StateError('backward was already called on this tape; reset it before reusing')

    pending = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        out_grad = pending.pop(id(node.output), None)
        if out_grad is None:
            continue
        node.output.grad = out_grad
        in_grads = node.backward_fn(out_grad)
        for tensor, g in zip(node.inputs, in_grads):
            if g is None or not isinstance(tensor, Tensor) or not tensor.requires_grad:
                continue
            if tensor.shape != g.shape:
                g = np.reshape(g, tensor.shape)
            if tensor._node is not None and tensor._node.tape is tape:
                key = id(tensor)
                pending[key] = pending[key] + g if key in pending else g
            elif tensor.grad is None:
                tensor.grad = np.array(g, dtype=tensor.data.dtype)
            else:
                tensor.grad = tensor.grad + g
    tape.consumed = True
