"""Dense tensors with reverse-mode automatic differentiation.

A small tape: every op records its parents and a backward closure on the
result; ``backward()`` on a scalar walks the recorded graph in reverse
topological order and accumulates exact gradients into every tensor
created with ``requires_grad=True``.  Data lives in row-major float64
numpy arrays; all kernels are plain numpy, which is plenty at desk
scale (model dims <= 64).
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ShapeError

NEG_INF = -1e9  # masked-fill surrogate; exp(NEG_INF - max) underflows to exact 0


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, grad) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar output."""
        if self.data.size != 1:
            raise ShapeError("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # convenience operators (sugar over the module-level ops)
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


def tensor(data, requires_grad=False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def _unbroadcast(grad, shape):
    """Reduce a broadcast gradient back to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _make(data, parents, backward):
    requires = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=requires,
                  _parents=tuple(parents) if requires else (),
                  _backward=backward if requires else None)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(grad, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(grad, b.shape))

    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(grad * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(grad * a.data, b.shape))

    return _make(data, (a, b), backward)


def scale(a, factor: float) -> Tensor:
    a = _as_tensor(a)
    factor = float(factor)

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(grad * factor)

    return _make(a.data * factor, (a,), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim > 2 or b.data.ndim > 2:
        raise ShapeError("matmul: only 1-D and 2-D operands supported")
    try:
        data = a.data @ b.data
    except ValueError:
        raise ShapeError(
            f"matmul: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(grad):
        ga = gb = None
        if a.data.ndim == 2 and b.data.ndim == 2:
            ga = grad @ b.data.T
            gb = a.data.T @ grad
        elif a.data.ndim == 1 and b.data.ndim == 2:
            ga = grad @ b.data.T
            gb = np.outer(a.data, grad)
        elif a.data.ndim == 2 and b.data.ndim == 1:
            ga = np.outer(grad, b.data)
            gb = a.data.T @ grad
        else:  # 1-D dot 1-D
            ga = grad * b.data
            gb = grad * a.data
        if a.requires_grad:
            a.accumulate_grad(ga)
        if b.requires_grad:
            b.accumulate_grad(gb)

    return _make(data, (a, b), backward)


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError("transpose: expects a 2-D tensor")

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(grad.T)

    return _make(a.data.T, (a,), backward)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from None

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(grad.reshape(a.shape))

    return _make(data, (a,), backward)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: empty tensor list")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat: incompatible shapes "
                         f"{[t.shape for t in tensors]}") from None
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(grad):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * grad.ndim
                index[axis if axis >= 0 else grad.ndim + axis] = slice(start, stop)
                t.accumulate_grad(grad[tuple(index)])

    return _make(data, tensors, backward)


def slice_cols(a, start: int, stop: int) -> Tensor:
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError("slice_cols: expects a 2-D tensor")

    def backward(grad):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[:, start:stop] = grad
            a.accumulate_grad(full)

    return _make(a.data[:, start:stop].copy(), (a,), backward)


def take_row(a, index: int) -> Tensor:
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError("take_row: expects a 2-D tensor")

    def backward(grad):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[index, :] = grad
            a.accumulate_grad(full)

    return _make(a.data[index, :].copy(), (a,), backward)


def repeat_rows(a, count: int) -> Tensor:
    """Tile a (1, d) row down to (count, d)."""
    a = _as_tensor(a)
    if a.data.ndim != 2 or a.data.shape[0] != 1:
        raise ShapeError("repeat_rows: expects a (1, d) tensor")

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(grad.sum(axis=0, keepdims=True))

    return _make(np.repeat(a.data, count, axis=0), (a,), backward)


def pick(a, index: int) -> Tensor:
    """Scalar gather from a 1-D tensor."""
    a = _as_tensor(a)
    if a.data.ndim != 1:
        raise ShapeError("pick: expects a 1-D tensor")

    def backward(grad):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[index] = grad
            a.accumulate_grad(full)

    return _make(a.data[index], (a,), backward)


def log(a, eps: float = 0.0) -> Tensor:
    a = _as_tensor(a)
    data = np.log(a.data + eps)

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(grad / (a.data + eps))

    return _make(data, (a,), backward)


def relu(a) -> Tensor:
    a = _as_tensor(a)

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(grad * (a.data > 0))

    return _make(np.maximum(a.data, 0.0), (a,), backward)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    out = np.empty_like(a.data)
    pos = a.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    expx = np.exp(a.data[~pos])
    out[~pos] = expx / (1.0 + expx)

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(grad * out * (1.0 - out))

    return _make(out, (a,), backward)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    out = np.tanh(a.data)

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(grad * (1.0 - out * out))

    return _make(out, (a,), backward)


def softmax(a, axis: int = -1) -> Tensor:
    """Max-subtraction stabilized; masked logits at NEG_INF get exact 0."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=axis, keepdims=True)

    def backward(grad):
        if a.requires_grad:
            inner = (grad * out).sum(axis=axis, keepdims=True)
            a.accumulate_grad(out * (grad - inner))

    return _make(out, (a,), backward)


def layer_norm(a, gain, bias, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis, then apply a learned gain and bias."""
    a, gain, bias = _as_tensor(a), _as_tensor(gain), _as_tensor(bias)
    d = a.data.shape[-1]
    if gain.data.shape[-1] != d or bias.data.shape[-1] != d:
        raise ShapeError("layer_norm: gain/bias must match the last axis")
    mean = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mean) * inv_std
    data = gain.data * xhat + bias.data

    def backward(grad):
        if gain.requires_grad:
            gain.accumulate_grad(_unbroadcast(grad * xhat, gain.shape))
        if bias.requires_grad:
            bias.accumulate_grad(_unbroadcast(grad, bias.shape))
        if a.requires_grad:
            gxhat = grad * gain.data
            term = gxhat - gxhat.mean(axis=-1, keepdims=True) \
                - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
            a.accumulate_grad(term * inv_std)

    return _make(data, (a, gain, bias), backward)


def embedding_lookup(table, ids) -> Tensor:
    """Gather rows of a (rows, d) table by an integer id sequence."""
    table = _as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ShapeError("embedding_lookup: ids must be 1-D")
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise ShapeError(
            f"embedding_lookup: id out of range for table with "
            f"{table.data.shape[0]} rows")

    def backward(grad):
        if table.requires_grad:
            full = np.zeros_like(table.data)
            np.add.at(full, ids, grad)
            table.accumulate_grad(full)

    return _make(table.data[ids], (table,), backward)


def masked_fill(a, mask, value: float = NEG_INF) -> Tensor:
    """Replace entries where ``mask`` is true; gradient flows elsewhere."""
    a = _as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.data.shape:
        raise ShapeError(
            f"masked_fill: mask shape {mask.shape} != data shape {a.shape}")
    data = np.where(mask, value, a.data)

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(grad * ~mask)

    return _make(data, (a,), backward)


def cross_entropy(logits, target: int) -> Tensor:
    """Negative log-softmax of a 1-D logits vector at ``target``."""
    logits = _as_tensor(logits)
    if logits.data.ndim != 1:
        raise ShapeError("cross_entropy: logits must be 1-D")
    if not (0 <= target < logits.data.shape[0]):
        raise ShapeError("cross_entropy: target id out of range")
    m = logits.data.max()
    lse = m + np.log(np.exp(logits.data - m).sum())
    data = lse - logits.data[target]

    def backward(grad):
        if logits.requires_grad:
            probs = np.exp(logits.data - lse)
            probs[target] -= 1.0
            logits.accumulate_grad(grad * probs)

    return _make(data, (logits,), backward)


def tsum(a, axis=None) -> Tensor:
    a = _as_tensor(a)

    def backward(grad):
        if a.requires_grad:
            if axis is None:
                a.accumulate_grad(np.full_like(a.data, grad))
            else:
                a.accumulate_grad(np.broadcast_to(
                    np.expand_dims(grad, axis), a.shape).copy())

    return _make(a.data.sum(axis=axis), (a,), backward)


def tmean(a) -> Tensor:
    a = _as_tensor(a)

    def backward(grad):
        if a.requires_grad:
            a.accumulate_grad(np.full_like(a.data, grad / a.data.size))

    return _make(a.data.mean(), (a,), backward)


def gradient_check(fn, params, eps: float = 1e-4, sample_fraction_cutoff: int = 10_000,
                   seed: int = 0) -> float:
    """Central finite differences vs. the tape, over every coordinate.

    ``fn`` recomputes the scalar loss from the current parameter values;
    ``params`` maps names to tensors.  When the total coordinate count
    exceeds ``sample_fraction_cutoff`` a random 1% sample is checked.
    Returns the max of |g_fd - g_ad| / max(|g_fd|, |g_ad|, 1e-8).
    """
    params = dict(params)
    for p in params.values():
        p.zero_grad()
    loss = fn()
    if not np.isfinite(loss.data).all():
        raise DomainError("gradient_check: non-finite loss value")
    loss.backward()
    analytic = {name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for name, p in params.items()}

    total = sum(p.data.size for p in params.values())
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        size = flat.size
        if total > sample_fraction_cutoff:
            count = max(1, size // 100)
            coords = rng.choice(size, size=count, replace=False)
        else:
            coords = range(size)
        for idx in coords:
            original = flat[idx]
            flat[idx] = original + eps
            up = float(fn().data)
            flat[idx] = original - eps
            down = float(fn().data)
            flat[idx] = original
            if not (np.isfinite(up) and np.isfinite(down)):
                raise DomainError(
                    f"gradient_check: non-finite perturbation of {name}[{idx}]")
            g_fd = (up - down) / (2.0 * eps)
            g_ad = analytic[name].reshape(-1)[idx]
            err = abs(g_fd - g_ad) / max(abs(g_fd), abs(g_ad), 1e-8)
            worst = max(worst, err)
    return worst
