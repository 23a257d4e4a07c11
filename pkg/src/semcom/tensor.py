"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations run eagerly on numpy arrays.  When a :class:`Tape` is active and
at least one input requires a gradient, the operation appends an entry to the
tape holding a closure that maps the output gradient to input gradients.
``Tape.gradient`` replays those entries in reverse order.

Example
-------
>>> w = Tensor([[1.0, 2.0]], requires_grad=True)
>>> with Tape() as tape:
...     y = (w * w).sum()
>>> tape.gradient(y, [w])[0]
array([[2., 4.]])
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ConfigurationError(ValueError):
    """An operation was configured with unsupported parameters."""


_ACTIVE_TAPES: list["Tape"] = []


@dataclass
class TapeEntry:
    kind: str
    inputs: tuple
    output: "Tensor"
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Ordered record of differentiable operations.

    Used as a context manager; nested tapes record independently.
    """

    def __init__(self):
        self.entries: list[TapeEntry] = []

    def __enter__(self):
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE_TAPES.remove(self)
        return False

    def record(self, kind, inputs, output, backward):
        output.node = len(self.entries)
        self.entries.append(TapeEntry(kind, tuple(inputs), output, backward))

    def gradient(self, target: "Tensor", sources: Sequence["Tensor"],
                 seed: np.ndarray | None = None) -> list[np.ndarray]:
        """Gradients of ``target`` with respect to each tensor in ``sources``.

        Sources that ``target`` does not depend on get a zero array.
        """
        grads: dict[int, np.ndarray] = {}
        if seed is None:
            seed = np.ones_like(target.data)
        grads[id(target)] = np.asarray(seed, dtype=np.float64)
        for entry in reversed(self.entries):
            g = grads.pop(id(entry.output), None)
            if g is None:
                continue
            in_grads = entry.backward(g)
            for inp, gi in zip(entry.inputs, in_grads):
                if gi is None or not isinstance(inp, Tensor) or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
            # keep gradients of sources that are themselves intermediate outputs
            if any(entry.output is s for s in sources):
                grads[id(entry.output)] = g
        return [grads.get(id(s), np.zeros_like(s.data)) for s in sources]


class Tensor:
    """Immutable dense float64 array that may participate in differentiation."""

    __slots__ = ("data", "requires_grad", "node")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64) if not isinstance(data, np.ndarray) \
            or data.dtype != np.float64 else data
        self.requires_grad = requires_grad
        self.node = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.item())

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(kind: str, inputs: Iterable, data: np.ndarray, backward) -> Tensor:
    inputs = tuple(inputs)
    out = Tensor(data)
    if _ACTIVE_TAPES and any(isinstance(t, Tensor) and t.requires_grad for t in inputs):
        out.requires_grad = True
        for tape in _ACTIVE_TAPES:
            tape.record(kind, inputs, out, backward)
    return out


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _make("add", (a, b), a.data + b.data,
                 lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _make("sub", (a, b), a.data - b.data,
                 lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _make("mul", (a, b), a.data * b.data,
                 lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    out = a.data / b.data
    return _make("div", (a, b), out,
                 lambda g: (unbroadcast(g / b.data, a.shape),
                            unbroadcast(-g * out / b.data, b.shape)))


def scale(x, c: float) -> Tensor:
    x = as_tensor(x)
    return _make("scale", (x,), x.data * c, lambda g: (g * c,))


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.data)
    return _make("sqrt", (x,), out, lambda g: (g * 0.5 / out,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = expit(x.data)
    return _make("sigmoid", (x,), out, lambda g: (g * out * (1.0 - out),))


def relu(x) -> Tensor:
    x = as_tensor(x)
    on = x.data > 0
    return _make("relu", (x,), np.where(on, x.data, 0.0), lambda g: (g * on,))


def masked_fill(x, mask: np.ndarray, value: float) -> Tensor:
    """Replace entries where ``mask`` is true with a constant."""
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    try:
        np.broadcast_shapes(mask.shape, x.shape)
    except ValueError:
        raise DimensionError(f"mask shape {mask.shape} does not broadcast to {x.shape}") from None
    out = np.where(mask, value, x.data)
    return _make("masked_fill", (x,), out,
                 lambda g: (unbroadcast(np.where(mask, 0.0, g), x.shape),))


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ---------------------------------------------------------------------------
# reductions and shape manipulation


def tsum(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make("sum", (x,), np.asarray(out), backward)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return scale(tsum(x, axis, keepdims), 1.0 / count)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return _make("reshape", (x,), x.data.reshape(shape), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None) -> Tensor:
    """Permute axes; the default swaps the last two."""
    x = as_tensor(x)
    if axes is None:
        axes = list(range(x.ndim))
        axes[-2], axes[-1] = axes[-1], axes[-2]
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _make("transpose", (x,), x.data.transpose(axes), lambda g: (g.transpose(inverse),))


def getitem(x, index) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return _make("getitem", (x,), x.data[index], backward)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: shapes {[t.shape for t in tensors]}: {exc}") from None
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _make("concat", tensors, out, lambda g: tuple(np.split(g, splits, axis=axis)))


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(f"matmul: batch axes of {a.shape} and {b.shape} differ") from None

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return _make("matmul", (a, b), a.data @ b.data, backward)


def dense(x, w, b=None) -> Tensor:
    """Affine map ``x @ w + b`` over the last axis of ``x``."""
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise DimensionError(f"dense: input {x.shape} incompatible with weight {w.shape}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, w.shape[0])
    out = x2 @ w.data
    inputs = [x, w]
    if b is not None:
        b = as_tensor(b)
        if b.shape != (w.shape[1],):
            raise DimensionError(f"dense: bias {b.shape} does not match weight {w.shape}")
        out = out + b.data
        inputs.append(b)

    def backward(g):
        g2 = g.reshape(-1, w.shape[1])
        grads = [(g2 @ w.data.T).reshape(x.shape), x2.T @ g2]
        if b is not None:
            grads.append(g2.sum(axis=0))
        return grads

    return _make("dense", inputs, out.reshape(lead + (w.shape[1],)), backward)


# ---------------------------------------------------------------------------
# neural-network primitives


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"softmax: axis {axis} invalid for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    return _make("softmax", (x,), out,
                 lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))


def layer_norm(x, gain, bias, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale and shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    if eps <= 0:
        raise ConfigurationError("layer_norm: eps must be positive")
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise DimensionError(f"layer_norm: gain {gain.shape}/bias {bias.shape} vs input {x.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std

    def backward(g):
        dxhat = g * gain.data
        dx = inv_std * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _make("layer_norm", (x, gain, bias), xhat * gain.data + bias.data, backward)


def conv1d(x, kernels, bias=None, padding: str = "same") -> Tensor:
    """Cross-correlation along the last axis with zero padding preserving length.

    ``x`` is ``[..., c_in, L]`` and ``kernels`` is ``[c_out, c_in, k]``.
    ``padding="causal"`` pads on the left only so output ``t`` reads inputs
    ``<= t``.
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    if kernels.ndim != 3 or x.ndim < 2 or x.shape[-2] != kernels.shape[1]:
        raise DimensionError(f"conv1d: input {x.shape} incompatible with kernels {kernels.shape}")
    c_out, c_in, k = kernels.shape
    if padding == "same":
        if k % 2 == 0:
            raise ConfigurationError(f"conv1d: same padding needs an odd kernel size, got {k}")
        left = (k - 1) // 2
    elif padding == "causal":
        left = k - 1
    else:
        raise ConfigurationError(f"conv1d: unknown padding {padding!r}")
    right = k - 1 - left
    length = x.shape[-1]
    pad_width = [(0, 0)] * (x.ndim - 1) + [(left, right)]
    xp = np.pad(x.data, pad_width)
    # windows: [..., c_in, L, k] -> columns [..., L, c_in * k]
    cols = np.moveaxis(sliding_window_view(xp, k, axis=-1), -3, -2)
    cols = cols.reshape(x.shape[:-2] + (length, c_in * k))
    wmat = kernels.data.reshape(c_out, c_in * k)
    out = cols @ wmat.T
    inputs = [x, kernels]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise DimensionError(f"conv1d: bias {bias.shape} does not match {c_out} outputs")
        out = out + bias.data
        inputs.append(bias)

    def backward(g):
        gt = np.swapaxes(g, -1, -2)  # [..., L, c_out]
        g2 = gt.reshape(-1, c_out)
        dk = (g2.T @ cols.reshape(-1, c_in * k)).reshape(kernels.shape)
        dcols = (gt @ wmat).reshape(x.shape[:-2] + (length, c_in, k))
        dxp = np.zeros_like(xp)
        for j in range(k):
            dxp[..., j:j + length] += np.swapaxes(dcols[..., j], -1, -2)
        grads = [dxp[..., left:left + length], dk]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return grads

    return _make("conv1d", inputs, np.swapaxes(out, -1, -2), backward)


def global_maxpool(x, axis: int = -1, mask: np.ndarray | None = None,
                   keepdims: bool = True) -> Tensor:
    """Maximum along ``axis``; entries where ``mask`` is false are ignored."""
    x = as_tensor(x)
    data = x.data
    if mask is not None:
        data = np.where(mask, data, -np.inf)
    idx = np.expand_dims(np.argmax(data, axis=axis), axis)
    out = np.take_along_axis(x.data, idx, axis=axis)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        full = np.zeros_like(x.data)
        np.put_along_axis(full, idx, g, axis=axis)
        return (full,)

    return _make("global_maxpool", (x,), out if keepdims else np.squeeze(out, axis), backward)


def cummax(x, axis: int = -1) -> Tensor:
    """Running maximum along ``axis`` (prefix max, so position t sees only <= t)."""
    x = as_tensor(x)
    moved = np.moveaxis(x.data, axis, -1)
    run = np.maximum.accumulate(moved, axis=-1)
    positions = np.arange(moved.shape[-1])
    arg = np.maximum.accumulate(np.where(moved == run, positions, 0), axis=-1)

    def backward(g):
        gm = np.moveaxis(g, axis, -1)
        full = np.zeros(moved.shape)
        flat_full = full.reshape(-1, moved.shape[-1])
        rows = np.repeat(np.arange(flat_full.shape[0]), moved.shape[-1])
        np.add.at(flat_full, (rows, arg.reshape(-1)), gm.reshape(-1))
        return (np.moveaxis(full, -1, axis),)

    return _make("cummax", (x,), np.moveaxis(run, -1, axis), backward)


def embedding_lookup(table, ids) -> Tensor:
    table = as_tensor(table)
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding_lookup: ids outside [0, {table.shape[0]})")

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (full,)

    return _make("embedding_lookup", (table,), table.data[ids], backward)


def cross_entropy_with_logits(logits, targets, mask=None) -> Tensor:
    """Mean negative log-likelihood of ``targets`` over positions where ``mask`` holds."""
    logits = as_tensor(logits)
    targets = np.asarray(targets)
    if logits.shape[:-1] != targets.shape:
        raise DimensionError(f"cross_entropy: logits {logits.shape} vs targets {targets.shape}")
    mask = np.ones(targets.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("cross_entropy: mask selects no positions")
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1))
    picked = np.take_along_axis(z, targets[..., None], axis=-1)[..., 0]
    nll = (lse - picked) * mask
    loss = nll.sum() / count

    def backward(g):
        p = np.exp(z - lse[..., None])
        np.put_along_axis(p, targets[..., None],
                          np.take_along_axis(p, targets[..., None], axis=-1) - 1.0, axis=-1)
        return (p * (mask[..., None] * (float(g) / count)),)

    return _make("cross_entropy", (logits,), np.asarray(loss), backward)


# ---------------------------------------------------------------------------
# finite-difference checking


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def numeric_gradient(fn: Callable[[], Tensor], x: Tensor, step: float = 1e-5,
                     indices=None) -> np.ndarray:
    """Central-difference gradient of scalar ``fn()`` w.r.t. entries of ``x``.

    ``x.data`` is perturbed in place and restored.  With ``indices`` only
    those flat positions are evaluated (others stay zero).
    """
    if not x.data.flags.c_contiguous:
        x.data = np.ascontiguousarray(x.data)
    grad = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size) if indices is None else indices:
        orig = flat[i]
        flat[i] = orig + step
        up = float(fn().data)
        flat[i] = orig - step
        down = float(fn().data)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * step)
    return grad


def gradcheck(fn: Callable[..., Tensor], inputs: Sequence[Tensor], step: float = 1e-5,
              max_entries: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Largest relative error between tape and finite-difference gradients.

    ``fn(*inputs)`` must return a scalar Tensor.  When ``max_entries`` is set,
    at most that many randomly chosen entries of each input are perturbed and
    the comparison is restricted to them.
    """
    for t in inputs:
        t.requires_grad = True
    with Tape() as tape:
        out = fn(*inputs)
    analytic = tape.gradient(out, list(inputs))
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for t, ga in zip(inputs, analytic):
        idx = None
        if max_entries is not None and t.size > max_entries:
            idx = rng.choice(t.size, size=max_entries, replace=False)
        gn = numeric_gradient(lambda: fn(*inputs), t, step, idx)
        if idx is not None:
            ga = ga.reshape(-1)[idx]
            gn = gn.reshape(-1)[idx]
        worst = max(worst, relative_error(ga, gn))
    return worst
