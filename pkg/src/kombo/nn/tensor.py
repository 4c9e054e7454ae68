"""Dense-tensor reverse-mode engine backed by numpy.

Only the primitives the model stack needs: elementwise arithmetic, matmul,
a few nonlinearities, reductions, shape surgery, indexing and embedding
lookup. Values are float64 by default (float32 selectable per tensor);
gradients always match the value dtype and shape.

Every op that could produce a non-finite value from finite inputs is
guarded: sigmoid uses the sign-split form, softmax-style code subtracts a
detached max before exp, and normalizations add an epsilon inside sqrt.
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy import special as _sp

from ..errors import ShapeError

DEFAULT_DTYPE = np.float64


class Rng:
    """Seeded, splittable counter-based generator (Philox).

    Identical seeds give identical streams on every platform. Child streams
    are derived by hashing the parent seed with a tag path, so concurrent
    consumers never share a stream by accident.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.gen = np.random.Generator(np.random.Philox(key=self.seed))

    def split(self, *tags) -> "Rng":
        path = "/".join(str(t) for t in tags)
        digest = hashlib.blake2b(f"{self.seed}/{path}".encode(), digest_size=8).digest()
        return Rng(int.from_bytes(digest, "little"))

    def normal(self, shape, std=1.0, dtype=DEFAULT_DTYPE):
        return self.gen.normal(0.0, std, size=shape).astype(dtype)

    def truncated_normal(self, shape, std=0.02, dtype=DEFAULT_DTYPE):
        """Normal(0, std) with resampling outside two standard deviations."""
        x = self.gen.normal(0.0, std, size=shape)
        bad = np.abs(x) > 2.0 * std
        while bad.any():
            x[bad] = self.gen.normal(0.0, std, size=int(bad.sum()))
            bad = np.abs(x) > 2.0 * std
        return x.astype(dtype)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size)

    def random(self, size=None):
        return self.gen.random(size=size)

    def choice(self, n, size, replace=False):
        return self.gen.choice(n, size=size, replace=replace)

    def shuffle(self, items: list) -> None:
        # Fisher-Yates on a python list, stable across numpy versions
        for i in range(len(items) - 1, 0, -1):
            j = int(self.gen.integers(0, i + 1))
            items[i], items[j] = items[j], items[i]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype if dtype is not None else None)
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(DEFAULT_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None

    # -- graph plumbing ----------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, grad=None) -> None:
        if not self.requires_grad:
            raise ShapeError("backward() on a tensor that does not require grad")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        if grad is None:
            grad = np.ones_like(self.data)
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, grad={'yes' if self.requires_grad else 'no'})"

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, index):
        return take(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape)

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)


class Parameter(Tensor):
    """Named trainable tensor."""

    __slots__ = ("name",)

    def __init__(self, data, name: str, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name

    def __repr__(self) -> str:
        return f"Parameter({self.name}, shape={self.shape})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- arithmetic --------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(out_data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data / b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(out_data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"matmul shapes {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2) if b.ndim > 1 else np.multiply.outer(g, b.data)
            a._accumulate(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g if a.ndim > 1 else np.multiply.outer(a.data, g)
            b._accumulate(_unbroadcast(gb, b.shape))

    return _make(out_data, (a, b), backward)


def power(a, exponent: float) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data ** exponent

    def backward(g):
        a._accumulate(g * exponent * a.data ** (exponent - 1.0))

    return _make(out_data, (a,), backward)


# -- nonlinearities -----------------------------------------------------------

def exp(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.exp(a.data)

    def backward(g):
        a._accumulate(g * out_data)

    return _make(out_data, (a,), backward)


def log(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.log(a.data)

    def backward(g):
        a._accumulate(g / a.data)

    return _make(out_data, (a,), backward)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.tanh(a.data)

    def backward(g):
        a._accumulate(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), backward)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    d = a.data
    out_data = np.empty_like(d)
    pos = d >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ez = np.exp(d[~pos])
    out_data[~pos] = ez / (1.0 + ez)

    def backward(g):
        a._accumulate(g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), backward)


_INV_SQRT_PI = 1.0 / np.sqrt(np.pi)


def erf(a) -> Tensor:
    a = _as_tensor(a)
    out_data = _sp.erf(a.data)

    def backward(g):
        a._accumulate(g * 2.0 * _INV_SQRT_PI * np.exp(-a.data * a.data))

    return _make(out_data, (a,), backward)


# -- reductions ---------------------------------------------------------------

def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape).copy())

    return _make(out_data, (a,), backward)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def max_detached(a, axis=-1, keepdims=True) -> Tensor:
    """Row maximum with no gradient; used to stabilize exp."""
    a = _as_tensor(a)
    return Tensor(a.data.max(axis=axis, keepdims=keepdims))


# -- shape surgery -------------------------------------------------------------

def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.reshape(shape)

    def backward(g):
        a._accumulate(g.reshape(a.shape))

    return _make(out_data, (a,), backward)


def swapaxes(a, ax1, ax2) -> Tensor:
    a = _as_tensor(a)
    out_data = np.swapaxes(a.data, ax1, ax2)

    def backward(g):
        a._accumulate(np.swapaxes(g, ax1, ax2))

    return _make(out_data, (a,), backward)


def concat(tensors, axis=0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(lo, hi)
                t._accumulate(g[tuple(index)])

    return _make(out_data, tuple(tensors), backward)


def stack(tensors, axis=0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out_data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accumulate(np.take(g, i, axis=axis))

    return _make(out_data, tuple(tensors), backward)


def take(a, index) -> Tensor:
    """General indexing; duplicate indices accumulate in the backward pass."""
    a = _as_tensor(a)
    out_data = a.data[index]

    def backward(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, index, g)
        a._accumulate(buf)

    return _make(out_data, (a,), backward)


def embedding(table, ids) -> Tensor:
    """Row lookup table[ids]; ids is an integer array of any shape."""
    ids = np.asarray(ids)
    return take(table, ids)


def repeat(a, repeats, axis) -> Tensor:
    """np.repeat with per-element counts along one axis."""
    a = _as_tensor(a)
    repeats_arr = np.asarray(repeats)
    out_data = np.repeat(a.data, repeats_arr, axis=axis)
    if repeats_arr.ndim == 0:
        counts = np.full(a.data.shape[axis], int(repeats_arr))
    else:
        counts = repeats_arr
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])

    def backward(g):
        seg = np.add.reduceat(np.moveaxis(g, axis, 0), offsets, axis=0)
        if (counts == 0).any():
            # reduceat misbehaves on empty segments; zero them explicitly
            seg[counts == 0] = 0.0
        a._accumulate(np.moveaxis(seg, 0, axis))

    return _make(out_data, (a,), backward)


def pad_axis(a, axis, before, after) -> Tensor:
    """Zero padding along one axis."""
    a = _as_tensor(a)
    width = [(0, 0)] * a.ndim
    width[axis] = (before, after)
    out_data = np.pad(a.data, width)

    def backward(g):
        index = [slice(None)] * g.ndim
        index[axis] = slice(before, g.shape[axis] - after)
        a._accumulate(g[tuple(index)])

    return _make(out_data, (a,), backward)
