"""Neural layers: affine, layer norm, pre-norm transformer block, GRU,
two-row depthwise convolution fusing, and the MLM/NSP losses.

Layer classes only own parameters; all math flows through the autograd
primitives in tensor.py so every backward pass is exact by construction.
Sequences are batched (B, T, D) throughout.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError
from . import tensor as T
from .tensor import Parameter, Rng, Tensor

INIT_STD = 0.02


class ParamStore:
    """Flat registry of named parameters; names are unique and ordered."""

    def __init__(self, dtype=np.float64):
        self.dtype = dtype
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, data: np.ndarray) -> Parameter:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        p = Parameter(np.asarray(data, dtype=self.dtype), name=name)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def items(self):
        return self._params.items()

    def __len__(self) -> int:
        return len(self._params)

    def zero_grad(self) -> None:
        for p in self:
            p.zero_grad()

    def n_values(self) -> int:
        return sum(p.data.size for p in self)


def affine(x, W, b=None) -> Tensor:
    """y = x W + b."""
    y = T.matmul(x, W)
    return y if b is None else T.add(y, b)


def layer_norm(x, gain, bias, eps: float = 1e-12) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then scale/shift."""
    m = T.tmean(x, axis=-1, keepdims=True)
    centered = T.add(x, T.mul(m, -1.0))
    var = T.tmean(T.mul(centered, centered), axis=-1, keepdims=True)
    inv = T.power(T.add(var, eps), -0.5)
    return T.add(T.mul(T.mul(centered, inv), gain), bias)


_SQRT1_2 = float(1.0 / np.sqrt(2.0))


def gelu(x) -> Tensor:
    return T.mul(T.mul(x, 0.5), T.add(T.erf(T.mul(x, _SQRT1_2)), 1.0))


def softmax(x, axis: int = -1) -> Tensor:
    shifted = T.add(x, T.mul(T.max_detached(x, axis=axis, keepdims=True), -1.0))
    e = T.exp(shifted)
    return T.div(e, T.tsum(e, axis=axis, keepdims=True))


def log_softmax(x, axis: int = -1) -> Tensor:
    shifted = T.add(x, T.mul(T.max_detached(x, axis=axis, keepdims=True), -1.0))
    lse = T.log(T.tsum(T.exp(shifted), axis=axis, keepdims=True))
    return T.add(shifted, T.mul(lse, -1.0))


class Affine:
    def __init__(self, store: ParamStore, name: str, d_in: int, d_out: int, rng: Rng):
        self.W = store.add(f"{name}.weight", rng.truncated_normal((d_in, d_out), INIT_STD))
        self.b = store.add(f"{name}.bias", np.zeros(d_out))

    def __call__(self, x) -> Tensor:
        return affine(x, self.W, self.b)


class LayerNorm:
    def __init__(self, store: ParamStore, name: str, dim: int):
        self.gain = store.add(f"{name}.gain", np.ones(dim))
        self.bias = store.add(f"{name}.bias", np.zeros(dim))

    def __call__(self, x) -> Tensor:
        return layer_norm(x, self.gain, self.bias)


def multi_head_attention(x, n_heads: int, wq: Affine, wk: Affine, wv: Affine, wo: Affine,
                         return_weights: bool = False):
    B, N, D = x.shape
    if D % n_heads != 0:
        raise ConfigError(f"width {D} not divisible by {n_heads} heads")
    dh = D // n_heads

    def heads(t):
        return T.swapaxes(T.reshape(t, (B, N, n_heads, dh)), 1, 2)  # (B,H,N,dh)

    q, k, v = heads(wq(x)), heads(wk(x)), heads(wv(x))
    scores = T.mul(T.matmul(q, T.swapaxes(k, -1, -2)), 1.0 / np.sqrt(dh))
    weights = softmax(scores, axis=-1)
    ctx = T.matmul(weights, v)  # (B,H,N,dh)
    out = wo(T.reshape(T.swapaxes(ctx, 1, 2), (B, N, D)))
    if return_weights:
        return out, weights
    return out


class TransformerBlock:
    """Pre-norm self-attention + feed-forward, both with residuals."""

    def __init__(self, store: ParamStore, name: str, dim: int, n_heads: int, rng: Rng,
                 ff_mult: int = 4):
        self.n_heads = n_heads
        self.ln1 = LayerNorm(store, f"{name}.ln1", dim)
        self.wq = Affine(store, f"{name}.attn.q", dim, dim, rng.split("q"))
        self.wk = Affine(store, f"{name}.attn.k", dim, dim, rng.split("k"))
        self.wv = Affine(store, f"{name}.attn.v", dim, dim, rng.split("v"))
        self.wo = Affine(store, f"{name}.attn.o", dim, dim, rng.split("o"))
        self.ln2 = LayerNorm(store, f"{name}.ln2", dim)
        self.ff1 = Affine(store, f"{name}.ff1", dim, ff_mult * dim, rng.split("ff1"))
        self.ff2 = Affine(store, f"{name}.ff2", ff_mult * dim, dim, rng.split("ff2"))

    def __call__(self, x, return_weights: bool = False):
        attn = multi_head_attention(self.ln1(x), self.n_heads,
                                    self.wq, self.wk, self.wv, self.wo,
                                    return_weights=return_weights)
        if return_weights:
            attn, weights = attn
        x = T.add(x, attn)
        x = T.add(x, self.ff2(gelu(self.ff1(self.ln2(x)))))
        if return_weights:
            return x, weights
        return x


class GruLayer:
    """Gated recurrent unit, left to right over axis 1 of (B, T, D).

    Gates follow the classic formulation: the reset gate multiplies the
    previous state before the candidate projection, and the update gate
    keeps the previous state (h_t = z*h_{t-1} + (1-z)*n_t).
    """

    def __init__(self, store: ParamStore, name: str, dim: int, rng: Rng):
        self.dim = dim
        self.w_gates = store.add(f"{name}.w_gates", rng.truncated_normal((dim, 2 * dim), INIT_STD))
        self.u_gates = store.add(f"{name}.u_gates", rng.truncated_normal((dim, 2 * dim), INIT_STD))
        self.b_gates = store.add(f"{name}.b_gates", np.zeros(2 * dim))
        self.w_cand = store.add(f"{name}.w_cand", rng.truncated_normal((dim, dim), INIT_STD))
        self.u_cand = store.add(f"{name}.u_cand", rng.truncated_normal((dim, dim), INIT_STD))
        self.b_cand = store.add(f"{name}.b_cand", np.zeros(dim))

    def __call__(self, x, h0: Tensor | None = None) -> Tensor:
        B, L, D = x.shape
        if D != self.dim:
            raise ShapeError(f"GRU width {self.dim} got input width {D}")
        xg = T.add(T.matmul(x, self.w_gates), self.b_gates)       # (B,L,2D)
        xc = T.add(T.matmul(x, self.w_cand), self.b_cand)         # (B,L,D)
        h = h0 if h0 is not None else Tensor(np.zeros((B, D), dtype=x.dtype))
        outs = []
        for t in range(L):
            gates = T.sigmoid(T.add(xg[:, t, :], T.matmul(h, self.u_gates)))
            z, r = gates[:, :D], gates[:, D:]
            n = T.tanh(T.add(xc[:, t, :], T.matmul(T.mul(r, h), self.u_cand)))
            h = T.add(T.mul(z, h), T.mul(T.add(T.mul(z, -1.0), 1.0), n))
            outs.append(h)
        return T.stack(outs, axis=1)


class ConvFuse:
    """Collapse a two-row character grid to one row per character.

    Each kernel is depthwise: for every channel, a (2 x width) filter slides
    along the character axis with stride one and symmetric zero padding, so
    the output keeps M columns while the two rows fuse into one. Multiple
    kernels are averaged, which is the pooling role; with a single (2x1)
    kernel the average is the identity.
    """

    def __init__(self, store: ParamStore, name: str, dim: int,
                 kernel_widths: list[int], rng: Rng):
        if not kernel_widths:
            raise ConfigError("at least one kernel is required")
        self.widths = list(kernel_widths)
        self.weights = []
        self.biases = []
        for i, w in enumerate(kernel_widths):
            self.weights.append(store.add(f"{name}.k{i}.weight",
                                          rng.split(i).truncated_normal((dim, 2, w), INIT_STD)))
            self.biases.append(store.add(f"{name}.k{i}.bias", np.zeros(dim)))

    def __call__(self, body, coda) -> Tensor:
        B, M, D = body.shape
        maps = []
        for width, weight, bias in zip(self.widths, self.weights, self.biases):
            if width > M:
                raise ConfigError(f"kernel width {width} exceeds {M} characters")
            left = (width - 1) // 2
            right = width - 1 - left
            rows = (body, coda) if width == 1 else (
                T.pad_axis(body, 1, left, right), T.pad_axis(coda, 1, left, right))
            terms = None
            for r, row in enumerate(rows):
                for j in range(width):
                    piece = row if width == 1 else row[:, j:j + M, :]
                    term = T.mul(piece, weight[:, r, j])
                    terms = term if terms is None else T.add(terms, term)
            maps.append(T.add(terms, bias))
        out = maps[0]
        for extra in maps[1:]:
            out = T.add(out, extra)
        return T.mul(out, 1.0 / len(maps))


def cross_entropy(logits: Tensor, targets: np.ndarray, ignore_id: int = -100):
    """Mean negative log-likelihood over non-ignored positions.

    Returns (loss, n_used); when every position is ignored the loss is an
    exact zero and n_used == 0.
    """
    flat_logits = T.reshape(logits, (-1, logits.shape[-1]))
    flat_targets = np.asarray(targets).reshape(-1)
    keep = flat_targets != ignore_id
    n_used = int(keep.sum())
    if n_used == 0:
        return Tensor(np.asarray(0.0, dtype=logits.dtype)), 0
    rows = np.nonzero(keep)[0]
    ls = log_softmax(flat_logits, axis=-1)
    picked = ls[(rows, flat_targets[rows])]
    loss = T.mul(T.tsum(picked), -1.0 / n_used)
    return loss, n_used
