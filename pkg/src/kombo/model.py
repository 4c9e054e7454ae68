"""The subcharacter combination/restoration model.

Pipeline over a length-N id grid (tokens_per_char slots per character,
M = N / tokens_per_char characters):

  embed          N x D     token rows + learned positions
  contextualize  N x D     local transformer blocks, then a GRU
  merge          M x D     slot-group sums per role; onset+nucleus summed
                           ("body"), coda kept as a second row; a depthwise
                           two-row convolution fuses the rows per character
  encode_stack   M x D     main transformer stack (position 0 = CLS row)
  restore        N x D     repeat character rows back onto the slot grid,
                           U-Net style residuals, GRU or linear smoothing

Every ablation is a config switch: contextualization bypass, merge bypass,
elementwise merge without the two-row convolution, alternative downsamplers
(attention or linear pooling), restoration cell/hierarchy/residual choices,
and the convolution kernel set.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AlignmentError, ConfigError, ShapeError, VocabError
from .hangul import UnitScheme
from .nn import tensor as T
from .nn.layers import (Affine, ConvFuse, GruLayer, ParamStore,
                        TransformerBlock, cross_entropy, softmax)
from .nn.tensor import Rng, Tensor
from .tokenizer import TokenSequence

DOWNSAMPLERS = ("none", "attention_pool", "linear_pool")
RESTORE_CELLS = ("gru", "linear")


@dataclass(frozen=True)
class MergeSpec:
    """Kernel set for the two-row fusing convolution; heights are always 2."""

    kernels: tuple[tuple[int, int], ...] = ((2, 1),)

    def widths(self) -> list[int]:
        return [w for _, w in self.kernels]

    def validate(self) -> None:
        for h, w in self.kernels:
            if h != 2:
                raise ConfigError(f"kernel height must be 2, got {h}")
            if w < 1:
                raise ConfigError(f"kernel width must be positive, got {w}")


@dataclass(frozen=True)
class RestorationSpec:
    cell: str = "gru"
    hierarchical: bool = True
    residual: bool = True

    def validate(self) -> None:
        if self.cell not in RESTORE_CELLS:
            raise ConfigError(f"unknown restoration cell {self.cell!r}")


@dataclass(frozen=True)
class Ablations:
    no_contextualization: bool = False
    no_merge: bool = False
    no_jongsung_addition: bool = False
    alt_downsample: str = "none"

    def validate(self) -> None:
        if self.alt_downsample not in DOWNSAMPLERS:
            raise ConfigError(f"unknown downsampler {self.alt_downsample!r}")


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 128
    layers: int = 4
    local_layers: int = 2
    n_heads: int = 4
    scheme: UnitScheme = UnitScheme.JAMO
    vocab_size: int = 73
    max_len: int = 192
    merge: MergeSpec = field(default_factory=MergeSpec)
    restore: RestorationSpec = field(default_factory=RestorationSpec)
    ablations: Ablations = field(default_factory=Ablations)
    n_classes: int = 2
    bidirectional_context: bool = False
    dtype: str = "float64"

    def validate(self) -> None:
        if self.dim % self.n_heads != 0:
            raise ConfigError(f"dim {self.dim} not divisible by {self.n_heads} heads")
        if self.max_len % self.scheme.tokens_per_char != 0:
            raise ConfigError(f"max_len {self.max_len} not on the "
                              f"{self.scheme.tokens_per_char}-slot grid")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError(f"unknown dtype {self.dtype!r}")
        self.merge.validate()
        self.restore.validate()
        self.ablations.validate()
        uses_grid_merge = (not self.ablations.no_merge
                           and self.ablations.alt_downsample == "none")
        if uses_grid_merge and not self.merge.kernels:
            raise ConfigError("empty kernel set without no_merge")
        if (self.ablations.alt_downsample != "none" and not self.ablations.no_merge
                and self.restore.hierarchical):
            raise ConfigError("hierarchical restoration needs the two-row merge "
                              "intermediates, which this downsampler does not produce")

    @property
    def np_dtype(self):
        return np.float64 if self.dtype == "float64" else np.float32


@dataclass
class MergeResult:
    merged: Tensor            # (B, M, D)
    body: Tensor              # (B, M, D) onset + nucleus sums
    coda: Tensor              # (B, M, D) coda sums
    pair_seq: Tensor          # (B, 2M, D) per-character [body, coda] rows


@dataclass
class ForwardResult:
    mlm_logits: Tensor                  # (B, N, |V|)
    cls_logits: Tensor                  # (B, n_classes)
    embedded: Tensor | None = None
    contextualized: Tensor | None = None
    merge: MergeResult | None = None
    stacked: Tensor | None = None
    restored: Tensor | None = None


class KomboModel:
    """Built model; immutable during inference, parameters in self.store."""

    def __init__(self, config: ModelConfig, rng: Rng):
        config.validate()
        self.config = config
        self.store = ParamStore(dtype=config.np_dtype)
        c, store = config, self.store
        abl = c.ablations

        self.token_embedding = store.add(
            "embedding.token", rng.split("emb").truncated_normal((c.vocab_size, c.dim)))
        self.position_embedding = store.add(
            "embedding.position", rng.split("pos").truncated_normal((c.max_len, c.dim)))

        self.local_blocks: list[TransformerBlock] = []
        self.context_gru = None
        self.context_gru_rev = None
        if not abl.no_contextualization:
            self.local_blocks = [
                TransformerBlock(store, f"local.{i}", c.dim, c.n_heads, rng.split("local", i))
                for i in range(c.local_layers)
            ]
            self.context_gru = GruLayer(store, "context.gru", c.dim, rng.split("ctx"))
            if c.bidirectional_context:
                self.context_gru_rev = GruLayer(store, "context.gru_rev", c.dim, rng.split("ctxr"))

        self.conv = None
        self.pool_query = None
        self.pool_affine = None
        if not abl.no_merge:
            if abl.alt_downsample == "attention_pool":
                self.pool_query = store.add("pool.query", rng.split("pq").truncated_normal((c.dim,)))
            elif abl.alt_downsample == "linear_pool":
                self.pool_affine = Affine(store, "pool.linear",
                                          c.scheme.tokens_per_char * c.dim, c.dim, rng.split("pl"))
            elif not abl.no_jongsung_addition:
                self.conv = ConvFuse(store, "merge.conv", c.dim, c.merge.widths(), rng.split("conv"))

        self.blocks = [
            TransformerBlock(store, f"stack.{i}", c.dim, c.n_heads, rng.split("stack", i))
            for i in range(c.layers)
        ]

        self.restore_cells: list = []
        if not abl.no_merge:
            n_stages = 2 if c.restore.hierarchical else 1
            for s in range(n_stages):
                if c.restore.cell == "gru":
                    self.restore_cells.append(GruLayer(store, f"restore.{s}.gru", c.dim, rng.split("rs", s)))
                else:
                    self.restore_cells.append(Affine(store, f"restore.{s}.linear", c.dim, c.dim, rng.split("rs", s)))

        self.mlm_head = Affine(store, "head.mlm", c.dim, c.vocab_size, rng.split("mlm"))
        self.pooler = Affine(store, "head.pooler", c.dim, c.dim, rng.split("pooler"))
        self.cls_head = Affine(store, "head.cls", c.dim, c.n_classes, rng.split("cls"))

    # -- pipeline stages -----------------------------------------------------

    def _lift(self, ids) -> tuple[np.ndarray, bool]:
        if isinstance(ids, TokenSequence):
            ids = ids.ids
        arr = np.asarray(ids, dtype=np.int64)
        batched = arr.ndim == 2
        if not batched:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise ShapeError(f"ids must be rank 1 or 2, got {arr.ndim}")
        return arr, batched

    def embed(self, ids) -> Tensor:
        """Token row lookup plus learned positional rows."""
        arr, _ = self._lift(ids)
        if arr.size and (arr.min() < 0 or arr.max() >= self.config.vocab_size):
            raise VocabError(f"id outside vocabulary of {self.config.vocab_size}")
        n = arr.shape[1]
        if n > self.config.max_len:
            raise ShapeError(f"sequence length {n} exceeds max_len {self.config.max_len}")
        tok = T.embedding(self.token_embedding, arr)
        pos = T.embedding(self.position_embedding, np.arange(n))
        return T.add(tok, pos)

    def contextualize(self, e: Tensor) -> Tensor:
        if self.config.ablations.no_contextualization:
            return e
        x = e
        for blk in self.local_blocks:
            x = blk(x)
        out = self.context_gru(x)
        if self.context_gru_rev is not None:
            rev = self.context_gru_rev(x[:, ::-1, :])
            out = T.add(out, rev[:, ::-1, :])
        return out

    def _char_grid(self, h: Tensor) -> Tensor:
        B, N, D = h.shape
        tpc = self.config.scheme.tokens_per_char
        if N % tpc != 0:
            raise AlignmentError(f"length {N} not divisible by {tpc}")
        return T.reshape(h, (B, N // tpc, tpc, D))

    def merge_characters(self, h: Tensor) -> MergeResult:
        """Combine every character's slot rows into one row."""
        cfg = self.config
        cw, vw, fw = cfg.scheme.group_sizes
        grid = self._char_grid(h)
        B, M, tpc, D = grid.shape
        onset = T.tsum(grid[:, :, 0:cw, :], axis=2)
        nucleus = T.tsum(grid[:, :, cw:cw + vw, :], axis=2)
        coda = T.tsum(grid[:, :, cw + vw:tpc, :], axis=2)
        body = T.add(onset, nucleus)
        pair_seq = T.reshape(T.stack([body, coda], axis=2), (B, 2 * M, D))
        if cfg.ablations.no_jongsung_addition:
            merged = T.add(body, coda)
        else:
            merged = self.conv(body, coda)
        return MergeResult(merged, body, coda, pair_seq)

    def alt_downsample(self, h: Tensor) -> Tensor:
        """Attention or linear pooling over each character's slot rows."""
        method = self.config.ablations.alt_downsample
        grid = self._char_grid(h)
        B, M, tpc, D = grid.shape
        if method == "attention_pool":
            scores = T.mul(T.matmul(grid, self.pool_query), 1.0 / np.sqrt(D))  # (B,M,tpc)
            weights = softmax(scores, axis=-1)
            return T.tsum(T.mul(grid, T.reshape(weights, (B, M, tpc, 1))), axis=2)
        if method == "linear_pool":
            return self.pool_affine(T.reshape(grid, (B, M, tpc * D)))
        raise ConfigError(f"no alternative downsampler configured ({method})")

    def encode_stack(self, x: Tensor) -> Tensor:
        for blk in self.blocks:
            x = blk(x)
        return x

    def restore(self, stacked: Tensor, merge: MergeResult | None, h: Tensor) -> Tensor:
        """Upsample character rows back onto the slot grid."""
        cfg = self.config
        if cfg.ablations.no_merge:
            return stacked
        cw, vw, fw = cfg.scheme.group_sizes
        B, M, D = stacked.shape
        if cfg.restore.hierarchical:
            if merge is None:
                raise ConfigError("hierarchical restoration without merge intermediates")
            mid_in = T.repeat(stacked, 2, axis=1)                       # (B, 2M, D)
            if cfg.restore.residual:
                mid_in = T.add(mid_in, merge.pair_seq)
            mid = self._restore_cell(0, mid_in)
            counts = np.tile([cw + vw, fw], M)
            out_in = T.repeat(mid, counts, axis=1)                      # (B, N, D)
            if cfg.restore.residual:
                out_in = T.add(out_in, h)
            return self._restore_cell(1, out_in)
        rep = T.repeat(stacked, cfg.scheme.tokens_per_char, axis=1)     # (B, N, D)
        if cfg.restore.residual:
            rep = T.add(rep, h)
        return self._restore_cell(0, rep)

    def _restore_cell(self, stage: int, x: Tensor) -> Tensor:
        return self.restore_cells[stage](x)

    def forward(self, ids, return_intermediates: bool = False) -> ForwardResult:
        arr, _ = self._lift(ids)
        abl = self.config.ablations
        e = self.embed(arr)
        h = self.contextualize(e)
        merge = None
        if abl.no_merge:
            stacked = self.encode_stack(h)
            restored = stacked
        elif abl.alt_downsample != "none":
            stacked = self.encode_stack(self.alt_downsample(h))
            restored = self.restore(stacked, None, h)
        else:
            merge = self.merge_characters(h)
            stacked = self.encode_stack(merge.merged)
            restored = self.restore(stacked, merge, h)
        mlm_logits = self.mlm_head(restored)
        pooled = T.tanh(self.pooler(stacked[:, 0, :]))
        cls_logits = self.cls_head(pooled)
        if return_intermediates:
            return ForwardResult(mlm_logits, cls_logits, e, h, merge, stacked, restored)
        return ForwardResult(mlm_logits, cls_logits)

    def losses(self, ids, mlm_targets, cls_labels=None, ignore_id: int = -100):
        """(mlm_loss, cls_loss, n_masked); cls_loss is zero when no labels given."""
        result = self.forward(ids)
        mlm_loss, n_used = cross_entropy(result.mlm_logits, mlm_targets, ignore_id)
        if cls_labels is None:
            return mlm_loss, Tensor(np.zeros(())), n_used
        cls_loss, _ = cross_entropy(result.cls_logits, np.asarray(cls_labels))
        return mlm_loss, cls_loss, n_used

    def parameters(self):
        return list(self.store)


@dataclass
class ParamCountReport:
    total: int
    by_component: dict[str, int]
    embedding_table: int
    embedding_rows: int

    @property
    def embedding_share(self) -> float:
        return self.embedding_table / self.total


def param_count(config: ModelConfig) -> ParamCountReport:
    """Exact trainable value count with a per-component breakdown."""
    model = KomboModel(config, Rng(0))
    by_component: dict[str, int] = {}
    for name, p in model.store.items():
        component = name.split(".")[0]
        by_component[component] = by_component.get(component, 0) + p.data.size
    total = model.store.n_values()
    return ParamCountReport(
        total=total,
        by_component=by_component,
        embedding_table=model.token_embedding.data.size,
        embedding_rows=config.vocab_size,
    )


def row_share(rows: int, reference_rows: int) -> float:
    """Embedding row count as a fraction of a reference table of equal width."""
    return rows / reference_rows


def table6_variants() -> dict[str, RestorationSpec]:
    """The six restoration settings: cell x {plain, hierarchical, +residual}."""
    out = {}
    for cell in ("linear", "gru"):
        out[cell] = RestorationSpec(cell=cell, hierarchical=False, residual=False)
        out[f"{cell}+hr"] = RestorationSpec(cell=cell, hierarchical=True, residual=False)
        out[f"{cell}+hr+rc"] = RestorationSpec(cell=cell, hierarchical=True, residual=True)
    return out


def table3_variants(base: ModelConfig) -> dict[str, ModelConfig]:
    """Ablation rows constructible from config alone."""
    variants = {
        "full": base,
        "no_contextualization": replace(base, ablations=replace(base.ablations, no_contextualization=True)),
        "no_merge": replace(base, ablations=replace(base.ablations, no_merge=True)),
        "no_jongsung_addition": replace(base, ablations=replace(base.ablations, no_jongsung_addition=True)),
        "kernel_2x2": replace(base, merge=MergeSpec(((2, 2),))),
        "kernel_2x3": replace(base, merge=MergeSpec(((2, 3),))),
        "kernel_2x1_2x2": replace(base, merge=MergeSpec(((2, 1), (2, 2)))),
        "attention_pool": replace(base, ablations=replace(base.ablations, alt_downsample="attention_pool"),
                                  restore=replace(base.restore, hierarchical=False)),
        "linear_pool": replace(base, ablations=replace(base.ablations, alt_downsample="linear_pool"),
                               restore=replace(base.restore, hierarchical=False)),
    }
    return variants
