"""Run configuration and its canonical flat-text form.

The on-disk format is one dotted key per line, `key = value`, sorted by
key. Serialization is canonical (parse . serialize == identity), which lets
a checkpoint echo its configuration byte-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .hangul import UnitScheme
from .model import Ablations, MergeSpec, ModelConfig, RestorationSpec
from .objectives import MaskStrategy, ObjectiveConfig


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 5e-5
    warmup_steps: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01


@dataclass(frozen=True)
class PathsConfig:
    corpus: str = ""
    vocab: str = ""
    checkpoint_dir: str = ""


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    batch_size: int = 16
    total_steps: int = 100
    seq_len: int = 192
    seed: int = 0
    checkpoint_every: int = 0  # 0 = final checkpoint only
    log_every: int = 1

    def validate(self) -> None:
        self.model.validate()
        self.objective.validate()
        if self.seq_len % self.model.scheme.tokens_per_char != 0:
            raise ConfigError(f"seq_len {self.seq_len} not on the "
                              f"{self.model.scheme.tokens_per_char}-slot grid")
        if self.seq_len > self.model.max_len:
            raise ConfigError(f"seq_len {self.seq_len} exceeds max_len {self.model.max_len}")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_flat_dict(cfg: RunConfig) -> dict[str, str]:
    m, o, q, p = cfg.model, cfg.objective, cfg.optimizer, cfg.paths
    return {
        "batch_size": _fmt(cfg.batch_size),
        "checkpoint_every": _fmt(cfg.checkpoint_every),
        "log_every": _fmt(cfg.log_every),
        "model.bidirectional_context": _fmt(m.bidirectional_context),
        "model.dim": _fmt(m.dim),
        "model.dtype": m.dtype,
        "model.layers": _fmt(m.layers),
        "model.local_layers": _fmt(m.local_layers),
        "model.max_len": _fmt(m.max_len),
        "model.n_classes": _fmt(m.n_classes),
        "model.n_heads": _fmt(m.n_heads),
        "model.scheme": m.scheme.label,
        "model.vocab_size": _fmt(m.vocab_size),
        "model.ablations.alt_downsample": m.ablations.alt_downsample,
        "model.ablations.no_contextualization": _fmt(m.ablations.no_contextualization),
        "model.ablations.no_jongsung_addition": _fmt(m.ablations.no_jongsung_addition),
        "model.ablations.no_merge": _fmt(m.ablations.no_merge),
        "model.merge.kernels": ",".join(f"{h}x{w}" for h, w in m.merge.kernels),
        "model.restore.cell": m.restore.cell,
        "model.restore.hierarchical": _fmt(m.restore.hierarchical),
        "model.restore.residual": _fmt(m.restore.residual),
        "objective.action_split": ",".join(repr(x) for x in o.action_split),
        "objective.mask_ratio": _fmt(o.mask_ratio),
        "objective.nsp_negative_rate": _fmt(o.nsp_negative_rate),
        "objective.strategy": o.strategy.value,
        "optimizer.beta1": _fmt(q.beta1),
        "optimizer.beta2": _fmt(q.beta2),
        "optimizer.eps": _fmt(q.eps),
        "optimizer.lr": _fmt(q.lr),
        "optimizer.warmup_steps": _fmt(q.warmup_steps),
        "optimizer.weight_decay": _fmt(q.weight_decay),
        "paths.checkpoint_dir": p.checkpoint_dir,
        "paths.corpus": p.corpus,
        "paths.vocab": p.vocab,
        "seed": _fmt(cfg.seed),
        "seq_len": _fmt(cfg.seq_len),
        "total_steps": _fmt(cfg.total_steps),
    }


def to_canonical(cfg: RunConfig) -> str:
    flat = to_flat_dict(cfg)
    return "\n".join(f"{k} = {flat[k]}" for k in sorted(flat)) + "\n"


def _parse_bool(s: str) -> bool:
    if s not in ("true", "false"):
        raise ConfigError(f"expected true/false, got {s!r}")
    return s == "true"


def _parse_kernels(s: str) -> tuple[tuple[int, int], ...]:
    kernels = []
    for item in s.split(","):
        h, _, w = item.partition("x")
        kernels.append((int(h), int(w)))
    return tuple(kernels)


def from_flat_dict(flat: dict[str, str]) -> RunConfig:
    base = to_flat_dict(RunConfig())
    unknown = set(flat) - set(base)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = {**base, **flat}
    g = merged.__getitem__
    model = ModelConfig(
        dim=int(g("model.dim")),
        layers=int(g("model.layers")),
        local_layers=int(g("model.local_layers")),
        n_heads=int(g("model.n_heads")),
        scheme=UnitScheme.from_label(g("model.scheme")),
        vocab_size=int(g("model.vocab_size")),
        max_len=int(g("model.max_len")),
        merge=MergeSpec(_parse_kernels(g("model.merge.kernels"))),
        restore=RestorationSpec(
            cell=g("model.restore.cell"),
            hierarchical=_parse_bool(g("model.restore.hierarchical")),
            residual=_parse_bool(g("model.restore.residual"))),
        ablations=Ablations(
            no_contextualization=_parse_bool(g("model.ablations.no_contextualization")),
            no_merge=_parse_bool(g("model.ablations.no_merge")),
            no_jongsung_addition=_parse_bool(g("model.ablations.no_jongsung_addition")),
            alt_downsample=g("model.ablations.alt_downsample")),
        n_classes=int(g("model.n_classes")),
        bidirectional_context=_parse_bool(g("model.bidirectional_context")),
        dtype=g("model.dtype"),
    )
    split = tuple(float(x) for x in g("objective.action_split").split(","))
    if len(split) != 3:
        raise ConfigError("objective.action_split needs three values")
    objective = ObjectiveConfig(
        mask_ratio=float(g("objective.mask_ratio")),
        action_split=split,
        strategy=MaskStrategy(g("objective.strategy")),
        nsp_negative_rate=float(g("objective.nsp_negative_rate")),
    )
    optimizer = OptimizerConfig(
        lr=float(g("optimizer.lr")),
        warmup_steps=int(g("optimizer.warmup_steps")),
        beta1=float(g("optimizer.beta1")),
        beta2=float(g("optimizer.beta2")),
        eps=float(g("optimizer.eps")),
        weight_decay=float(g("optimizer.weight_decay")),
    )
    paths = PathsConfig(
        corpus=g("paths.corpus"),
        vocab=g("paths.vocab"),
        checkpoint_dir=g("paths.checkpoint_dir"),
    )
    return RunConfig(
        model=model, objective=objective, optimizer=optimizer, paths=paths,
        batch_size=int(g("batch_size")),
        total_steps=int(g("total_steps")),
        seq_len=int(g("seq_len")),
        seed=int(g("seed")),
        checkpoint_every=int(g("checkpoint_every")),
        log_every=int(g("log_every")),
    )


def parse_config_text(text: str) -> RunConfig:
    flat: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        flat[key.strip()] = value.strip()
    return from_flat_dict(flat)


def load_config(path: str | Path) -> RunConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(to_canonical(cfg), encoding="utf-8")


def with_vocab_size(cfg: RunConfig, vocab_size: int) -> RunConfig:
    return replace(cfg, model=replace(cfg.model, vocab_size=vocab_size))
