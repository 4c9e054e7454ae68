"""Corpus streaming, pair batching, the pretraining loop, and checkpoints.

Everything is seed-deterministic: the data order, masks, pair sampling and
parameter init all derive from RunConfig.seed, so two runs with the same
config, corpus and seed produce identical loss logs and identical final
checkpoints.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig, to_canonical, parse_config_text, with_vocab_size
from .errors import CheckpointError, ConfigTooSmall, NoData, TrainingDiverged
from .model import KomboModel
from .nn import tensor as T
from .nn.optim import AdamW
from .nn.tensor import Rng
from .objectives import NspSampler, apply_mask, plan_mask
from .tokenizer import TokenSequence, Vocab, encode

CKPT_MAGIC = b"kombo-ckpt v1\n"
_DTYPE_CODES = {"float64": 0, "float32": 1}
_DTYPE_NAMES = {0: "<f8", 1: "<f4"}


# -- corpus ------------------------------------------------------------------

def read_corpus(path: str | Path) -> tuple[list[list[str]], int]:
    """Documents (lists of sentences) and the count of skipped bad lines.

    One sentence per line; a blank line closes a document. Lines that do not
    decode as UTF-8 are skipped and counted.
    """
    docs: list[list[str]] = []
    current: list[str] = []
    skipped = 0
    raw = Path(path).read_bytes()
    for raw_line in raw.split(b"\n"):
        try:
            line = raw_line.decode("utf-8").strip()
        except UnicodeDecodeError:
            skipped += 1
            continue
        if not line:
            if current:
                docs.append(current)
                current = []
            continue
        current.append(line)
    if current:
        docs.append(current)
    return docs, skipped


def pad_to_length(seq: TokenSequence, vocab: Vocab, seq_len: int) -> TokenSequence:
    """Right-pad with PAD spans (PAD followed by empty fill) up to seq_len ids."""
    tpc = seq.scheme.tokens_per_char
    ids = list(seq.ids)
    spans = list(seq.char_spans)
    pad_span = [vocab.pad_id] + [vocab.empty_id] * (tpc - 1)
    while len(ids) < seq_len:
        spans.append((len(ids), tpc))
        ids.extend(pad_span)
    return TokenSequence(ids, seq.scheme, spans)


class CorpusStream:
    """Single-pass iterator of fixed-length id sequences, one per sentence.

    A seeded shuffle buffer makes the order deterministic for a given seed;
    sequences are truncated at character boundaries and padded with PAD
    spans.
    """

    def __init__(self, path: str | Path, seq_len: int, vocab: Vocab,
                 seed: int = 0, buffer_size: int = 1024):
        self.docs, self.skipped_lines = read_corpus(path)
        self.vocab = vocab
        self.seq_len = seq_len
        self.rng = Rng(seed).split("corpus-stream")
        self.buffer_size = buffer_size

    def __iter__(self):
        buffer: list[np.ndarray] = []

        def emit(sentence: str) -> np.ndarray:
            seq = encode(sentence, self.vocab, max_len=self.seq_len, add_cls_sep=True)
            return np.array(pad_to_length(seq, self.vocab, self.seq_len).ids, dtype=np.int64)

        for doc in self.docs:
            for sentence in doc:
                buffer.append(emit(sentence))
                if len(buffer) >= self.buffer_size:
                    idx = int(self.rng.integers(0, len(buffer)))
                    buffer[idx], buffer[-1] = buffer[-1], buffer[idx]
                    yield buffer.pop()
        while buffer:
            idx = int(self.rng.integers(0, len(buffer)))
            buffer[idx], buffer[-1] = buffer[-1], buffer[idx]
            yield buffer.pop()


def encode_pair(first: str, second: str, vocab: Vocab, seq_len: int) -> TokenSequence:
    """[CLS] A [SEP] B [SEP] on the span grid, truncated longest-first."""
    tpc = vocab.scheme.tokens_per_char
    budget = seq_len // tpc - 3
    if budget < 2:
        raise ConfigTooSmall(f"seq_len {seq_len} cannot hold a sentence pair")

    def char_blocks(text: str) -> list[list[int]]:
        seq = encode(text, vocab)
        return [seq.ids[s:s + l] for s, l in seq.char_spans]

    a, b = char_blocks(first), char_blocks(second)
    while len(a) + len(b) > budget:
        if len(a) >= len(b):
            a.pop()
        else:
            b.pop()
    pad_tail = [vocab.empty_id] * (tpc - 1)
    blocks = ([[vocab.cls_id] + pad_tail] + a + [[vocab.sep_id] + pad_tail]
              + b + [[vocab.sep_id] + pad_tail])
    ids: list[int] = []
    spans: list[tuple[int, int]] = []
    for block in blocks:
        spans.append((len(ids), tpc))
        ids.extend(block)
    seq = TokenSequence(ids, vocab.scheme, spans)
    return pad_to_length(seq, vocab, seq_len)


@dataclass
class PretrainBatch:
    ids: np.ndarray        # (B, seq_len)
    targets: np.ndarray    # (B, seq_len), IGNORE_ID where unsupervised
    labels: np.ndarray     # (B,) next-sentence labels


def build_batch(sampler: NspSampler, vocab: Vocab, run: RunConfig, rng: Rng) -> PretrainBatch:
    ids, targets, labels = [], [], []
    for _ in range(run.batch_size):
        pair = sampler.sample()
        seq = encode_pair(pair.first, pair.second, vocab, run.seq_len)
        plan = plan_mask(seq, run.objective, rng, vocab)
        corrupted, target = apply_mask(seq, plan)
        ids.append(corrupted)
        targets.append(target)
        labels.append(pair.label)
    return PretrainBatch(np.stack(ids), np.stack(targets), np.array(labels))


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(path: str | Path, model: KomboModel, run: RunConfig, seed: int) -> None:
    config_bytes = to_canonical(run).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<I", len(config_bytes)))
        f.write(config_bytes)
        f.write(struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF))
        params = list(model.store.items())
        f.write(struct.pack("<I", len(params)))
        for name, p in params:
            name_bytes = name.encode("utf-8")
            f.write(struct.pack("<I", len(name_bytes)))
            f.write(name_bytes)
            f.write(struct.pack("<B", _DTYPE_CODES[p.data.dtype.name]))
            f.write(struct.pack("<B", p.data.ndim))
            for dim in p.data.shape:
                f.write(struct.pack("<Q", dim))
            f.write(np.ascontiguousarray(p.data, dtype=p.data.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path: str | Path) -> tuple[KomboModel, RunConfig, int]:
    """Rebuild the model from the config echo and the stored tensors.

    Every stored tensor shape is validated against the shape the echoed
    config implies; the first mismatch is reported by tensor name.
    """
    blob = Path(path).read_bytes()
    view = memoryview(blob)
    offset = 0

    def need(n: int) -> memoryview:
        nonlocal offset
        if offset + n > len(blob):
            raise CheckpointError(f"truncated checkpoint {path}")
        chunk = view[offset:offset + n]
        offset += n
        return chunk

    if bytes(need(len(CKPT_MAGIC))) != CKPT_MAGIC:
        raise CheckpointError(f"bad checkpoint magic in {path}")
    (config_len,) = struct.unpack("<I", need(4))
    run = parse_config_text(bytes(need(config_len)).decode("utf-8"))
    (seed,) = struct.unpack("<Q", need(8))
    model = KomboModel(run.model, Rng(seed).split("init"))
    (n_tensors,) = struct.unpack("<I", need(4))
    expected = dict(model.store.items())
    seen = set()
    for _ in range(n_tensors):
        (name_len,) = struct.unpack("<I", need(4))
        name = bytes(need(name_len)).decode("utf-8")
        (dtype_code,) = struct.unpack("<B", need(1))
        (rank,) = struct.unpack("<B", need(1))
        shape = tuple(struct.unpack("<Q", need(8))[0] for _ in range(rank))
        dtype = np.dtype(_DTYPE_NAMES[dtype_code])
        data = np.frombuffer(need(int(np.prod(shape, dtype=np.int64)) * dtype.itemsize),
                             dtype=dtype).reshape(shape)
        if name not in expected:
            raise CheckpointError(f"unexpected tensor {name!r}")
        if expected[name].data.shape != shape:
            raise CheckpointError(
                f"shape mismatch for {name!r}: checkpoint has {shape}, "
                f"config implies {expected[name].data.shape}")
        expected[name].data = np.array(data, dtype=dtype.newbyteorder("="))
        seen.add(name)
    missing = set(expected) - seen
    if missing:
        raise CheckpointError(f"missing tensors: {sorted(missing)[:3]}")
    return model, run, seed


# -- pretraining ----------------------------------------------------------------

@dataclass
class LossRow:
    step: int
    mlm_loss: float
    nsp_loss: float
    lr: float

    def csv(self) -> str:
        return f"{self.step},{self.mlm_loss!r},{self.nsp_loss!r},{self.lr!r}"


@dataclass
class PretrainResult:
    rows: list[LossRow]
    checkpoint_path: Path
    log_path: Path
    skipped_lines: int

    def log_text(self) -> str:
        return "\n".join(["step,mlm_loss,nsp_loss,lr"] + [r.csv() for r in self.rows]) + "\n"


def pretrain_loop(run: RunConfig, progress=None) -> PretrainResult:
    """Train for run.total_steps on summed MLM + NSP losses."""
    vocab = Vocab.load(run.paths.vocab)
    run = with_vocab_size(run, len(vocab))
    run.validate()
    docs, skipped = read_corpus(run.paths.corpus)
    if not docs:
        raise NoData(f"corpus {run.paths.corpus} has no sentences")

    root = Rng(run.seed)
    model = KomboModel(run.model, root.split("init"))
    sampler = NspSampler(docs, run.objective.nsp_negative_rate, root.split("nsp"))
    mask_rng = root.split("mask")
    optimizer = AdamW(model.parameters(), lr=run.optimizer.lr,
                      betas=(run.optimizer.beta1, run.optimizer.beta2),
                      eps=run.optimizer.eps, weight_decay=run.optimizer.weight_decay,
                      warmup_steps=run.optimizer.warmup_steps)

    ckpt_dir = Path(run.paths.checkpoint_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    final_path = ckpt_dir / "final.ckpt"
    log_path = ckpt_dir / "loss_log.csv"

    rows: list[LossRow] = []
    if run.total_steps == 0:
        save_checkpoint(final_path, model, run, run.seed)
        result = PretrainResult(rows, final_path, log_path, skipped)
        log_path.write_text(result.log_text(), encoding="utf-8")
        return result

    for step in range(1, run.total_steps + 1):
        batch = build_batch(sampler, vocab, run, mask_rng)
        optimizer.zero_grad()
        mlm_loss, nsp_loss, _ = model.losses(batch.ids, batch.targets, batch.labels)
        mlm_val, nsp_val = float(mlm_loss.data), float(nsp_loss.data)
        if not (np.isfinite(mlm_val) and np.isfinite(nsp_val)):
            save_checkpoint(ckpt_dir / "last_good.ckpt", model, run, run.seed)
            raise TrainingDiverged(
                f"non-finite loss at step {step}; last good state written to "
                f"{ckpt_dir / 'last_good.ckpt'}")
        total = T.add(mlm_loss, nsp_loss)
        total.backward()
        lr_used = optimizer.step()
        rows.append(LossRow(step, mlm_val, nsp_val, lr_used))
        if progress is not None:
            progress(rows[-1])
        if run.checkpoint_every and step % run.checkpoint_every == 0:
            save_checkpoint(ckpt_dir / f"step_{step:06d}.ckpt", model, run, run.seed)

    save_checkpoint(final_path, model, run, run.seed)
    result = PretrainResult(rows, final_path, log_path, skipped)
    log_path.write_text(result.log_text(), encoding="utf-8")
    return result
