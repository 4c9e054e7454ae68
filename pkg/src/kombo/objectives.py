"""Pretraining corruption plans: masked-language targets and sentence pairs.

Span masking selects whole characters and corrupts every slot of each
selected character the same way, so the model must reconstruct a complete
(chosung, joongsung, jongsung) group at once. Token-level masking picks
slot positions independently and is kept as the ablation counterpart.
Plans are fully determined at planning time (replacement ids included), so
applying one is pure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, EmptyPlan, NoData
from .nn.tensor import Rng
from .tokenizer import TokenSequence, Vocab

IGNORE_ID = -100

ACTION_NONE, ACTION_MASK, ACTION_RANDOM, ACTION_KEEP = 0, 1, 2, 3


class MaskStrategy(enum.Enum):
    SPAN_SUBCHAR = "span_subchar"
    TOKEN_LEVEL = "token_level"


@dataclass(frozen=True)
class ObjectiveConfig:
    mask_ratio: float = 0.15
    action_split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    strategy: MaskStrategy = MaskStrategy.SPAN_SUBCHAR
    nsp_negative_rate: float = 0.5

    def validate(self) -> None:
        if abs(sum(self.action_split) - 1.0) > 1e-9:
            raise ValueError(f"action split {self.action_split} does not sum to 1")
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise ValueError(f"mask ratio {self.mask_ratio} outside [0, 1]")


@dataclass
class MaskingPlan:
    masked_char_indices: tuple[int, ...]      # span indices, 0-based
    actions: np.ndarray                       # (N,) ACTION_* per position
    targets: np.ndarray                       # (N,) original ids or IGNORE_ID
    replacements: np.ndarray                  # (N,) ids, used at RANDOM positions
    mask_id: int
    length: int = field(init=False)

    def __post_init__(self):
        self.length = len(self.actions)

    @property
    def masked_positions(self) -> np.ndarray:
        return np.nonzero(self.actions != ACTION_NONE)[0]


def _maskable_spans(seq: TokenSequence, vocab: Vocab) -> list[int]:
    """Spans that carry a real character (not CLS/SEP/PAD/UNK/MASK)."""
    specials = vocab.special_ids
    return [i for i, (start, _) in enumerate(seq.char_spans)
            if seq.ids[start] not in specials]


def _nonspecial_ids(vocab: Vocab) -> np.ndarray:
    specials = vocab.special_ids
    return np.array([i for i in range(len(vocab)) if i not in specials])


def _draw_action(rng: Rng, split: tuple[float, float, float]) -> int:
    u = float(rng.random())
    if u < split[0]:
        return ACTION_MASK
    if u < split[0] + split[1]:
        return ACTION_RANDOM
    return ACTION_KEEP


def _mask_count(ratio: float, n_candidates: int) -> int:
    if ratio == 0.0 or n_candidates == 0:
        return 0
    return min(n_candidates, max(1, round(ratio * n_candidates)))


def _empty_plan(seq: TokenSequence, vocab: Vocab) -> MaskingPlan:
    n = len(seq.ids)
    return MaskingPlan((), np.zeros(n, dtype=np.int8),
                       np.full(n, IGNORE_ID, dtype=np.int64),
                       np.array(seq.ids, dtype=np.int64), vocab.mask_id)


def plan_span_subchar_mask(seq: TokenSequence, cfg: ObjectiveConfig,
                           rng: Rng, vocab: Vocab) -> MaskingPlan:
    """Select whole characters; one action covers all slots of a character."""
    seq.validate()
    candidates = _maskable_spans(seq, vocab)
    if not candidates:
        raise EmptyPlan("sequence has no maskable characters")
    n_mask = _mask_count(cfg.mask_ratio, len(candidates))
    plan = _empty_plan(seq, vocab)
    if n_mask == 0:
        return plan
    picked = sorted(int(candidates[j]) for j in rng.choice(len(candidates), n_mask))
    pool = _nonspecial_ids(vocab)
    for span_idx in picked:
        start, length = seq.char_spans[span_idx]
        action = _draw_action(rng, cfg.action_split)
        for pos in range(start, start + length):
            plan.actions[pos] = action
            plan.targets[pos] = seq.ids[pos]
            if action == ACTION_RANDOM:
                plan.replacements[pos] = pool[int(rng.integers(0, len(pool)))]
    return MaskingPlan(tuple(picked), plan.actions, plan.targets,
                       plan.replacements, vocab.mask_id)


def plan_token_mask(seq: TokenSequence, cfg: ObjectiveConfig,
                    rng: Rng, vocab: Vocab) -> MaskingPlan:
    """Select slot positions independently; no span constraint."""
    seq.validate()
    specials = vocab.special_ids
    candidates = [i for i, t in enumerate(seq.ids) if t not in specials]
    if not candidates:
        raise EmptyPlan("sequence has no maskable positions")
    n_mask = _mask_count(cfg.mask_ratio, len(candidates))
    plan = _empty_plan(seq, vocab)
    if n_mask == 0:
        return plan
    picked = sorted(int(candidates[j]) for j in rng.choice(len(candidates), n_mask))
    pool = _nonspecial_ids(vocab)
    tpc = seq.scheme.tokens_per_char
    for pos in picked:
        action = _draw_action(rng, cfg.action_split)
        plan.actions[pos] = action
        plan.targets[pos] = seq.ids[pos]
        if action == ACTION_RANDOM:
            plan.replacements[pos] = pool[int(rng.integers(0, len(pool)))]
    touched = sorted({pos // tpc for pos in picked})
    return MaskingPlan(tuple(touched), plan.actions, plan.targets,
                       plan.replacements, vocab.mask_id)


def plan_mask(seq: TokenSequence, cfg: ObjectiveConfig, rng: Rng, vocab: Vocab) -> MaskingPlan:
    if cfg.strategy is MaskStrategy.SPAN_SUBCHAR:
        return plan_span_subchar_mask(seq, cfg, rng, vocab)
    return plan_token_mask(seq, cfg, rng, vocab)


def apply_mask(seq: TokenSequence, plan: MaskingPlan) -> tuple[np.ndarray, np.ndarray]:
    """Corrupted ids plus MLM targets (IGNORE_ID where unmasked)."""
    if plan.length != len(seq.ids):
        raise AlignmentError(f"plan covers {plan.length} ids, sequence has {len(seq.ids)}")
    corrupted = np.array(seq.ids, dtype=np.int64)
    corrupted[plan.actions == ACTION_MASK] = plan.mask_id
    random_at = plan.actions == ACTION_RANDOM
    corrupted[random_at] = plan.replacements[random_at]
    return corrupted, plan.targets.copy()


@dataclass(frozen=True)
class NspPair:
    first: str
    second: str
    label: int  # 1 = true successor, 0 = sentence from another document


class NspSampler:
    """Draws next-sentence pairs from a corpus of documents.

    positive_only is set when the corpus has a single document, in which
    case every pair is a true successor regardless of the negative rate.
    """

    def __init__(self, documents: list[list[str]], negative_rate: float, rng: Rng):
        self.documents = [d for d in documents if d]
        self.rng = rng
        self.negative_rate = float(negative_rate)
        self._positive_docs = [i for i, d in enumerate(self.documents) if len(d) >= 2]
        if not self._positive_docs:
            raise NoData("no document has two consecutive sentences")
        self.positive_only = len(self.documents) < 2

    def sample(self) -> NspPair:
        doc_idx = self._positive_docs[int(self.rng.integers(0, len(self._positive_docs)))]
        doc = self.documents[doc_idx]
        i = int(self.rng.integers(0, len(doc) - 1))
        first = doc[i]
        if not self.positive_only and float(self.rng.random()) < self.negative_rate:
            other_idx = int(self.rng.integers(0, len(self.documents) - 1))
            if other_idx >= doc_idx:
                other_idx += 1
            other = self.documents[other_idx]
            second = other[int(self.rng.integers(0, len(other)))]
            return NspPair(first, second, 0)
        return NspPair(first, doc[i + 1], 1)


def sample_nsp_pairs(documents: list[list[str]], cfg: ObjectiveConfig, rng: Rng, n: int):
    """Yield n sentence pairs with labels."""
    sampler = NspSampler(documents, cfg.nsp_negative_rate, rng)
    for _ in range(n):
        yield sampler.sample()
