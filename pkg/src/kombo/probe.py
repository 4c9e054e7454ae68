"""Character-embedding cosine similarity probe.

Compares how a trained model and a static embedding path place characters
of one sentence relative to anchor characters (useful for watching
conjugated stems like 차/찬 drift together as training progresses).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AnchorNotFound
from .model import KomboModel
from .nn import tensor as T
from .tokenizer import Vocab, encode

SOURCES = ("static_embedding", "contextual_kombo")


@dataclass
class ProbeReport:
    sentence: str
    anchors: list[str]
    chars: list[str]
    matrix: np.ndarray  # (len(anchors), len(chars)) cosines
    source: str

    def to_csv(self) -> str:
        header = "anchor," + ",".join(self.chars)
        lines = [header]
        for anchor, row in zip(self.anchors, self.matrix):
            lines.append(anchor + "," + ",".join(f"{v:.6f}" for v in row))
        return "\n".join(lines) + "\n"


def _character_vectors(model: KomboModel, vocab: Vocab, sentence: str, source: str) -> np.ndarray:
    seq = encode(sentence, vocab)
    ids = np.array(seq.ids, dtype=np.int64)[None, :]
    if source == "contextual_kombo":
        result = model.forward(ids, return_intermediates=True)
        return result.stacked.data[0]
    # static path: raw embedding rows summed per character, no positions,
    # no contextualization
    tok = T.embedding(model.token_embedding, ids).data[0]
    tpc = vocab.scheme.tokens_per_char
    return tok.reshape(-1, tpc, tok.shape[-1]).sum(axis=1)


def probe_similarity(model: KomboModel, vocab: Vocab, sentence: str,
                     anchors: list[str], source: str = "contextual_kombo") -> ProbeReport:
    if source not in SOURCES:
        raise ValueError(f"source must be one of {SOURCES}")
    chars = list(sentence)
    vectors = _character_vectors(model, vocab, sentence, source)
    if len(chars) != vectors.shape[0]:
        # merge grid guarantees one row per character; guard anyway
        raise AnchorNotFound("sentence rows do not align with characters")
    norms = np.linalg.norm(vectors, axis=1)
    norms = np.where(norms == 0.0, 1.0, norms)
    unit = vectors / norms[:, None]
    matrix_rows = []
    for anchor in anchors:
        if anchor not in chars:
            raise AnchorNotFound(f"anchor {anchor!r} does not occur in the sentence")
        row = unit[chars.index(anchor)] @ unit.T
        matrix_rows.append(np.clip(row, -1.0, 1.0))
    return ProbeReport(sentence, list(anchors), chars, np.stack(matrix_rows), source)
