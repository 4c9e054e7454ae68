"""Deterministic toy Korean corpus generator.

Sentences are built from a small bank of real words grouped by topic; each
document sticks to one topic so that next-sentence prediction has signal
and masked spans are recoverable from context. The output follows the
corpus file format: one sentence per line, blank line between documents.
"""

from __future__ import annotations

from pathlib import Path

from .nn.tensor import Rng

TOPIC_NOUNS = {
    "nature": ["하늘", "바다", "바람", "구름", "나무", "꽃", "강물", "산길"],
    "home": ["집", "부엌", "창문", "마당", "김치", "밥상", "이불", "거울"],
    "school": ["학교", "책상", "연필", "공책", "선생님", "친구", "칠판", "숙제"],
    "city": ["기차", "버스", "시장", "가게", "도로", "다리", "공원", "극장"],
    "mind": ["마음", "생각", "기억", "꿈", "사랑", "행복", "걱정", "웃음"],
    "time": ["아침", "저녁", "봄", "여름", "가을", "겨울", "오늘", "내일"],
}
SUBJECT_PARTICLES = ["이", "가", "은", "는", "도"]
OBJECT_PARTICLES = ["을", "를"]
PLACE_PARTICLES = ["에", "에서", "으로"]
VERBS = ["본다", "간다", "온다", "찾는다", "만난다", "듣는다", "그린다", "배운다",
         "만든다", "기다린다", "좋아한다", "생각한다"]
ADJECTIVES = ["맑다", "좋다", "크다", "작다", "밝다", "차다", "깊다", "멀다"]


def _pick(rng: Rng, items: list[str]) -> str:
    return items[int(rng.integers(0, len(items)))]


def make_sentence(rng: Rng, nouns: list[str]) -> str:
    parts = [_pick(rng, nouns) + _pick(rng, SUBJECT_PARTICLES)]
    form = int(rng.integers(0, 3))
    if form == 0:
        parts.append(_pick(rng, nouns) + _pick(rng, OBJECT_PARTICLES))
        parts.append(_pick(rng, VERBS))
    elif form == 1:
        parts.append(_pick(rng, nouns) + _pick(rng, PLACE_PARTICLES))
        parts.append(_pick(rng, VERBS))
    else:
        parts.append(_pick(rng, ADJECTIVES))
    return " ".join(parts) + "."


def make_toy_corpus(target_bytes: int = 1_000_000, seed: int = 7,
                    sentences_per_doc: tuple[int, int] = (3, 8)) -> list[list[str]]:
    rng = Rng(seed).split("toy-corpus")
    topics = sorted(TOPIC_NOUNS)
    docs: list[list[str]] = []
    total = 0
    while total < target_bytes:
        nouns = TOPIC_NOUNS[_pick(rng, topics)]
        n = int(rng.integers(sentences_per_doc[0], sentences_per_doc[1] + 1))
        doc = [make_sentence(rng, nouns) for _ in range(n)]
        docs.append(doc)
        total += sum(len(s.encode("utf-8")) + 1 for s in doc) + 1
    return docs


def write_toy_corpus(path: str | Path, target_bytes: int = 1_000_000, seed: int = 7) -> Path:
    path = Path(path)
    docs = make_toy_corpus(target_bytes, seed)
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            for sentence in doc:
                f.write(sentence + "\n")
            f.write("\n")
    return path
