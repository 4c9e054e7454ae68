"""Keyboard-adjacency typo generation over the jamo keystroke stream.

Text is flattened to the letters a Korean typist actually presses on a
two-set keyboard: syllables decompose to jamo, compound vowels and final
clusters split into their two keystrokes, everything else passes through.
Edits happen at letter level and the stream is rebuilt with the standard
dubeolsik syllable automaton, so a deleted vowel or swapped consonant
cascades into neighbouring syllables exactly like a real typo does.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

from . import hangul
from .errors import KomboError
from .hangul import CHO_INDEX, CHOSUNG, JONG_INDEX, JONGSUNG, JOONGSUNG, JUNG_INDEX
from .nn.tensor import Rng

_KBD_HEADER = "kombo-kbd v1"
_DEFAULT_KBD_PATH = Path(__file__).parent / "data" / "keyboard_adjacency.txt"

# two-keystroke compounds on the dubeolsik layout
COMPOUND_VOWELS = {
    "ㅘ": ("ㅗ", "ㅏ"), "ㅙ": ("ㅗ", "ㅐ"), "ㅚ": ("ㅗ", "ㅣ"),
    "ㅝ": ("ㅜ", "ㅓ"), "ㅞ": ("ㅜ", "ㅔ"), "ㅟ": ("ㅜ", "ㅣ"), "ㅢ": ("ㅡ", "ㅣ"),
}
JONG_CLUSTERS = {
    "ㄳ": ("ㄱ", "ㅅ"), "ㄵ": ("ㄴ", "ㅈ"), "ㄶ": ("ㄴ", "ㅎ"), "ㄺ": ("ㄹ", "ㄱ"),
    "ㄻ": ("ㄹ", "ㅁ"), "ㄼ": ("ㄹ", "ㅂ"), "ㄽ": ("ㄹ", "ㅅ"), "ㄾ": ("ㄹ", "ㅌ"),
    "ㄿ": ("ㄹ", "ㅍ"), "ㅀ": ("ㄹ", "ㅎ"), "ㅄ": ("ㅂ", "ㅅ"),
}
_COMPOUND_INV = {v: k for k, v in COMPOUND_VOWELS.items()}
_CLUSTER_INV = {v: k for k, v in JONG_CLUSTERS.items()}
_SINGLE_JONG = {g for g in JONGSUNG if g and g not in JONG_CLUSTERS}

_VOWELS = set(JOONGSUNG)
_JAMO_LO, _JAMO_HI = 0x3131, 0x3163


def is_jamo_letter(ch: str) -> bool:
    return len(ch) == 1 and _JAMO_LO <= ord(ch) <= _JAMO_HI


def _is_vowel(ch: str) -> bool:
    return ch in _VOWELS


class KeyboardAdjacency:
    """Neighbour map for the 26 unshifted dubeolsik keys.

    Shifted letters have no entry by design: a substitution or insertion
    site landing on one is resampled.
    """

    def __init__(self, neighbors: dict[str, tuple[str, ...]]):
        self.neighbors = neighbors
        for letter, adj in neighbors.items():
            if letter in adj:
                raise KomboError(f"{letter} adjacent to itself")
            for other in adj:
                if letter not in neighbors.get(other, ()):
                    raise KomboError(f"asymmetric adjacency {letter} -> {other}")

    @classmethod
    def load(cls, path: str | Path = _DEFAULT_KBD_PATH) -> "KeyboardAdjacency":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or lines[0].strip() != _KBD_HEADER:
            raise KomboError(f"bad keyboard file header in {path}")
        table: dict[str, tuple[str, ...]] = {}
        for line in lines[1:]:
            if not line or line.startswith("#"):
                continue
            letter, _, rest = line.partition("\t")
            table[letter] = tuple(rest.split(","))
        return cls(table)

    def get(self, letter: str) -> tuple[str, ...] | None:
        return self.neighbors.get(letter)


_default_adjacency: KeyboardAdjacency | None = None


def default_adjacency() -> KeyboardAdjacency:
    global _default_adjacency
    if _default_adjacency is None:
        _default_adjacency = KeyboardAdjacency.load()
    return _default_adjacency


class TypoMethod(enum.Enum):
    INSERTION = "insertion"
    TRANSPOSITION = "transposition"
    SUBSTITUTION = "substitution"
    DELETION = "deletion"
    RANDOM_MIX = "random_mix"


@dataclass(frozen=True)
class TypoSpec:
    method: TypoMethod
    rate: float
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"typo rate {self.rate} outside [0, 1]")


@dataclass
class TypoStats:
    sites: int = 0
    per_method: dict[str, int] = field(default_factory=dict)
    inserted: int = 0
    deleted: int = 0

    def bump(self, method: TypoMethod) -> None:
        self.sites += 1
        self.per_method[method.value] = self.per_method.get(method.value, 0) + 1


def to_letters(text: str) -> list[str]:
    """Flatten text to keystrokes; non-Hangul characters pass through."""
    stream: list[str] = []
    for ch in text:
        if hangul.classify_char(ch) is hangul.CharClass.HANGUL_SYLLABLE:
            d = hangul.decompose_syllable(ch)
            stream.append(CHOSUNG[d.cho])
            jung = JOONGSUNG[d.jung]
            stream.extend(COMPOUND_VOWELS.get(jung, (jung,)))
            if d.jong:
                jong = JONGSUNG[d.jong]
                stream.extend(JONG_CLUSTERS.get(jong, (jong,)))
        else:
            stream.append(ch)
    return stream


def count_letters(text: str) -> int:
    return sum(1 for item in to_letters(text) if is_jamo_letter(item))


def from_letters(stream: list[str]) -> str:
    """Greedy dubeolsik syllable building; unplaceable jamo stay standalone."""
    out: list[str] = []
    cho = jung = jong = None

    def flush() -> None:
        nonlocal cho, jung, jong
        if cho is not None and jung is not None:
            out.append(hangul.compose_syllable(hangul.SyllableDecomposition(
                CHO_INDEX[cho], JUNG_INDEX[jung], JONG_INDEX[jong] if jong else 0)))
        else:
            if cho is not None:
                out.append(cho)
            if jung is not None:
                out.append(jung)
        cho = jung = jong = None

    n = len(stream)
    for idx, item in enumerate(stream):
        if not is_jamo_letter(item):
            flush()
            out.append(item)
            continue
        nxt = stream[idx + 1] if idx + 1 < n else None
        next_is_vowel = nxt is not None and is_jamo_letter(nxt) and _is_vowel(nxt)
        if not _is_vowel(item):
            # consonant keystroke
            if item not in CHO_INDEX:
                # stray cluster glyph in the input; cannot start a syllable
                flush()
                out.append(item)
                continue
            if cho is None and jung is None:
                cho = item
            elif jung is None or cho is None:
                flush()
                cho = item
            elif next_is_vowel:
                flush()
                cho = item
            elif jong is None and item in _SINGLE_JONG:
                jong = item
            elif jong is not None and (jong, item) in _CLUSTER_INV:
                jong = _CLUSTER_INV[(jong, item)]
            else:
                flush()
                cho = item
        else:
            # vowel keystroke
            if jong is not None:
                # the final consonant slides onto this vowel as a new initial
                if jong in JONG_CLUSTERS:
                    jong, stolen = JONG_CLUSTERS[jong]
                else:
                    jong, stolen = None, jong
                flush()
                cho, jung = stolen, item
            elif jung is None:
                jung = item
            elif (jung, item) in _COMPOUND_INV and jong is None:
                jung = _COMPOUND_INV[(jung, item)]
            else:
                flush()
                jung = item
    flush()
    return "".join(out)


def _applicable_methods(stream, pos, adjacency) -> list[TypoMethod]:
    methods = [TypoMethod.DELETION]
    if adjacency.get(stream[pos]) is not None:
        methods += [TypoMethod.INSERTION, TypoMethod.SUBSTITUTION]
    if pos + 1 < len(stream) and is_jamo_letter(stream[pos + 1]):
        methods.append(TypoMethod.TRANSPOSITION)
    return sorted(methods, key=lambda m: m.value)


def _eligible_positions(stream, method, adjacency) -> list[int]:
    letters = [i for i, s in enumerate(stream) if is_jamo_letter(s)]
    if method in (TypoMethod.SUBSTITUTION, TypoMethod.INSERTION):
        return [i for i in letters if adjacency.get(stream[i]) is not None]
    if method is TypoMethod.TRANSPOSITION:
        # a site needs a following letter keystroke to swap with
        return [i for i in letters if i + 1 < len(stream) and is_jamo_letter(stream[i + 1])]
    return letters


def inject_typos_with_stats(text: str, spec: TypoSpec,
                            adjacency: KeyboardAdjacency | None = None,
                            rng: Rng | None = None) -> tuple[str, TypoStats]:
    spec.validate()
    adjacency = adjacency or default_adjacency()
    rng = rng or Rng(spec.seed)
    stats = TypoStats()
    stream = to_letters(text)
    n_letters = sum(1 for s in stream if is_jamo_letter(s))
    n_sites = round(spec.rate * n_letters)
    if n_sites == 0:
        return text, stats

    eligible = _eligible_positions(stream, spec.method, adjacency)
    if spec.method is TypoMethod.RANDOM_MIX:
        eligible = [i for i, s in enumerate(stream) if is_jamo_letter(s)]
    n_sites = min(n_sites, len(eligible))
    if n_sites == 0:
        return text, stats
    sites = sorted(int(eligible[j]) for j in rng.choice(len(eligible), n_sites))

    if spec.method is TypoMethod.RANDOM_MIX:
        methods = []
        for pos in sites:
            options = _applicable_methods(stream, pos, adjacency)
            methods.append(options[int(rng.integers(0, len(options)))])
    else:
        methods = [spec.method] * len(sites)

    # apply right to left so earlier site indices stay valid
    for pos, method in sorted(zip(sites, methods), reverse=True):
        if method is TypoMethod.DELETION:
            del stream[pos]
            stats.deleted += 1
        elif method is TypoMethod.SUBSTITUTION:
            adj = adjacency.get(stream[pos])
            stream[pos] = adj[int(rng.integers(0, len(adj)))]
        elif method is TypoMethod.INSERTION:
            adj = adjacency.get(stream[pos])
            stream.insert(pos + 1, adj[int(rng.integers(0, len(adj)))])
            stats.inserted += 1
        else:  # transposition
            # a deletion applied at a higher site may have shortened the
            # stream; the swap is then a no-op but still counts as a site
            if pos + 1 < len(stream):
                stream[pos], stream[pos + 1] = stream[pos + 1], stream[pos]
        stats.bump(method)
    return from_letters(stream), stats


def inject_typos(text: str, spec: TypoSpec,
                 adjacency: KeyboardAdjacency | None = None,
                 rng: Rng | None = None) -> str:
    return inject_typos_with_stats(text, spec, adjacency, rng)[0]


@dataclass
class SweepResult:
    method: TypoMethod
    seed: int
    corpora: dict[float, list[str]]
    manifest: list[str]

    def manifest_text(self) -> str:
        return "\n".join(self.manifest) + "\n"


def sweep_rates(lines: list[str], method: TypoMethod, rates: list[float],
                seed: int, adjacency: KeyboardAdjacency | None = None) -> SweepResult:
    """One corrupted copy of the corpus per rate, with a manifest.

    Line seeds derive from (seed, rate, line index), so any line of any rate
    can be reproduced in isolation.
    """
    if sorted(rates) != list(rates):
        raise ValueError("rates must be sorted ascending")
    adjacency = adjacency or default_adjacency()
    root = Rng(seed)
    corpora: dict[float, list[str]] = {}
    manifest = [f"kombo-typo-sweep v1 method={method.value} seed={seed}"]
    for rate in rates:
        spec = TypoSpec(method, rate, seed)
        out_lines = []
        edits = 0
        for i, line in enumerate(lines):
            line_rng = root.split(f"{rate!r}", i)
            corrupted, stats = inject_typos_with_stats(line, spec, adjacency, line_rng)
            out_lines.append(corrupted)
            edits += stats.sites
        corpora[rate] = out_lines
        manifest.append(f"rate={rate!r} method={method.value} seed={seed} "
                        f"lines={len(lines)} edits={edits}")
    return SweepResult(method, seed, corpora, manifest)
