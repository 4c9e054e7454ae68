"""Unicode arithmetic for Hangul syllables and the four subcharacter alphabets.

Every precomposed syllable U+AC00..U+D7A3 factors exactly as

    code = 0xAC00 + (chosung * 21 + joongsung) * 28 + jongsung

with 19 chosung (initial consonants), 21 joongsung (vowels) and 28 jongsung
slots (index 0 = no final consonant). This module owns that arithmetic, the
finer atomic alphabets (Stroke / Cji / BTS) loaded from a versioned table
file, and the expansion of a syllable into a fixed-width symbol grid.

Symbols are position-tagged strings ("cho:ㄱ", "jung:ㅏ", "jong:ㄴ", ...)
because the combination rules act on positional identity: a ㄴ serving as an
initial is a different vocabulary item from a ㄴ serving as a final. A single
untagged "∅" pads every short slot group.
"""

from __future__ import annotations

import enum
import unicodedata
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidJamoIndex, NotHangulSyllable, TableGap

SYLLABLE_BASE = 0xAC00
SYLLABLE_LAST = 0xD7A3
N_CHO, N_JUNG, N_JONG = 19, 21, 28  # jongsung slot 0 = absent
N_SYLLABLES = N_CHO * N_JUNG * N_JONG  # 11172

CHOSUNG = [
    "ㄱ", "ㄲ", "ㄴ", "ㄷ", "ㄸ", "ㄹ", "ㅁ", "ㅂ", "ㅃ", "ㅅ",
    "ㅆ", "ㅇ", "ㅈ", "ㅉ", "ㅊ", "ㅋ", "ㅌ", "ㅍ", "ㅎ",
]
JOONGSUNG = [
    "ㅏ", "ㅐ", "ㅑ", "ㅒ", "ㅓ", "ㅔ", "ㅕ", "ㅖ", "ㅗ", "ㅘ",
    "ㅙ", "ㅚ", "ㅛ", "ㅜ", "ㅝ", "ㅞ", "ㅟ", "ㅠ", "ㅡ", "ㅢ", "ㅣ",
]
# index 0 is the empty slot; 27 real finals follow
JONGSUNG = [
    "", "ㄱ", "ㄲ", "ㄳ", "ㄴ", "ㄵ", "ㄶ", "ㄷ", "ㄹ", "ㄺ",
    "ㄻ", "ㄼ", "ㄽ", "ㄾ", "ㄿ", "ㅀ", "ㅁ", "ㅂ", "ㅄ", "ㅅ",
    "ㅆ", "ㅇ", "ㅈ", "ㅊ", "ㅋ", "ㅌ", "ㅍ", "ㅎ",
]

CHO_INDEX = {g: i for i, g in enumerate(CHOSUNG)}
JUNG_INDEX = {g: i for i, g in enumerate(JOONGSUNG)}
JONG_INDEX = {g: i for i, g in enumerate(JONGSUNG) if g}

EMPTY_SYMBOL = "∅"

_ROLE_PREFIXES = ("cho:", "jung:", "jong:")


def tag(role: str, glyph: str) -> str:
    """Build a position-tagged symbol, e.g. tag('cho', 'ㄱ') -> 'cho:ㄱ'."""
    return f"{role}:{glyph}"


def symbol_glyph(symbol: str) -> str:
    """Strip the position tag; the empty symbol and passthroughs are returned as-is."""
    for p in _ROLE_PREFIXES:
        if symbol.startswith(p):
            return symbol[len(p):]
    return symbol


def is_tagged(symbol: str) -> bool:
    """True for position-tagged alphabet symbols like 'cho:ㄱ'."""
    return symbol.startswith(_ROLE_PREFIXES)


@dataclass(frozen=True)
class SyllableDecomposition:
    """Index triple of one precomposed syllable; jong = 0 means no final."""

    cho: int
    jung: int
    jong: int

    def glyphs(self) -> tuple[str, str, str]:
        return CHOSUNG[self.cho], JOONGSUNG[self.jung], JONGSUNG[self.jong]


def decompose_syllable(ch: str) -> SyllableDecomposition:
    """Split one precomposed Hangul syllable into its jamo index triple."""
    if len(ch) != 1 or not (SYLLABLE_BASE <= ord(ch) <= SYLLABLE_LAST):
        raise NotHangulSyllable(f"not a precomposed Hangul syllable: {ch!r}")
    offset = ord(ch) - SYLLABLE_BASE
    jong = offset % N_JONG
    cho, jung = divmod(offset // N_JONG, N_JUNG)
    return SyllableDecomposition(cho, jung, jong)


def compose_syllable(d: SyllableDecomposition) -> str:
    """Inverse of decompose_syllable."""
    if not (0 <= d.cho < N_CHO and 0 <= d.jung < N_JUNG and 0 <= d.jong < N_JONG):
        raise InvalidJamoIndex(f"index triple out of range: {d}")
    return chr(SYLLABLE_BASE + (d.cho * N_JUNG + d.jung) * N_JONG + d.jong)


class CharClass(enum.Enum):
    HANGUL_SYLLABLE = "hangul_syllable"
    ASCII = "ascii"
    PUNCT = "punct"
    OTHER = "other"


def classify_char(ch: str) -> CharClass:
    """Coarse character class driving the tokenizer passthrough policy."""
    code = ord(ch)
    if SYLLABLE_BASE <= code <= SYLLABLE_LAST:
        return CharClass.HANGUL_SYLLABLE
    if code < 128 and ch.isalnum():
        return CharClass.ASCII
    if ch == " " or unicodedata.category(ch).startswith("P"):
        return CharClass.PUNCT
    return CharClass.OTHER


class UnitScheme(enum.Enum):
    """Token grid for one character: (cho slots, jung slots, jong slots)."""

    JAMO = ("jamo", (1, 1, 1))
    STROKE = ("stroke", (4, 1, 4))
    CJI = ("cji", (1, 5, 1))
    BTS = ("bts", (4, 5, 4))
    CHARACTER = ("char", (1, 0, 0))

    def __init__(self, label: str, group_sizes: tuple[int, int, int]):
        self.label = label
        self.group_sizes = group_sizes

    @property
    def tokens_per_char(self) -> int:
        return sum(self.group_sizes)

    @property
    def is_subcharacter(self) -> bool:
        return self is not UnitScheme.CHARACTER

    @property
    def splits_consonants(self) -> bool:
        return self.group_sizes[0] > 1

    @property
    def splits_vowels(self) -> bool:
        return self.group_sizes[1] > 1

    @classmethod
    def from_label(cls, label: str) -> "UnitScheme":
        for s in cls:
            if s.label == label:
                return s
        raise ValueError(f"unknown scheme label: {label!r}")


CONSONANT_ATOMS = ["ㄱ", "ㄴ", "ㄹ", "ㅁ", "ㅅ", "ㅇ", "-"]
VOWEL_ATOMS = ["ㅣ", "ㅡ", "ㆍ"]

_DEFAULT_TABLE_PATH = Path(__file__).parent / "data" / "bts_tables.txt"
_TABLE_HEADER = "kombo-bts-tables v1"


class BtsTables:
    """Atomic decompositions of jamo, loaded from the versioned table file.

    consonants maps each of the 30 consonant glyphs (19 chosung and 27
    jongsung share 16 of them) to at most 4 atoms; vowels maps each of the
    21 vowels to at most 5 atoms. The padded expansion is injective within
    each position class, which is what lets a grid be read back to jamo.
    """

    def __init__(self, consonants: dict[str, tuple[str, ...]], vowels: dict[str, tuple[str, ...]]):
        self.consonants = consonants
        self.vowels = vowels
        self._validate()
        self._inv_cho = {self.consonant_atoms(i, "cho"): i for i in range(N_CHO)}
        self._inv_jong = {self.jong_atoms(i): i for i in range(1, N_JONG)}
        self._inv_jung = {self.vowel_atoms(i): i for i in range(N_JUNG)}

    @classmethod
    def load(cls, path: str | Path = _DEFAULT_TABLE_PATH) -> "BtsTables":
        consonants: dict[str, tuple[str, ...]] = {}
        vowels: dict[str, tuple[str, ...]] = {}
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or lines[0].strip() != _TABLE_HEADER:
            raise TableGap(f"bad table header in {path}")
        for line in lines[1:]:
            if not line or line.startswith("#"):
                continue
            glyph, _, atom_field = line.partition("\t")
            atoms = tuple(atom_field.split(","))
            if glyph in JUNG_INDEX:
                vowels[glyph] = atoms
            else:
                consonants[glyph] = atoms
        return cls(consonants, vowels)

    def _validate(self) -> None:
        for glyph in set(CHOSUNG) | set(JONG_INDEX):
            if glyph not in self.consonants:
                raise TableGap(f"missing consonant entry: {glyph}")
        for glyph in JOONGSUNG:
            if glyph not in self.vowels:
                raise TableGap(f"missing vowel entry: {glyph}")
        for glyph, atoms in self.consonants.items():
            if not 1 <= len(atoms) <= 4:
                raise TableGap(f"consonant {glyph} has {len(atoms)} atoms")
            bad = set(atoms) - set(CONSONANT_ATOMS)
            if bad:
                raise TableGap(f"consonant {glyph} uses unknown atoms {bad}")
        for glyph, atoms in self.vowels.items():
            if not 1 <= len(atoms) <= 5:
                raise TableGap(f"vowel {glyph} has {len(atoms)} atoms")
            bad = set(atoms) - set(VOWEL_ATOMS)
            if bad:
                raise TableGap(f"vowel {glyph} uses unknown atoms {bad}")
        # padded expansions must stay distinguishable within a position class
        for name, seqs in (
            ("chosung", [self.consonants[g] for g in CHOSUNG]),
            ("jongsung", [self.consonants[g] for g in JONGSUNG if g]),
            ("joongsung", [self.vowels[g] for g in JOONGSUNG]),
        ):
            if len(set(seqs)) != len(seqs):
                raise TableGap(f"{name} expansions are not injective")

    def consonant_atoms(self, index: int, role: str) -> tuple[str, ...]:
        glyph = CHOSUNG[index] if role == "cho" else JONGSUNG[index]
        atoms = self.consonants.get(glyph)
        if atoms is None:
            raise TableGap(f"no atoms for {role} {glyph!r}")
        return tuple(tag(role, a) for a in atoms)

    def jong_atoms(self, index: int) -> tuple[str, ...]:
        return self.consonant_atoms(index, "jong")

    def vowel_atoms(self, index: int) -> tuple[str, ...]:
        atoms = self.vowels.get(JOONGSUNG[index])
        if atoms is None:
            raise TableGap(f"no atoms for vowel {JOONGSUNG[index]!r}")
        return tuple(tag("jung", a) for a in atoms)

    def invert_consonant(self, atoms: tuple[str, ...], role: str) -> int:
        inv = self._inv_cho if role == "cho" else self._inv_jong
        if atoms not in inv:
            raise KeyError(atoms)
        return inv[atoms]

    def invert_vowel(self, atoms: tuple[str, ...]) -> int:
        if atoms not in self._inv_jung:
            raise KeyError(atoms)
        return self._inv_jung[atoms]


_default_tables: BtsTables | None = None


def default_tables() -> BtsTables:
    global _default_tables
    if _default_tables is None:
        _default_tables = BtsTables.load()
    return _default_tables


def _pad(group: tuple[str, ...], width: int) -> list[str]:
    return list(group) + [EMPTY_SYMBOL] * (width - len(group))


def expand_to_scheme(
    d: SyllableDecomposition,
    scheme: UnitScheme,
    tables: BtsTables | None = None,
) -> list[str]:
    """Expand one syllable into its fixed-width symbol grid for a scheme.

    Each slot group is left-filled with real symbols and right-padded with
    the empty symbol, so the output always has scheme.tokens_per_char
    entries. An absent jongsung yields an all-empty jong group.
    """
    if not scheme.is_subcharacter:
        raise ValueError("expand_to_scheme requires a subcharacter scheme")
    tables = tables or default_tables()
    cho_w, jung_w, jong_w = scheme.group_sizes

    if scheme.splits_consonants:
        cho_group = tables.consonant_atoms(d.cho, "cho")
    else:
        cho_group = (tag("cho", CHOSUNG[d.cho]),)
    if scheme.splits_vowels:
        jung_group = tables.vowel_atoms(d.jung)
    else:
        jung_group = (tag("jung", JOONGSUNG[d.jung]),)
    if d.jong == 0:
        jong_group: tuple[str, ...] = ()
    elif scheme.splits_consonants:
        jong_group = tables.jong_atoms(d.jong)
    else:
        jong_group = (tag("jong", JONGSUNG[d.jong]),)

    return _pad(cho_group, cho_w) + _pad(jung_group, jung_w) + _pad(jong_group, jong_w)


def invert_expansion(
    symbols: list[str],
    scheme: UnitScheme,
    tables: BtsTables | None = None,
) -> SyllableDecomposition:
    """Read a padded symbol grid back to the jamo index triple.

    Raises ValueError when the grid does not encode a syllable (wrong width,
    interior padding, or an atom sequence outside the tables).
    """
    if not scheme.is_subcharacter:
        raise ValueError("invert_expansion requires a subcharacter scheme")
    tables = tables or default_tables()
    cho_w, jung_w, jong_w = scheme.group_sizes
    if len(symbols) != scheme.tokens_per_char:
        raise ValueError(f"expected {scheme.tokens_per_char} symbols, got {len(symbols)}")

    def unpad(group: list[str]) -> tuple[str, ...]:
        core = list(group)
        while core and core[-1] == EMPTY_SYMBOL:
            core.pop()
        if EMPTY_SYMBOL in core:
            raise ValueError(f"interior padding in slot group {group}")
        return tuple(core)

    cho_group = unpad(symbols[:cho_w])
    jung_group = unpad(symbols[cho_w:cho_w + jung_w])
    jong_group = unpad(symbols[cho_w + jung_w:])
    try:
        if scheme.splits_consonants:
            cho = tables.invert_consonant(cho_group, "cho")
        else:
            (sym,) = cho_group
            cho = CHO_INDEX[_expect_role(sym, "cho")]
        if scheme.splits_vowels:
            jung = tables.invert_vowel(jung_group)
        else:
            (sym,) = jung_group
            jung = JUNG_INDEX[_expect_role(sym, "jung")]
        if not jong_group:
            jong = 0
        elif scheme.splits_consonants:
            jong = tables.invert_consonant(jong_group, "jong")
        else:
            (sym,) = jong_group
            jong = JONG_INDEX[_expect_role(sym, "jong")]
    except (KeyError, ValueError) as e:
        raise ValueError(f"symbols do not encode a syllable: {symbols}") from e
    return SyllableDecomposition(cho, jung, jong)


def _expect_role(symbol: str, role: str) -> str:
    prefix = role + ":"
    if not symbol.startswith(prefix):
        raise ValueError(f"expected a {role} symbol, got {symbol!r}")
    return symbol[len(prefix):]


def scheme_alphabet(scheme: UnitScheme, tables: BtsTables | None = None) -> list[str]:
    """Canonical symbol inventory of a scheme, excluding specials and padding."""
    tables = tables or default_tables()
    if scheme is UnitScheme.CHARACTER:
        return [chr(c) for c in range(SYLLABLE_BASE, SYLLABLE_LAST + 1)]
    if scheme.splits_consonants:
        cho_part = [tag("cho", a) for a in CONSONANT_ATOMS]
        jong_part = [tag("jong", a) for a in CONSONANT_ATOMS]
    else:
        cho_part = [tag("cho", g) for g in CHOSUNG]
        jong_part = [tag("jong", g) for g in JONGSUNG if g]
    if scheme.splits_vowels:
        jung_part = [tag("jung", a) for a in VOWEL_ATOMS]
    else:
        jung_part = [tag("jung", g) for g in JOONGSUNG]
    return cho_part + jung_part + jong_part


def nfd_oracle(ch: str) -> SyllableDecomposition:
    """Independent decomposition via Unicode NFD, for cross-checking."""
    parts = unicodedata.normalize("NFD", ch)
    cho = ord(parts[0]) - 0x1100
    jung = ord(parts[1]) - 0x1161
    jong = ord(parts[2]) - 0x11A7 if len(parts) == 3 else 0
    return SyllableDecomposition(cho, jung, jong)
