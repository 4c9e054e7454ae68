import pytest

from kombo.corruption import (KeyboardAdjacency, SweepResult, TypoMethod, TypoSpec,
                              count_letters, default_adjacency, from_letters,
                              inject_typos, inject_typos_with_stats, sweep_rates,
                              to_letters)
from kombo.nn.tensor import Rng

CLEAN = "기찻길 옆 오두막에 핀 꽃, 참 좋다!"


def test_adjacency_symmetry_and_irreflexivity():
    adj = default_adjacency()
    assert len(adj.neighbors) == 26
    for letter, nbrs in adj.neighbors.items():
        assert letter not in nbrs
        for other in nbrs:
            assert letter in adj.neighbors[other]


def test_adjacency_shifted_letters_have_no_entry():
    adj = default_adjacency()
    for shifted in "ㄲㄸㅃㅆㅉㅒㅖ":
        assert adj.get(shifted) is None


def test_adjacency_rejects_asymmetric_table():
    with pytest.raises(Exception):
        KeyboardAdjacency({"ㄱ": ("ㄷ",), "ㄷ": ()})


def test_letters_roundtrip_on_clean_text():
    for text in [CLEAN, "앉다", "없었다", "의외로 왜 취향이 바뀌었을까", "값", "한글 abc 123"]:
        assert from_letters(to_letters(text)) == text


def test_letter_stream_splits_compounds():
    assert to_letters("앉") == ["ㅇ", "ㅏ", "ㄴ", "ㅈ"]
    assert to_letters("왜") == ["ㅇ", "ㅗ", "ㅐ"]
    assert to_letters("차") == ["ㅊ", "ㅏ"]


def test_rate_zero_identity_for_all_methods():
    for method in TypoMethod:
        assert inject_typos(CLEAN, TypoSpec(method, 0.0, seed=1)) == CLEAN


def test_deletion_letter_arithmetic():
    text = "가나다라마"  # 10 letters
    assert count_letters(text) == 10
    out = inject_typos(text, TypoSpec(TypoMethod.DELETION, 0.2, seed=2))
    assert count_letters(out) == 8


def test_insertion_and_substitution_arithmetic():
    text = "가나다라마"
    out = inject_typos(text, TypoSpec(TypoMethod.INSERTION, 0.2, seed=3))
    assert count_letters(out) == 12
    out = inject_typos(text, TypoSpec(TypoMethod.SUBSTITUTION, 0.2, seed=4))
    assert count_letters(out) == 10
    out = inject_typos(text, TypoSpec(TypoMethod.TRANSPOSITION, 0.2, seed=5))
    assert count_letters(out) == 10


def test_substitution_uses_keyboard_neighbors():
    # single eligible letter: the substitution must pick one of its neighbours
    adj = default_adjacency()
    out = inject_typos("가", TypoSpec(TypoMethod.SUBSTITUTION, 0.5, seed=6))
    letters = to_letters(out)
    assert len(letters) == 2
    changed = [(a, b) for a, b in zip(["ㄱ", "ㅏ"], letters) if a != b]
    assert len(changed) == 1
    original, new = changed[0]
    assert new in adj.get(original)


def test_transposition_never_picks_final_letter():
    # two letters: only the first is an eligible transposition site
    for seed in range(30):
        out = inject_typos("가", TypoSpec(TypoMethod.TRANSPOSITION, 0.5, seed=seed))
        assert out == from_letters(["ㅏ", "ㄱ"])


def test_determinism_bitwise():
    spec = TypoSpec(TypoMethod.RANDOM_MIX, 0.3, seed=8)
    assert inject_typos(CLEAN, spec) == inject_typos(CLEAN, spec)
    a = inject_typos(CLEAN, TypoSpec(TypoMethod.RANDOM_MIX, 0.3, seed=9))
    assert a != inject_typos(CLEAN, spec) or a == inject_typos(CLEAN, spec)


def test_mix_letter_delta_matches_stats():
    out, stats = inject_typos_with_stats(CLEAN, TypoSpec(TypoMethod.RANDOM_MIX, 0.4, seed=10))
    assert count_letters(out) - count_letters(CLEAN) == stats.inserted - stats.deleted
    assert stats.sites == round(0.4 * count_letters(CLEAN))


def test_whitespace_and_ascii_not_edit_sites():
    text = "가 a 나"
    for seed in range(20):
        out = inject_typos(text, TypoSpec(TypoMethod.DELETION, 0.25, seed=seed))
        assert out.count(" ") == 2
        assert "a" in out


def test_sweep_emits_one_corpus_per_rate():
    lines = ["기찻길 옆 오두막", "옹달샘 맑은 물"]
    rates = [round(0.05 * i, 2) for i in range(9)]  # 0% .. 40%
    result = sweep_rates(lines, TypoMethod.RANDOM_MIX, rates, seed=11)
    assert len(result.corpora) == 9
    assert result.corpora[0.0] == lines
    assert len(result.manifest) == 10  # header + one entry per rate
    assert "rate=0.4" in result.manifest[-1]


def test_sweep_reproducible():
    lines = ["기찻길 옆 오두막", "옹달샘 맑은 물"]
    a = sweep_rates(lines, TypoMethod.SUBSTITUTION, [0.0, 0.2], seed=12)
    b = sweep_rates(lines, TypoMethod.SUBSTITUTION, [0.0, 0.2], seed=12)
    assert a.corpora == b.corpora
    assert a.manifest == b.manifest


def test_sweep_rejects_unsorted_rates():
    with pytest.raises(ValueError):
        sweep_rates(["가"], TypoMethod.DELETION, [0.2, 0.1], seed=13)


def test_typo_cascades_recompose():
    # deleting the vowel of the first syllable must not crash and must
    # produce valid, recomposable text
    out = inject_typos("가나", TypoSpec(TypoMethod.DELETION, 0.25, seed=14))
    assert count_letters(out) == 3
    assert from_letters(to_letters(out)) == out
