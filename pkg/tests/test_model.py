import numpy as np
import pytest

from kombo.errors import AlignmentError, ConfigError, VocabError
from kombo.hangul import UnitScheme
from kombo.model import (Ablations, KomboModel, MergeSpec, ModelConfig,
                         RestorationSpec, param_count, row_share,
                         table3_variants, table6_variants)
from kombo.nn import tensor as T
from kombo.nn.gradcheck import grad_check, jitter_params
from kombo.nn.tensor import Rng, Tensor
from kombo.tokenizer import build_vocab, encode

JAMO_VOCAB = build_vocab([], UnitScheme.JAMO)


def micro_config(**overrides):
    base = dict(dim=8, layers=1, local_layers=1, n_heads=2, scheme=UnitScheme.JAMO,
                vocab_size=len(JAMO_VOCAB), max_len=24)
    base.update(overrides)
    return ModelConfig(**base)


def encode_ids(text, vocab=JAMO_VOCAB):
    return np.array(encode(text, vocab).ids)[None, :]


def test_embed_shapes_and_positional_difference():
    m = KomboModel(micro_config(), Rng(1))
    ids = encode_ids("훈민정음")
    e = m.embed(ids)
    assert e.shape == (1, 12, 8)
    # identical ids at two positions differ exactly by the positional rows
    two = m.embed(np.array([[5, 5, 5]]))
    diff = two.data[0, 1] - two.data[0, 0]
    pos = m.position_embedding.data
    assert np.allclose(diff, pos[1] - pos[0], atol=1e-15)


def test_embed_pad_rows_are_looked_up():
    m = KomboModel(micro_config(), Rng(2))
    pad = JAMO_VOCAB.pad_id
    e = m.embed(np.array([[pad, pad, pad]]))
    expected = m.token_embedding.data[pad] + m.position_embedding.data[:3]
    assert np.allclose(e.data[0], expected, atol=1e-15)
    assert not np.allclose(e.data, 0.0)


def test_embed_rejects_out_of_range():
    m = KomboModel(micro_config(), Rng(3))
    with pytest.raises(VocabError):
        m.embed(np.array([[len(JAMO_VOCAB)]]))


def test_contextualize_bypass():
    cfg = micro_config(ablations=Ablations(no_contextualization=True))
    m = KomboModel(cfg, Rng(4))
    e = m.embed(encode_ids("차"))
    h = m.contextualize(e)
    assert h is e


def test_contextualize_preserves_shape():
    m = KomboModel(micro_config(), Rng(5))
    e = m.embed(encode_ids("훈민정음"))
    assert m.contextualize(e).shape == e.shape


def test_merge_shape_chain_figure_input():
    m = KomboModel(micro_config(), Rng(6))
    ids = encode_ids("훈민정음")
    assert ids.shape[1] == 12
    res = m.forward(ids, return_intermediates=True)
    assert res.merge.merged.shape == (1, 4, 8)
    assert res.merge.pair_seq.shape == (1, 8, 8)
    assert res.restored.shape == (1, 12, 8)


@pytest.mark.parametrize("scheme,n_two_chars", [
    (UnitScheme.STROKE, 18), (UnitScheme.CJI, 14), (UnitScheme.BTS, 26)])
def test_merge_shape_chain_other_schemes(scheme, n_two_chars):
    vocab = build_vocab([], scheme)
    cfg = micro_config(scheme=scheme, vocab_size=len(vocab),
                       max_len=scheme.tokens_per_char * 4)
    m = KomboModel(cfg, Rng(7))
    ids = np.array(encode("기차", vocab).ids)[None, :]
    assert ids.shape[1] == n_two_chars
    res = m.forward(ids, return_intermediates=True)
    assert res.merge.merged.shape == (1, 2, 8)
    assert res.merge.pair_seq.shape == (1, 4, 8)
    assert res.restored.shape == (1, n_two_chars, 8)


def test_merge_slot_sums_match_brute_force():
    scheme = UnitScheme.STROKE
    vocab = build_vocab([], scheme)
    cfg = micro_config(scheme=scheme, vocab_size=len(vocab), max_len=18)
    m = KomboModel(cfg, Rng(8))
    h = Tensor(Rng(9).normal((1, 18, 8)))
    res = m.merge_characters(h)
    raw = h.data.reshape(1, 2, 9, 8)
    onset = raw[:, :, 0:4, :].sum(axis=2)
    nucleus = raw[:, :, 4:5, :].sum(axis=2)
    coda = raw[:, :, 5:9, :].sum(axis=2)
    assert np.allclose(res.body.data, onset + nucleus, atol=1e-12)
    assert np.allclose(res.coda.data, coda, atol=1e-12)


def test_merge_selector_kernel_isolates_body():
    m = KomboModel(micro_config(), Rng(10))
    m.conv.weights[0].data[:, 0, 0] = 1.0
    m.conv.weights[0].data[:, 1, 0] = 0.0
    m.conv.biases[0].data[:] = 0.0
    h = Tensor(Rng(11).normal((1, 12, 8)))
    res = m.merge_characters(h)
    assert np.max(np.abs(res.merged.data - res.body.data)) < 1e-12
    m.conv.weights[0].data[:, :, 0] = 0.5
    res = m.merge_characters(h)
    mean_rows = (res.body.data + res.coda.data) / 2.0
    assert np.max(np.abs(res.merged.data - mean_rows)) < 1e-12


def test_merge_rejects_misaligned_length():
    m = KomboModel(micro_config(), Rng(12))
    with pytest.raises(AlignmentError):
        m.merge_characters(Tensor(np.zeros((1, 10, 8))))


def test_no_jongsung_addition_is_elementwise_three_way_sum():
    cfg = micro_config(ablations=Ablations(no_jongsung_addition=True))
    m = KomboModel(cfg, Rng(13))
    assert m.conv is None
    h = Tensor(Rng(14).normal((1, 12, 8)))
    res = m.merge_characters(h)
    raw = h.data.reshape(1, 4, 3, 8)
    expected = raw[:, :, 0] + raw[:, :, 1] + raw[:, :, 2]
    assert np.allclose(res.merged.data, expected, atol=1e-15)


def test_no_merge_path():
    cfg = micro_config(ablations=Ablations(no_merge=True))
    m = KomboModel(cfg, Rng(15))
    ids = encode_ids("훈민정음")
    res = m.forward(ids, return_intermediates=True)
    assert res.merge is None
    assert res.stacked.shape == (1, 12, 8)
    assert res.restored is res.stacked
    assert res.mlm_logits.shape == (1, 12, len(JAMO_VOCAB))


def test_encode_stack_zero_layers_identity():
    m = KomboModel(micro_config(layers=0), Rng(16))
    x = Tensor(Rng(17).normal((1, 4, 8)))
    assert m.encode_stack(x) is x


def test_restore_stage_shapes():
    m = KomboModel(micro_config(), Rng(18))
    h = Tensor(Rng(19).normal((1, 12, 8)))
    res = m.merge_characters(h)
    stacked = m.encode_stack(res.merged)
    mid_in = T.repeat(stacked, 2, axis=1)
    assert mid_in.shape == (1, 8, 8)
    out = m.restore(stacked, res, h)
    assert out.shape == (1, 12, 8)


def test_restore_pure_repeat_with_identity_linear():
    spec = RestorationSpec(cell="linear", hierarchical=False, residual=False)
    m = KomboModel(micro_config(restore=spec), Rng(20))
    cell = m.restore_cells[0]
    cell.W.data[:] = np.eye(8)
    cell.b.data[:] = 0.0
    stacked = Tensor(Rng(21).normal((1, 4, 8)))
    out = m.restore(stacked, None, Tensor(np.zeros((1, 12, 8))))
    assert np.allclose(out.data, np.repeat(stacked.data, 3, axis=1), atol=1e-15)


def test_restore_variant_catalog_constructible():
    variants = table6_variants()
    assert len(variants) == 6
    ids = encode_ids("기찻길")
    for name, spec in variants.items():
        m = KomboModel(micro_config(restore=spec), Rng(22))
        out = m.forward(ids)
        assert out.mlm_logits.shape == (1, 9, len(JAMO_VOCAB)), name
        assert np.all(np.isfinite(out.mlm_logits.data))


def test_hierarchical_restore_requires_intermediates():
    m = KomboModel(micro_config(), Rng(23))
    with pytest.raises(ConfigError):
        m.restore(Tensor(np.zeros((1, 4, 8))), None, Tensor(np.zeros((1, 12, 8))))


def test_alt_downsample_configs_reject_hierarchical_restore():
    with pytest.raises(ConfigError):
        micro_config(ablations=Ablations(alt_downsample="attention_pool")).validate()


def test_attention_pool_identical_rows_and_convex_hull():
    cfg = micro_config(ablations=Ablations(alt_downsample="attention_pool"),
                       restore=RestorationSpec(hierarchical=False))
    m = KomboModel(cfg, Rng(24))
    row = Rng(25).normal((8,))
    h = Tensor(np.tile(row, (1, 12, 1)))
    out = m.alt_downsample(h)
    assert out.shape == (1, 4, 8)
    assert np.allclose(out.data, row, atol=1e-12)
    h2 = Tensor(Rng(26).normal((1, 12, 8)))
    out2 = m.alt_downsample(h2).data
    grid = h2.data.reshape(1, 4, 3, 8)
    assert np.all(out2 <= grid.max(axis=2) + 1e-12)
    assert np.all(out2 >= grid.min(axis=2) - 1e-12)


def test_linear_pool_block_identity_averages_rows():
    cfg = micro_config(ablations=Ablations(alt_downsample="linear_pool"),
                       restore=RestorationSpec(hierarchical=False))
    m = KomboModel(cfg, Rng(27))
    W = np.concatenate([np.eye(8) / 3.0] * 3, axis=0)  # (24, 8)
    m.pool_affine.W.data[:] = W
    m.pool_affine.b.data[:] = 0.0
    h = Tensor(Rng(28).normal((1, 12, 8)))
    out = m.alt_downsample(h)
    expected = h.data.reshape(1, 4, 3, 8).mean(axis=2)
    assert np.allclose(out.data, expected, atol=1e-12)
    assert out.shape == (1, 4, 8)


def test_forward_cls_logits_shape():
    m = KomboModel(micro_config(), Rng(29))
    out = m.forward(encode_ids("훈민정음"))
    assert out.cls_logits.shape == (1, 2)


def test_forward_accepts_token_sequence_and_flat_ids():
    m = KomboModel(micro_config(), Rng(30))
    seq = encode("차다", JAMO_VOCAB)
    a = m.forward(seq).mlm_logits.data
    b = m.forward(np.array(seq.ids)).mlm_logits.data
    assert np.array_equal(a, b)


def test_forward_deterministic_under_seed():
    ids = encode_ids("훈민정음")
    a = KomboModel(micro_config(), Rng(31)).forward(ids).mlm_logits.data
    b = KomboModel(micro_config(), Rng(31)).forward(ids).mlm_logits.data
    assert np.array_equal(a, b)


def test_end_to_end_gradcheck_micro():
    m = KomboModel(micro_config(), Rng(32))
    jitter_params(m.parameters(), Rng(320))
    ids = encode_ids("훈민정음")
    targets = np.full(12, -100)
    targets[3:6] = [10, 40, 6]

    def loss_fn():
        mlm, cls_, _ = m.losses(ids, targets[None, :], cls_labels=[1])
        return T.add(mlm, cls_)

    report = grad_check(loss_fn, m.parameters(), max_coords_per_param=4, rng=Rng(33))
    assert report.max_rel_err < 1e-4, report.per_param


def test_bidirectional_context_flag():
    cfg = micro_config(bidirectional_context=True)
    m = KomboModel(cfg, Rng(34))
    assert "context.gru_rev.w_gates" in m.store
    out = m.forward(encode_ids("차"), return_intermediates=True)
    assert out.contextualized.shape == (1, 3, 8)


def test_param_count_zero_layer_config():
    cfg = micro_config(layers=0, local_layers=0,
                       ablations=Ablations(no_contextualization=True, no_merge=True))
    report = param_count(cfg)
    v, d, p = len(JAMO_VOCAB), 8, 24
    heads = (d * v + v) + (d * d + d) + (d * 2 + 2)  # mlm + pooler + cls
    assert report.total == v * d + p * d + heads
    assert report.embedding_table == v * d
    assert report.embedding_rows == v


def test_param_count_matches_hand_sum_micro():
    cfg = micro_config()
    report = param_count(cfg)
    d, v, p = 8, len(JAMO_VOCAB), 24
    block = (2 * d + 4 * (d * d + d) + 2 * d + (d * 4 * d + 4 * d) + (4 * d * d + d))
    gru = 2 * (d * 2 * d) + 2 * d + 2 * (d * d) + d
    conv = d * 2 * 1 + d
    heads = (d * v + v) + (d * d + d) + (d * 2 + 2)
    expected = v * d + p * d + block + gru + conv + block + 2 * gru + heads
    assert report.total == expected


def test_row_share_constant():
    assert row_share(170, 32000) == pytest.approx(0.0053125, abs=0)
    assert f"{row_share(170, 32000):.2%}" == "0.53%"


def test_table3_variants_all_construct():
    base = micro_config()
    variants = table3_variants(base)
    assert set(variants) >= {"no_contextualization", "no_merge", "no_jongsung_addition",
                             "kernel_2x2", "kernel_2x3", "kernel_2x1_2x2",
                             "attention_pool", "linear_pool"}
    ids = encode_ids("기찻길을 간다")
    for name, cfg in variants.items():
        m = KomboModel(cfg, Rng(35))
        out = m.forward(ids)
        assert np.all(np.isfinite(out.mlm_logits.data)), name


def test_config_invariants():
    with pytest.raises(ConfigError):
        micro_config(dim=9).validate()
    with pytest.raises(ConfigError):
        micro_config(max_len=25).validate()
    with pytest.raises(ConfigError):
        MergeSpec(((3, 1),)).validate()
