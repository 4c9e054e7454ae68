import numpy as np
import pytest

from kombo.errors import ConfigError
from kombo.nn import tensor as T
from kombo.nn.gradcheck import grad_check
from kombo.nn.layers import (Affine, ConvFuse, GruLayer, LayerNorm, ParamStore,
                             TransformerBlock, affine, cross_entropy, gelu,
                             layer_norm, log_softmax, softmax)
from kombo.nn.optim import AdamW
from kombo.nn.tensor import Parameter, Rng, Tensor


def rand_loss(out, seed):
    w = Rng(seed).normal(out.shape)
    return T.tsum(T.mul(out, Tensor(w)))


def test_affine_identity():
    x = Rng(0).normal((3, 4))
    y = affine(Tensor(x), Tensor(np.eye(4)), Tensor(np.zeros(4)))
    assert np.array_equal(y.data, x)


def test_affine_example():
    y = affine(Tensor([[2.0, 3.0]]), Tensor([[1.0], [1.0]]))
    assert y.data.tolist() == [[5.0]]


def test_affine_gradcheck():
    rng = Rng(1)
    store = ParamStore()
    lin = Affine(store, "lin", 4, 3, rng)
    x = Parameter(rng.split("x").normal((2, 4)), name="x")
    params = [x, lin.W, lin.b]
    report = grad_check(lambda: rand_loss(lin(x), 2), params)
    assert report.max_rel_err < 1e-6


def test_layer_norm_zero_mean_unit_scale():
    x = Rng(3).normal((5, 8)) * 4.0 + 1.0
    y = layer_norm(Tensor(x), Tensor(np.ones(8)), Tensor(np.zeros(8)))
    assert np.abs(y.data.mean(axis=-1)).max() < 1e-7
    assert np.abs(y.data.std(axis=-1) - 1.0).max() < 1e-6


def test_layer_norm_gradcheck():
    rng = Rng(4)
    store = ParamStore()
    ln = LayerNorm(store, "ln", 6)
    x = Parameter(rng.normal((3, 6)), name="x")
    report = grad_check(lambda: rand_loss(ln(x), 5), [x, ln.gain, ln.bias])
    assert report.max_rel_err < 1e-6


def test_softmax_rows_sum_to_one():
    x = Rng(6).normal((4, 9)) * 30.0
    p = softmax(Tensor(x))
    assert np.abs(p.data.sum(axis=-1) - 1.0).max() < 1e-9
    assert np.all(np.isfinite(log_softmax(Tensor(x * 100)).data))


def test_gelu_reference_values():
    # gelu(0) = 0, gelu(x) -> x for large x, gelu(-x) small
    y = gelu(Tensor(np.array([0.0, 10.0, -10.0, 1.0])))
    assert y.data[0] == 0.0
    assert y.data[1] == pytest.approx(10.0, abs=1e-12)
    assert abs(y.data[2]) < 1e-12
    assert y.data[3] == pytest.approx(0.8413447460685429, abs=1e-12)


def test_attention_single_position_weights():
    store = ParamStore()
    blk = TransformerBlock(store, "b", 8, 2, Rng(7))
    x = Tensor(Rng(8).normal((1, 1, 8)))
    out, weights = blk(x, return_weights=True)
    assert weights.shape == (1, 2, 1, 1)
    assert np.allclose(weights.data, 1.0)
    assert out.shape == (1, 1, 8)


def test_attention_block_shape_and_gradcheck():
    store = ParamStore()
    rng = Rng(9)
    blk = TransformerBlock(store, "b", 8, 2, rng)
    x = Parameter(rng.split("x").normal((1, 4, 8)), name="x")
    out = blk(x)
    assert out.shape == (1, 4, 8)
    report = grad_check(lambda: rand_loss(blk(x), 10), [x, *store],
                        max_coords_per_param=8, rng=rng)
    assert report.max_rel_err < 1e-4


def test_attention_head_divisibility():
    store = ParamStore()
    blk = TransformerBlock(store, "b", 8, 3, Rng(0))
    with pytest.raises(ConfigError):
        blk(Tensor(np.zeros((1, 2, 8))))


def test_gru_zero_weights_closed_form():
    store = ParamStore()
    g = GruLayer(store, "g", 4, Rng(11))
    for p in (g.w_gates, g.u_gates, g.w_cand, g.u_cand, g.b_gates):
        p.data[:] = 0.0
    g.b_cand.data[:] = 0.7
    out = g(Tensor(np.zeros((2, 5, 4))))
    # z = r = sigmoid(0) = 0.5 each step, candidate = tanh(0.7):
    # h_t = 0.5 h_{t-1} + 0.5 tanh(0.7)  =>  h_t = (1 - 2^-t) tanh(0.7)
    for t in range(5):
        expected = (1.0 - 0.5 ** (t + 1)) * np.tanh(0.7)
        assert np.allclose(out.data[:, t, :], expected, atol=1e-15)


def test_gru_single_step_equals_cell():
    store = ParamStore()
    rng = Rng(12)
    g = GruLayer(store, "g", 6, rng)
    x1 = rng.split("x").normal((1, 1, 6))
    full = g(Tensor(x1)).data[:, 0, :]
    # manual cell evaluation
    xv = x1[:, 0, :]
    gates = 1 / (1 + np.exp(-(xv @ g.w_gates.data + g.b_gates.data)))
    z, r = gates[:, :6], gates[:, 6:]
    n = np.tanh(xv @ g.w_cand.data + g.b_cand.data)
    h = (1 - z) * n
    assert np.allclose(full, h, atol=1e-12)


def test_gru_gradcheck_three_steps():
    store = ParamStore()
    rng = Rng(13)
    g = GruLayer(store, "g", 4, rng)
    x = Parameter(rng.split("x").normal((1, 3, 4)), name="x")
    report = grad_check(lambda: rand_loss(g(x), 14), [x, *store])
    assert report.max_rel_err < 1e-4


def test_conv_selector_kernel():
    store = ParamStore()
    cf = ConvFuse(store, "c", 3, [1], Rng(15))
    cf.weights[0].data[:, 0, 0] = 1.0
    cf.weights[0].data[:, 1, 0] = 0.0
    body = Rng(16).normal((1, 4, 3))
    coda = Rng(17).normal((1, 4, 3))
    out = cf(Tensor(body), Tensor(coda))
    assert np.allclose(out.data, body, atol=1e-15)
    cf.weights[0].data[:, :, 0] = 0.5
    out = cf(Tensor(body), Tensor(coda))
    assert np.allclose(out.data, (body + coda) / 2.0, atol=1e-15)


def brute_force_conv(body, coda, weight, bias):
    """Direct summation oracle for the two-row depthwise convolution."""
    B, M, D = body.shape
    width = weight.shape[2]
    left = (width - 1) // 2
    grid = np.stack([body, coda], axis=1)  # (B, 2, M, D)
    padded = np.zeros((B, 2, M + width - 1, D))
    padded[:, :, left:left + M, :] = grid
    out = np.zeros((B, M, D))
    for k in range(M):
        for d in range(D):
            acc = 0.0
            for r in range(2):
                for j in range(width):
                    acc += weight[d, r, j] * padded[:, r, k + j, d]
            out[:, k, d] = acc + bias[d]
    return out


def test_conv_multi_kernel_against_oracle():
    store = ParamStore()
    rng = Rng(18)
    cf = ConvFuse(store, "c", 2, [1, 2], rng)
    body = rng.split("b").normal((1, 3, 2))
    coda = rng.split("c").normal((1, 3, 2))
    out = cf(Tensor(body), Tensor(coda))
    expected = (brute_force_conv(body, coda, cf.weights[0].data, cf.biases[0].data)
                + brute_force_conv(body, coda, cf.weights[1].data, cf.biases[1].data)) / 2.0
    assert np.allclose(out.data, expected, atol=1e-12)
    assert out.shape == (1, 3, 2)


def test_conv_width_exceeding_characters():
    store = ParamStore()
    cf = ConvFuse(store, "c", 2, [3], Rng(19))
    with pytest.raises(ConfigError):
        cf(Tensor(np.zeros((1, 2, 2))), Tensor(np.zeros((1, 2, 2))))


def test_conv_gradcheck():
    store = ParamStore()
    rng = Rng(20)
    cf = ConvFuse(store, "c", 2, [2, 3], rng)
    body = Parameter(rng.split("b").normal((1, 4, 2)), name="body")
    coda = Parameter(rng.split("c").normal((1, 4, 2)), name="coda")
    report = grad_check(lambda: rand_loss(cf(body, coda), 21), [body, coda, *store])
    assert report.max_rel_err < 1e-4


def test_cross_entropy_uniform_and_onehot():
    logits = Tensor(np.zeros((5, 11)))
    loss, n = cross_entropy(logits, np.arange(5) % 11)
    assert n == 5
    assert loss.data == pytest.approx(np.log(11), abs=1e-12)
    sharp = np.full((1, 4), -1e3)
    sharp[0, 2] = 1e3
    loss, _ = cross_entropy(Tensor(sharp), np.array([2]))
    assert loss.data == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_matches_direct_softmax():
    rng = Rng(22)
    logits = rng.normal((6, 5))
    targets = rng.split("t").integers(0, 5, size=6)
    loss, _ = cross_entropy(Tensor(logits), targets)
    probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    expected = -np.mean(np.log(probs[np.arange(6), targets]))
    assert loss.data == pytest.approx(expected, abs=1e-12)


def test_cross_entropy_all_ignored():
    loss, n = cross_entropy(Tensor(np.zeros((3, 4))), np.full(3, -100))
    assert n == 0 and loss.data == 0.0


def test_cross_entropy_gradcheck():
    rng = Rng(23)
    p = Parameter(rng.normal((4, 6)), name="logits")
    targets = np.array([0, 5, -100, 3])
    report = grad_check(lambda: cross_entropy(p, targets)[0], [p])
    assert report.max_rel_err < 1e-6


def test_adamw_zero_grad_no_decay_keeps_params():
    p = Parameter(np.array([1.0, -2.0]), name="p")
    opt = AdamW([p], lr=0.1)
    p.grad = np.zeros(2)
    opt.step()
    assert np.array_equal(p.data, [1.0, -2.0])


def test_adamw_first_step_magnitude():
    p = Parameter(np.array([1.0]), name="p")
    opt = AdamW([p], lr=0.01)
    p.grad = np.array([1.0])
    opt.step()
    # bias-corrected first step moves by lr / (1 + eps)
    assert p.data[0] == pytest.approx(1.0 - 0.01 / (1.0 + 1e-8), abs=1e-15)


def test_adamw_decoupled_decay():
    p = Parameter(np.array([2.0]), name="p")
    opt = AdamW([p], lr=0.1, weight_decay=0.5)
    p.grad = np.array([0.0])
    opt.step()
    assert p.data[0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0, abs=1e-15)


def test_adamw_warmup_schedule():
    p = Parameter(np.array([0.0]), name="p")
    opt = AdamW([p], lr=1.0, warmup_steps=4)
    rates = []
    for _ in range(6):
        p.grad = np.array([0.0])
        rates.append(opt.step())
    assert rates == [0.25, 0.5, 0.75, 1.0, 1.0, 1.0]


def test_adamw_rejects_negative_lr():
    with pytest.raises(ConfigError):
        AdamW([], lr=-1e-3)
