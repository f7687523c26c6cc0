"""The from-scratch transformer: forward, backward, optimizer, checkpoints."""

import math

import numpy as np
import pytest

from pathstar.model import (
    Adam,
    ModelConfig,
    Transformer,
    load_checkpoint,
    next_token_loss,
    numerical_gradients,
    save_checkpoint,
)


def tiny_config(**kw):
    base = dict(vocab_size=9, max_len=12, layers=2, heads=2, dim=8,
                ff_dim=16, dtype="float64")
    base.update(kw)
    return ModelConfig(**base)


def test_forward_shapes():
    model = Transformer(tiny_config(), seed=0)
    trace = model.forward(np.array([[3]]))
    assert trace.logits.shape == (1, 1, 9)
    trace = model.forward(np.array([[1, 2, 3], [4, 5, 6]]))
    assert trace.logits.shape == (2, 3, 9)


def test_max_len_enforced():
    model = Transformer(tiny_config(), seed=0)
    with pytest.raises(ValueError):
        model.forward(np.ones((1, 13), dtype=int))


def test_dim_must_divide_heads():
    with pytest.raises(ValueError):
        tiny_config(dim=9)


def test_same_seed_same_params():
    a = Transformer(tiny_config(), seed=7)
    b = Transformer(tiny_config(), seed=7)
    for k in a.params:
        assert (a.params[k] == b.params[k]).all()
    c = Transformer(tiny_config(), seed=8)
    assert any((a.params[k] != c.params[k]).any() for k in a.params)


def test_causality(rng):
    model = Transformer(tiny_config(), seed=1)
    tokens = rng.integers(0, 9, size=(2, 8))
    base = model.forward(tokens, need_cache=False).logits
    bumped = tokens.copy()
    bumped[:, 5] = (bumped[:, 5] + 1) % 9
    out = model.forward(bumped, need_cache=False).logits
    assert np.allclose(base[:, :5], out[:, :5])
    assert not np.allclose(base[:, 5:], out[:, 5:])


def test_attention_rows_normalized(rng):
    model = Transformer(tiny_config(), seed=2)
    trace = model.forward(rng.integers(0, 9, size=(3, 10)))
    for cache in trace.caches:
        sums = cache["att"].sum(axis=-1)
        assert np.abs(sums - 1.0).max() < 1e-12


def test_aux_head_reads_interior(rng):
    model = Transformer(tiny_config(layers=3, aux_head=True), seed=3)
    trace = model.forward(rng.integers(0, 9, size=(2, 6)))
    want = trace.interior @ model.params["aux.w"] + model.params["aux.b"]
    assert np.allclose(trace.aux_scores, want)


def test_aux_head_needs_two_layers():
    with pytest.raises(ValueError):
        tiny_config(layers=1, aux_head=True)


def test_aux_flag_leaves_backbone_untouched():
    plain = Transformer(tiny_config(), seed=5)
    with_aux = Transformer(tiny_config(aux_head=True), seed=5)
    for k in plain.params:
        assert (plain.params[k] == with_aux.params[k]).all()
    assert "aux.w" in with_aux.params and "aux.w" not in plain.params


# -- loss --------------------------------------------------------------------


def test_loss_on_confident_correct_logits():
    logits = np.full((1, 4, 9), -30.0)
    labels = np.array([[1, 2, 3, 4]])
    for t, l in enumerate(labels[0]):
        logits[0, t, l] = 30.0
    loss, _ = next_token_loss(logits, labels, np.ones((1, 4), dtype=bool))
    assert loss < 1e-8


def test_loss_on_uniform_logits():
    logits = np.zeros((2, 3, 9))
    labels = np.zeros((2, 3), dtype=int)
    loss, _ = next_token_loss(logits, labels, np.ones((2, 3), dtype=bool))
    assert loss == pytest.approx(math.log(9))


def test_loss_mask_blocks_positions():
    logits = np.zeros((1, 2, 9))
    logits[0, 1, :] = [100, -100, 0, 0, 0, 0, 0, 0, 0]
    labels = np.array([[0, 1]])
    mask = np.array([[True, False]])
    loss, dlogits = next_token_loss(logits, labels, mask)
    assert loss == pytest.approx(math.log(9))
    assert (dlogits[0, 1] == 0).all()


def test_empty_mask_raises():
    with pytest.raises(ValueError):
        next_token_loss(np.zeros((1, 2, 9)), np.zeros((1, 2), dtype=int),
                        np.zeros((1, 2), dtype=bool))


def test_dense_targets_match_one_hot():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(2, 5, 9))
    labels = rng.integers(0, 9, size=(2, 5))
    mask = np.ones((2, 5), dtype=bool)
    dense = np.zeros((2, 5, 9))
    for b in range(2):
        for t in range(5):
            dense[b, t, labels[b, t]] = 1.0
    l1, g1 = next_token_loss(logits, labels, mask)
    l2, g2 = next_token_loss(logits, None, mask, dense_targets=dense)
    assert l1 == pytest.approx(l2)
    assert np.allclose(g1, g2)


def test_sum_reduction_scales():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(1, 6, 9))
    labels = rng.integers(0, 9, size=(1, 6))
    mask = np.ones((1, 6), dtype=bool)
    mean_l, _ = next_token_loss(logits, labels, mask)
    sum_l, _ = next_token_loss(logits, labels, mask, reduction="sum")
    assert sum_l == pytest.approx(6 * mean_l)


# -- gradients ---------------------------------------------------------------


def test_backward_matches_finite_differences(rng):
    model = Transformer(tiny_config(), seed=4)
    tokens = rng.integers(0, 9, size=(2, 6))
    labels = rng.integers(0, 9, size=(2, 6))
    mask = np.ones((2, 6), dtype=bool)

    trace = model.forward(tokens)
    loss, dlogits = next_token_loss(trace.logits, labels, mask)
    grads = model.backward(trace, dlogits)

    def loss_fn():
        t = model.forward(tokens, need_cache=False)
        l, _ = next_token_loss(t.logits, labels, mask)
        return l

    num = numerical_gradients(loss_fn, model.params)
    for k in grads:
        denom = max(np.abs(num[k]).max(), 1e-8)
        rel = np.abs(grads[k] - num[k]).max() / denom
        assert rel < 1e-4, f"{k}: rel error {rel}"


def test_aux_backward_matches_finite_differences(rng):
    model = Transformer(tiny_config(aux_head=True), seed=6)
    tokens = rng.integers(0, 9, size=(2, 5))
    labels = rng.integers(0, 9, size=(2, 5))
    mask = np.ones((2, 5), dtype=bool)
    dense = np.full((2, 5, 9), 1.0 / 9)

    trace = model.forward(tokens)
    loss, dlogits = next_token_loss(trace.logits, labels, mask)
    aux_loss, daux = next_token_loss(trace.aux_scores, None, mask, dense)
    grads = model.backward(trace, dlogits, daux)

    def loss_fn():
        t = model.forward(tokens)
        l, _ = next_token_loss(t.logits, labels, mask)
        a, _ = next_token_loss(t.aux_scores, None, mask, dense)
        return l + a

    num = numerical_gradients(loss_fn, model.params)
    for k in grads:
        denom = max(np.abs(num[k]).max(), 1e-8)
        rel = np.abs(grads[k] - num[k]).max() / denom
        assert rel < 1e-4, f"{k}: rel error {rel}"


# -- optimizer and checkpoints ----------------------------------------------


def overfit_steps(model, opt, tokens, labels, mask, n):
    losses = []
    for _ in range(n):
        trace = model.forward(tokens)
        loss, dlogits = next_token_loss(trace.logits, labels, mask)
        grads = model.backward(trace, dlogits)
        opt.step(model.params, grads)
        losses.append(loss)
    return losses


def test_adam_overfits_fixed_batch(rng):
    model = Transformer(tiny_config(dtype="float32"), seed=9)
    opt = Adam(model.params, lr=3e-3)
    tokens = rng.integers(0, 9, size=(1, 8))
    labels = rng.integers(0, 9, size=(1, 8))
    mask = np.ones((1, 8), dtype=bool)
    losses = overfit_steps(model, opt, tokens, labels, mask, 150)
    assert losses[-1] < 0.05 * losses[0]


def test_adam_step_counter():
    model = Transformer(tiny_config(), seed=0)
    opt = Adam(model.params)
    assert opt.t == 0
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    opt.step(model.params, grads)
    assert opt.t == 1


def test_checkpoint_round_trip(tmp_path, rng):
    model = Transformer(tiny_config(dtype="float32"), seed=10)
    opt = Adam(model.params, lr=1e-3)
    tokens = rng.integers(0, 9, size=(2, 6))
    labels = rng.integers(0, 9, size=(2, 6))
    mask = np.ones((2, 6), dtype=bool)
    overfit_steps(model, opt, tokens, labels, mask, 3)

    path = tmp_path / "ck.npz"
    save_checkpoint(path, model, opt, extra={"samples": 12, "note": "x"})
    loaded, opt2, extra = load_checkpoint(path)

    assert extra["samples"] == 12 and extra["note"] == "x"
    assert loaded.config == model.config
    assert opt2.t == opt.t
    assert opt2.lr == opt.lr
    for k in model.params:
        assert (loaded.params[k] == model.params[k]).all()
        assert (opt2.m[k] == opt.m[k]).all()
        assert (opt2.v[k] == opt.v[k]).all()


def test_resumed_training_is_bit_exact(tmp_path, rng):
    tokens = rng.integers(0, 9, size=(2, 6))
    labels = rng.integers(0, 9, size=(2, 6))
    mask = np.ones((2, 6), dtype=bool)

    model = Transformer(tiny_config(dtype="float32"), seed=11)
    opt = Adam(model.params, lr=1e-3)
    overfit_steps(model, opt, tokens, labels, mask, 3)
    save_checkpoint(tmp_path / "mid.npz", model, opt)
    straight = overfit_steps(model, opt, tokens, labels, mask, 3)

    model2, opt2, _ = load_checkpoint(tmp_path / "mid.npz")
    resumed = overfit_steps(model2, opt2, tokens, labels, mask, 3)

    assert straight == resumed
    for k in model.params:
        assert (model.params[k] == model2.params[k]).all()
