import dataclasses
import math

import numpy as np
import pytest

from f0lab.neural import io as nn_io
from f0lab.neural.layers import blstm_backward, blstm_forward, lstm_forward, lstm_step
from f0lab.neural.model import (
    PredictionBundle,
    TrainConfig,
    additive_forward,
    compute_gradients,
    encode_features,
    loss_with_delta,
    make_additive,
    make_baseline,
    make_model,
    model_loss,
    predict_neural,
)
from f0lab.neural.train import Adam, TrainingDiverged, train
from f0lab.synth import SynthConfig, generate_synthetic

from gradcheck import check_model
from oracles import scalar_lstm, scalar_lstm_step

SMALL = TrainConfig(hidden=5, mlp_hidden=(6, 4), emb_dim=3)


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic(SynthConfig(n_utterances=12, syllables_per_utterance=(3, 6), seed=31))


def _lstm_params(rng, n_in, H, scale=0.5):
    return (rng.normal(0, scale, (4 * H, n_in)), rng.normal(0, scale, (4 * H, H)), rng.normal(0, scale, 4 * H))


# -- cell and layers ------------------------------------------------------------------

def test_lstm_step_all_zero():
    h, c = lstm_step(np.zeros((12, 2)), np.zeros((12, 3)), np.zeros(12), np.zeros(2), np.zeros(3), np.zeros(3))
    np.testing.assert_array_equal(h, 0.0)
    np.testing.assert_array_equal(c, 0.0)


def test_lstm_step_saturated_gates_keep_cell(rng):
    H = 3
    b = np.zeros(4 * H)
    b[:H] = -20.0
    b[H:2 * H] = 20.0
    c_prev = rng.normal(size=H)
    _, c = lstm_step(np.zeros((4 * H, 2)), np.zeros((4 * H, H)), b, rng.normal(size=2), rng.normal(size=H), c_prev)
    np.testing.assert_allclose(c, c_prev, atol=1e-6)


def test_lstm_step_matches_scalar_oracle(rng):
    Wx, Wh, b = _lstm_params(rng, 4, 3)
    x, h0, c0 = rng.normal(size=4), rng.normal(size=3), rng.normal(size=3)
    h, c = lstm_step(Wx, Wh, b, x, h0, c0)
    ho, co = scalar_lstm_step(Wx, Wh, b, x, h0, c0)
    np.testing.assert_allclose(h, ho, atol=1e-12)
    np.testing.assert_allclose(c, co, atol=1e-12)


def test_lstm_forward_matches_repeated_steps(rng):
    Wx, Wh, b = _lstm_params(rng, 2, 4)
    X = rng.normal(size=(5, 2))
    hs, _ = lstm_forward(Wx, Wh, b, X)
    h, c = np.zeros(4), np.zeros(4)
    for t in range(5):
        h, c = lstm_step(Wx, Wh, b, X[t], h, c)
        np.testing.assert_allclose(hs[t], h, atol=1e-12)


def test_blstm_length_one(rng):
    fwd, bwd = _lstm_params(rng, 3, 2), _lstm_params(rng, 3, 2)
    x = rng.normal(size=(1, 3))
    out, _ = blstm_forward(fwd, bwd, x)
    hf, _ = lstm_step(*fwd, x[0], np.zeros(2), np.zeros(2))
    hb, _ = lstm_step(*bwd, x[0], np.zeros(2), np.zeros(2))
    np.testing.assert_allclose(out[0], np.concatenate([hf, hb]), atol=1e-12)


def test_blstm_length_three_scalar_oracle(rng):
    fwd, bwd = _lstm_params(rng, 2, 3), _lstm_params(rng, 2, 3)
    X = rng.normal(size=(3, 2))
    out, _ = blstm_forward(fwd, bwd, X)
    np.testing.assert_allclose(out, np.hstack([scalar_lstm(*fwd, X), scalar_lstm(*bwd, X, reverse=True)]),
                               atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_blstm_reversal_symmetry(seed):
    rng = np.random.default_rng(seed)
    H = 4
    fwd, bwd = _lstm_params(rng, 3, H), _lstm_params(rng, 3, H)
    X = rng.normal(size=(int(rng.integers(1, 8)), 3))
    out, _ = blstm_forward(fwd, bwd, X)
    rev, _ = blstm_forward(bwd, fwd, X[::-1])
    np.testing.assert_allclose(rev, np.hstack([out[::-1, H:], out[::-1, :H]]), atol=1e-9)


def test_blstm_rejects_empty(rng):
    p = _lstm_params(rng, 2, 2)
    with pytest.raises(ValueError):
        blstm_forward(p, p, np.zeros((0, 2)))


def test_blstm_backward_input_gradient(rng):
    fwd, bwd = _lstm_params(rng, 2, 3), _lstm_params(rng, 2, 3)
    X = rng.normal(size=(4, 2))
    W = rng.normal(size=(4, 6))
    out, cache = blstm_forward(fwd, bwd, X)
    dX, _, _ = blstm_backward(fwd, bwd, cache, W)
    num = np.zeros_like(X)
    for i in np.ndindex(X.shape):
        Xp, Xm = X.copy(), X.copy()
        Xp[i] += 1e-6
        Xm[i] -= 1e-6
        num[i] = (np.sum(W * blstm_forward(fwd, bwd, Xp)[0]) - np.sum(W * blstm_forward(fwd, bwd, Xm)[0])) / 2e-6
    np.testing.assert_allclose(dX, num, atol=1e-7)


# -- feature encoding ------------------------------------------------------------------

def test_identical_syllables_encode_identically(corpus):
    model = make_additive(corpus.schema, corpus, SMALL)
    u = corpus.utterances[0]
    twin = dataclasses.replace(u, syllables=(u.syllables[1], u.syllables[1]))
    for seq in encode_features(model, twin):
        np.testing.assert_array_equal(seq[0], seq[1])


def test_numeric_at_training_mean_encodes_to_zero(corpus):
    model = make_additive(corpus.schema, corpus, SMALL)
    enc = model.encoders[0]
    name = enc.num[0]
    mean = np.mean([s.features[name] for s in corpus.syllables()])
    s = corpus.utterances[0].syllables[0]
    feats = dict(s.features)
    feats[name] = float(mean)
    u = dataclasses.replace(corpus.utterances[0], syllables=(dataclasses.replace(s, features=feats),))
    X, _ = enc.encode(model.params, u)
    cat_width = sum(d for *_, d in enc.cat)
    assert X[0, cat_width] == pytest.approx(0.0, abs=1e-12)


def test_embedding_lookup_matches_table(corpus):
    model = make_additive(corpus.schema, corpus, SMALL)
    u = corpus.utterances[1]
    for enc, seq in zip(model.encoders, encode_features(model, u)):
        col = 0
        for name, lut, pname, d in enc.cat:
            spec = corpus.schema[name]
            table = model.params[pname]
            assert table.shape == (len(spec.values) + 1, min(3, len(spec.values) + 1))
            for t, syl in enumerate(u.syllables):
                np.testing.assert_array_equal(seq[t, col:col + d], table[spec.values.index(syl.features[name])])
            col += d


def test_unknown_value_uses_reserved_row(corpus):
    model = make_additive(corpus.schema, corpus, SMALL)
    enc = model.encoders[1]
    name, lut, pname, d = next(c for c in enc.cat if c[0] == "word_id")
    s = corpus.utterances[0].syllables[0]
    feats = dict(s.features, word_id="never-seen")
    u = dataclasses.replace(corpus.utterances[0], syllables=(dataclasses.replace(s, features=feats),))
    X, _ = enc.encode(model.params, u)
    col = sum(c[3] for c in enc.cat[:[c[0] for c in enc.cat].index("word_id")])
    np.testing.assert_array_equal(X[0, col:col + d], model.params[pname][-1])


def test_feature_sets_follow_levels(corpus):
    model = make_additive(corpus.schema, corpus, SMALL)
    levels1 = {corpus.schema[n].level for n in model.encoders[0].names}
    levels2 = {corpus.schema[n].level for n in model.encoders[1].names}
    assert levels1 == {"phone", "syllable", "phrase"}
    assert levels2 == {"word", "syllable"}
    assert "word_id" in model.encoders[1].names


# -- additive model --------------------------------------------------------------------

def test_zero_residual_head(corpus):
    model = make_additive(corpus.schema, corpus, SMALL)
    last = len(SMALL.mlp_hidden)
    model.params[f"mlp2.{last}.W"][:] = 0.0
    model.params[f"mlp2.{last}.b"][:] = 0.0
    b = additive_forward(model, corpus.utterances[0])
    np.testing.assert_array_equal(b.residual, 0.0)
    np.testing.assert_array_equal(b.total, b.base)


@pytest.mark.parametrize("delta", ["None", "InDelta", "CrossDelta"])
def test_bundle_additivity_and_delta(delta, corpus):
    rng = np.random.default_rng(0)
    model = make_additive(corpus.schema, corpus, dataclasses.replace(SMALL, delta=delta))
    for k in model.params:
        model.params[k] += rng.normal(0, 0.2, model.params[k].shape)
    for u in corpus.utterances:
        b = additive_forward(model, u)
        assert b.total.shape == b.base.shape == b.residual.shape == (len(u), 10)
        np.testing.assert_allclose(b.total - b.base - b.residual, 0.0, atol=1e-9)
        np.testing.assert_array_equal(predict_neural(model, u), b.total)
        if delta == "None":
            assert b.delta is None
        else:
            assert b.delta.shape == (len(u), 9 if delta == "InDelta" else 20)


def test_constant_prediction_has_zero_in_delta(corpus):
    model = make_additive(corpus.schema, corpus, dataclasses.replace(SMALL, delta="InDelta"))
    last = len(SMALL.mlp_hidden)
    for head in ("mlp1", "mlp2"):
        model.params[f"{head}.{last}.W"][:] = 0.0
        model.params[f"{head}.{last}.b"][:] = 0.5 if head == "mlp1" else 0.25
    b = additive_forward(model, corpus.utterances[0])
    np.testing.assert_allclose(b.total, 75.0, atol=1e-12)
    np.testing.assert_array_equal(b.delta, 0.0)


def _reference_predict(model, utt):
    """Forward pass rebuilt from the scalar LSTM oracle and plain loops."""
    def mlp(prefix, h, act):
        n = len(model.config.mlp_hidden) + 1
        for i in range(n):
            W, b = model.params[f"{prefix}.{i}.W"], model.params[f"{prefix}.{i}.b"]
            z = np.array([[sum(W[o, j] * row[j] for j in range(len(row))) + b[o] for o in range(len(b))]
                          for row in h])
            h = z if i == n - 1 else (np.maximum(z, 0) if act == "relu" else np.tanh(z))
        return h

    def enc(e):
        rows = []
        for s in utt.syllables:
            row = []
            for name, lut, pname, d in e.cat:
                row.extend(model.params[pname][lut.get(s.features[name], len(lut))])
            for name in e.num:
                mean, std = e.numeric_stats[name]
                row.append((s.features[name] - mean) / std)
            rows.append(row)
        return np.array(rows)

    out = 0.0
    for k, (p, act) in enumerate((("1", "relu"), ("2", "tanh"))):
        X = enc(model.encoders[k])
        P = model.params
        h = np.hstack([scalar_lstm(P[f"blstm{p}.fwd.Wx"], P[f"blstm{p}.fwd.Wh"], P[f"blstm{p}.fwd.b"], X),
                       scalar_lstm(P[f"blstm{p}.bwd.Wx"], P[f"blstm{p}.bwd.Wh"], P[f"blstm{p}.bwd.b"], X, True)])
        out = out + mlp(f"mlp{p}", h, act)
    return out * model.config.target_scale


def test_predict_matches_reference_forward(corpus):
    model = make_additive(corpus.schema, corpus, TrainConfig(hidden=3, mlp_hidden=(4, 3), emb_dim=2, seed=4))
    u = corpus.utterances[2]
    np.testing.assert_allclose(predict_neural(model, u), _reference_predict(model, u), atol=1e-9)


# -- baselines --------------------------------------------------------------------------

def test_baseline_kinds(corpus):
    for kind in ("mlp", "lstm", "blstm"):
        m = make_baseline(kind, corpus.schema, corpus, SMALL)
        assert len(m.branches) == 1 and m.branches[0].encoders == (0, 1)
    with pytest.raises(ValueError):
        make_baseline("gru", corpus.schema, corpus, SMALL)


def test_blstm_baseline_zero_head_is_constant(corpus):
    m = make_baseline("blstm", corpus.schema, corpus, SMALL)
    m.params["mlp.2.W"][:] = 0.0
    p = predict_neural(m, corpus.utterances[0])
    np.testing.assert_array_equal(p, np.broadcast_to(p[0], p.shape))


def test_mlp_baseline_is_local(corpus):
    m = make_baseline("mlp", corpus.schema, corpus, SMALL)
    u = corpus.utterances[3]
    perm = np.random.default_rng(1).permutation(len(u))
    shuffled = dataclasses.replace(u, syllables=tuple(u.syllables[i] for i in perm))
    np.testing.assert_allclose(predict_neural(m, shuffled), predict_neural(m, u)[perm], atol=1e-12)


def test_lstm_baseline_is_causal(corpus):
    m = make_baseline("lstm", corpus.schema, corpus, SMALL)
    u = corpus.utterances[3]
    k = 2
    other = corpus.utterances[5].syllables
    changed = dataclasses.replace(u, syllables=u.syllables[:k] + tuple(other[i % len(other)] for i in range(len(u) - k)))
    a, b = predict_neural(m, u), predict_neural(m, changed)
    np.testing.assert_array_equal(a[:k], b[:k])
    assert not np.allclose(a[k:], b[k:])


# -- loss -------------------------------------------------------------------------------

def test_loss_examples(rng):
    y = rng.normal(size=(3, 10))
    for kind in ("None", "InDelta", "CrossDelta"):
        assert loss_with_delta(y, y, kind) == 0.0
    p = y + rng.normal(size=y.shape)
    assert loss_with_delta(p, y) == pytest.approx(np.mean((p - y) ** 2), rel=1e-12)
    with pytest.raises(ValueError):
        loss_with_delta(p[:2], y)


def test_in_delta_two_syllable_hand_case():
    y = np.array([[float(j) for j in range(10)], [5.0] * 10])
    p = y.copy()
    p[0, 3] += 1.0  # in-delta errors +1 at j=2, -1 at j=3
    p[1, 9] -= 2.0  # in-delta error -2 at j=8
    sse = 1.0 + 4.0 + (1.0 + 1.0 + 4.0)
    assert loss_with_delta(p, y, "InDelta") == pytest.approx(sse / 20.0, abs=1e-12)
    cross = 1.0 + 4.0 + (1.0 + 4.0) + (1.0 + 4.0)  # back block row 1, fwd block row 0
    assert loss_with_delta(p, y, "CrossDelta") == pytest.approx(cross / 20.0, abs=1e-12)


def test_delta_loss_bounds_plain_mse(rng):
    for _ in range(50):
        y = rng.normal(size=(4, 10))
        p = y + rng.normal(size=y.shape)
        plain = loss_with_delta(p, y)
        for kind in ("InDelta", "CrossDelta"):
            assert loss_with_delta(p, y, kind) > plain
        shifted = y + 3.0  # same in-syllable deltas
        assert loss_with_delta(shifted, y, "InDelta") == pytest.approx(loss_with_delta(shifted, y), rel=1e-12)
        assert loss_with_delta(shifted, y, "CrossDelta") == pytest.approx(loss_with_delta(shifted, y), rel=1e-12)


def test_loss_accepts_bundles_and_lists(corpus):
    model = make_additive(corpus.schema, corpus, SMALL)
    us = corpus.utterances[:3]
    bundles = [additive_forward(model, u) for u in us]
    truth = [u.contours() for u in us]
    pooled = loss_with_delta(bundles, truth)
    manual = sum(np.sum((b.total - t) ** 2) for b, t in zip(bundles, truth)) / sum(t.size for t in truth)
    assert pooled == pytest.approx(manual, rel=1e-12)
    assert isinstance(bundles[0], PredictionBundle)
    assert loss_with_delta(bundles[0], truth[0]) == pytest.approx(np.mean((bundles[0].total - truth[0]) ** 2))


# -- gradients ----------------------------------------------------------------------------

@pytest.mark.parametrize("kind,delta", [("mlp", "InDelta"), ("lstm", "CrossDelta"),
                                        ("blstm", "None"), ("additive", "InDelta")])
def test_finite_difference_gradients(kind, delta):
    errors = check_model(kind, delta, seed=3)
    assert max(errors.values()) <= 1e-4, max(errors.items(), key=lambda kv: kv[1])


def test_zero_loss_gives_zero_gradients(corpus):
    model = make_additive(corpus.schema, corpus, dataclasses.replace(SMALL, delta="CrossDelta"))
    u = corpus.utterances[0]
    pred = predict_neural(model, u)
    exact = dataclasses.replace(u, syllables=tuple(
        dataclasses.replace(s, contour=tuple(row)) for s, row in zip(u.syllables, pred)))
    loss, grads = compute_gradients(model, [exact])
    assert loss < 1e-28
    assert max(float(np.abs(g).max()) for g in grads.values()) < 1e-12


def test_duplicated_batch_same_gradient(corpus):
    model = make_additive(corpus.schema, corpus, dataclasses.replace(SMALL, delta="InDelta"))
    u = corpus.utterances[1]
    l1, g1 = compute_gradients(model, [u])
    l2, g2 = compute_gradients(model, [u, u])
    assert l1 == pytest.approx(l2, rel=1e-12)
    for k in g1:
        np.testing.assert_allclose(g2[k], g1[k], rtol=1e-10, atol=1e-15)
    assert model_loss(model, [u]) == pytest.approx(l1, rel=1e-12)


def test_non_finite_loss_raises(corpus):
    model = make_additive(corpus.schema, corpus, SMALL)
    model.params["mlp1.2.b"][0] = np.nan
    with pytest.raises(FloatingPointError):
        compute_gradients(model, corpus.utterances[:1])


# -- training -------------------------------------------------------------------------------

def _split(corpus):
    return corpus.subset(corpus.utterances[:9]), corpus.subset(corpus.utterances[9:])


def test_zero_learning_rate_is_a_no_op(corpus):
    tr, va = _split(corpus)
    cfg = dataclasses.replace(SMALL, learning_rate=0.0, epochs=4, patience=10)
    model = make_additive(corpus.schema, tr, cfg)
    trained, hist = train(model, tr, va, cfg)
    for k in model.params:
        np.testing.assert_array_equal(trained.params[k], model.params[k])
    assert len(hist) == 4
    assert len({h["train_loss"] for h in hist}) == 1 and len({h["val_loss"] for h in hist}) == 1


def test_training_is_deterministic(corpus):
    tr, va = _split(corpus)
    cfg = dataclasses.replace(SMALL, epochs=3, delta="InDelta", seed=8)
    runs = [train(make_additive(corpus.schema, tr, cfg), tr, va, cfg) for _ in range(2)]
    assert runs[0][1] == runs[1][1]
    for k in runs[0][0].params:
        np.testing.assert_array_equal(runs[0][0].params[k], runs[1][0].params[k])


def test_training_reduces_loss_on_50_utterances():
    c = generate_synthetic(SynthConfig(n_utterances=60, seed=12))
    tr, va = c.subset(c.utterances[:50]), c.subset(c.utterances[50:])
    cfg = TrainConfig(hidden=16, mlp_hidden=(32, 16), epochs=20, patience=25, delta="InDelta", seed=1)
    _, hist = train(make_additive(c.schema, tr, cfg), tr, va, cfg)
    assert len(hist) == 20
    assert hist[19]["train_loss"] < hist[0]["train_loss"]


def test_early_stopping_restores_best(corpus):
    tr, va = _split(corpus)
    cfg = dataclasses.replace(SMALL, learning_rate=0.05, epochs=30, patience=2)
    start = make_additive(corpus.schema, tr, cfg)
    initial = model_loss(start, list(va.utterances))
    trained, hist = train(start, tr, va, cfg)
    best = min([initial] + [h["val_loss"] for h in hist])
    assert model_loss(trained, list(va.utterances)) == pytest.approx(best, rel=1e-12)
    if len(hist) < 30:
        assert all(h["val_loss"] >= best for h in hist[-2:])


def test_divergence_reports_history(corpus):
    tr, va = _split(corpus)
    cfg = dataclasses.replace(SMALL, epochs=2)
    model = make_additive(corpus.schema, tr, cfg)
    model.params["mlp1.2.b"][:] = np.inf
    with pytest.raises(TrainingDiverged) as err:
        train(model, tr, va, cfg)
    assert err.value.history == []


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(patience=0)
    with pytest.raises(ValueError):
        TrainConfig(delta="Both")
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)


def test_adam_first_step_is_lr_sized():
    opt = Adam(3, lr=0.1)
    x = np.zeros(3)
    opt.step(x, np.array([2.0, -0.5, 0.0]))
    np.testing.assert_allclose(x, [-0.1, 0.1, 0.0], atol=1e-6)


# -- serialization ---------------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["mlp", "lstm", "blstm", "additive"])
def test_model_text_round_trip(kind, corpus, tmp_path):
    model = make_model(kind, corpus.schema, corpus, dataclasses.replace(SMALL, delta="CrossDelta"))
    text = nn_io.model_to_text(model)
    assert text.startswith("F0LAB-NN v1\n")
    again = nn_io.model_from_text(text)
    assert again.kind == kind and again.delta == "CrossDelta"
    assert nn_io.model_to_text(again) == text
    for u in corpus.utterances[:3]:
        np.testing.assert_allclose(predict_neural(again, u), predict_neural(model, u), rtol=1e-7, atol=1e-6)
    nn_io.save_model(model, tmp_path / "m.nn")
    assert nn_io.model_to_text(nn_io.load_model(tmp_path / "m.nn")) == text


def test_model_text_rejects_garbage():
    with pytest.raises(ValueError):
        nn_io.model_from_text("F0LAB-DT v1\n{}")
