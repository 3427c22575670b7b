"""Syllable-sequence contour networks.

``additive``: base contour from BLSTM1 + ReLU MLP over phone/syllable/phrase
features, residual contour from BLSTM2 + tanh MLP over word/syllable features,
prediction = base + residual.  Baselines ``mlp``, ``lstm`` and ``blstm`` run a
single path over both feature sets concatenated.

Networks work on targets divided by ``target_scale`` (100 Hz); bundles and
predictions are reported in Hz.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..contour import delta_rows
from ..corpus import CONTOUR_POINTS, Corpus, FeatureSchema
from .layers import (
    blstm_backward,
    blstm_forward,
    lstm_backward,
    lstm_forward,
    mlp_backward,
    mlp_forward,
)

KINDS = ("mlp", "lstm", "blstm", "additive")
SET1_LEVELS = ("phone", "syllable", "phrase")
SET2_LEVELS = ("word", "syllable")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 50
    clip_norm: float = 5.0
    patience: int = 5
    delta: str = "None"
    seed: int = 0
    hidden: int = 64
    mlp_hidden: tuple = (128, 64)
    emb_dim: int = 16
    target_scale: float = 100.0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.delta not in ("None", "InDelta", "CrossDelta"):
            raise ValueError(f"unknown delta kind {self.delta!r}")
        if self.hidden < 1 or self.emb_dim < 1 or not self.mlp_hidden:
            raise ValueError("layer sizes must be positive")
        object.__setattr__(self, "mlp_hidden", tuple(int(h) for h in self.mlp_hidden))


class FeatureEncoder:
    """Per-syllable input vectors for one feature set.

    Categorical features go through embedding tables (last row = unknown
    value); numeric features are z-scored with statistics frozen at
    construction.
    """

    def __init__(self, prefix, schema: FeatureSchema, names, emb_dim, numeric_stats):
        self.prefix = prefix
        self.schema = schema
        self.names = list(names)
        self.emb_dim = emb_dim
        self.numeric_stats = dict(numeric_stats)  # name -> (mean, std)
        self.cat = []  # (name, lookup, param name, dim)
        self.num = []
        for name in self.names:
            spec = schema[name]
            if spec.is_categorical:
                lut = {v: i for i, v in enumerate(spec.values)}
                self.cat.append((name, lut, f"{prefix}.{name}", self.table_dim(spec)))
            else:
                self.num.append(name)

    def table_dim(self, spec):
        return min(self.emb_dim, len(spec.values) + 1)

    @property
    def dim(self) -> int:
        return sum(d for *_, d in self.cat) + len(self.num)

    def init_params(self, rng, params):
        for name, lut, pname, d in self.cat:
            params[pname] = rng.uniform(-0.25, 0.25, size=(len(lut) + 1, d))

    @classmethod
    def fit(cls, prefix, schema, names, emb_dim, corpus: Corpus):
        stats = {}
        for name in names:
            if not schema[name].is_categorical:
                vals = np.array([s.features[name] for s in corpus.syllables()], dtype=float)
                mean = float(vals.mean()) if len(vals) else 0.0
                std = float(vals.std()) if len(vals) else 1.0
                stats[name] = (mean, std if std > 1e-8 else 1.0)
        return cls(prefix, schema, names, emb_dim, stats)

    def indices(self, utterance):
        """Embedding row indices (T, n_cat) and scaled numeric block (T, n_num)."""
        syls = utterance.syllables
        idx = np.array([[lut.get(s.features[name], len(lut)) for name, lut, _, _ in self.cat]
                        for s in syls], dtype=int).reshape(len(syls), len(self.cat))
        num = np.array([[(float(s.features[n]) - self.numeric_stats[n][0]) / self.numeric_stats[n][1]
                         for n in self.num] for s in syls], dtype=float).reshape(len(syls), len(self.num))
        return idx, num

    def encode(self, params, utterance):
        idx, num = self.indices(utterance)
        blocks = [params[pname][idx[:, j]] for j, (_, _, pname, _) in enumerate(self.cat)]
        blocks.append(num)
        return np.hstack(blocks), idx

    def backward(self, idx, dX, grads):
        col = 0
        for j, (_, _, pname, d) in enumerate(self.cat):
            np.add.at(grads[pname], idx[:, j], dX[:, col:col + d])
            col += d


@dataclass(frozen=True)
class Branch:
    name: str
    encoders: tuple  # indices into model.encoders
    rnn: Optional[str]  # None | "lstm" | "blstm"
    rnn_prefix: Optional[str]
    head_prefix: str
    activation: str


@dataclass
class PredictionBundle:
    base: np.ndarray
    residual: np.ndarray
    total: np.ndarray
    delta: Optional[np.ndarray]


def _branches(kind):
    if kind == "additive":
        return (Branch("base", (0,), "blstm", "blstm1", "mlp1", "relu"),
                Branch("residual", (1,), "blstm", "blstm2", "mlp2", "tanh"))
    rnn = {"mlp": None, "lstm": "lstm", "blstm": "blstm"}[kind]
    return (Branch("base", (0, 1), rnn, rnn, "mlp", "relu"),)


class ContourNet:
    def __init__(self, kind, encoders, params, config: TrainConfig):
        if kind not in KINDS:
            raise ValueError(f"unknown network kind {kind!r}")
        self.kind = kind
        self.encoders = list(encoders)
        self.params = params
        self.config = config
        self.branches = _branches(kind)

    @property
    def schema(self):
        return self.encoders[0].schema

    @property
    def delta(self):
        return self.config.delta

    def copy(self):
        out = copy.copy(self)
        out.params = {k: v.copy() for k, v in self.params.items()}
        return out

    def n_parameters(self):
        return sum(v.size for v in self.params.values())

    # parameter access
    def _lstm(self, prefix):
        p = self.params
        return p[f"{prefix}.Wx"], p[f"{prefix}.Wh"], p[f"{prefix}.b"]

    def _mlp(self, prefix):
        n = len(self.config.mlp_hidden) + 1
        return [(self.params[f"{prefix}.{i}.W"], self.params[f"{prefix}.{i}.b"]) for i in range(n)]

    # forward / backward
    def _branch_forward(self, br, utterance):
        encoded = [self.encoders[e].encode(self.params, utterance) for e in br.encoders]
        X = np.hstack([x for x, _ in encoded])
        cache = {"idx": [i for _, i in encoded], "X": X}
        if br.rnn == "blstm":
            fwd, bwd = self._lstm(f"{br.rnn_prefix}.fwd"), self._lstm(f"{br.rnn_prefix}.bwd")
            h, cache["rnn"] = blstm_forward(fwd, bwd, X)
        elif br.rnn == "lstm":
            h, cache["rnn"] = lstm_forward(*self._lstm(br.rnn_prefix), X)
        else:
            h = X
        out, cache["mlp"] = mlp_forward(self._mlp(br.head_prefix), h, br.activation)
        return out, cache

    def _branch_backward(self, br, cache, dOut, grads):
        dh, mg = mlp_backward(self._mlp(br.head_prefix), cache["mlp"], dOut)
        for i, (dW, db) in enumerate(mg):
            grads[f"{br.head_prefix}.{i}.W"] += dW
            grads[f"{br.head_prefix}.{i}.b"] += db
        if br.rnn == "blstm":
            pf, pb = f"{br.rnn_prefix}.fwd", f"{br.rnn_prefix}.bwd"
            dX, gf, gb = blstm_backward(self._lstm(pf), self._lstm(pb), cache["rnn"], dh)
            for pre, g in ((pf, gf), (pb, gb)):
                for suffix, gv in zip(("Wx", "Wh", "b"), g):
                    grads[f"{pre}.{suffix}"] += gv
        elif br.rnn == "lstm":
            dX, dWx, dWh, db = lstm_backward(*self._lstm(br.rnn_prefix), cache["rnn"], dh)
            for suffix, gv in zip(("Wx", "Wh", "b"), (dWx, dWh, db)):
                grads[f"{br.rnn_prefix}.{suffix}"] += gv
        else:
            dX = dh
        col = 0
        for e, idx in zip(br.encoders, cache["idx"]):
            enc = self.encoders[e]
            enc.backward(idx, dX[:, col:col + enc.dim], grads)
            col += enc.dim

    def forward_scaled(self, utterance):
        """Per-branch outputs in scaled units plus caches for backprop."""
        outs, caches = [], []
        for br in self.branches:
            o, c = self._branch_forward(br, utterance)
            outs.append(o)
            caches.append(c)
        return outs, caches

    def bundle(self, utterance) -> PredictionBundle:
        outs, _ = self.forward_scaled(utterance)
        s = self.config.target_scale
        base = outs[0] * s
        residual = outs[1] * s if len(outs) > 1 else np.zeros_like(base)
        total = base + residual
        return PredictionBundle(base, residual, total, delta_rows(total, self.delta))

    def predict(self, utterance) -> np.ndarray:
        return self.bundle(utterance).total


# -- construction -----------------------------------------------------------------

def _init_lstm(rng, params, prefix, n_in, H):
    k = 1.0 / np.sqrt(H)
    params[f"{prefix}.Wx"] = rng.uniform(-k, k, size=(4 * H, n_in))
    params[f"{prefix}.Wh"] = rng.uniform(-k, k, size=(4 * H, H))
    b = np.zeros(4 * H)
    b[H:2 * H] = 1.0  # forget gate starts open
    params[f"{prefix}.b"] = b


def _init_mlp(rng, params, prefix, sizes):
    for i in range(len(sizes) - 1):
        n_in, n_out = sizes[i], sizes[i + 1]
        lim = np.sqrt(6.0 / (n_in + n_out))
        params[f"{prefix}.{i}.W"] = rng.uniform(-lim, lim, size=(n_out, n_in))
        params[f"{prefix}.{i}.b"] = np.zeros(n_out)


def _mean_target(corpus, scale):
    rows = [u.contours() for u in corpus.utterances if len(u)]
    if not rows:
        return np.zeros(CONTOUR_POINTS)
    return np.vstack(rows).mean(axis=0) / scale


def _build(kind, schema, train: Corpus, config: TrainConfig, seed=None):
    rng = np.random.default_rng(config.seed if seed is None else seed)
    enc1 = FeatureEncoder.fit("enc1", schema, schema.names_at(*SET1_LEVELS), config.emb_dim, train)
    enc2 = FeatureEncoder.fit("enc2", schema, schema.names_at(*SET2_LEVELS), config.emb_dim, train)
    params = {}
    enc1.init_params(rng, params)
    enc2.init_params(rng, params)
    H = config.hidden
    head = list(config.mlp_hidden) + [CONTOUR_POINTS]
    for br in _branches(kind):
        n_in = sum((enc1, enc2)[e].dim for e in br.encoders)
        if br.rnn == "blstm":
            _init_lstm(rng, params, f"{br.rnn_prefix}.fwd", n_in, H)
            _init_lstm(rng, params, f"{br.rnn_prefix}.bwd", n_in, H)
            n_in = 2 * H
        elif br.rnn == "lstm":
            _init_lstm(rng, params, br.rnn_prefix, n_in, H)
            n_in = H
        _init_mlp(rng, params, br.head_prefix, [n_in] + head)
    last = len(config.mlp_hidden)
    params[f"{_branches(kind)[0].head_prefix}.{last}.b"] = _mean_target(train, config.target_scale)
    return ContourNet(kind, (enc1, enc2), params, config)


def make_additive(schema: FeatureSchema, train: Corpus, config: TrainConfig = TrainConfig()) -> ContourNet:
    """Additive-BLSTM; numeric statistics and output bias come from ``train``."""
    return _build("additive", schema, train, config)


def make_baseline(kind: str, schema: FeatureSchema, train: Corpus,
                  config: TrainConfig = TrainConfig()) -> ContourNet:
    """Single-path MLP, LSTM or BLSTM over the concatenated feature sets."""
    kind = kind.lower()
    if kind not in ("mlp", "lstm", "blstm"):
        raise ValueError(f"baseline kind must be mlp, lstm or blstm, got {kind!r}")
    return _build(kind, schema, train, config)


def make_model(kind: str, schema, train, config: TrainConfig = TrainConfig()) -> ContourNet:
    return make_additive(schema, train, config) if kind == "additive" else make_baseline(kind, schema, train, config)


# -- loss and gradients ----------------------------------------------------------

def encode_features(model: ContourNet, utterance):
    """(seq1, seq2): per-syllable input rows for the two feature sets."""
    return tuple(enc.encode(model.params, utterance)[0] for enc in model.encoders)


def additive_forward(model: ContourNet, utterance) -> PredictionBundle:
    return model.bundle(utterance)


def predict_neural(model: ContourNet, utterance) -> np.ndarray:
    """(n_syllables, 10) Hz contours; the delta block is dropped."""
    return model.predict(utterance)


def _delta_adjoint(e, kind):
    """Transpose of the delta operator applied to an error block e."""
    if kind == "InDelta":
        g = np.zeros((e.shape[0], e.shape[1] + 1))
        g[:, 1:] += e
        g[:, :-1] -= e
        return g
    d = e.shape[1] // 2
    back, fwd = e[:, :d], e[:, d:]
    g = np.zeros((e.shape[0], d))
    g[1:] += back[1:]
    g[:-1] -= back[1:]
    g[1:] += fwd[:-1]
    g[:-1] -= fwd[:-1]
    return g


def _loss_terms(pred, truth, kind):
    """(sum of squared errors over [y, delta y], value count, dSSE/dpred).

    The delta block adds to the error sum but not to the normalizer, so the
    loss equals plain MSE whenever predicted and true deltas agree.
    """
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction shape {pred.shape} does not match truth {truth.shape}")
    err = pred - truth
    sse = float(np.sum(err ** 2))
    count = err.size
    grad = 2.0 * err
    dp, dt = delta_rows(pred, kind), delta_rows(truth, kind)
    if dp is not None:
        derr = dp - dt
        sse += float(np.sum(derr ** 2))
        grad += 2.0 * _delta_adjoint(derr, kind)
    return sse, count, grad


def loss_with_delta(pred, truth, kind: str = "None") -> float:
    """Squared error over [y, delta y] against [y_hat, delta y_hat], divided
    by the number of contour values (syllables x 10).

    With ``kind="None"`` this is plain MSE; a delta block only adds error.
    ``pred`` and ``truth`` are (n_syllables, 10) arrays (a PredictionBundle
    is accepted for ``pred``) or equal-length lists of such arrays, pooled
    over all utterances.
    """
    if isinstance(pred, PredictionBundle):
        pred = pred.total
    if isinstance(pred, (list, tuple)):
        if len(pred) != len(truth):
            raise ValueError("prediction and truth utterance counts differ")
        terms = [_loss_terms(p.total if isinstance(p, PredictionBundle) else p, t, kind)
                 for p, t in zip(pred, truth)]
        return sum(t[0] for t in terms) / max(sum(t[1] for t in terms), 1)
    sse, count, _ = _loss_terms(pred, truth, kind)
    return sse / max(count, 1)


def model_loss(model: ContourNet, utterances) -> float:
    """Training loss (scaled units) pooled over the given utterances."""
    s = model.config.target_scale
    sse = count = 0.0
    for u in utterances:
        outs, _ = model.forward_scaled(u)
        a, b, _ = _loss_terms(sum(outs), u.contours() / s, model.delta)
        sse += a
        count += b
    return sse / max(count, 1)


def compute_gradients(model: ContourNet, utterances):
    """Exact gradients of the pooled scaled loss; returns (loss, grads dict)."""
    utterances = list(utterances)
    s = model.config.target_scale
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    runs = []
    sse = count = 0.0
    for u in utterances:
        outs, caches = model.forward_scaled(u)
        a, b, g = _loss_terms(sum(outs), u.contours() / s, model.delta)
        sse += a
        count += b
        runs.append((caches, g))
    loss = sse / max(count, 1)
    if not np.isfinite(loss):
        raise FloatingPointError(
            f"non-finite loss {loss} on utterances {[u.id for u in utterances][:5]}")
    for caches, g in runs:
        dOut = g / count
        for br, cache in zip(model.branches, caches):
            model._branch_backward(br, cache, dOut, grads)
    return loss, grads
