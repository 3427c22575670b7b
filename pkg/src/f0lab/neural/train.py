"""One-utterance-per-step Adam training with clipping and early stopping."""

from __future__ import annotations

import logging

import numpy as np

from .model import ContourNet, TrainConfig, compute_gradients, model_loss

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


class Adam:
    """Adaptive-moment updates on one flat parameter vector."""

    def __init__(self, size, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self._buf = np.empty(size)
        self.t = 0

    def step(self, flat, grad):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        m, v, buf = self.m, self.v, self._buf
        m *= self.beta1
        np.multiply(grad, 1.0 - self.beta1, out=buf)
        m += buf
        v *= self.beta2
        np.multiply(grad, grad, out=buf)
        buf *= 1.0 - self.beta2
        v += buf
        # flat -= lr * (m / c1) / (sqrt(v / c2) + eps)
        np.multiply(v, 1.0 / c2, out=buf)
        np.sqrt(buf, out=buf)
        buf += self.eps
        np.divide(m, buf, out=buf)
        buf *= self.lr / c1
        flat -= buf


def flatten_params(params):
    """Rebind every entry of ``params`` as a view into one flat vector."""
    names = sorted(params)
    flat = np.concatenate([params[k].ravel() for k in names])
    offset = 0
    for k in names:
        shape, size = params[k].shape, params[k].size
        params[k] = flat[offset:offset + size].reshape(shape)
        offset += size
    return names, flat


def clip_gradients(grad, max_norm):
    norm = float(np.sqrt(np.dot(grad, grad)))
    if max_norm and norm > max_norm:
        grad *= max_norm / norm
    return norm


def train(model: ContourNet, train_corpus, val_corpus, config: TrainConfig = None):
    """Fit a copy of ``model``; returns (best-on-validation model, history).

    History rows are dicts with ``epoch``, ``train_loss`` (mean pre-update
    step loss) and ``val_loss``, all in scaled units.
    """
    config = config or model.config
    train_utts = [u for u in train_corpus.utterances if len(u)]
    val_utts = [u for u in val_corpus.utterances if len(u)]
    if not train_utts or not val_utts:
        raise ValueError("training and validation corpora must be non-empty")
    model = model.copy()
    rng = np.random.default_rng(config.seed)
    names, flat = flatten_params(model.params)
    opt = Adam(flat.size, lr=config.learning_rate)
    history = []
    best_val = model_loss(model, val_utts)
    best_params = {k: v.copy() for k, v in model.params.items()}
    bad_epochs = 0
    step_losses = np.zeros(len(train_utts))
    for epoch in range(1, config.epochs + 1):
        for i in rng.permutation(len(train_utts)):
            loss, grads = _gradients(model, train_utts[i], history)
            step_losses[i] = loss
            grad = np.concatenate([grads[k].ravel() for k in names])
            clip_gradients(grad, config.clip_norm)
            opt.step(flat, grad)
        val = model_loss(model, val_utts)
        history.append({"epoch": epoch, "train_loss": float(step_losses.mean()), "val_loss": float(val)})
        log.info("epoch %d train %.6f val %.6f", epoch, step_losses.mean(), val)
        if not np.isfinite(val):
            raise TrainingDiverged(f"validation loss became {val} at epoch {epoch}", history)
        if val < best_val:
            best_val = val
            best_params = {k: v.copy() for k, v in model.params.items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break
    model.params = {k: best_params[k] for k in names}
    return model, history


def _gradients(model, utt, history):
    try:
        return compute_gradients(model, [utt])
    except FloatingPointError as exc:
        raise TrainingDiverged(str(exc), history) from None
