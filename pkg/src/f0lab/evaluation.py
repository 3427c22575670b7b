"""Objective contour metrics at syllable and utterance level.

Syllable level: RMSE and Pearson correlation of each 10-point syllable
vector, averaged over syllables.  Utterance level: the same metrics on each
utterance's concatenated syllable vectors, averaged over utterances.  Values
are in Hz.  A unit where either side is constant has no defined correlation;
it is left out of the correlation average and counted in the report.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np


def rmse(a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("rmse of empty vectors")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def pearson_flagged(a, b):
    """(correlation, defined); constant input gives (0.0, False)."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("correlation needs at least 2 points")
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt(np.dot(da, da))
    nb = np.sqrt(np.dot(db, db))
    scale = max(np.abs(a).max(), np.abs(b).max(), 1.0)
    if na <= 1e-12 * scale or nb <= 1e-12 * scale:
        return 0.0, False
    return float(np.clip(np.dot(da, db) / (na * nb), -1.0, 1.0)), True


def pearson(a, b) -> float:
    return pearson_flagged(a, b)[0]


@dataclass
class UtteranceScore:
    id: str
    n_syllables: int
    rmse: float
    corr: float
    corr_defined: bool


@dataclass
class EvalReport:
    syl_rmse: float
    syl_corr: float
    utt_rmse: float
    utt_corr: float
    n_syllables: int = 0
    n_utterances: int = 0
    syl_corr_excluded: int = 0
    utt_corr_excluded: int = 0
    per_utterance: list = field(default_factory=list)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("per_utterance")
        return d

    def to_text(self) -> str:
        """Flat ``key = value`` block."""
        lines = []
        for k, v in self.summary().items():
            lines.append(f"{k} = {v:.6f}" if isinstance(v, float) else f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        d = self.summary()
        d["per_utterance"] = [asdict(u) for u in self.per_utterance]
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


def _aligned(pred, truth):
    if isinstance(pred, Mapping):
        for utt in truth.utterances:
            if utt.id not in pred:
                raise ValueError(f"no prediction for utterance {utt.id!r}")
            yield utt, pred[utt.id]
        return
    pred = list(pred)
    if len(pred) != len(truth.utterances):
        raise ValueError(f"{len(pred)} predicted utterances for {len(truth.utterances)} in corpus")
    yield from zip(truth.utterances, pred)


def evaluate(pred, truth) -> EvalReport:
    """Score predictions against a corpus.

    ``pred`` maps utterance id -> (n_syllables, 10) contours, or is a
    sequence aligned with ``truth.utterances``.
    """
    syl_rmse, syl_corr = [], []
    utt_rmse, utt_corr = [], []
    syl_excluded = utt_excluded = 0
    per_utt = []
    for utt, p in _aligned(pred, truth):
        y = utt.contours()
        p = np.asarray(p, dtype=float)
        if p.shape != y.shape:
            raise ValueError(f"utterance {utt.id!r}: prediction shape {p.shape} != truth {y.shape}")
        if not len(y):
            continue
        for ps, ys in zip(p, y):
            syl_rmse.append(rmse(ps, ys))
            c, ok = pearson_flagged(ps, ys)
            if ok:
                syl_corr.append(c)
            else:
                syl_excluded += 1
        r = rmse(p, y)
        c, ok = pearson_flagged(p, y)
        utt_rmse.append(r)
        if ok:
            utt_corr.append(c)
        else:
            utt_excluded += 1
        per_utt.append(UtteranceScore(utt.id, len(y), r, c, ok))

    def avg(xs):
        return float(np.mean(xs)) if xs else float("nan")

    return EvalReport(avg(syl_rmse), avg(syl_corr), avg(utt_rmse), avg(utt_corr),
                      len(syl_rmse), len(utt_rmse), syl_excluded, utt_excluded, per_utt)
