"""Small hand-built corpora for tests that need full control of features."""

import numpy as np

from oracles import pearson_by_hand, rmse_by_hand

from f0lab.corpus import Corpus, FeatureSchema, SyllableRecord, UtteranceRecord, categorical, numeric

HAND_SCHEMA = FeatureSchema((
    categorical("tone", "syllable", ["1", "2", "3"]),
    numeric("uid", "syllable", 0, 1e6),
    categorical("kind", "word", ["p", "q"]),
    numeric("phrase_len", "phrase", 0, 100),
))


def hand_corpus(rng, n_utt=6, n_syl=4, tones=(1, 2, 3)):
    """Random contours; ``uid`` is distinct for every syllable."""
    utts, uid = [], 0
    for u in range(n_utt):
        syls = []
        for i in range(n_syl):
            t = int(tones[int(rng.integers(len(tones)))])
            feats = {"tone": str(t), "uid": float(uid), "kind": "pq"[int(rng.integers(2))],
                     "phrase_len": float(n_syl)}
            syls.append(SyllableRecord(t, feats, tuple(rng.uniform(100, 300, 10)), i, 0))
            uid += 1
        utts.append(UtteranceRecord(f"h{u:03d}", tuple(syls),
                                    tuple((f"w{i}", "n") for i in range(n_syl)), ((0, n_syl),)))
    return Corpus(HAND_SCHEMA, (1, 2, 3), tuple(utts)).validate()


def eval_corpus(contour_lists):
    utts = []
    for u, contours in enumerate(contour_lists):
        syls = tuple(SyllableRecord(1, {"tone": "1", "uid": float(i), "kind": "p", "phrase_len": 1.0},
                                    tuple(c), i, 0) for i, c in enumerate(contours))
        utts.append(UtteranceRecord(f"e{u}", syls, tuple(("w", "n") for _ in syls), ((0, len(syls)),)))
    return Corpus(HAND_SCHEMA, (1, 2, 3), tuple(utts))


TRUTH = [
    [[100 + 5 * j for j in range(10)]],
    [[200 - 3 * j for j in range(10)], [150 + (j % 3) * 4 for j in range(10)]],
    [[120 + j * j for j in range(10)], [180.0] * 10, [160 + 2 * j - (j % 2) * 7 for j in range(10)]],
]
PRED = [
    [[102 + 4 * j for j in range(10)]],
    [[195 - 2 * j for j in range(10)], [155.0] * 10],
    [[118 + j * j + (j % 2) for j in range(10)], [175 + j for j in range(10)], [150 + 3 * j for j in range(10)]],
]


def eval_hand_report():
    syl_r, syl_c, utt_r, utt_c = [], [], [], []
    for P, T in zip(PRED, TRUTH):
        for p, t in zip(P, T):
            syl_r.append(rmse_by_hand(p, t))
            if len(set(p)) > 1 and len(set(t)) > 1:
                syl_c.append(pearson_by_hand(p, t))
        fp = [v for row in P for v in row]
        ft = [v for row in T for v in row]
        utt_r.append(rmse_by_hand(fp, ft))
        utt_c.append(pearson_by_hand(fp, ft))
    return (sum(syl_r) / len(syl_r), sum(syl_c) / len(syl_c),
            sum(utt_r) / len(utt_r), sum(utt_c) / len(utt_c))
