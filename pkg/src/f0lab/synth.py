"""Synthetic tone-language corpus generator.

Each syllable contour (Hz) is built from three deterministic parts plus noise::

    contour = speaker_mean + speaker_range / 2 * TEMPLATE[tone]   # tone part
              - declination_slope * (k + t)                        # phrase declination
              + emphasis residual                                  # word emphasis
              + N(0, noise_std_hz)

with ``t = linspace(0, 1, 10)`` and ``k`` the syllable's index inside its
phrase.  The emphasis residual of a syllable belonging to an accented word is::

    word_gain[word] * POSITION_GAIN[syllable position in word]
        * speaker_range * (0.25 * TEMPLATE[tone] + 0.1)

and zero otherwise, so it depends on the word identity, the accent flag, the
syllable position inside the word and the tone.  Tone 0 is the neutral tone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import (
    CONTOUR_POINTS,
    Corpus,
    FeatureSchema,
    SyllableRecord,
    UtteranceRecord,
    categorical,
    numeric,
)

NEUTRAL_TONE = 0

# 10-point normalized shapes; scaled by speaker_range / 2.
TONE_TEMPLATES = {
    4: {
        0: (0.00, -0.02, -0.04, -0.06, -0.08, -0.10, -0.12, -0.14, -0.16, -0.18),  # short mid
        1: (0.80,) * 10,                                                          # high level
        2: (-0.40, -0.38, -0.32, -0.23, -0.11, 0.03, 0.19, 0.36, 0.54, 0.72),      # rising
        3: (-0.35, -0.55, -0.71, -0.83, -0.90, -0.92, -0.88, -0.78, -0.62, -0.40),  # fall-rise
        4: (0.95, 0.75, 0.55, 0.35, 0.15, -0.05, -0.25, -0.45, -0.65, -0.85),      # falling
    },
    6: {
        0: (0.00, -0.02, -0.04, -0.06, -0.08, -0.10, -0.12, -0.14, -0.16, -0.18),  # short mid
        1: (0.80,) * 10,                                                          # high level
        2: (-0.30, -0.29, -0.25, -0.18, -0.08, 0.05, 0.20, 0.38, 0.58, 0.80),      # high rising
        3: (0.10,) * 10,                                                          # mid level
        4: (-0.50, -0.56, -0.61, -0.67, -0.72, -0.78, -0.83, -0.89, -0.94, -1.00),  # low falling
        5: (-0.60, -0.60, -0.58, -0.55, -0.50, -0.44, -0.36, -0.27, -0.19, -0.10),  # low rising
        6: (-0.40,) * 10,                                                         # low level
    },
}

FALLING_TONE = {4: 4, 6: 4}

POSITION_GAIN = (1.0, 0.6, 0.4)

CONSONANTS = ("0", "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "q", "x", "zh", "s")
VOWELS = ("a", "o", "e", "i", "u", "ai", "ei", "ao", "ou", "an", "en", "ang", "eng", "ong")
POS_TAGS = ("n", "v", "adj", "adv", "pron", "num", "part", "prep")
ACCENTS = ("none", "H", "M")
LEXICON_SIZE = 300
MAX_WORD_LEN = 3
MAX_COUNT = 1000.0

TIME = np.linspace(0.0, 1.0, CONTOUR_POINTS)


@dataclass(frozen=True)
class SynthConfig:
    n_utterances: int = 1000
    tone_count: int = 4
    syllables_per_utterance: tuple = (6, 14)
    phrases_per_utterance: tuple = (1, 3)
    speaker_mean_hz: float = 200.0
    speaker_range_hz: float = 120.0
    declination_slope: float = 2.0
    emphasis_probability: float = 0.3
    noise_std_hz: float = 5.0
    seed: int = 0

    def validate(self) -> "SynthConfig":
        if self.tone_count not in TONE_TEMPLATES:
            raise ValueError(f"tone_count must be 4 or 6, got {self.tone_count}")
        if self.n_utterances < 1:
            raise ValueError("n_utterances must be >= 1")
        for name in ("syllables_per_utterance", "phrases_per_utterance"):
            lo, hi = getattr(self, name)
            if lo < 1 or lo > hi:
                raise ValueError(f"{name} must satisfy 1 <= min <= max, got {(lo, hi)}")
        if self.noise_std_hz < 0:
            raise ValueError("noise_std_hz must be >= 0")
        if not 0.0 <= self.emphasis_probability <= 1.0:
            raise ValueError("emphasis_probability must lie in [0, 1]")
        if self.speaker_range_hz < 0 or self.speaker_mean_hz <= 0:
            raise ValueError("speaker mean must be > 0 and range >= 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        return self


def tone_inventory(tone_count: int) -> tuple:
    return tuple(sorted(TONE_TEMPLATES[tone_count]))


def template(tone_count: int, tone: int) -> np.ndarray:
    return np.asarray(TONE_TEMPLATES[tone_count][tone], dtype=float)


def make_schema(tone_count: int) -> FeatureSchema:
    tones = [str(t) for t in tone_inventory(tone_count)]
    ctx_tones = tones + ["none"]
    syl_names = [c + v if c != "0" else v for c in CONSONANTS for v in VOWELS]
    flags = ("0", "1")
    ctx_pos = POS_TAGS + ("none",)
    return FeatureSchema((
        categorical("vowel", "phone", VOWELS),
        categorical("consonant", "phone", CONSONANTS),
        categorical("syl_name", "syllable", syl_names),
        numeric("duration", "syllable", 0.0, 2.0),
        numeric("n_phones", "syllable", 0, 4),
        numeric("n_phones_prev", "syllable", 0, 4),
        numeric("n_phones_next", "syllable", 0, 4),
        categorical("tone", "syllable", tones),
        categorical("tone_prev", "syllable", ctx_tones),
        categorical("tone_next", "syllable", ctx_tones),
        numeric("syls_from_last_accent", "syllable", -1, MAX_COUNT),
        numeric("syls_to_next_accent", "syllable", -1, MAX_COUNT),
        categorical("accented", "syllable", flags),
        categorical("accented_prev", "syllable", flags),
        categorical("accented_next", "syllable", flags),
        categorical("accent", "syllable", ACCENTS),
        categorical("accent_prev", "syllable", ACCENTS),
        categorical("accent_next", "syllable", ACCENTS),
        numeric("break", "syllable", 0, 4),
        numeric("break_prev", "syllable", 0, 4),
        numeric("break_next", "syllable", 0, 4),
        categorical("pos", "word", POS_TAGS),
        categorical("pos_prev", "word", ctx_pos),
        categorical("pos_next", "word", ctx_pos),
        numeric("word_pos_in_utt", "word", 0, MAX_COUNT),
        numeric("syl_pos_in_word", "word", 0, MAX_WORD_LEN - 1),
        numeric("word_n_syls", "word", 1, MAX_WORD_LEN),
        categorical("word_id", "word", [f"w{i:04d}" for i in range(LEXICON_SIZE)]),
        numeric("phrase_pos_in_utt", "phrase", 0, MAX_COUNT),
        numeric("n_phrases", "phrase", 1, MAX_COUNT),
        numeric("syls_in_phrase", "phrase", 1, MAX_COUNT),
        numeric("syl_pos_in_phrase", "phrase", 0, MAX_COUNT),
        numeric("stressed_from_last_break", "phrase", 0, MAX_COUNT),
        numeric("stressed_to_next_break", "phrase", 0, MAX_COUNT),
        numeric("accented_from_last_break", "phrase", 0, MAX_COUNT),
        numeric("accented_to_next_break", "phrase", 0, MAX_COUNT),
    ))


@dataclass
class _Word:
    surface: str
    pos: str
    syllables: list  # (consonant, vowel, tone)
    gain: float


def _make_lexicon(rng, tone_count):
    tones = tone_inventory(tone_count)
    lexicon = []
    for i in range(LEXICON_SIZE):
        # guarantee single-syllable words so any syllable budget can be met exactly
        n = 1 if i % 10 == 0 else int(rng.integers(1, MAX_WORD_LEN + 1))
        syls = []
        for k in range(n):
            c = CONSONANTS[int(rng.integers(len(CONSONANTS)))]
            v = VOWELS[int(rng.integers(len(VOWELS)))]
            tone_pool = tones if k > 0 else tones[1:]  # neutral never word-initial
            syls.append((c, v, int(tone_pool[int(rng.integers(len(tone_pool)))])))
        lexicon.append(_Word(f"w{i:04d}", POS_TAGS[int(rng.integers(len(POS_TAGS)))],
                             syls, float(rng.uniform(0.5, 1.5))))
    return lexicon


def _q9(x):
    """Round to 9 significant digits so file round trips are exact."""
    return np.array([float(f"{v:.9g}") for v in np.atleast_1d(x)])


def contour_components(config: SynthConfig, tone, pos_in_phrase, emphasized, gain, pos_in_word):
    """Noise-free (tone part, declination part, emphasis residual) for one syllable."""
    tmpl = template(config.tone_count, tone)
    tone_part = config.speaker_mean_hz + 0.5 * config.speaker_range_hz * tmpl
    decl = -config.declination_slope * (pos_in_phrase + TIME)
    if emphasized:
        resid = gain * POSITION_GAIN[pos_in_word] * config.speaker_range_hz * (0.25 * tmpl + 0.1)
    else:
        resid = np.zeros(CONTOUR_POINTS)
    return tone_part, decl, resid


def _phrase_bounds(rng, word_lens, n_phrases):
    """Split a word sequence into n_phrases contiguous groups; returns word start indices."""
    n_words = len(word_lens)
    n_phrases = min(n_phrases, n_words)
    if n_phrases <= 1:
        return [0]
    cuts = np.sort(rng.choice(np.arange(1, n_words), size=n_phrases - 1, replace=False))
    return [0] + [int(c) for c in cuts]


def generate_synthetic(config: SynthConfig = SynthConfig()) -> Corpus:
    """Deterministic synthetic corpus; identical configs give identical corpora."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    lexicon = _make_lexicon(rng, config.tone_count)
    by_len = {n: [w for w in lexicon if len(w.syllables) == n] for n in range(1, MAX_WORD_LEN + 1)}
    schema = make_schema(config.tone_count)
    utterances = []
    for u in range(config.n_utterances):
        lo, hi = config.syllables_per_utterance
        n_syl = int(rng.integers(lo, hi + 1))
        words = []
        remaining = n_syl
        while remaining > 0:
            n = int(rng.integers(1, min(MAX_WORD_LEN, remaining) + 1))
            pool = by_len[n]
            words.append(pool[int(rng.integers(len(pool)))])
            remaining -= n
        plo, phi = config.phrases_per_utterance
        n_phr = int(rng.integers(plo, phi + 1))
        word_phrase_starts = _phrase_bounds(rng, [len(w.syllables) for w in words], n_phr)
        # always draw, so emphasis_probability only changes the residual
        emph_draw = rng.random(len(words))
        accented = [bool(d < config.emphasis_probability) for d in emph_draw]
        noise = rng.normal(0.0, 1.0, size=(n_syl, CONTOUR_POINTS)) * config.noise_std_hz
        dur_draw = rng.uniform(0.8, 1.2, size=n_syl)
        utterances.append(_build_utterance(
            config, schema, f"utt{u:05d}", words, word_phrase_starts, accented, noise, dur_draw))
    return Corpus(schema, tone_inventory(config.tone_count), tuple(utterances))


def _build_utterance(config, schema, utt_id, words, word_phrase_starts, accented, noise, dur_draw):
    flat = []  # per syllable: (word_idx, pos_in_word, consonant, vowel, tone)
    for wi, w in enumerate(words):
        for k, (c, v, t) in enumerate(w.syllables):
            flat.append((wi, k, c, v, t))
    n = len(flat)
    word_start_syl = np.cumsum([0] + [len(w.syllables) for w in words])
    phrase_starts = [int(word_start_syl[w]) for w in word_phrase_starts] + [n]
    phrases = [(phrase_starts[i], phrase_starts[i + 1]) for i in range(len(phrase_starts) - 1)]
    phrase_of = np.zeros(n, dtype=int)
    for p, (a, b) in enumerate(phrases):
        phrase_of[a:b] = p

    syl_acc = [accented[f[0]] for f in flat]
    acc_name = []
    for wi, *_ in flat:
        acc_name.append(("H" if words[wi].gain >= 1.0 else "M") if accented[wi] else "none")
    n_phones = [(1 if c == "0" else 2) + (1 if len(v) > 1 else 0) for _, _, c, v, _ in flat]
    stressed = [t != NEUTRAL_TONE for *_, t in flat]

    def brk(i):
        if i < 0 or i >= n - 1:
            return 4.0
        if phrase_of[i] != phrase_of[i + 1]:
            return 3.0
        return 1.0 if flat[i][0] != flat[i + 1][0] else 0.0

    acc_idx = [i for i in range(n) if syl_acc[i]]
    syllables = []
    for i, (wi, k, c, v, t) in enumerate(flat):
        p = int(phrase_of[i])
        a, b = phrases[p]
        w = words[wi]
        tone_part, decl, resid = contour_components(
            config, t, i - a, syl_acc[i], w.gain, k)
        contour = np.clip(tone_part + decl + resid + noise[i], 50.5, 599.5)
        prev_acc = [j for j in acc_idx if j < i]
        next_acc = [j for j in acc_idx if j > i]
        base_dur = 0.12 if t == NEUTRAL_TONE else 0.2 + 0.02 * n_phones[i]
        feats = {
            "vowel": v,
            "consonant": c,
            "syl_name": v if c == "0" else c + v,
            "duration": float(_q9(base_dur * dur_draw[i])[0]),
            "n_phones": float(n_phones[i]),
            "n_phones_prev": float(n_phones[i - 1]) if i > 0 else 0.0,
            "n_phones_next": float(n_phones[i + 1]) if i < n - 1 else 0.0,
            "tone": str(t),
            "tone_prev": str(flat[i - 1][4]) if i > 0 else "none",
            "tone_next": str(flat[i + 1][4]) if i < n - 1 else "none",
            "syls_from_last_accent": float(i - prev_acc[-1]) if prev_acc else -1.0,
            "syls_to_next_accent": float(next_acc[0] - i) if next_acc else -1.0,
            "accented": "1" if syl_acc[i] else "0",
            "accented_prev": "1" if i > 0 and syl_acc[i - 1] else "0",
            "accented_next": "1" if i < n - 1 and syl_acc[i + 1] else "0",
            "accent": acc_name[i],
            "accent_prev": acc_name[i - 1] if i > 0 else "none",
            "accent_next": acc_name[i + 1] if i < n - 1 else "none",
            "break": brk(i),
            "break_prev": brk(i - 1),
            "break_next": brk(i + 1) if i < n - 1 else 4.0,
            "pos": w.pos,
            "pos_prev": words[wi - 1].pos if wi > 0 else "none",
            "pos_next": words[wi + 1].pos if wi < len(words) - 1 else "none",
            "word_pos_in_utt": float(wi),
            "syl_pos_in_word": float(k),
            "word_n_syls": float(len(w.syllables)),
            "word_id": w.surface,
            "phrase_pos_in_utt": float(p),
            "n_phrases": float(len(phrases)),
            "syls_in_phrase": float(b - a),
            "syl_pos_in_phrase": float(i - a),
            "stressed_from_last_break": float(sum(stressed[a:i])),
            "stressed_to_next_break": float(sum(stressed[i + 1:b])),
            "accented_from_last_break": float(sum(syl_acc[a:i])),
            "accented_to_next_break": float(sum(syl_acc[i + 1:b])),
        }
        syllables.append(SyllableRecord(t, feats, tuple(_q9(contour)), wi, p))
    return UtteranceRecord(utt_id, tuple(syllables),
                           tuple((w.surface, w.pos) for w in words), tuple(phrases))
