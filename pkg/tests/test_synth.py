import dataclasses

import numpy as np
import pytest

from f0lab.synth import (
    FALLING_TONE,
    POSITION_GAIN,
    TIME,
    TONE_TEMPLATES,
    SynthConfig,
    generate_synthetic,
    template,
)


def test_deterministic():
    cfg = SynthConfig(n_utterances=20, seed=42)
    assert generate_synthetic(cfg) == generate_synthetic(cfg)
    assert generate_synthetic(cfg) != generate_synthetic(dataclasses.replace(cfg, seed=43))


def test_exact_syllable_count():
    c = generate_synthetic(SynthConfig(n_utterances=10, syllables_per_utterance=(5, 5)))
    assert c.n_syllables == 50


@pytest.mark.parametrize("tone_count", [4, 6])
def test_falling_tone_strictly_decreasing(tone_count):
    cfg = SynthConfig(n_utterances=30, tone_count=tone_count, noise_std_hz=0.0,
                      emphasis_probability=0.0, declination_slope=0.0, seed=1)
    c = generate_synthetic(cfg)
    falling = FALLING_TONE[tone_count]
    expected = cfg.speaker_mean_hz + 0.5 * cfg.speaker_range_hz * template(tone_count, falling)
    hits = [s for s in c.syllables() if s.tone == falling]
    assert hits
    for s in hits:
        assert np.all(np.diff(s.f0) < 0)
        np.testing.assert_allclose(s.f0, expected, atol=1e-6)


def test_invariants_of_generated_records():
    for tc in (4, 6):
        c = generate_synthetic(SynthConfig(n_utterances=50, tone_count=tc, seed=2))
        c.validate()
        assert set(c.tone_inventory) == set(TONE_TEMPLATES[tc])
        for s in c.syllables():
            assert len(s.contour) == 10
            assert all(50 < v < 600 for v in s.contour)


def test_noise_free_decomposition():
    cfg = SynthConfig(n_utterances=25, noise_std_hz=0.0, seed=4)
    c = generate_synthetic(cfg)
    no_emph = generate_synthetic(dataclasses.replace(cfg, emphasis_probability=0.0))
    n_emph = 0
    for u, v in zip(c.utterances, no_emph.utterances):
        for i, (s, t) in enumerate(zip(u.syllables, v.syllables)):
            a, b = u.phrases[s.phrase_index]
            tone_part = cfg.speaker_mean_hz + 0.5 * cfg.speaker_range_hz * template(4, s.tone)
            decl = -cfg.declination_slope * (i - a + TIME)
            np.testing.assert_allclose(t.f0, tone_part + decl, atol=1e-6)
            resid = s.f0 - t.f0
            if s.features["accented"] == "1":
                n_emph += 1
                k = int(s.features["syl_pos_in_word"])
                shape = POSITION_GAIN[k] * cfg.speaker_range_hz * (0.25 * template(4, s.tone) + 0.1)
                j = int(np.argmax(np.abs(shape)))
                gain = resid[j] / shape[j]
                np.testing.assert_allclose(resid, gain * shape, atol=1e-5)
                assert 0.5 <= gain <= 1.5
            else:
                np.testing.assert_allclose(resid, 0.0, atol=1e-6)
            assert s.tone == t.tone and s.word_index == t.word_index
    assert n_emph > 0


def test_emphasis_gain_is_a_word_property():
    c = generate_synthetic(SynthConfig(n_utterances=200, noise_std_hz=0.0, declination_slope=0.0,
                                       emphasis_probability=1.0, seed=8))
    gains = {}
    for s in c.syllables():
        k = int(s.features["syl_pos_in_word"])
        shape = POSITION_GAIN[k] * 120.0 * (0.25 * template(4, s.tone) + 0.1)
        base = 200.0 + 60.0 * template(4, s.tone)
        j = int(np.argmax(np.abs(shape)))
        g = float((s.f0 - base)[j] / shape[j])
        gains.setdefault(s.features["word_id"], []).append(g)
    assert all(max(v) - min(v) < 1e-6 for v in gains.values())


@pytest.mark.parametrize("bad", [
    dict(tone_count=5),
    dict(syllables_per_utterance=(6, 3)),
    dict(phrases_per_utterance=(0, 2)),
    dict(noise_std_hz=-1.0),
    dict(emphasis_probability=1.5),
    dict(n_utterances=0),
])
def test_config_rejections(bad):
    with pytest.raises(ValueError):
        generate_synthetic(SynthConfig(**bad))


def test_feature_consistency(small_corpus):
    for u in small_corpus.utterances:
        n = len(u)
        for i, s in enumerate(u.syllables):
            f = s.features
            a, b = u.phrases[s.phrase_index]
            assert f["syl_pos_in_phrase"] == i - a
            assert f["syls_in_phrase"] == b - a
            assert f["n_phrases"] == len(u.phrases)
            assert f["tone"] == str(s.tone)
            assert f["word_id"] == u.words[s.word_index][0]
            assert f["pos"] == u.words[s.word_index][1]
            assert f["tone_prev"] == (str(u.syllables[i - 1].tone) if i else "none")
            if i < n - 1:
                assert f["break_next"] == u.syllables[i + 1].features["break"]
                assert u.syllables[i + 1].features["break_prev"] == f["break"]
            else:
                assert f["break_next"] == f["break"] == 4.0
