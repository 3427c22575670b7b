import numpy as np
import pytest

from f0lab.synth import SynthConfig, generate_synthetic


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic(SynthConfig(n_utterances=40, seed=7))


@pytest.fixture(scope="session")
def tiny_corpus():
    return generate_synthetic(SynthConfig(n_utterances=3, syllables_per_utterance=(2, 3), seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
