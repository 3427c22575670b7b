"""Score two simple predictors and show how flat syllables are handled."""

import numpy as np

from f0lab.evaluation import evaluate, pearson_flagged
from f0lab.synth import SynthConfig, generate_synthetic

corpus = generate_synthetic(SynthConfig(n_utterances=50, seed=4))
truth = {u.id: u.contours() for u in corpus.utterances}

# predictor 1: every syllable is the corpus-wide mean contour
mean_contour = np.vstack(list(truth.values())).mean(axis=0)
flat_mean = {k: np.tile(mean_contour, (len(v), 1)) for k, v in truth.items()}
# predictor 2: truth plus 3 Hz of noise
rng = np.random.default_rng(0)
noisy = {k: v + rng.normal(0, 3, v.shape) for k, v in truth.items()}

for name, pred in (("mean contour", flat_mean), ("truth + 3 Hz noise", noisy)):
    print(f"-- {name}")
    print(evaluate(pred, corpus).to_text())

# a constant vector has no defined correlation: reported as 0 and flagged
print("flat vs rising:", pearson_flagged(np.full(10, 150.0), np.arange(10.0)))
