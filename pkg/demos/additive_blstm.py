"""Train a small Additive-BLSTM with in-syllable delta and inspect its two branches."""

import numpy as np

from f0lab.corpus import split_corpus
from f0lab.evaluation import evaluate
from f0lab.neural.model import TrainConfig, make_model
from f0lab.neural.train import train
from f0lab.synth import SynthConfig, generate_synthetic

np.set_printoptions(precision=1, suppress=True, linewidth=120)

corpus = generate_synthetic(SynthConfig(n_utterances=120, noise_std_hz=5.0, seed=2))
tr, va, te = split_corpus(corpus, (0.8, 0.1, 0.1), seed=2)

# small layers so the demo runs in well under a minute on one CPU
cfg = TrainConfig(delta="InDelta", epochs=8, hidden=16, mlp_hidden=(32, 16), emb_dim=6, seed=0)
model = make_model("additive", tr.schema, tr, cfg)
print(f"additive model with {model.n_parameters()} parameters")
model, history = train(model, tr, va, cfg)
for h in history:
    print(f"epoch {h['epoch']:2d}  train loss {h['train_loss']:.5f}  val loss {h['val_loss']:.5f}")

r = evaluate({u.id: model.predict(u) for u in te.utterances}, te)
print(f"test: syl RMSE {r.syl_rmse:.2f} Hz, utt RMSE {r.utt_rmse:.2f} Hz, utt corr {r.utt_corr:.3f}")

utt = te.utterances[0]
b = model.bundle(utt)
print(f"\nutterance {utt.id}, syllable 0 (tone {utt.syllables[0].tone})")
print("natural  ", utt.contours()[0])
print("base     ", b.base[0])
print("residual ", b.residual[0])
print("predicted", b.total[0])
