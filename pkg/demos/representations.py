"""Encode one synthetic syllable in every representation and decode it back."""

import numpy as np

from f0lab.contour import (
    RepresentationSpec,
    dct_encode,
    decode_base,
    encode_base,
    in_delta,
    shapems_encode,
    subsample_contour,
)
from f0lab.synth import SynthConfig, generate_synthetic

np.set_printoptions(precision=2, suppress=True)

corpus = generate_synthetic(SynthConfig(n_utterances=1, seed=3))
utt = corpus.utterances[0]
y = utt.contours()[0]
print("utterance", utt.id, "syllables:", len(utt), "tone of syllable 0:", utt.syllables[0].tone)
print("10-point contour (Hz):", y)

# a 37-frame track with three unvoiced frames reduces to 10 points
track = np.interp(np.linspace(0, 9, 37), np.arange(10), y)
frames = [(f, i not in (4, 5, 20)) for i, f in enumerate(track)]
print("subsampled from 37 frames:", subsample_contour(frames))

print("DCT-5 coefficients:", dct_encode(y, 5))
shape, mean, std = shapems_encode(y)
print(f"ShapeMS: mean {mean:.2f} Hz, std {std:.2f} Hz, shape {shape}")
print("in-syllable delta:", in_delta(y))

for spec in (RepresentationSpec("OriF0"), RepresentationSpec("DCT", k=5),
             RepresentationSpec("DCT", k=10), RepresentationSpec("ShapeMS")):
    v, aux = encode_base(spec, y)
    back = decode_base(spec, v, aux)
    print(f"{spec.label():12s} dim {len(v):2d}  round-trip max err {np.abs(back - y).max():.2e} Hz")
