"""Syllable f0 vectors and their representations.

Bases: ``OriF0`` (the raw 10-point vector), ``DCT`` (first K orthonormal
DCT-II coefficients) and ``ShapeMS`` (per-sample z-scored shape plus mean and
population std).  Deltas: ``InDelta`` differences inside one vector and
``CrossDelta`` differences against the neighbouring syllables.  Deltas are
training-time regularizers only; decoding drops them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.fft import dct, idct

from .corpus import CONTOUR_POINTS

STD_FLOOR = 1e-6

BASES = ("OriF0", "DCT", "ShapeMS")
DELTAS = ("None", "InDelta", "CrossDelta")


def subsample_contour(frames, n_points: int = CONTOUR_POINTS) -> np.ndarray:
    """Fixed-length syllable vector from frame-level ``(f0_hz, voiced)`` pairs.

    Unvoiced frames are linearly interpolated from the nearest voiced frames
    (held flat past the first/last voiced frame), then the filled track is
    read at ``n_points`` equally spaced normalized times.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("no frames given")
    f0 = np.array([float(f) for f, _ in frames])
    voiced = np.array([bool(v) for _, v in frames])
    if not voiced.any():
        raise ValueError("syllable has no voiced frames")
    idx = np.arange(len(f0), dtype=float)
    filled = np.interp(idx, idx[voiced], f0[voiced])
    if len(filled) == 1:
        return np.full(n_points, filled[0])
    pos = np.linspace(0.0, len(filled) - 1, n_points)
    return np.interp(pos, idx, filled)


def dct_encode(v, k: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if not 1 <= k <= len(v):
        raise ValueError(f"DCT coefficient count must be in [1, {len(v)}], got {k}")
    return dct(v, type=2, norm="ortho")[:k]


def dct_decode(coeffs, n: int = CONTOUR_POINTS) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    if not 1 <= len(coeffs) <= n:
        raise ValueError(f"need between 1 and {n} coefficients, got {len(coeffs)}")
    full = np.zeros(n)
    full[:len(coeffs)] = coeffs
    return idct(full, type=2, norm="ortho")


def shapems_encode(v):
    v = np.asarray(v, dtype=float)
    mean = float(v.mean())
    std = float(v.std())
    return (v - mean) / max(std, STD_FLOOR), mean, std


def shapems_decode(shape, mean: float, std: float) -> np.ndarray:
    if std < 0:
        raise ValueError("std must be non-negative")
    return np.asarray(shape, dtype=float) * std + mean


def in_delta(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] < 2:
        raise ValueError("in-syllable delta needs at least 2 values")
    return np.diff(v, axis=-1)


def cross_delta(prev: Optional[np.ndarray], cur, nxt: Optional[np.ndarray]) -> np.ndarray:
    """``[cur - prev, next - cur]``; an absent neighbour contributes zeros."""
    cur = np.asarray(cur, dtype=float)
    blocks = []
    for other, sign in ((prev, 1.0), (nxt, -1.0)):
        if other is None:
            blocks.append(np.zeros_like(cur))
            continue
        other = np.asarray(other, dtype=float)
        if other.shape != cur.shape:
            raise ValueError(f"dimension mismatch: {other.shape} vs {cur.shape}")
        blocks.append(sign * (cur - other))
    return np.concatenate(blocks)


def in_delta_rows(x: np.ndarray) -> np.ndarray:
    return np.diff(x, axis=1)


def cross_delta_rows(x: np.ndarray) -> np.ndarray:
    """Cross delta for every row of a (T, D) sequence at once -> (T, 2D)."""
    back = np.zeros_like(x)
    fwd = np.zeros_like(x)
    back[1:] = x[1:] - x[:-1]
    fwd[:-1] = x[1:] - x[:-1]
    return np.hstack([back, fwd])


def delta_rows(x: np.ndarray, kind: str) -> Optional[np.ndarray]:
    if kind == "None":
        return None
    if kind == "InDelta":
        return in_delta_rows(x)
    if kind == "CrossDelta":
        return cross_delta_rows(x)
    raise ValueError(f"unknown delta kind {kind!r}")


def delta_dim(kind: str, d: int) -> int:
    return {"None": 0, "InDelta": d - 1, "CrossDelta": 2 * d}[kind]


@dataclass(frozen=True)
class RepresentationSpec:
    base: str = "OriF0"
    delta: str = "None"
    k: int = 5  # DCT coefficient count; ignored for other bases

    def __post_init__(self):
        if self.base not in BASES:
            raise ValueError(f"unknown base representation {self.base!r}")
        if self.delta not in DELTAS:
            raise ValueError(f"unknown delta kind {self.delta!r}")
        if self.base == "DCT" and not 1 <= self.k <= CONTOUR_POINTS:
            raise ValueError(f"DCT K must be in [1, {CONTOUR_POINTS}], got {self.k}")
        if self.delta == "InDelta" and self.dim < 2:
            raise ValueError("InDelta needs a base vector of dimension >= 2")

    @property
    def dim(self) -> int:
        return self.k if self.base == "DCT" else CONTOUR_POINTS

    @property
    def delta_dim(self) -> int:
        return delta_dim(self.delta, self.dim)

    @property
    def lossless(self) -> bool:
        return self.base != "DCT" or self.k == CONTOUR_POINTS

    def label(self) -> str:
        base = f"DCT{self.k}" if self.base == "DCT" else self.base
        return base if self.delta == "None" else f"{base}+{self.delta}"


@dataclass
class EncodedSample:
    v: np.ndarray
    delta: Optional[np.ndarray] = None
    aux: Optional[tuple] = None  # (mean, std) for ShapeMS

    def target(self) -> np.ndarray:
        """``[v, delta]`` as one training target."""
        return self.v if self.delta is None else np.concatenate([self.v, self.delta])


def encode_base(spec: RepresentationSpec, contour):
    if spec.base == "OriF0":
        return np.asarray(contour, dtype=float).copy(), None
    if spec.base == "DCT":
        return dct_encode(contour, spec.k), None
    shape, mean, std = shapems_encode(contour)
    return shape, (mean, std)


def decode_base(spec: RepresentationSpec, v, aux=None) -> np.ndarray:
    v = np.asarray(v, dtype=float)[:spec.dim]
    if spec.base == "OriF0":
        return v.copy()
    if spec.base == "DCT":
        return dct_decode(v, CONTOUR_POINTS)
    if aux is None:
        raise ValueError("ShapeMS decoding needs (mean, std)")
    mean, std = aux
    return shapems_decode(v, mean, max(float(std), 0.0))


def encode_contours(spec: RepresentationSpec, contours) -> list:
    """Encode every syllable of one utterance; cross deltas see the neighbours."""
    contours = np.asarray(contours, dtype=float).reshape(-1, CONTOUR_POINTS)
    bases = [encode_base(spec, c) for c in contours]
    if not bases:
        return []
    vs = np.array([b[0] for b in bases])
    deltas = delta_rows(vs, spec.delta)
    return [EncodedSample(vs[i], None if deltas is None else deltas[i], bases[i][1])
            for i in range(len(bases))]


def encode_sample(spec: RepresentationSpec, utterance, syllable_index: int) -> EncodedSample:
    contours = utterance.contours()
    if not 0 <= syllable_index < len(contours):
        raise IndexError(f"syllable index {syllable_index} out of range")
    lo, hi = max(syllable_index - 1, 0), min(syllable_index + 2, len(contours))
    window = encode_contours(spec, contours[lo:hi])
    return window[syllable_index - lo]


def decode_sample(spec: RepresentationSpec, sample: EncodedSample) -> np.ndarray:
    return decode_base(spec, sample.v, sample.aux)
