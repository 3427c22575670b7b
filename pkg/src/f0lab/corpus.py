"""Utterance/syllable data model, corpus file I/O and train/val/test splitting.

Corpus file layout (``F0LAB-CORPUS v1``), tab separated, one record per line::

    F0LAB-CORPUS v1
    schema <n_features>
    feature <name> <level> categorical <v1|v2|...>
    feature <name> <level> numeric <lo> <hi>
    tones <id> <id> ...
    utterances <n>
    utt <id> <n_syllables> <n_words> <n_phrases>
    word <surface_id> <pos>
    phrase <start> <end>                  # end is exclusive
    syl <tone> <word_index> <phrase_index> <c1,...,c10> <feature values...>

Feature values on ``syl`` lines follow schema order.  Floats are written with
9 significant digits.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

CONTOUR_POINTS = 10
LEVELS = ("phone", "syllable", "word", "phrase")
HEADER = "F0LAB-CORPUS v1"

FeatureValue = Union[str, float]


class CorpusError(Exception):
    """Base class for corpus problems."""


class CorpusFileNotFound(CorpusError, FileNotFoundError):
    pass


class SchemaViolation(CorpusError, ValueError):
    """A record breaks a schema or type invariant."""

    def __init__(self, message, utterance=None, field=None):
        where = []
        if utterance is not None:
            where.append(f"utterance {utterance!r}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.utterance = utterance
        self.field = field


class MalformedRecord(CorpusError, ValueError):
    """A line of a corpus file could not be parsed."""

    def __init__(self, message, line_no=None, utterance=None):
        loc = f"line {line_no}" if line_no is not None else "record"
        if utterance is not None:
            loc += f" (utterance {utterance!r})"
        super().__init__(f"{loc}: {message}")
        self.line_no = line_no
        self.utterance = utterance


def fmt_float(x: float) -> str:
    return f"{float(x):.9g}"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    level: str
    kind: str  # "categorical" | "numeric"
    values: tuple = ()
    range: tuple = (-math.inf, math.inf)

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"feature {self.name!r}: unknown level {self.level!r}")
        if self.kind == "categorical":
            if not self.values:
                raise ValueError(f"feature {self.name!r}: empty categorical value set")
            if len(set(self.values)) != len(self.values):
                raise ValueError(f"feature {self.name!r}: duplicate categorical values")
        elif self.kind == "numeric":
            lo, hi = self.range
            if lo > hi:
                raise ValueError(f"feature {self.name!r}: range {self.range} is empty")
        else:
            raise ValueError(f"feature {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    def validate(self, value) -> FeatureValue:
        if self.is_categorical:
            if value not in self.values:
                raise ValueError(f"value {value!r} not in value set of {self.name!r}")
            return value
        v = float(value)
        lo, hi = self.range
        if not (lo <= v <= hi):
            raise ValueError(f"value {v} outside [{lo}, {hi}] for {self.name!r}")
        return v


def categorical(name, level, values):
    return FeatureSpec(name, level, "categorical", values=tuple(str(v) for v in values))


def numeric(name, level, lo, hi):
    return FeatureSpec(name, level, "numeric", range=(float(lo), float(hi)))


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature inventory; the order fixes encoding everywhere downstream."""

    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def names(self) -> list:
        return [e.name for e in self.entries]

    def index(self, name: str) -> int:
        for i, e in enumerate(self.entries):
            if e.name == name:
                return i
        raise KeyError(name)

    def __getitem__(self, name: str) -> FeatureSpec:
        return self.entries[self.index(name)]

    def names_at(self, *levels) -> list:
        return [e.name for e in self.entries if e.level in levels]


@dataclass(frozen=True)
class SyllableRecord:
    tone: int
    features: Mapping[str, FeatureValue]
    contour: tuple
    word_index: int
    phrase_index: int

    def __post_init__(self):
        object.__setattr__(self, "contour", tuple(float(c) for c in self.contour))
        object.__setattr__(self, "features", dict(self.features))

    @property
    def f0(self) -> np.ndarray:
        return np.asarray(self.contour, dtype=float)


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    syllables: tuple
    words: tuple = ()  # (surface form id, POS tag)
    phrases: tuple = ()  # (start, end) with end exclusive

    def __post_init__(self):
        object.__setattr__(self, "syllables", tuple(self.syllables))
        object.__setattr__(self, "words", tuple(tuple(w) for w in self.words))
        object.__setattr__(self, "phrases", tuple((int(a), int(b)) for a, b in self.phrases))

    def __len__(self):
        return len(self.syllables)

    def contours(self) -> np.ndarray:
        """(n_syllables, 10) array of f0 targets in Hz."""
        if not self.syllables:
            return np.zeros((0, CONTOUR_POINTS))
        return np.array([s.contour for s in self.syllables], dtype=float)

    def tones(self) -> list:
        return [s.tone for s in self.syllables]


@dataclass(frozen=True)
class Corpus:
    schema: FeatureSchema
    tone_inventory: tuple
    utterances: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "tone_inventory", tuple(int(t) for t in self.tone_inventory))
        object.__setattr__(self, "utterances", tuple(self.utterances))

    def __len__(self):
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    @property
    def n_syllables(self) -> int:
        return sum(len(u) for u in self.utterances)

    def ids(self) -> list:
        return [u.id for u in self.utterances]

    def subset(self, utterances) -> "Corpus":
        return Corpus(self.schema, self.tone_inventory, tuple(utterances))

    def syllables(self):
        for u in self.utterances:
            yield from u.syllables

    def validate(self) -> "Corpus":
        validate_corpus(self)
        return self


def validate_syllable(schema: FeatureSchema, syl: SyllableRecord, utt_id=None, index=None):
    label = f"syllable {index}" if index is not None else "syllable"
    if len(syl.contour) != CONTOUR_POINTS:
        raise SchemaViolation(
            f"{label} contour has {len(syl.contour)} values, expected {CONTOUR_POINTS}",
            utterance=utt_id, field="contour")
    if not all(math.isfinite(c) and c > 0 for c in syl.contour):
        raise SchemaViolation(f"{label} contour must be finite and > 0 Hz",
                              utterance=utt_id, field="contour")
    missing = set(schema.names) - set(syl.features)
    extra = set(syl.features) - set(schema.names)
    if missing or extra:
        raise SchemaViolation(
            f"{label} features mismatch (missing={sorted(missing)}, unknown={sorted(extra)})",
            utterance=utt_id, field="features")
    for spec in schema:
        try:
            spec.validate(syl.features[spec.name])
        except (ValueError, TypeError) as exc:
            raise SchemaViolation(f"{label}: {exc}", utterance=utt_id, field=spec.name) from None


def validate_utterance(schema: FeatureSchema, utt: UtteranceRecord, tones=None):
    n = len(utt.syllables)
    pos = 0
    for start, end in utt.phrases:
        if start != pos or end <= start:
            raise SchemaViolation("phrase spans must partition the syllable range",
                                  utterance=utt.id, field="phrases")
        pos = end
    if n and pos != n:
        raise SchemaViolation("phrase spans must cover every syllable",
                              utterance=utt.id, field="phrases")
    for i, syl in enumerate(utt.syllables):
        validate_syllable(schema, syl, utt.id, i)
        if not 0 <= syl.word_index < len(utt.words):
            raise SchemaViolation(f"syllable {i} word_index out of range",
                                  utterance=utt.id, field="word_index")
        if not 0 <= syl.phrase_index < len(utt.phrases):
            raise SchemaViolation(f"syllable {i} phrase_index out of range",
                                  utterance=utt.id, field="phrase_index")
        start, end = utt.phrases[syl.phrase_index]
        if not start <= i < end:
            raise SchemaViolation(f"syllable {i} is not inside its phrase",
                                  utterance=utt.id, field="phrase_index")
        if tones is not None and syl.tone not in tones:
            raise SchemaViolation(f"syllable {i} tone {syl.tone} not in tone inventory",
                                  utterance=utt.id, field="tone")


def validate_corpus(corpus: Corpus):
    tones = set(corpus.tone_inventory)
    seen = set()
    for utt in corpus.utterances:
        if utt.id in seen:
            raise SchemaViolation("duplicate utterance id", utterance=utt.id, field="id")
        seen.add(utt.id)
        validate_utterance(corpus.schema, utt, tones)


# -- file I/O -----------------------------------------------------------------

def _fmt_feature(spec: FeatureSpec, value) -> str:
    return str(value) if spec.is_categorical else fmt_float(value)


def save_corpus(corpus: Corpus, path) -> None:
    lines = [HEADER, f"schema\t{len(corpus.schema)}"]
    for e in corpus.schema:
        if e.is_categorical:
            lines.append("\t".join(["feature", e.name, e.level, "categorical", "|".join(e.values)]))
        else:
            lo, hi = e.range
            lines.append("\t".join(["feature", e.name, e.level, "numeric", fmt_float(lo), fmt_float(hi)]))
    lines.append("\t".join(["tones"] + [str(t) for t in corpus.tone_inventory]))
    lines.append(f"utterances\t{len(corpus.utterances)}")
    for utt in corpus.utterances:
        lines.append("\t".join(["utt", utt.id, str(len(utt.syllables)),
                                str(len(utt.words)), str(len(utt.phrases))]))
        for surface, pos in utt.words:
            lines.append(f"word\t{surface}\t{pos}")
        for start, end in utt.phrases:
            lines.append(f"phrase\t{start}\t{end}")
        for syl in utt.syllables:
            fields = ["syl", str(syl.tone), str(syl.word_index), str(syl.phrase_index),
                      ",".join(fmt_float(c) for c in syl.contour)]
            fields += [_fmt_feature(e, syl.features[e.name]) for e in corpus.schema]
            lines.append("\t".join(fields))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


class _Lines:
    def __init__(self, lines):
        self.lines = lines
        self.pos = 0

    def next(self, tag, utterance=None):
        if self.pos >= len(self.lines):
            raise MalformedRecord(f"unexpected end of file, expected {tag!r}",
                                  self.pos + 1, utterance)
        line_no = self.pos + 1
        parts = self.lines[self.pos].split("\t")
        self.pos += 1
        if parts[0] != tag:
            raise MalformedRecord(f"expected {tag!r} record, got {parts[0]!r}", line_no, utterance)
        return line_no, parts[1:]


def _int(text, line_no, what, utterance=None):
    try:
        return int(text)
    except ValueError:
        raise MalformedRecord(f"{what} is not an integer: {text!r}", line_no, utterance) from None


def _parse_schema(reader: _Lines) -> FeatureSchema:
    line_no, parts = reader.next("schema")
    n = _int(parts[0] if parts else "", line_no, "feature count")
    entries = []
    for _ in range(n):
        line_no, parts = reader.next("feature")
        try:
            name, level, kind = parts[:3]
            if kind == "categorical":
                entries.append(FeatureSpec(name, level, kind, values=tuple(parts[3].split("|"))))
            else:
                entries.append(FeatureSpec(name, level, kind, range=(float(parts[3]), float(parts[4]))))
        except (ValueError, IndexError) as exc:
            raise MalformedRecord(f"bad feature definition: {exc}", line_no) from None
    try:
        return FeatureSchema(tuple(entries))
    except ValueError as exc:
        raise SchemaViolation(str(exc), field="schema") from None


def _parse_syllable(schema, parts, line_no, utt_id, index) -> SyllableRecord:
    if len(parts) != 4 + len(schema):
        raise MalformedRecord(
            f"syllable {index} has {len(parts)} fields, expected {4 + len(schema)}",
            line_no, utt_id)
    tone = _int(parts[0], line_no, "tone", utt_id)
    word_index = _int(parts[1], line_no, "word_index", utt_id)
    phrase_index = _int(parts[2], line_no, "phrase_index", utt_id)
    try:
        contour = tuple(float(c) for c in parts[3].split(","))
    except ValueError:
        raise MalformedRecord(f"syllable {index} contour is not numeric", line_no, utt_id) from None
    features = {}
    for spec, text in zip(schema, parts[4:]):
        if spec.is_categorical:
            features[spec.name] = text
        else:
            try:
                features[spec.name] = float(text)
            except ValueError:
                raise MalformedRecord(f"syllable {index} feature {spec.name!r} is not numeric",
                                      line_no, utt_id) from None
    syl = SyllableRecord(tone, features, contour, word_index, phrase_index)
    validate_syllable(schema, syl, utt_id, index)
    return syl


def load_corpus(path) -> Corpus:
    if not os.path.exists(path):
        raise CorpusFileNotFound(f"corpus file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != HEADER:
        raise MalformedRecord(f"missing {HEADER!r} header", 1)
    reader = _Lines(lines)
    reader.pos = 1
    schema = _parse_schema(reader)
    line_no, parts = reader.next("tones")
    tones = tuple(_int(t, line_no, "tone id") for t in parts if t != "")
    line_no, parts = reader.next("utterances")
    n_utt = _int(parts[0] if parts else "", line_no, "utterance count")
    utterances = []
    for _ in range(n_utt):
        line_no, parts = reader.next("utt")
        if len(parts) != 4:
            raise MalformedRecord("utt record needs id and three counts", line_no)
        utt_id = parts[0]
        n_syl, n_words, n_phr = (_int(p, line_no, "count", utt_id) for p in parts[1:])
        words = []
        for _ in range(n_words):
            line_no, wp = reader.next("word", utt_id)
            if len(wp) != 2:
                raise MalformedRecord("word record needs surface id and POS", line_no, utt_id)
            words.append((wp[0], wp[1]))
        phrases = []
        for _ in range(n_phr):
            line_no, pp = reader.next("phrase", utt_id)
            if len(pp) != 2:
                raise MalformedRecord("phrase record needs start and end", line_no, utt_id)
            phrases.append((_int(pp[0], line_no, "start", utt_id), _int(pp[1], line_no, "end", utt_id)))
        syllables = []
        for i in range(n_syl):
            line_no, sp = reader.next("syl", utt_id)
            syllables.append(_parse_syllable(schema, sp, line_no, utt_id, i))
        utt = UtteranceRecord(utt_id, tuple(syllables), tuple(words), tuple(phrases))
        validate_utterance(schema, utt, set(tones))
        utterances.append(utt)
    if reader.pos < len(lines) and any(line.strip() for line in lines[reader.pos:]):
        raise MalformedRecord("trailing content after last utterance", reader.pos + 1)
    corpus = Corpus(schema, tones, tuple(utterances))
    validate_corpus(corpus)
    return corpus


# -- splitting ----------------------------------------------------------------

def split_sizes(n: int, ratios: Sequence[float]) -> tuple:
    """Rounded val/test shares; whatever is left over goes to train."""
    n_val = int(math.floor(ratios[1] * n + 0.5))
    n_test = int(math.floor(ratios[2] * n + 0.5))
    n_train = n - n_val - n_test
    if n_train < 0:
        raise ValueError("split ratios leave no room for the training set")
    return n_train, n_val, n_test


def split_corpus(corpus: Corpus, ratios=(0.8, 0.1, 0.1), seed: int = 0):
    """Random utterance-level partition into (train, val, test).

    Utterances keep their original corpus order inside each part.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative shares summing to 1, got {ratios}")
    n = len(corpus.utterances)
    if n < 3:
        raise ValueError(f"need at least 3 utterances to split, corpus has {n}")
    n_train, n_val, n_test = split_sizes(n, ratios)
    perm = np.random.default_rng(seed).permutation(n)
    parts = (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])
    return tuple(corpus.subset(corpus.utterances[i] for i in np.sort(p)) for p in parts)
