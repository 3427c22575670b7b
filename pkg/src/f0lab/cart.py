"""Decision-tree f0 models: SinDT, ToneDT, PSLevel, ScalarDT and the random forest.

Tree keys inside a DTModel:

* SinDT    -- one tree per target role: ``vector``, or ``shape`` + ``meanstd`` for ShapeMS
* ToneDT   -- ``tone<k>/<role>`` per training tone plus ``pooled/<role>``, used for
              tones never seen in training
* PSLevel  -- ``phrase`` (3 phrase-curve DCT coefficients) plus ``syllable/<role>``
              trained on the residual after removing the phrase curve
* ScalarDT -- ``dim<i>``, one scalar tree per base-vector entry (and mean/std for ShapeMS)

Delta blocks are appended to the vector/shape targets and ignored when decoding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.fft import dct, idct

from .contour import RepresentationSpec, decode_base, encode_contours
from .corpus import CONTOUR_POINTS, Corpus, FeatureSchema, MalformedRecord, categorical, numeric
from .tree import RegressionTree, TreeConfig, feature_matrix, train_tree

ARCHITECTURES = ("SinDT", "ToneDT", "PSLevel", "ScalarDT")
PHRASE_COEFFS = 3
MODEL_HEADER = "F0LAB-DT v1"


@dataclass(frozen=True)
class ArchitectureSpec:
    kind: str = "SinDT"
    representation: RepresentationSpec = RepresentationSpec()

    def __post_init__(self):
        if self.kind not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.kind!r}")
        if self.kind == "ScalarDT" and self.representation.delta != "None":
            raise ValueError("ScalarDT predicts scalars; a delta block cannot be attached")

    def label(self) -> str:
        return f"{self.representation.label()} {self.kind}"


def target_roles(arch: ArchitectureSpec) -> dict:
    """Target role name -> target dimension, in a fixed order."""
    rep = arch.representation
    if arch.kind == "ScalarDT":
        n = rep.dim + (2 if rep.base == "ShapeMS" else 0)
        roles = {f"dim{i}": 1 for i in range(n)}
    elif rep.base == "ShapeMS":
        roles = {"shape": rep.dim + rep.delta_dim, "meanstd": 2}
    else:
        roles = {"vector": rep.dim + rep.delta_dim}
    if arch.kind == "PSLevel":
        roles = {"phrase": PHRASE_COEFFS, **roles}
    return roles


def _role_targets(arch: ArchitectureSpec, samples) -> dict:
    out = {}
    if arch.kind == "ScalarDT":
        full = np.array([np.concatenate([s.v, s.aux]) if s.aux is not None else s.v for s in samples])
        for i in range(full.shape[1]):
            out[f"dim{i}"] = full[:, i:i + 1]
        return out
    if arch.representation.base == "ShapeMS":
        out["shape"] = np.array([s.target() for s in samples])
        out["meanstd"] = np.array([s.aux for s in samples])
    else:
        out["vector"] = np.array([s.target() for s in samples])
    return out


def _decode_roles(arch: ArchitectureSpec, preds: dict, n: int) -> np.ndarray:
    rep = arch.representation
    out = np.empty((n, CONTOUR_POINTS))
    if arch.kind == "ScalarDT":
        n_dims = rep.dim + (2 if rep.base == "ShapeMS" else 0)
        full = np.hstack([preds[f"dim{i}"] for i in range(n_dims)])
        for j in range(n):
            aux = tuple(full[j, rep.dim:rep.dim + 2]) if rep.base == "ShapeMS" else None
            out[j] = decode_base(rep, full[j, :rep.dim], aux)
        return out
    if rep.base == "ShapeMS":
        for j in range(n):
            out[j] = decode_base(rep, preds["shape"][j], tuple(preds["meanstd"][j]))
        return out
    for j in range(n):
        out[j] = decode_base(rep, preds["vector"][j])
    return out


# -- phrase curves --------------------------------------------------------------

def phrase_curve_coeffs(contours: np.ndarray) -> np.ndarray:
    """First 3 orthonormal DCT coefficients of a concatenated phrase contour.

    Coefficients are divided by sqrt(N) (N = 10 * syllables) so phrases of
    different lengths share one scale; ``phrase_curve`` undoes this.
    """
    flat = np.asarray(contours, dtype=float).ravel()
    return dct(flat, type=2, norm="ortho")[:PHRASE_COEFFS] / math.sqrt(len(flat))


def phrase_curve(coeffs, n_syllables: int) -> np.ndarray:
    n = n_syllables * CONTOUR_POINTS
    full = np.zeros(n)
    full[:PHRASE_COEFFS] = np.asarray(coeffs, dtype=float) * math.sqrt(n)
    return idct(full, type=2, norm="ortho").reshape(n_syllables, CONTOUR_POINTS)


# -- model containers -------------------------------------------------------------

@dataclass
class DTModel:
    spec: ArchitectureSpec
    trees: dict
    schema: FeatureSchema
    tree_config: TreeConfig = TreeConfig()

    def tree_for(self, tone: int, role: str) -> RegressionTree:
        key = f"tone{tone}/{role}"
        return self.trees.get(key, self.trees[f"pooled/{role}"])


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 20
    feature_ignore: float = 0.3
    output_ignore: float = 0.3
    seed: int = 0
    tree: TreeConfig = TreeConfig()

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        for name in ("feature_ignore", "output_ignore"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")


@dataclass
class ForestModel:
    spec: ArchitectureSpec
    members: list
    feature_masks: list  # hidden feature indices per member
    output_masks: list  # per member: role -> hidden target indices
    config: ForestConfig = ForestConfig()


# -- training -----------------------------------------------------------------------

def _syllable_table(corpus_or_utts, schema):
    utts = list(corpus_or_utts)
    feats = [s.features for u in utts for s in u.syllables]
    X = feature_matrix(schema, feats)
    tones = np.array([s.tone for u in utts for s in u.syllables], dtype=int)
    return utts, X, tones


def _phrase_table(utts, X):
    """Per phrase: feature row of its first syllable, true curve coefficients, spans."""
    rows, coeffs, spans = [], [], []
    offset = 0
    for u in utts:
        c = u.contours()
        for start, end in u.phrases:
            rows.append(X[offset + start])
            coeffs.append(phrase_curve_coeffs(c[start:end]))
            spans.append((offset + start, end - start))
        offset += len(u)
    return np.array(rows).reshape(-1, X.shape[1]), np.array(coeffs).reshape(-1, PHRASE_COEFFS), spans


def _config_for(base: TreeConfig, hidden_features, hidden_outputs, n_features, dim,
                allowed=None) -> TreeConfig:
    feats = [i for i in range(n_features) if i not in set(hidden_features or ())]
    if allowed is not None:
        feats = [i for i in feats if i in set(allowed)]
        if not feats:
            return replace(base, max_depth=0, active_feature_mask=None, active_output_mask=None)
    elif len(feats) == n_features:
        feats = None
    outs = [i for i in range(dim) if i not in set(hidden_outputs or ())]
    return replace(base, active_feature_mask=tuple(feats) if feats is not None else None,
                   active_output_mask=tuple(outs) if len(outs) < dim else None)


def _train_roles(arch, X, samples, tones, schema, config, hidden_features, hidden_outputs, prefix=""):
    trees = {}
    targets = _role_targets(arch, samples)
    groups = [("", np.arange(len(X)))]
    if arch.kind == "ToneDT":
        groups = [(f"tone{t}/", np.flatnonzero(tones == t)) for t in sorted(set(tones.tolist()))]
        groups.append(("pooled/", np.arange(len(X))))
    for gname, rows in groups:
        for role, Y in targets.items():
            cfg = _config_for(config, hidden_features, hidden_outputs.get(role), X.shape[1], Y.shape[1])
            trees[prefix + gname + role] = train_tree(X[rows], Y[rows], schema, cfg)
    return trees


def _train_dt(arch, corpus: Corpus, config: TreeConfig, hidden_features=(), hidden_outputs=None):
    hidden_outputs = hidden_outputs or {}
    utts, X, tones = _syllable_table(corpus.utterances, corpus.schema)
    if len(X) == 0:
        raise ValueError("training corpus has no syllables")
    trees = {}
    contours = [u.contours() for u in utts]
    if arch.kind == "PSLevel":
        PX, PY, spans = _phrase_table(utts, X)
        phrase_feats = [corpus.schema.index(n) for n in corpus.schema.names_at("phrase")]
        cfg = _config_for(config, hidden_features, hidden_outputs.get("phrase"),
                          X.shape[1], PHRASE_COEFFS, allowed=phrase_feats)
        trees["phrase"] = train_tree(PX, PY, corpus.schema, cfg)
        residual = np.vstack(contours)
        for (start, length), coeffs in zip(spans, PY):
            residual[start:start + length] -= phrase_curve(coeffs, length)
        contours, offset = [], 0
        for u in utts:
            contours.append(residual[offset:offset + len(u)])
            offset += len(u)
    samples = [s for c in contours for s in encode_contours(arch.representation, c)]
    prefix = "syllable/" if arch.kind == "PSLevel" else ""
    trees.update(_train_roles(arch, X, samples, tones, corpus.schema, config,
                              hidden_features, hidden_outputs, prefix))
    return DTModel(arch, trees, corpus.schema, config)


def train_dt_model(arch: ArchitectureSpec, train: Corpus, config: TreeConfig = TreeConfig()) -> DTModel:
    if not len(train.utterances):
        raise ValueError("training corpus is empty")
    return _train_dt(arch, train, config)


def _n_hidden(frac: float, n: int) -> int:
    return min(int(math.ceil(frac * n - 1e-9)), n - 1)


def draw_masks(arch: ArchitectureSpec, n_features: int, config: ForestConfig, member: int):
    """Hidden feature indices and per-role hidden output indices for one member.

    Depends only on (seed, member index), never on training order.
    """
    rng = np.random.default_rng([config.seed, member])
    k = _n_hidden(config.feature_ignore, n_features)
    hidden_f = tuple(sorted(int(i) for i in rng.choice(n_features, size=k, replace=False)))
    hidden_o = {}
    for role, dim in target_roles(arch).items():
        k = _n_hidden(config.output_ignore, dim)
        hidden_o[role] = tuple(sorted(int(i) for i in rng.choice(dim, size=k, replace=False)))
    return hidden_f, hidden_o


def train_forest(arch: ArchitectureSpec, train: Corpus, config: ForestConfig = ForestConfig()) -> ForestModel:
    n_features = len(train.schema)
    if n_features < 2:
        raise ValueError("random forest needs at least 2 features")
    if not len(train.utterances):
        raise ValueError("training corpus is empty")
    members, fmasks, omasks = [], [], []
    for m in range(config.n_trees):
        hidden_f, hidden_o = draw_masks(arch, n_features, config, m)
        members.append(_train_dt(arch, train, config.tree, hidden_f, hidden_o))
        fmasks.append(hidden_f)
        omasks.append(hidden_o)
    return ForestModel(arch, members, fmasks, omasks, config)


# -- prediction ---------------------------------------------------------------------

def _predict_roles(model: DTModel, X, tones, prefix=""):
    arch = model.spec
    roles = [r for r in target_roles(arch) if r != "phrase"]
    preds = {}
    for role in roles:
        if arch.kind == "ToneDT":
            out = np.empty((len(X), model.trees[f"pooled/{role}"].target_dim))
            for t in set(tones.tolist()):
                rows = np.flatnonzero(tones == t)
                out[rows] = model.tree_for(t, role).predict(X[rows])
            preds[role] = out
        else:
            preds[role] = model.trees[prefix + role].predict(X)
    return _decode_roles(arch, preds, len(X))


def predict_dt_rows(model: DTModel, utterances) -> np.ndarray:
    utts, X, tones = _syllable_table(utterances, model.schema)
    if len(X) == 0:
        return np.zeros((0, CONTOUR_POINTS))
    if model.spec.kind != "PSLevel":
        return _predict_roles(model, X, tones)
    out = _predict_roles(model, X, tones, prefix="syllable/")
    offset = 0
    for u in utts:
        starts = [offset + a for a, _ in u.phrases]
        coeffs = model.trees["phrase"].predict(X[starts])
        for (a, b), c in zip(u.phrases, coeffs):
            out[offset + a:offset + b] += phrase_curve(c, b - a)
        offset += len(u)
    return out


def _split_rows(utts, rows):
    out, offset = {}, 0
    for u in utts:
        out[u.id] = rows[offset:offset + len(u)]
        offset += len(u)
    return out


def predict_dt_model(model: DTModel, utterance) -> np.ndarray:
    """(n_syllables, 10) Hz contours for one utterance."""
    return predict_dt_rows(model, [utterance])


def predict_forest(forest: ForestModel, utterance) -> np.ndarray:
    """Unweighted mean of the members' decoded predictions."""
    return predict_forest_rows(forest, [utterance])


def predict_forest_rows(forest: ForestModel, utterances) -> np.ndarray:
    utterances = list(utterances)
    preds = [predict_dt_rows(m, utterances) for m in forest.members]
    return np.mean(preds, axis=0)


def predict_corpus(model, corpus) -> dict:
    """utterance id -> (n_syllables, 10) predictions for a DTModel or ForestModel."""
    utts = list(corpus.utterances) if isinstance(corpus, Corpus) else list(corpus)
    rows = predict_forest_rows(model, utts) if isinstance(model, ForestModel) else predict_dt_rows(model, utts)
    return _split_rows(utts, rows)


# -- serialization ------------------------------------------------------------------

def _schema_to_list(schema):
    out = []
    for e in schema:
        d = {"name": e.name, "level": e.level, "kind": e.kind}
        if e.is_categorical:
            d["values"] = list(e.values)
        else:
            d["range"] = [str(x) for x in e.range]
        out.append(d)
    return out


def _schema_from_list(items):
    return FeatureSchema(tuple(
        categorical(d["name"], d["level"], d["values"]) if d["kind"] == "categorical"
        else numeric(d["name"], d["level"], float(d["range"][0]), float(d["range"][1]))
        for d in items))


def _spec_to_dict(arch):
    r = arch.representation
    return {"kind": arch.kind, "base": r.base, "delta": r.delta, "k": r.k}


def _spec_from_dict(d):
    return ArchitectureSpec(d["kind"], RepresentationSpec(d["base"], d["delta"], int(d["k"])))


def _tc_to_dict(tc: TreeConfig):
    return {"min_leaf": tc.min_leaf, "max_depth": tc.max_depth}


def _dt_to_dict(model: DTModel) -> dict:
    return {"spec": _spec_to_dict(model.spec), "tree_config": _tc_to_dict(model.tree_config),
            "trees": {k: model.trees[k].to_dict() for k in sorted(model.trees)}}


def _dt_from_dict(d, schema) -> DTModel:
    tc = d["tree_config"]
    return DTModel(_spec_from_dict(d["spec"]),
                   {k: RegressionTree.from_dict(v) for k, v in d["trees"].items()},
                   schema, TreeConfig(tc["min_leaf"], tc["max_depth"]))


def model_to_text(model) -> str:
    if isinstance(model, ForestModel):
        c = model.config
        body = {
            "type": "forest",
            "schema": _schema_to_list(model.members[0].schema),
            "spec": _spec_to_dict(model.spec),
            "config": {"n_trees": c.n_trees, "feature_ignore": c.feature_ignore,
                       "output_ignore": c.output_ignore, "seed": c.seed,
                       "tree": _tc_to_dict(c.tree)},
            "feature_masks": [list(m) for m in model.feature_masks],
            "output_masks": [{r: list(v) for r, v in m.items()} for m in model.output_masks],
            "members": [_dt_to_dict(m) for m in model.members],
        }
    else:
        body = {"type": "dt", "schema": _schema_to_list(model.schema), **_dt_to_dict(model)}
    return MODEL_HEADER + "\n" + json.dumps(body, sort_keys=True, separators=(",", ":")) + "\n"


def model_from_text(text: str):
    header, _, rest = text.partition("\n")
    if header.strip() != MODEL_HEADER:
        raise MalformedRecord(f"not a decision-tree model file (expected {MODEL_HEADER!r})", 1)
    try:
        return _parse_model(json.loads(rest))
    except (IndexError, KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"corrupt decision-tree model file: {type(exc).__name__}: {exc}") from None


def _parse_model(body):
    schema = _schema_from_list(body["schema"])
    if body["type"] == "dt":
        return _dt_from_dict(body, schema)
    c = body["config"]
    config = ForestConfig(c["n_trees"], c["feature_ignore"], c["output_ignore"], c["seed"],
                          TreeConfig(c["tree"]["min_leaf"], c["tree"]["max_depth"]))
    return ForestModel(_spec_from_dict(body["spec"]),
                       [_dt_from_dict(m, schema) for m in body["members"]],
                       [tuple(m) for m in body["feature_masks"]],
                       [{r: tuple(v) for r, v in m.items()} for m in body["output_masks"]],
                       config)


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(model_to_text(model))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_text(fh.read())
