"""Vector-output CART regression trees.

Questions are Wagon-style: categorical equality (``feature == value``) or a
numeric threshold (``feature <= t``) placed at the midpoint between two
consecutive distinct observed values.  Samples answering "yes" go left.

Features are handed to the tree as a float matrix (see ``feature_matrix``):
categorical values become their index in the schema value set, unknown values
become -1 and so never satisfy an equality question.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .corpus import FeatureSchema

UNKNOWN = -1.0


@dataclass(frozen=True)
class TreeConfig:
    min_leaf: int = 10
    max_depth: Optional[int] = None
    active_feature_mask: Optional[tuple] = None
    active_output_mask: Optional[tuple] = None

    def __post_init__(self):
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        for name in ("active_feature_mask", "active_output_mask"):
            mask = getattr(self, name)
            if mask is not None:
                if len(mask) == 0:
                    raise ValueError(f"{name} must be non-empty when given")
                object.__setattr__(self, name, tuple(sorted(int(i) for i in mask)))


@dataclass(frozen=True)
class Question:
    feature: str
    index: int
    op: str  # "eq" | "le"
    value: object  # categorical value string, or float threshold
    code: float = 0.0  # categorical code for "eq"

    def ask(self, x: np.ndarray):
        col = x[..., self.index]
        if self.op == "eq":
            return col == self.code
        return col <= self.value

    def __str__(self):
        sym = "==" if self.op == "eq" else "<="
        return f"{self.feature} {sym} {self.value}"


def feature_matrix(schema: FeatureSchema, feature_dicts) -> np.ndarray:
    lookups = [
        {v: float(i) for i, v in enumerate(e.values)} if e.is_categorical else None
        for e in schema
    ]
    rows = []
    for feats in feature_dicts:
        row = []
        for e, lut in zip(schema, lookups):
            val = feats[e.name]
            row.append(lut.get(val, UNKNOWN) if lut is not None else float(val))
        rows.append(row)
    return np.array(rows, dtype=float).reshape(-1, len(schema))


def _split_tolerance(y_active: np.ndarray, parent_sse: float) -> float:
    # relative slack for rounding, plus an absolute floor (1e-9 RMS per sample)
    # so targets that are pure floating-point noise never split
    return 1e-10 * parent_sse + 1e-13 * float(np.sum(y_active ** 2)) + 1e-18 * len(y_active)


def _numeric_candidates(Xn, yc, q, min_leaf):
    """Thresholds and child SSEs for every numeric column of Xn at once.

    Returns per-column lists (thresholds, sse) in ascending threshold order.
    """
    n, f = Xn.shape
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    cs = np.cumsum(yc[order], axis=0)  # (n, f, d)
    cq = np.cumsum(q[order], axis=0)  # (n, f)
    n_left = np.arange(1, n)[:, None]
    s_left = cs[:-1]
    s_right = cs[-1] - s_left
    sse = (cq[:-1] - np.sum(s_left ** 2, axis=2) / n_left
           + (cq[-1] - cq[:-1]) - np.sum(s_right ** 2, axis=2) / (n - n_left))
    ok = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    thresholds = 0.5 * (xs[:-1] + xs[1:])
    return [(thresholds[ok[:, j], j], sse[ok[:, j], j]) for j in range(f)]


def _categorical_candidates(Xc, yc, q, n_values, min_leaf):
    """Value codes and child SSEs for every categorical column of Xc at once."""
    n, f = Xc.shape
    offsets = np.concatenate([[0], np.cumsum(n_values)])
    codes = Xc.astype(int)
    known = codes >= 0
    flat = (codes + offsets[:-1])[known]
    rows = np.broadcast_to(np.arange(n)[:, None], codes.shape)[known]
    total = int(offsets[-1])
    counts = np.bincount(flat, minlength=total)
    s = np.stack([np.bincount(flat, weights=yc[rows, d], minlength=total)
                  for d in range(yc.shape[1])], axis=1)
    qs = np.bincount(flat, weights=q[rows], minlength=total)
    s_tot = yc.sum(axis=0)
    q_tot = q.sum()
    n_right = n - counts
    ok = (counts >= min_leaf) & (n_right >= min_leaf)
    with np.errstate(divide="ignore", invalid="ignore"):
        sse = (qs - np.sum(s ** 2, axis=1) / counts
               + (q_tot - qs) - np.sum((s_tot - s) ** 2, axis=1) / n_right)
    out = []
    for j in range(f):
        lo, hi = offsets[j], offsets[j + 1]
        sel = np.flatnonzero(ok[lo:hi])
        out.append((sel.astype(float), sse[lo:hi][sel]))
    return out


def best_split(X: np.ndarray, Y: np.ndarray, schema: FeatureSchema,
               config: TreeConfig = TreeConfig()) -> Optional[Question]:
    """Question minimizing the summed child SSE over active output dimensions.

    Both children need ``min_leaf`` samples.  Candidates within a small
    tolerance of the minimum count as ties; the first one in (schema feature
    order, ascending threshold / value code) wins.  Returns None when no legal
    question reduces the parent SSE by more than that tolerance.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    n = len(X)
    if n < 2 * config.min_leaf or n < 2:
        return None
    outs = list(config.active_output_mask) if config.active_output_mask else list(range(Y.shape[1]))
    ya = Y[:, outs]
    yc = ya - ya.mean(axis=0)
    q = np.sum(yc ** 2, axis=1)
    parent = float(q.sum())
    tol = _split_tolerance(ya, parent)
    feats = list(config.active_feature_mask) if config.active_feature_mask else list(range(len(schema)))
    num = [i for i in feats if not schema.entries[i].is_categorical]
    cat = [i for i in feats if schema.entries[i].is_categorical]
    cands = {}
    if num:
        cands.update(zip(num, _numeric_candidates(X[:, num], yc, q, config.min_leaf)))
    if cat:
        n_values = [len(schema.entries[i].values) for i in cat]
        cands.update(zip(cat, _categorical_candidates(X[:, cat], yc, q, n_values, config.min_leaf)))
    found = [(fi, *cands[fi]) for fi in feats if len(cands[fi][1])]
    if not found:
        return None
    best = min(float(sse.min()) for _, _, sse in found)
    if parent - best <= tol:
        return None
    for fi, vals, sse in found:
        hits = np.flatnonzero(sse <= best + tol)
        if len(hits):
            spec = schema.entries[fi]
            v = vals[hits[0]]
            if spec.is_categorical:
                return Question(spec.name, fi, "eq", spec.values[int(v)], float(v))
            return Question(spec.name, fi, "le", float(v))
    return None  # unreachable


@dataclass
class Node:
    value: np.ndarray
    count: int
    impurity: float
    question: Optional[Question] = None
    yes: int = -1
    no: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.question is None


@dataclass
class RegressionTree:
    nodes: list  # preorder, root first, "yes" subtree before "no" subtree
    target_dim: int

    @property
    def n_leaves(self) -> int:
        return sum(1 for nd in self.nodes if nd.is_leaf)

    @property
    def depth(self) -> int:
        def walk(i):
            nd = self.nodes[i]
            return 0 if nd.is_leaf else 1 + max(walk(nd.yes), walk(nd.no))
        return walk(0)

    def leaf_index(self, x: np.ndarray) -> int:
        i = 0
        while not self.nodes[i].is_leaf:
            nd = self.nodes[i]
            i = nd.yes if nd.question.ask(x) else nd.no
        return i

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node index for every row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(len(X), dtype=int)
        stack = [(0, np.arange(len(X)))]
        while stack:
            i, rows = stack.pop()
            nd = self.nodes[i]
            if nd.is_leaf or len(rows) == 0:
                out[rows] = i
                continue
            mask = nd.question.ask(X[rows])
            stack.append((nd.yes, rows[mask]))
            stack.append((nd.no, rows[~mask]))
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        leaves = self.apply(X)
        return np.array([self.nodes[i].value for i in leaves]).reshape(len(X), self.target_dim)

    def to_dict(self) -> dict:
        nodes = []
        for nd in self.nodes:
            rec = {"n": nd.count, "imp": nd.impurity, "v": [float(v) for v in nd.value]}
            if not nd.is_leaf:
                q = nd.question
                rec.update(q={"f": q.feature, "i": q.index, "op": q.op,
                              "v": q.value, "c": q.code}, yes=nd.yes, no=nd.no)
            nodes.append(rec)
        return {"dim": self.target_dim, "nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        nodes = []
        for rec in d["nodes"]:
            nd = Node(np.asarray(rec["v"], dtype=float), int(rec["n"]), float(rec["imp"]))
            if "q" in rec:
                q = rec["q"]
                nd.question = Question(q["f"], int(q["i"]), q["op"], q["v"], float(q["c"]))
                nd.yes, nd.no = int(rec["yes"]), int(rec["no"])
            nodes.append(nd)
        return cls(nodes, int(d["dim"]))


def _sse(y: np.ndarray) -> float:
    return float(np.sum((y - y.mean(axis=0)) ** 2)) if len(y) else 0.0


def train_tree(X: np.ndarray, Y: np.ndarray, schema: FeatureSchema,
               config: TreeConfig = TreeConfig()) -> RegressionTree:
    """Greedy recursive partitioning until no legal split remains or max_depth.

    Leaves store the mean of the full target vector even when
    ``active_output_mask`` restricts which dimensions drive the splits.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if len(X) == 0:
        raise ValueError("cannot train a tree on an empty sample set")
    if len(X) != len(Y):
        raise ValueError("feature and target row counts differ")
    outs = list(config.active_output_mask) if config.active_output_mask else list(range(Y.shape[1]))
    nodes = []
    # (rows, depth, parent node index, is_yes_branch)
    stack = [(np.arange(len(X)), 0, -1, True)]
    while stack:
        rows, depth, parent, is_yes = stack.pop()
        y = Y[rows]
        node = Node(y.mean(axis=0), len(rows), _sse(y[:, outs]))
        idx = len(nodes)
        nodes.append(node)
        if parent >= 0:
            if is_yes:
                nodes[parent].yes = idx
            else:
                nodes[parent].no = idx
        if config.max_depth is not None and depth >= config.max_depth:
            continue
        q = best_split(X[rows], y, schema, config)
        if q is None:
            continue
        node.question = q
        mask = q.ask(X[rows])
        stack.append((rows[~mask], depth + 1, idx, False))
        stack.append((rows[mask], depth + 1, idx, True))
    return RegressionTree(nodes, Y.shape[1])


def predict_tree(tree: RegressionTree, x) -> np.ndarray:
    """Mean vector of the leaf reached by a single encoded feature row."""
    return tree.nodes[tree.leaf_index(np.asarray(x, dtype=float))].value.copy()
