"""``F0LAB-NN v1`` model files: settings, encoder statistics, then parameters.

Each parameter is a ``param <name> <dims...>`` line followed by one line of
row-major values at 9 significant digits.
"""

import json

import numpy as np

from ..cart import _schema_from_list, _schema_to_list
from ..corpus import MalformedRecord, fmt_float
from .model import ContourNet, FeatureEncoder, TrainConfig

HEADER = "F0LAB-NN v1"


def model_to_text(model: ContourNet) -> str:
    c = model.config
    settings = {
        "kind": model.kind, "delta": c.delta, "hidden": c.hidden, "mlp_hidden": list(c.mlp_hidden),
        "emb_dim": c.emb_dim, "target_scale": c.target_scale, "learning_rate": c.learning_rate,
        "epochs": c.epochs, "clip_norm": c.clip_norm, "patience": c.patience, "seed": c.seed,
    }
    lines = [HEADER, "settings " + json.dumps(settings, sort_keys=True),
             "schema " + json.dumps(_schema_to_list(model.schema), sort_keys=True)]
    for enc in model.encoders:
        stats = {k: [fmt_float(m), fmt_float(s)] for k, (m, s) in enc.numeric_stats.items()}
        lines.append("encoder " + json.dumps({"prefix": enc.prefix, "names": enc.names,
                                              "numeric_stats": stats}, sort_keys=True))
    lines.append(f"params {len(model.params)}")
    for name in sorted(model.params):
        arr = model.params[name]
        lines.append(" ".join(["param", name] + [str(d) for d in arr.shape]))
        lines.append(" ".join(fmt_float(v) for v in arr.ravel()))
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> ContourNet:
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise MalformedRecord(f"not a neural model file (expected {HEADER!r})", 1)
    try:
        return _parse(lines)
    except MalformedRecord:
        raise
    except (IndexError, KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"corrupt neural model file: {type(exc).__name__}: {exc}") from None


def _parse(lines):
    pos = 1

    def take(tag):
        nonlocal pos
        if pos >= len(lines):
            raise MalformedRecord(f"unexpected end of file, expected {tag!r}", pos + 1)
        line = lines[pos]
        pos += 1
        if not line.startswith(tag + " "):
            raise MalformedRecord(f"expected {tag!r} record", pos)
        return line[len(tag) + 1:]

    s = json.loads(take("settings"))
    schema = _schema_from_list(json.loads(take("schema")))
    config = TrainConfig(learning_rate=s["learning_rate"], epochs=s["epochs"], clip_norm=s["clip_norm"],
                         patience=s["patience"], delta=s["delta"], seed=s["seed"], hidden=s["hidden"],
                         mlp_hidden=tuple(s["mlp_hidden"]), emb_dim=s["emb_dim"],
                         target_scale=s["target_scale"])
    encoders = []
    for _ in range(2):
        e = json.loads(take("encoder"))
        stats = {k: (float(m), float(sd)) for k, (m, sd) in e["numeric_stats"].items()}
        encoders.append(FeatureEncoder(e["prefix"], schema, e["names"], config.emb_dim, stats))
    n = int(take("params"))
    params = {}
    for _ in range(n):
        head = take("param").split()
        shape = tuple(int(d) for d in head[1:])
        values = np.array([float(v) for v in lines[pos].split()], dtype=float)
        pos += 1
        params[head[0]] = values.reshape(shape)
    return ContourNet(s["kind"], encoders, params, config)


def save_model(model: ContourNet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(model_to_text(model))


def load_model(path) -> ContourNet:
    with open(path, encoding="utf-8") as fh:
        return model_from_text(fh.read())
