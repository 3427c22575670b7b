"""f0lab command line: generate data, split, train, predict, evaluate, export plot data."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import cart
from .config import ConfigError, build_config
from .corpus import CorpusError, MalformedRecord, SchemaViolation, fmt_float, load_corpus, save_corpus, split_corpus
from .evaluation import evaluate
from .neural import io as nn_io
from .neural.model import ContourNet, make_model
from .neural.train import TrainingDiverged, train
from .synth import generate_synthetic

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_SCHEMA = 4
EXIT_FORMAT = 5

CONTOURS_HEADER = "# F0LAB-CONTOURS v1"

EPILOG = """\
exit codes:
  0  success
  1  runtime failure (e.g. training diverged)
  2  invalid configuration or arguments
  3  missing input file
  4  model / corpus schema mismatch
  5  malformed input file

config files are INI style with sections [synth] [split] [representation]
[architecture] [tree] [forest] [train]; --set section.key=value overrides them.
"""

log = logging.getLogger("f0lab")


class SchemaMismatch(Exception):
    pass


# -- file helpers ------------------------------------------------------------------

def write_contours(path, predictions: dict):
    lines = [CONTOURS_HEADER]
    for utt_id, rows in predictions.items():
        for i, row in enumerate(np.asarray(rows)):
            lines.append(",".join([utt_id, str(i)] + [fmt_float(v) for v in row]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_contours(path) -> dict:
    if not os.path.exists(path):
        raise FileNotFoundError(f"contour file not found: {path}")
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 12:
                raise MalformedRecord(f"expected utterance id, index and 10 values, got {len(parts)} fields", n)
            try:
                idx = int(parts[1])
                vals = [float(v) for v in parts[2:]]
            except ValueError:
                raise MalformedRecord("non-numeric contour row", n) from None
            rows = out.setdefault(parts[0], [])
            if idx != len(rows):
                raise MalformedRecord(f"syllable index {idx} out of order", n, parts[0])
            rows.append(vals)
    return {k: np.array(v) for k, v in out.items()}


def load_any_model(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"model file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    head = text.split("\n", 1)[0].strip()
    if head == cart.MODEL_HEADER:
        return cart.model_from_text(text)
    if head == nn_io.HEADER:
        return nn_io.model_from_text(text)
    raise MalformedRecord(f"unrecognized model header {head!r}", 1)


def model_schema(model):
    if isinstance(model, cart.ForestModel):
        return model.members[0].schema
    return model.schema


def check_schema(model, corpus):
    if model_schema(model) != corpus.schema:
        raise SchemaMismatch("model was trained on a different feature schema than the corpus")


def predict_all(model, corpus) -> dict:
    if isinstance(model, ContourNet):
        return {u.id: model.predict(u) for u in corpus.utterances}
    return cart.predict_corpus(model, corpus)


# -- subcommands -------------------------------------------------------------------

def cmd_gen_data(args, cfg):
    if args.seed is not None:
        cfg.set("synth", "seed", args.seed)
    if args.n_utterances is not None:
        cfg.set("synth", "n_utterances", args.n_utterances)
    corpus = generate_synthetic(cfg.synth())
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} utterances / {corpus.n_syllables} syllables to {args.out}")


def cmd_split(args, cfg):
    if args.seed is not None:
        cfg.set("split", "seed", args.seed)
    if args.ratios is not None:
        cfg.set("split", "ratios", args.ratios)
    s = cfg.section("split")
    corpus = load_corpus(args.corpus)
    parts = split_corpus(corpus, s.get("ratios", (0.8, 0.1, 0.1)), s.get("seed", 0))
    os.makedirs(args.out_dir, exist_ok=True)
    for name, part in zip(("train", "val", "test"), parts):
        save_corpus(part, os.path.join(args.out_dir, f"{name}.txt"))
    print("split sizes: " + " / ".join(str(len(p)) for p in parts))


def cmd_train_dt(args, cfg):
    corpus = load_corpus(args.train)
    model = cart.train_dt_model(cfg.architecture(), corpus, cfg.tree())
    cart.save_model(model, args.out)
    print(f"trained {model.spec.label()} with {len(model.trees)} trees -> {args.out}")


def cmd_train_forest(args, cfg):
    if args.seed is not None:
        cfg.set("forest", "seed", args.seed)
    corpus = load_corpus(args.train)
    forest = cart.train_forest(cfg.architecture(), corpus, cfg.forest())
    cart.save_model(forest, args.out)
    print(f"trained {len(forest.members)}-member forest ({forest.spec.label()}) -> {args.out}")


def cmd_train_nn(args, cfg):
    if args.kind is not None:
        cfg.set("train", "kind", args.kind)
    if args.seed is not None:
        cfg.set("train", "seed", args.seed)
    kind, tcfg = cfg.train()
    if kind not in ("mlp", "lstm", "blstm", "additive"):
        raise ConfigError(f"train.kind must be mlp, lstm, blstm or additive, got {kind!r}")
    train_c = load_corpus(args.train)
    val_c = load_corpus(args.val)
    if train_c.schema != val_c.schema:
        raise SchemaMismatch("train and validation corpora use different schemas")
    model = make_model(kind, train_c.schema, train_c, tcfg)
    model, history = train(model, train_c, val_c, tcfg)
    nn_io.save_model(model, args.out)
    if args.history:
        with open(args.history, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(history, fh, indent=1)
            fh.write("\n")
    last = history[-1] if history else {}
    print(f"trained {kind} for {len(history)} epochs (val loss {last.get('val_loss', float('nan')):.6f}) -> {args.out}")


def cmd_predict(args, cfg):
    model = load_any_model(args.model)
    corpus = load_corpus(args.corpus)
    check_schema(model, corpus)
    write_contours(args.out, predict_all(model, corpus))
    print(f"wrote predictions for {len(corpus)} utterances to {args.out}")


def cmd_eval(args, cfg):
    pred = read_contours(args.pred)
    truth = load_corpus(args.corpus)
    try:
        report = evaluate(pred, truth)
    except ValueError as exc:
        raise SchemaMismatch(str(exc)) from None
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_json())
    sys.stdout.write(report.to_text())


def cmd_plot_data(args, cfg):
    model = load_any_model(args.model)
    if not isinstance(model, ContourNet) or model.kind != "additive":
        raise ConfigError("plot-data needs an additive neural model")
    corpus = load_corpus(args.corpus)
    check_schema(model, corpus)
    ids = set(args.utterance or [])
    lines = ["\t".join(["utt_id", "syl_index", "point", "natural", "base", "residual", "predicted"])]
    for utt in corpus.utterances:
        if ids and utt.id not in ids:
            continue
        b = model.bundle(utt)
        y = utt.contours()
        for i in range(len(utt)):
            for j in range(y.shape[1]):
                lines.append("\t".join([utt.id, str(i), str(j)] + [
                    fmt_float(v) for v in (y[i, j], b.base[i, j], b.residual[i, j], b.total[i, j])]))
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote plot table to {args.out}")


# -- parser ------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="f0lab", description=__doc__, epilog=EPILOG,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text, epilog=EPILOG,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable)")
        sp.set_defaults(func=func)
        return sp

    sp = add("gen-data", cmd_gen_data, "generate a synthetic corpus")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n-utterances", type=int)
    sp.add_argument("--out", required=True)

    sp = add("split", cmd_split, "split a corpus into train/val/test files")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--ratios", help="train,val,test shares (default 0.8,0.1,0.1)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out-dir", required=True)

    for name, func, text in (("train-dt", cmd_train_dt, "train a decision-tree model"),
                             ("train-forest", cmd_train_forest, "train a random forest")):
        sp = add(name, func, text)
        sp.add_argument("--train", required=True)
        sp.add_argument("--out", required=True)
        if name == "train-forest":
            sp.add_argument("--seed", type=int)

    sp = add("train-nn", cmd_train_nn, "train a neural contour model")
    sp.add_argument("--kind", choices=("mlp", "lstm", "blstm", "additive"))
    sp.add_argument("--train", required=True)
    sp.add_argument("--val", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    sp.add_argument("--history", help="write per-epoch losses as JSON")

    sp = add("predict", cmd_predict, "predict contours for a corpus")
    sp.add_argument("--model", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--out", required=True)

    sp = add("eval", cmd_eval, "score predictions against a corpus")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--out", required=True)

    sp = add("plot-data", cmd_plot_data, "natural/base/residual/predicted table for an additive model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--utterance", action="append", help="restrict to these utterance ids")
    sp.add_argument("--out", required=True)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = build_config(args.config, args.set)
        args.func(args, cfg)
    except (ConfigError, TypeError) as exc:
        return _fail(EXIT_CONFIG, exc)
    except FileNotFoundError as exc:
        return _fail(EXIT_MISSING, exc)
    except SchemaMismatch as exc:
        return _fail(EXIT_SCHEMA, exc)
    except (MalformedRecord, SchemaViolation, CorpusError, json.JSONDecodeError) as exc:
        return _fail(EXIT_FORMAT, exc)
    except TrainingDiverged as exc:
        return _fail(EXIT_FAILURE, exc)
    except ValueError as exc:
        return _fail(EXIT_CONFIG, exc)
    return EXIT_OK


def _fail(code, exc):
    msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
    print(f"f0lab: error: {msg}", file=sys.stderr)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
