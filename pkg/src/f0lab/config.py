"""Run configuration: INI-style files plus ``--set section.key=value`` overrides.

Every key is declared here with a parser; unknown sections or keys are
rejected before any work starts.
"""

from __future__ import annotations

import configparser
import os

from .cart import ArchitectureSpec, ForestConfig
from .contour import RepresentationSpec
from .neural.model import TrainConfig
from .synth import SynthConfig
from .tree import TreeConfig


class ConfigError(ValueError):
    pass


def _int_pair(text):
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'min,max', got {text!r}")
    return int(parts[0]), int(parts[1])


def _floats(text):
    return tuple(float(p) for p in str(text).split(","))


def _ints(text):
    return tuple(int(p) for p in str(text).split(","))


def _opt_int(text):
    return None if str(text).strip().lower() in ("", "none") else int(text)


KEYS = {
    "synth": {
        "n_utterances": int, "tone_count": int, "syllables_per_utterance": _int_pair,
        "phrases_per_utterance": _int_pair, "speaker_mean_hz": float, "speaker_range_hz": float,
        "declination_slope": float, "emphasis_probability": float, "noise_std_hz": float, "seed": int,
    },
    "split": {"ratios": _floats, "seed": int},
    "representation": {"base": str, "delta": str, "k": int},
    "architecture": {"kind": str},
    "tree": {"min_leaf": int, "max_depth": _opt_int},
    "forest": {"n_trees": int, "feature_ignore": float, "output_ignore": float, "seed": int},
    "train": {
        "kind": str, "learning_rate": float, "epochs": int, "clip_norm": float, "patience": int,
        "delta": str, "seed": int, "hidden": int, "mlp_hidden": _ints, "emb_dim": int,
        "target_scale": float,
    },
}


class RunConfig:
    def __init__(self):
        self.values = {section: {} for section in KEYS}

    def set(self, section, key, raw):
        if section not in KEYS:
            raise ConfigError(f"unknown config section {section!r}")
        if key not in KEYS[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        try:
            self.values[section][key] = KEYS[section][key](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {section}.{key}: {exc}") from None

    def load_file(self, path):
        if not os.path.exists(path):
            raise FileNotFoundError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        for section in parser.sections():
            for key, raw in parser.items(section):
                self.set(section, key, raw)

    def apply_override(self, text):
        if "=" not in text or "." not in text.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {text!r}")
        lhs, raw = text.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        self.set(section, key.strip(), raw.strip())

    def section(self, name):
        return dict(self.values[name])

    # typed views
    def synth(self):
        return SynthConfig(**self.section("synth")).validate()

    def representation(self):
        return RepresentationSpec(**self.section("representation"))

    def architecture(self):
        return ArchitectureSpec(self.section("architecture").get("kind", "SinDT"), self.representation())

    def tree(self):
        return TreeConfig(**self.section("tree"))

    def forest(self):
        return ForestConfig(tree=self.tree(), **self.section("forest"))

    def train(self):
        values = self.section("train")
        kind = values.pop("kind", "additive")
        return kind, TrainConfig(**values)


def build_config(path=None, overrides=()):
    cfg = RunConfig()
    if path:
        cfg.load_file(path)
    for text in overrides:
        cfg.apply_override(text)
    return cfg
