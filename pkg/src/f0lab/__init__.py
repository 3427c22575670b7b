"""Syllable-level f0 contour modelling for tone languages."""

from .cart import (
    ArchitectureSpec,
    DTModel,
    ForestConfig,
    ForestModel,
    predict_corpus,
    predict_dt_model,
    predict_forest,
    train_dt_model,
    train_forest,
)
from .contour import RepresentationSpec
from .corpus import Corpus, load_corpus, save_corpus, split_corpus
from .evaluation import EvalReport, evaluate, pearson, rmse
from .synth import SynthConfig, generate_synthetic
from .tree import TreeConfig

__version__ = "0.1.0"
