from .io import load_model, save_model
from .layers import blstm_forward, lstm_forward, lstm_step
from .model import (
    ContourNet,
    FeatureEncoder,
    PredictionBundle,
    TrainConfig,
    additive_forward,
    compute_gradients,
    encode_features,
    loss_with_delta,
    make_additive,
    make_baseline,
    make_model,
    model_loss,
    predict_neural,
)
from .train import Adam, TrainingDiverged, train

__all__ = [
    "Adam", "ContourNet", "FeatureEncoder", "PredictionBundle", "TrainConfig", "TrainingDiverged",
    "additive_forward", "blstm_forward", "compute_gradients", "encode_features", "load_model",
    "loss_with_delta", "lstm_forward", "lstm_step", "make_additive", "make_baseline", "make_model",
    "model_loss", "predict_neural", "save_model", "train",
]
