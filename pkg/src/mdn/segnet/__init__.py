"""Encoder-decoder segmentation network: build, train, predict, checkpoint."""

from .model import SegModelConfig, UNet, build_model, forward, parameter_count
from .losses import LossKind, segmentation_loss
from .optim import MomentumSGD, sgd_step
from .train import TrainConfig, train
from .inference import predict_mask
from .checkpoint import CHECKPOINT_VERSION, Checkpoint, load_checkpoint, save_checkpoint

__all__ = [
    "SegModelConfig", "UNet", "build_model", "forward", "parameter_count",
    "LossKind", "segmentation_loss",
    "MomentumSGD", "sgd_step",
    "TrainConfig", "train",
    "predict_mask",
    "CHECKPOINT_VERSION", "Checkpoint", "load_checkpoint", "save_checkpoint",
]
