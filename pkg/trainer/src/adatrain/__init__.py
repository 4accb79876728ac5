"""Desk-scale training for the restoration network and the decision MLP,
exporting weights in the coding side's binary formats."""

from .nn import RestorationNet, TrainConfig, l1_loss
from .optim import Adam
from .dataset import (BlockPairs, HostCodec, SourceClip, VERSION_EBD,
                      VERSION_SR_EBD, degrade_clip, prepare_dataset)
from .training import dataset_loss, train_cnn
from .qro_train import QroNet, load_feature_csv, train_qro, write_feature_csv
from .export import export_qro, export_weights

__version__ = "0.1.0"
