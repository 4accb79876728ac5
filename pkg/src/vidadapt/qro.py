"""Per-GOP features and the resolution-adaptation decision network.

Two content features feed the decision: a full-reference score for how
much quality a 2x down/up resampling cycle would cost (wavelet subband
energy comparison, mean-pooled over the window) and the temporal
information (mean absolute luma frame difference). Together with the base
QP they drive a small MLP that says whether spatial down-sampling should
be enabled for the GOP.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, FormatError
from .resampler import lanczos3_downsample_2x, lanczos3_upsample_2x
from .video_io import VideoSequence

MLP_MAGIC = b"VSQ2"
MLP_VERSION = 1
EPS_ENERGY = 1e-8

# Subband weights for the resampling-quality score, two Haar levels.
# High-frequency bands dominate because that is what a down/up cycle loses.
SUBBAND_WEIGHTS = {
    "ll2": 0.10,
    "lh2": 0.15,
    "hl2": 0.15,
    "hh2": 0.10,
    "lh1": 0.15,
    "hl1": 0.15,
    "hh1": 0.20,
}


@dataclass
class QroFeatures:
    srqm_mean: float
    ti_mean: float
    qp_base: float

    def as_array(self) -> np.ndarray:
        return np.array([self.srqm_mean, self.ti_mean, self.qp_base], dtype=np.float64)


@dataclass
class MlpModel:
    """One hidden tanh layer, sigmoid output, z-score feature normalization."""

    hidden_weights: np.ndarray   # (hidden, 3)
    hidden_bias: np.ndarray      # (hidden,)
    output_weights: np.ndarray   # (1, hidden)
    output_bias: np.ndarray      # (1,)
    feature_norm: np.ndarray     # (3, 2) per-feature (mean, scale)

    @property
    def hidden_size(self) -> int:
        return self.hidden_weights.shape[0]

    def validate(self) -> None:
        h = self.hidden_size
        if h < 1:
            raise ConfigError("hidden layer needs at least one unit")
        shapes = {
            "hidden_weights": (self.hidden_weights, (h, 3)),
            "hidden_bias": (self.hidden_bias, (h,)),
            "output_weights": (self.output_weights, (1, h)),
            "output_bias": (self.output_bias, (1,)),
            "feature_norm": (self.feature_norm, (3, 2)),
        }
        for name, (arr, shape) in shapes.items():
            if arr.shape != shape:
                raise FormatError(f"{name} shape {arr.shape} != {shape}")
            if not np.isfinite(arr).all():
                raise FormatError(f"non-finite values in {name}")
        if (self.feature_norm[:, 1] <= 0).any():
            raise FormatError("feature scales must be positive")

    def normalize(self, features: np.ndarray) -> np.ndarray:
        return (features - self.feature_norm[:, 0]) / self.feature_norm[:, 1]

    def denormalize(self, normed: np.ndarray) -> np.ndarray:
        return normed * self.feature_norm[:, 1] + self.feature_norm[:, 0]


def zero_mlp(hidden_size: int = 10) -> MlpModel:
    return MlpModel(np.zeros((hidden_size, 3)), np.zeros(hidden_size),
                    np.zeros((1, hidden_size)), np.zeros(1),
                    np.stack([np.zeros(3), np.ones(3)], axis=1))


def temporal_information(lumas: Sequence[np.ndarray], index: int) -> float:
    """Mean absolute luma difference against the available neighbours
    (previous and next frame; boundary frames use the single one)."""
    if not len(lumas):
        raise ConfigError("empty window")
    if not (0 <= index < len(lumas)):
        raise ConfigError(f"index {index} outside window of {len(lumas)}")
    diffs = []
    here = lumas[index].astype(np.float64)
    for j in (index - 1, index + 1):
        if 0 <= j < len(lumas):
            diffs.append(float(np.mean(np.abs(here - lumas[j].astype(np.float64)))))
    return float(np.mean(diffs)) if diffs else 0.0


def _haar_level(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    h, w = plane.shape
    plane = plane[:h - h % 2, :w - w % 2]
    a = plane[0::2, 0::2]
    b = plane[0::2, 1::2]
    c = plane[1::2, 0::2]
    d = plane[1::2, 1::2]
    ll = (a + b + c + d) / 2.0
    lh = (a - b + c - d) / 2.0
    hl = (a + b - c - d) / 2.0
    hh = (a - b - c + d) / 2.0
    return ll, lh, hl, hh


def _subband_energies(plane: np.ndarray) -> dict[str, float]:
    ll1, lh1, hl1, hh1 = _haar_level(plane)
    ll2, lh2, hl2, hh2 = _haar_level(ll1)
    bands = {"ll2": ll2, "lh2": lh2, "hl2": hl2, "hh2": hh2,
             "lh1": lh1, "hl1": hl1, "hh1": hh1}
    return {name: float(np.mean(np.square(band))) for name, band in bands.items()}


def srqm_frame_score(reference_luma: np.ndarray, resampled_luma: np.ndarray) -> float:
    """Score one frame pair in [0, 1]; 1 means resampling cost nothing.

    Both lumas go through a 2-level Haar decomposition; each subband
    contributes its weighted normalized energy difference
    |E_ref - E_res| / (E_ref + eps).
    """
    if reference_luma.shape != resampled_luma.shape:
        raise ConfigError(
            f"luma shapes differ: {reference_luma.shape} vs {resampled_luma.shape}")
    e_ref = _subband_energies(reference_luma.astype(np.float64))
    e_res = _subband_energies(resampled_luma.astype(np.float64))
    penalty = sum(w * abs(e_ref[s] - e_res[s]) / (e_ref[s] + EPS_ENERGY)
                  for s, w in SUBBAND_WEIGHTS.items())
    return float(np.clip(1.0 - penalty, 0.0, 1.0))


def srqm_score(reference: VideoSequence, resampled: VideoSequence) -> float:
    """Mean frame score over a window (arithmetic temporal pooling)."""
    if len(reference) != len(resampled) or not len(reference):
        raise ConfigError("windows must be non-empty and equally long")
    scores = [srqm_frame_score(ref.luma, res.luma)
              for ref, res in zip(reference.frames, resampled.frames)]
    return float(np.mean(scores))


def mlp_forward(model: MlpModel, features: QroFeatures) -> float:
    """Probability that resolution adaptation helps, in (0, 1)."""
    x = model.normalize(features.as_array())
    z = np.tanh(model.hidden_weights @ x + model.hidden_bias)
    logit = float((model.output_weights @ z + model.output_bias)[0])
    return float(1.0 / (1.0 + math.exp(-logit)))


def decide_sr(model: MlpModel, features: QroFeatures) -> bool:
    """True (enable spatial adaptation) when the probability is >= 0.5."""
    return mlp_forward(model, features) >= 0.5


def gop_features(video: VideoSequence, gop_start: int, gop_len: int,
                 qp_base: float) -> QroFeatures:
    """Window-mean features for one GOP; the resampled arm is the window
    itself pushed through the down/up filter pair."""
    if gop_len < 1 or gop_start < 0 or gop_start + gop_len > len(video):
        raise ConfigError(
            f"GOP [{gop_start}, {gop_start + gop_len}) outside sequence of {len(video)}")
    window = video.frames[gop_start:gop_start + gop_len]
    lumas = [f.luma for f in window]
    ti_mean = float(np.mean([temporal_information(lumas, i) for i in range(len(lumas))]))
    resampled = [lanczos3_upsample_2x(lanczos3_downsample_2x(f)) for f in window]
    srqm_mean = srqm_score(VideoSequence(list(window), video.frame_rate),
                           VideoSequence(resampled, video.frame_rate))
    return QroFeatures(srqm_mean=srqm_mean, ti_mean=ti_mean, qp_base=qp_base)


def save_mlp(model: MlpModel, path: str | Path) -> None:
    """Write the decision network: magic "VSQ2", version u16, hidden size
    u16, feature (mean, scale) pairs, hidden weights/bias, output
    weights/bias, all float32 little-endian."""
    model.validate()
    with open(path, "wb") as fh:
        fh.write(MLP_MAGIC)
        fh.write(struct.pack("<HH", MLP_VERSION, model.hidden_size))
        for arr in (model.feature_norm, model.hidden_weights, model.hidden_bias,
                    model.output_weights, model.output_bias):
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_mlp(path: str | Path) -> MlpModel:
    data = Path(path).read_bytes()
    if data[:4] != MLP_MAGIC:
        raise FormatError("bad magic: not a decision-network file")
    if len(data) < 8:
        raise FormatError("truncated decision-network file")
    version, hidden = struct.unpack("<HH", data[4:8])
    if version != MLP_VERSION:
        raise FormatError(f"unsupported decision-network version {version}")
    counts = (6, hidden * 3, hidden, hidden, 1)
    expected = 8 + 4 * sum(counts)
    if len(data) != expected:
        raise FormatError(f"decision-network file is {len(data)} bytes, expected {expected}")
    vals = np.frombuffer(data[8:], dtype="<f4").astype(np.float64)
    offset = 0
    arrays = []
    for count in counts:
        arrays.append(vals[offset:offset + count])
        offset += count
    model = MlpModel(
        feature_norm=arrays[0].reshape(3, 2),
        hidden_weights=arrays[1].reshape(hidden, 3),
        hidden_bias=arrays[2],
        output_weights=arrays[3].reshape(1, hidden),
        output_bias=arrays[4],
    )
    model.validate()
    return model
