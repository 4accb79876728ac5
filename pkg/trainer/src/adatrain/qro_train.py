"""Offline training of the resolution-decision MLP.

Three features (resampling-quality score, temporal information, base QP)
feed one tanh hidden layer and a sigmoid output, trained with binary
cross-entropy; z-score statistics are learned from the training set and
stored with the model.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class QroNet:
    hidden_w: np.ndarray   # (hidden, 3)
    hidden_b: np.ndarray   # (hidden,)
    out_w: np.ndarray      # (1, hidden)
    out_b: np.ndarray      # (1,)
    means: np.ndarray      # (3,)
    scales: np.ndarray     # (3,)

    def probabilities(self, features: np.ndarray) -> np.ndarray:
        x = (features - self.means) / self.scales
        z = np.tanh(x @ self.hidden_w.T + self.hidden_b)
        logits = z @ self.out_w.T + self.out_b
        return 1.0 / (1.0 + np.exp(-logits[:, 0]))

    def decisions(self, features: np.ndarray) -> np.ndarray:
        return self.probabilities(features) >= 0.5

    def accuracy(self, features: np.ndarray, labels: np.ndarray) -> float:
        return float(np.mean(self.decisions(features) == labels.astype(bool)))


def train_qro(features: np.ndarray, labels: np.ndarray, hidden: int = 10,
              epochs: int = 2000, lr: float = 0.02,
              seed: int = 0) -> tuple[QroNet, float]:
    """Fit the decision network; returns (model, training accuracy)."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != 3 or len(features) != len(labels):
        raise ValueError("features must be (n, 3) with one label per row")
    means = features.mean(axis=0)
    scales = features.std(axis=0)
    scales[scales <= 1e-12] = 1.0

    rng = np.random.default_rng(seed)
    net = QroNet(hidden_w=rng.normal(0, 0.5, (hidden, 3)),
                 hidden_b=np.zeros(hidden),
                 out_w=rng.normal(0, 0.5, (1, hidden)),
                 out_b=np.zeros(1), means=means, scales=scales)

    x = (features - means) / scales
    y = labels
    n = len(y)
    for _ in range(epochs):
        z = np.tanh(x @ net.hidden_w.T + net.hidden_b)      # (n, hidden)
        p = 1.0 / (1.0 + np.exp(-(z @ net.out_w.T + net.out_b)[:, 0]))
        dlogit = (p - y) / n                                 # BCE gradient
        d_out_w = dlogit @ z
        d_out_b = dlogit.sum()
        dz = np.outer(dlogit, net.out_w[0]) * (1.0 - z * z)
        d_hidden_w = dz.T @ x
        d_hidden_b = dz.sum(axis=0)
        net.out_w -= lr * d_out_w[None, :]
        net.out_b -= lr * d_out_b
        net.hidden_w -= lr * d_hidden_w
        net.hidden_b -= lr * d_hidden_b
    return net, net.accuracy(features, labels)


def load_feature_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a srqm,ti,qp_base,label table."""
    feats, labels = [], []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            feats.append([float(rec["srqm"]), float(rec["ti"]),
                          float(rec["qp_base"])])
            labels.append(int(rec["label"]))
    return np.array(feats), np.array(labels)


def write_feature_csv(features: np.ndarray, labels: np.ndarray,
                      path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["srqm", "ti", "qp_base", "label"])
        for (srqm, ti, qp), label in zip(features, labels):
            writer.writerow([f"{srqm:.6f}", f"{ti:.6f}", f"{qp:g}", int(label)])
