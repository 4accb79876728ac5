"""Training loop for the restoration network (mean absolute error, Adam
with decoupled weight decay)."""
from __future__ import annotations

import numpy as np

from .dataset import BlockPairs
from .nn import RestorationNet, TrainConfig, l1_loss
from .optim import Adam


def train_cnn(pairs: BlockPairs, config: TrainConfig,
              net: RestorationNet | None = None) -> tuple[RestorationNet, list[float]]:
    """Fit a network to the block pairs; returns (model, per-epoch losses)."""
    config.validate()
    if len(pairs) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(config.seed)
    if net is None:
        net = RestorationNet(config.n_residual_blocks, config.feature_maps, rng)
    opt = Adam(net.params, lr=config.learning_rate,
               weight_decay=config.weight_decay)
    x_all = pairs.degraded.transpose(0, 3, 1, 2).astype(np.float64)
    t_all = pairs.original.transpose(0, 3, 1, 2).astype(np.float64)

    history: list[float] = []
    for _epoch in range(config.epochs):
        order = rng.permutation(len(pairs))
        losses = []
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            out, caches = net.forward(x_all[idx])
            loss, dout = l1_loss(out, t_all[idx])
            if not np.isfinite(loss):
                raise RuntimeError(f"training diverged: loss={loss}")
            grads = net.backward(dout, caches)
            opt.step(grads)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return net, history


def dataset_loss(net: RestorationNet, pairs: BlockPairs) -> float:
    """Mean absolute error of the current model over a block set."""
    x = pairs.degraded.transpose(0, 3, 1, 2).astype(np.float64)
    t = pairs.original.transpose(0, 3, 1, 2).astype(np.float64)
    out, _ = net.forward(x)
    return float(np.mean(np.abs(out - t)))
