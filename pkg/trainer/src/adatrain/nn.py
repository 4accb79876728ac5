"""Restoration network with hand-written forward and backward passes.

Mirrors the inference topology exactly: head conv + PReLU, n residual
blocks (conv, PReLU, conv, local skip), post-blocks conv summed with the
head activation, tail conv with tanh added to the network input. Training
runs on the pre-clip output so gradients flow everywhere.

Data layout is batched NCHW float64; parameters live in an ordered dict
so the optimizer and the exporter can walk them generically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """3x3 stride-1 zero-padded convolution over (n, c, h, w)."""
    n, c, h, wid = x.shape
    out_ch = w.shape[0]
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(2, 3))
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * 9, h * wid)
    out = (w.reshape(out_ch, c * 9)[None] @ cols).reshape(n, out_ch, h, wid)
    out += b[None, :, None, None]
    return out, (x.shape, cols)


def conv_backward(dout: np.ndarray, w: np.ndarray, cache):
    x_shape, cols = cache
    n, c, h, wid = x_shape
    out_ch = w.shape[0]
    dflat = dout.reshape(n, out_ch, h * wid)
    db = dout.sum(axis=(0, 2, 3))
    dw = np.einsum("nop,ncp->oc", dflat, cols).reshape(w.shape)
    dcols = (w.reshape(out_ch, c * 9).T[None] @ dflat)
    dcols = dcols.reshape(n, c, 3, 3, h, wid)
    dpadded = np.zeros((n, c, h + 2, wid + 2))
    for dy in range(3):
        for dx in range(3):
            dpadded[:, :, dy:dy + h, dx:dx + wid] += dcols[:, :, dy, dx]
    return dpadded[:, :, 1:h + 1, 1:wid + 1], dw, db


def prelu_forward(x: np.ndarray, alpha: np.ndarray):
    neg = x < 0
    out = np.where(neg, alpha[None, :, None, None] * x, x)
    return out, (x, neg)


def prelu_backward(dout: np.ndarray, alpha: np.ndarray, cache):
    x, neg = cache
    dx = np.where(neg, alpha[None, :, None, None] * dout, dout)
    dalpha = (dout * x * neg).sum(axis=(0, 2, 3))
    return dx, dalpha


@dataclass
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 1e-4
    weight_decay: float = 0.1
    epochs: int = 5          # full-scale schedule is 200
    n_residual_blocks: int = 2   # full-scale depth is 16
    feature_maps: int = 16
    seed: int = 0

    def validate(self) -> None:
        positives = (self.batch_size, self.learning_rate, self.weight_decay,
                     self.epochs, self.n_residual_blocks, self.feature_maps)
        if any(v <= 0 for v in positives):
            raise ValueError("all training hyperparameters must be positive")


class RestorationNet:
    """Parameter container + forward/backward for one model."""

    def __init__(self, n_blocks: int, feature_maps: int, rng: np.random.Generator,
                 io_channels: int = 3, init_scale: float | None = None):
        self.n_blocks = n_blocks
        self.feature_maps = feature_maps
        self.io_channels = io_channels
        f, io = feature_maps, io_channels
        self.params: dict[str, np.ndarray] = {}

        def init_conv(name, out_ch, in_ch):
            scale = init_scale if init_scale is not None else np.sqrt(2.0 / (in_ch * 9))
            self.params[f"{name}.w"] = rng.normal(0.0, scale, (out_ch, in_ch, 3, 3))
            self.params[f"{name}.b"] = np.zeros(out_ch)

        init_conv("head", f, io)
        self.params["head_act.alpha"] = np.full(f, 0.25)
        for i in range(n_blocks):
            init_conv(f"block{i}.conv1", f, f)
            self.params[f"block{i}.alpha"] = np.full(f, 0.25)
            init_conv(f"block{i}.conv2", f, f)
        init_conv("post", f, f)
        init_conv("tail", io, f)
        # zero tail makes the initial model the identity mapping, so
        # training starts from the no-op restoration and only improves
        self.params["tail.w"][...] = 0.0

    def forward(self, x: np.ndarray):
        """x is (n, c, h, w) in [0, 1]; returns pre-clip output and caches."""
        p = self.params
        caches: dict = {}
        z, caches["head"] = conv_forward(x, p["head.w"], p["head.b"])
        h0, caches["head_act"] = prelu_forward(z, p["head_act.alpha"])
        r = h0
        for i in range(self.n_blocks):
            t1, caches[f"b{i}c1"] = conv_forward(r, p[f"block{i}.conv1.w"],
                                                 p[f"block{i}.conv1.b"])
            a1, caches[f"b{i}a"] = prelu_forward(t1, p[f"block{i}.alpha"])
            t2, caches[f"b{i}c2"] = conv_forward(a1, p[f"block{i}.conv2.w"],
                                                 p[f"block{i}.conv2.b"])
            r = r + t2
        g, caches["post"] = conv_forward(r, p["post.w"], p["post.b"])
        g = g + h0
        z_tail, caches["tail"] = conv_forward(g, p["tail.w"], p["tail.b"])
        t = np.tanh(z_tail)
        caches["tanh"] = t
        out = x + t
        return out, caches

    def backward(self, dout: np.ndarray, caches) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss given d(loss)/d(out); the global skip
        contribution to the input is dropped (inputs are data)."""
        p = self.params
        grads: dict[str, np.ndarray] = {}
        dz_tail = dout * (1.0 - caches["tanh"] ** 2)
        dg, grads["tail.w"], grads["tail.b"] = conv_backward(dz_tail, p["tail.w"],
                                                             caches["tail"])
        dh0 = dg.copy()
        dr, grads["post.w"], grads["post.b"] = conv_backward(dg, p["post.w"],
                                                             caches["post"])
        for i in reversed(range(self.n_blocks)):
            da1, grads[f"block{i}.conv2.w"], grads[f"block{i}.conv2.b"] = conv_backward(
                dr, p[f"block{i}.conv2.w"], caches[f"b{i}c2"])
            dt1, grads[f"block{i}.alpha"] = prelu_backward(
                da1, p[f"block{i}.alpha"], caches[f"b{i}a"])
            dr_in, grads[f"block{i}.conv1.w"], grads[f"block{i}.conv1.b"] = conv_backward(
                dt1, p[f"block{i}.conv1.w"], caches[f"b{i}c1"])
            dr = dr + dr_in
        dh0 = dh0 + dr
        dz, grads["head_act.alpha"] = prelu_backward(dh0, p["head_act.alpha"],
                                                     caches["head_act"])
        _, grads["head.w"], grads["head.b"] = conv_backward(dz, p["head.w"],
                                                            caches["head"])
        return grads

    def predict(self, blocks: np.ndarray) -> np.ndarray:
        """Inference on (n, h, w, 3) blocks, clipped to [0, 1]."""
        x = blocks.transpose(0, 3, 1, 2).astype(np.float64)
        out, _ = self.forward(x)
        return np.clip(out, 0.0, 1.0).transpose(0, 2, 3, 1)


def l1_loss(out: np.ndarray, target: np.ndarray):
    """Mean absolute error and its gradient with respect to out."""
    diff = out - target
    loss = float(np.mean(np.abs(diff)))
    dout = np.sign(diff) / diff.size
    return loss, dout


def zero_like_params(net: RestorationNet) -> None:
    for v in net.params.values():
        v[...] = 0.0
