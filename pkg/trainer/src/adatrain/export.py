"""Binary export of trained models in the coding side's file formats.

Weight banks: magic "VSB2", format version u16 LE, model count u16 LE;
per model a codec id (u8 length + utf-8), adaptation version u8, QP group
u8, residual block count u16 LE, feature map count u16 LE, then one
record per parameter tensor in fixed topology order (head conv
weights/bias, head PReLU alpha, per block conv1 weights/bias, alpha,
conv2 weights/bias, post conv weights/bias, tail conv weights/bias) as
tag u8 (0 conv / 1 prelu), rank u8, dims u32 LE, float32 LE payload.

Decision networks: magic "VSQ2", version u16 LE, hidden size u16 LE, then
float32 LE arrays: per-feature (mean, scale) pairs, hidden weights,
hidden bias, output weights, output bias.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .nn import RestorationNet
from .qro_train import QroNet

BANK_MAGIC = b"VSB2"
BANK_VERSION = 1
QRO_MAGIC = b"VSQ2"
QRO_VERSION = 1

TAG_CONV = 0
TAG_PRELU = 1

QP_GROUPS = (22, 27, 32, 37, 42)


def _record(tag: int, array: np.ndarray) -> bytes:
    head = struct.pack("<BB", tag, array.ndim)
    dims = b"".join(struct.pack("<I", d) for d in array.shape)
    return head + dims + np.ascontiguousarray(array, dtype="<f4").tobytes()


def _model_blob(net: RestorationNet) -> bytes:
    p = net.params
    parts = [_record(TAG_CONV, p["head.w"]), _record(TAG_CONV, p["head.b"]),
             _record(TAG_PRELU, p["head_act.alpha"])]
    for i in range(net.n_blocks):
        parts += [_record(TAG_CONV, p[f"block{i}.conv1.w"]),
                  _record(TAG_CONV, p[f"block{i}.conv1.b"]),
                  _record(TAG_PRELU, p[f"block{i}.alpha"]),
                  _record(TAG_CONV, p[f"block{i}.conv2.w"]),
                  _record(TAG_CONV, p[f"block{i}.conv2.b"])]
    parts += [_record(TAG_CONV, p["post.w"]), _record(TAG_CONV, p["post.b"]),
              _record(TAG_CONV, p["tail.w"]), _record(TAG_CONV, p["tail.b"])]
    return b"".join(parts)


def export_weights(models: dict[tuple[str, int, int], RestorationNet],
                   path: str | Path) -> None:
    """Write a bank keyed by (codec id, adaptation version, QP group)."""
    if not models:
        raise ValueError("refusing to export an empty model map")
    out = [BANK_MAGIC, struct.pack("<HH", BANK_VERSION, len(models))]
    for (codec, version, qp_group), net in models.items():
        if qp_group not in QP_GROUPS:
            raise ValueError(f"QP group {qp_group} not one of {QP_GROUPS}")
        if version not in (0, 1):
            raise ValueError(f"adaptation version {version} must be 0 or 1")
        codec_bytes = codec.encode("utf-8")
        out.append(struct.pack("<B", len(codec_bytes)))
        out.append(codec_bytes)
        out.append(struct.pack("<BBHH", version, qp_group, net.n_blocks,
                               net.feature_maps))
        out.append(_model_blob(net))
    Path(path).write_bytes(b"".join(out))


def export_qro(net: QroNet, path: str | Path) -> None:
    hidden = net.hidden_w.shape[0]
    norm = np.stack([net.means, net.scales], axis=1)  # (3, 2) mean/scale pairs
    blob = [QRO_MAGIC, struct.pack("<HH", QRO_VERSION, hidden)]
    for arr in (norm, net.hidden_w, net.hidden_b, net.out_w, net.out_b):
        blob.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(blob))
