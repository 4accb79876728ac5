"""From-scratch inference for the residual reconstruction network.

Topology: a head conv+PReLU, n identical residual blocks (conv, PReLU,
conv, local skip), a post-blocks conv whose output is summed with the head
activation, and a tail conv with tanh whose output is added to the network
input. All convolutions are 3x3, stride 1, zero-padded to keep spatial
size. A bank of trained parameter sets is addressed by
(codec, adaptation version, QP group).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from . import video_io
from .video_io import Frame, aggregate_blocks, extract_blocks, from_rgb, plan_blocks, to_rgb

WEIGHT_BANK_MAGIC = b"VSB2"
WEIGHT_BANK_VERSION = 1
QP_GROUPS = (22, 27, 32, 37, 42)

_TAG_CONV = 0
_TAG_PRELU = 1


class AdaptVersion(IntEnum):
    EBD = 0
    SR_EBD = 1


@dataclass(frozen=True)
class NetworkSpec:
    n_residual_blocks: int = 16
    feature_maps: int = 64
    kernel_size: int = 3
    stride: int = 1
    io_channels: int = 3

    def validate(self) -> None:
        if self.n_residual_blocks < 1 or self.feature_maps < 1:
            raise ConfigError("network needs at least one block and one feature map")
        if self.kernel_size != 3 or self.stride != 1:
            raise ConfigError("only 3x3 stride-1 convolutions are supported")


@dataclass
class ConvParams:
    weights: np.ndarray  # (out_ch, in_ch, 3, 3)
    bias: np.ndarray     # (out_ch,)

    def validate(self, out_ch: int, in_ch: int) -> None:
        if self.weights.shape != (out_ch, in_ch, 3, 3):
            raise FormatError(
                f"conv weights {self.weights.shape} != {(out_ch, in_ch, 3, 3)}")
        if self.bias.shape != (out_ch,):
            raise FormatError(f"conv bias {self.bias.shape} != {(out_ch,)}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise FormatError("non-finite convolution parameters")


@dataclass
class PReluParams:
    alpha: np.ndarray  # one slope per channel

    def validate(self, channels: int) -> None:
        if self.alpha.shape != (channels,):
            raise FormatError(f"prelu alpha {self.alpha.shape} != {(channels,)}")
        if not np.isfinite(self.alpha).all():
            raise FormatError("non-finite PReLU parameters")


@dataclass
class ModelWeights:
    spec: NetworkSpec
    head_conv: ConvParams
    head_prelu: PReluParams
    blocks: list[tuple[ConvParams, PReluParams, ConvParams]]
    post_blocks_conv: ConvParams
    tail_conv: ConvParams

    def validate(self) -> None:
        self.spec.validate()
        f, io = self.spec.feature_maps, self.spec.io_channels
        if len(self.blocks) != self.spec.n_residual_blocks:
            raise FormatError(
                f"{len(self.blocks)} residual blocks != declared "
                f"{self.spec.n_residual_blocks}")
        self.head_conv.validate(f, io)
        self.head_prelu.validate(f)
        for conv1, prelu, conv2 in self.blocks:
            conv1.validate(f, f)
            prelu.validate(f)
            conv2.validate(f, f)
        self.post_blocks_conv.validate(f, f)
        self.tail_conv.validate(io, f)


@dataclass(frozen=True)
class ModelKey:
    codec: str
    version: AdaptVersion
    qp_group: int

    def __post_init__(self):
        if self.qp_group not in QP_GROUPS:
            raise ConfigError(f"qp group {self.qp_group} not one of {QP_GROUPS}")


def zero_model(spec: NetworkSpec = NetworkSpec()) -> ModelWeights:
    """All-zero parameters; the architecture makes this the exact identity."""
    f, io = spec.feature_maps, spec.io_channels

    def conv(out_ch, in_ch):
        return ConvParams(np.zeros((out_ch, in_ch, 3, 3)), np.zeros(out_ch))

    blocks = [(conv(f, f), PReluParams(np.zeros(f)), conv(f, f))
              for _ in range(spec.n_residual_blocks)]
    return ModelWeights(spec, conv(f, io), PReluParams(np.zeros(f)), blocks,
                        conv(f, f), conv(io, f))


def conv2d(x: np.ndarray, params: ConvParams) -> np.ndarray:
    """Same-size 3x3 stride-1 convolution with 1-pixel zero padding.

    out[o, y, x] = bias[o] + sum_{i,dy,dx} w[o,i,dy,dx] * in[i, y+dy-1, x+dx-1]
    """
    out_ch, in_ch, kh, kw = params.weights.shape
    if x.ndim != 3 or x.shape[0] != in_ch:
        raise ConfigError(f"input shape {x.shape} does not match {in_ch} input channels")
    _, h, w = x.shape
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(1, 2))
    cols = windows.transpose(0, 3, 4, 1, 2).reshape(in_ch * kh * kw, h * w)
    flat = params.weights.reshape(out_ch, in_ch * kh * kw) @ cols
    return flat.reshape(out_ch, h, w) + params.bias[:, None, None]


def prelu(x: np.ndarray, params: PReluParams) -> np.ndarray:
    """x where x >= 0, alpha_ch * x elsewhere."""
    if x.shape[0] != params.alpha.shape[0]:
        raise ConfigError(f"{x.shape[0]} channels vs {params.alpha.shape[0]} slopes")
    return np.where(x >= 0, x, params.alpha[:, None, None] * x)


def network_forward(model: ModelWeights, block: np.ndarray) -> np.ndarray:
    """Run one (h, w, 3) block in [0, 1] through the network.

    The tanh tail output is a residual added to the input, so an all-zero
    model returns the block unchanged.
    """
    x = np.ascontiguousarray(block.transpose(2, 0, 1), dtype=np.float64)
    h0 = prelu(conv2d(x, model.head_conv), model.head_prelu)
    r = h0
    for conv1, act, conv2 in model.blocks:
        r = r + conv2d(prelu(conv2d(r, conv1), act), conv2)
    g = conv2d(r, model.post_blocks_conv) + h0
    out = x + np.tanh(conv2d(g, model.tail_conv))
    if not np.isfinite(out).all():
        raise FormatError("non-finite network output (corrupt weights?)")
    return np.clip(out, 0.0, 1.0).transpose(1, 2, 0)


def select_model(qp_base: float, codec: str, version: AdaptVersion) -> ModelKey:
    """Pick the QP group for the initial base QP (first matching branch;
    the 37/42 boundary at 39.5 resolves to 37)."""
    if qp_base < 0:
        raise ConfigError(f"qp_base {qp_base} must be non-negative")
    if qp_base <= 24.5:
        group = 22
    elif qp_base <= 29.5:
        group = 27
    elif qp_base <= 34.5:
        group = 32
    elif qp_base <= 39.5:
        group = 37
    else:
        group = 42
    return ModelKey(codec, version, group)


def reconstruct_frame(frame: Frame, model: ModelWeights, sr_flag: bool,
                      block_size: int = 96, overlap: int = 4) -> Frame:
    """Restore one frame: RGB conversion at the frame's effective depth,
    per-block network passes on an overlapping grid, mean aggregation,
    then back to YCbCr at the full coding depth.

    When sr_flag is set the caller has already nearest-up-sampled the
    frame to target resolution; the pass itself is the same either way.
    """
    if frame.width < block_size or frame.height < block_size:
        raise ConfigError(
            f"frame {frame.width}x{frame.height} smaller than one "
            f"{block_size}x{block_size} block")
    rgb = to_rgb(frame)
    grid = plan_blocks(frame.width, frame.height, block_size, overlap)
    restored = [network_forward(model, blk) for blk in extract_blocks(rgb, grid)]
    merged = aggregate_blocks(restored, grid)
    template = video_io.make_template(frame.width, frame.height,
                                      frame.coding_bit_depth,
                                      chroma=frame.chroma_format)
    return from_rgb(merged, template)


def _write_record(fh, tag: int, array: np.ndarray) -> None:
    fh.write(struct.pack("<BB", tag, array.ndim))
    for dim in array.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def _model_records(model: ModelWeights):
    yield _TAG_CONV, model.head_conv.weights
    yield _TAG_CONV, model.head_conv.bias
    yield _TAG_PRELU, model.head_prelu.alpha
    for conv1, act, conv2 in model.blocks:
        yield _TAG_CONV, conv1.weights
        yield _TAG_CONV, conv1.bias
        yield _TAG_PRELU, act.alpha
        yield _TAG_CONV, conv2.weights
        yield _TAG_CONV, conv2.bias
    yield _TAG_CONV, model.post_blocks_conv.weights
    yield _TAG_CONV, model.post_blocks_conv.bias
    yield _TAG_CONV, model.tail_conv.weights
    yield _TAG_CONV, model.tail_conv.bias


def save_weights(bank: dict[ModelKey, ModelWeights], path: str | Path) -> None:
    """Serialize a model bank (see the format notes in load_weights)."""
    if not bank:
        raise ConfigError("refusing to write an empty model bank")
    with open(path, "wb") as fh:
        fh.write(WEIGHT_BANK_MAGIC)
        fh.write(struct.pack("<HH", WEIGHT_BANK_VERSION, len(bank)))
        for key, model in bank.items():
            model.validate()
            codec = key.codec.encode("utf-8")
            if len(codec) > 255:
                raise ConfigError("codec id longer than 255 bytes")
            fh.write(struct.pack("<B", len(codec)))
            fh.write(codec)
            fh.write(struct.pack("<BBHH", int(key.version), key.qp_group,
                                 model.spec.n_residual_blocks,
                                 model.spec.feature_maps))
            for tag, array in _model_records(model):
                _write_record(fh, tag, array)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"truncated weight bank: wanted {n} bytes at offset {self.pos}, "
                f"only {len(self.data) - self.pos} left")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _read_record(reader: _Reader, expect_tag: int,
                 expect_shape: tuple[int, ...]) -> np.ndarray:
    tag, rank = reader.unpack("<BB")
    if tag != expect_tag:
        raise FormatError(f"layer tag {tag} where {expect_tag} was expected")
    if rank != len(expect_shape):
        raise FormatError(f"rank {rank} where {len(expect_shape)} was expected")
    dims = tuple(reader.unpack("<" + "I" * rank)) if rank else ()
    if dims != expect_shape:
        raise FormatError(f"tensor shape {dims} != expected {expect_shape}")
    count = int(np.prod(dims)) if dims else 1
    payload = reader.take(4 * count)
    return np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float64)


def load_weights(path: str | Path) -> dict[ModelKey, ModelWeights]:
    """Load a weight bank.

    Layout (all little-endian): magic "VSB2", format version u16, model
    count u16; per model: codec id (u8 length + utf-8 bytes), adaptation
    version u8 (0=EBD, 1=SR_EBD), qp group u8, residual block count u16,
    feature map count u16, then one record per parameter tensor in fixed
    topology order (head conv weights/bias, head PReLU alpha, per block
    conv1 weights/bias, alpha, conv2 weights/bias, then post-blocks and
    tail conv weights/bias). A record is tag u8 (0=conv, 1=prelu), rank
    u8, dims u32 each, float32 payload row-major.
    """
    reader = _Reader(Path(path).read_bytes())
    if reader.take(4) != WEIGHT_BANK_MAGIC:
        raise FormatError("bad magic: not a weight bank file")
    version, count = reader.unpack("<HH")
    if version != WEIGHT_BANK_VERSION:
        raise FormatError(f"unsupported weight bank version {version}")
    bank: dict[ModelKey, ModelWeights] = {}
    for _ in range(count):
        (codec_len,) = reader.unpack("<B")
        codec = reader.take(codec_len).decode("utf-8")
        raw_version, qp_group, n_blocks, features = reader.unpack("<BBHH")
        try:
            key = ModelKey(codec, AdaptVersion(raw_version), qp_group)
        except ValueError as exc:
            raise FormatError(f"bad adaptation version byte {raw_version}") from exc
        spec = NetworkSpec(n_residual_blocks=n_blocks, feature_maps=features)
        f, io = spec.feature_maps, spec.io_channels

        def conv(out_ch, in_ch):
            return ConvParams(
                _read_record(reader, _TAG_CONV, (out_ch, in_ch, 3, 3)),
                _read_record(reader, _TAG_CONV, (out_ch,)))

        head = conv(f, io)
        head_act = PReluParams(_read_record(reader, _TAG_PRELU, (f,)))
        blocks = []
        for _ in range(n_blocks):
            c1 = conv(f, f)
            act = PReluParams(_read_record(reader, _TAG_PRELU, (f,)))
            c2 = conv(f, f)
            blocks.append((c1, act, c2))
        post = conv(f, f)
        tail = conv(io, f)
        model = ModelWeights(spec, head, head_act, blocks, post, tail)
        model.validate()
        bank[key] = model
    if reader.pos != len(reader.data):
        raise FormatError(f"{len(reader.data) - reader.pos} trailing bytes after last model")
    return bank
