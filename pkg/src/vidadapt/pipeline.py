"""End-to-end encode/decode orchestration around a host codec.

The host encoder/decoder is driven through shell command templates on raw
planar files, so any standard codec binary can slot in. Each output
segment carries a small binary header (resolution-adaptation flag,
original geometry, frame count, frame rate, coding depth, payload size)
in front of the host bitstream.
"""
from __future__ import annotations

import math
import shlex
import struct
import subprocess
import tempfile
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path

from .errors import AdapterError, ConfigError, FormatError
from .cnn import AdaptVersion, ModelKey, ModelWeights, reconstruct_frame, select_model
from .qro import MlpModel, decide_sr, gop_features
from .resampler import (ebd_downshift, ebd_upshift, lanczos3_downsample_2x,
                        lanczos3_upsample_2x, nearest_upsample_2x)
from .video_io import ChromaFormat, VideoSequence, read_raw_video, write_raw_video

SEGMENT_MAGIC = b"VSG2"
_HEADER_STRUCT = struct.Struct("<4sBIIIIIBQ")

QP_OFFSET_EBD_ONLY = -6.0
QP_OFFSET_SR_EBD = -12.0
DEFAULT_QP_RANGE = (0.0, 63.0)

PLACEHOLDERS = ("{input}", "{output}", "{qp}", "{width}", "{height}", "{fps}", "{bitdepth}")


class AdaptationMode(Enum):
    EBD_ONLY = "ebd"
    SR_EBD = "sr-ebd"


@dataclass
class SegmentHeader:
    sr_flag: bool
    width: int                 # original (pre-adaptation) resolution
    height: int
    frame_count: int
    frame_rate_num: int
    frame_rate_den: int
    coding_bit_depth: int
    payload_length: int

    SIZE = _HEADER_STRUCT.size

    def pack(self) -> bytes:
        return _HEADER_STRUCT.pack(SEGMENT_MAGIC, 1 if self.sr_flag else 0,
                                   self.width, self.height, self.frame_count,
                                   self.frame_rate_num, self.frame_rate_den,
                                   self.coding_bit_depth, self.payload_length)

    @classmethod
    def parse(cls, data: bytes, offset: int = 0) -> "SegmentHeader":
        if offset + cls.SIZE > len(data):
            raise FormatError(
                f"stream ends inside a segment header at offset {offset}")
        magic, flags, w, h, n, num, den, cbd, plen = _HEADER_STRUCT.unpack_from(data, offset)
        if magic != SEGMENT_MAGIC:
            raise FormatError(f"bad segment magic at offset {offset}")
        if flags & 0xFE:
            raise FormatError(f"reserved header flag bits set ({flags:#x})")
        if den == 0:
            raise FormatError("zero frame-rate denominator")
        return cls(bool(flags & 1), w, h, n, num, den, cbd, plen)

    @property
    def frame_rate(self) -> float:
        return self.frame_rate_num / self.frame_rate_den


@dataclass
class CodecAdapter:
    """Host codec bound via command templates over raw-video files.

    Both templates must use each of {input} {output} {qp} {width} {height}
    {fps} {bitdepth} exactly once; literal braces must be doubled.
    """

    encode_command_template: str
    decode_command_template: str
    codec_id: str

    def __post_init__(self):
        for name, template in (("encode", self.encode_command_template),
                               ("decode", self.decode_command_template)):
            for ph in PLACEHOLDERS:
                n = template.count(ph)
                if n != 1:
                    raise ConfigError(
                        f"{name} template uses {ph} {n} times (need exactly once)")


def _format_number(value: float) -> str:
    return f"{value:g}"


def run_adapter_command(template: str, **params) -> None:
    tokens = shlex.split(template)
    cmd = [t.format(**params) for t in tokens]
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True)
    except FileNotFoundError as exc:
        raise AdapterError(f"adapter executable not found: {cmd[0]}") from exc
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout or "").strip()[-500:]
        raise AdapterError(
            f"adapter command exited {proc.returncode}: {' '.join(cmd[:3])}...: {tail}")


def apply_qp_offset(qp_base: float, mode: AdaptationMode,
                    qp_range: tuple[float, float] = DEFAULT_QP_RANGE) -> float:
    """Fixed host-QP offset: -6 for bit-depth-only adaptation, -12 when
    spatial adaptation is on too; clamped to the host's legal range."""
    offset = QP_OFFSET_SR_EBD if mode is AdaptationMode.SR_EBD else QP_OFFSET_EBD_ONLY
    return min(max(qp_base + offset, qp_range[0]), qp_range[1])


@dataclass
class Segment:
    start: int
    length: int
    sr_flag: bool


def segment_sequence(decisions: list[bool], gop_len: int, frame_rate: float,
                     total_frames: int | None = None) -> list[Segment]:
    """Merge per-GOP decisions into segments of at least one second.

    Equal adjacent decisions coalesce; any run shorter than one second is
    absorbed into the preceding segment (the first run instead absorbs
    forward), and a short final remainder merges backward. The flag of the
    run that started a segment wins.
    """
    if not decisions:
        raise ConfigError("no GOP decisions to segment")
    if gop_len < 1 or frame_rate <= 0:
        raise ConfigError("gop length and frame rate must be positive")
    if total_frames is None:
        total_frames = len(decisions) * gop_len
    if not (gop_len * (len(decisions) - 1) < total_frames <= gop_len * len(decisions)):
        raise ConfigError(
            f"{total_frames} frames inconsistent with {len(decisions)} GOPs of {gop_len}")
    min_len = math.ceil(frame_rate)

    gop_lengths = [min(gop_len, total_frames - i * gop_len) for i in range(len(decisions))]
    runs: list[Segment] = []
    for flag, length in zip(decisions, gop_lengths):
        if runs and runs[-1].sr_flag == flag:
            runs[-1].length += length
        else:
            runs.append(Segment(sum(g.length for g in runs), length, flag))

    merged: list[Segment] = []
    for run in runs:
        if merged and (run.length < min_len or merged[-1].length < min_len):
            merged[-1].length += run.length
        else:
            merged.append(run)
    if len(merged) >= 2 and merged[-1].length < min_len:
        merged[-2].length += merged[-1].length
        merged.pop()

    out: list[Segment] = []
    for seg in merged:
        if out and out[-1].sr_flag == seg.sr_flag:
            out[-1].length += seg.length
        else:
            out.append(seg)
    return out


def _frame_rate_fraction(fps: float) -> Fraction:
    return Fraction(fps).limit_denominator(1_000_000)


@dataclass
class EncodeResult:
    stream: bytes
    segments: list[dict]
    gops: list[dict]


def encode_video(video: VideoSequence, qp_base: float, adapter: CodecAdapter,
                 qro_model: MlpModel | None = None, gop_len: int = 16,
                 force_mode: AdaptationMode | None = None,
                 workdir: str | Path | None = None,
                 qp_range: tuple[float, float] = DEFAULT_QP_RANGE) -> EncodeResult:
    """Adapt, encode and containerize a sequence.

    Per segment: spatially down-sample when the segment's flag is set,
    always shift the effective bit depth down by one, encode the raw
    frames through the host adapter at the offset QP, and emit a segment
    header followed by the host bitstream.
    """
    if not video.frames:
        raise ConfigError("empty input sequence")
    video.validate()
    first = video.frames[0]
    n_frames = len(video.frames)
    n_gops = math.ceil(n_frames / gop_len)

    gop_logs: list[dict] = []
    decisions: list[bool] = []
    if force_mode is not None:
        for g in range(n_gops):
            decisions.append(force_mode is AdaptationMode.SR_EBD)
            gop_logs.append({"gop": g, "forced": True, "sr": decisions[-1]})
    else:
        if qro_model is None:
            raise ConfigError("automatic mode needs a decision-network model")
        for g in range(n_gops):
            start = g * gop_len
            length = min(gop_len, n_frames - start)
            feats = gop_features(video, start, length, qp_base)
            sr = decide_sr(qro_model, feats)
            decisions.append(sr)
            gop_logs.append({"gop": g, "forced": False, "sr": sr,
                             "srqm": feats.srqm_mean, "ti": feats.ti_mean,
                             "qp_base": feats.qp_base})

    segments = segment_sequence(decisions, gop_len, video.frame_rate, n_frames)
    fps_frac = _frame_rate_fraction(video.frame_rate)

    stream = bytearray()
    seg_logs: list[dict] = []
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        tmpdir = Path(tmp)
        for idx, seg in enumerate(segments):
            mode = AdaptationMode.SR_EBD if seg.sr_flag else AdaptationMode.EBD_ONLY
            frames = video.frames[seg.start:seg.start + seg.length]
            if seg.sr_flag:
                frames = [lanczos3_downsample_2x(f) for f in frames]
            frames = [ebd_downshift(f, 1) for f in frames]
            qp = apply_qp_offset(qp_base, mode, qp_range)

            raw_path = tmpdir / f"seg{idx}.yuv"
            bits_path = tmpdir / f"seg{idx}.bin"
            coded = VideoSequence(frames, video.frame_rate)
            write_raw_video(coded, raw_path)
            run_adapter_command(
                adapter.encode_command_template,
                input=str(raw_path), output=str(bits_path),
                qp=_format_number(qp),
                width=frames[0].width, height=frames[0].height,
                fps=_format_number(video.frame_rate),
                bitdepth=first.coding_bit_depth)
            if not bits_path.exists():
                raise AdapterError(f"encoder produced no output for segment {idx}")
            payload = bits_path.read_bytes()

            header = SegmentHeader(
                sr_flag=seg.sr_flag, width=first.width, height=first.height,
                frame_count=seg.length, frame_rate_num=fps_frac.numerator,
                frame_rate_den=fps_frac.denominator,
                coding_bit_depth=first.coding_bit_depth,
                payload_length=len(payload))
            stream += header.pack()
            stream += payload
            seg_logs.append({
                "segment": idx, "start": seg.start, "frames": seg.length,
                "sr_flag": seg.sr_flag, "mode": mode.value,
                "qp_base": qp_base,
                "qp_offset": qp - qp_base, "qp": qp,
                "payload_bytes": len(payload),
            })
    return EncodeResult(bytes(stream), seg_logs, gop_logs)


@dataclass
class DecodeResult:
    video: VideoSequence
    segments: list[dict]


def decode_video(stream: bytes, adapter: CodecAdapter,
                 weights: dict[ModelKey, ModelWeights] | None = None,
                 qp_base: float | None = None, cnn_enabled: bool = True,
                 pre_cnn_upsample: str = "nearest",
                 workdir: str | Path | None = None,
                 qp_range: tuple[float, float] = DEFAULT_QP_RANGE) -> DecodeResult:
    """Parse segments, run the host decoder, and restore resolution/depth.

    With the network enabled, spatially adapted segments are nearest-up-
    sampled and every segment goes through the QP-matched model; otherwise
    the fallback is Lanczos3 up-sampling (when spatially adapted) plus a
    one-bit left shift.
    """
    if cnn_enabled:
        if weights is None or qp_base is None:
            raise ConfigError("network decoding needs a weight bank and the base QP")
    if pre_cnn_upsample not in ("nearest", "lanczos3"):
        raise ConfigError(f"unknown pre-network up-sampling {pre_cnn_upsample!r}")

    frames = []
    seg_logs: list[dict] = []
    frame_rate = None
    offset = 0
    index = 0
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        tmpdir = Path(tmp)
        while offset < len(stream):
            header = SegmentHeader.parse(stream, offset)
            offset += SegmentHeader.SIZE
            if offset + header.payload_length > len(stream):
                raise FormatError(
                    f"segment {index}: payload truncated "
                    f"({len(stream) - offset} of {header.payload_length} bytes)")
            payload = stream[offset:offset + header.payload_length]
            offset += header.payload_length
            frame_rate = header.frame_rate

            coded_w = header.width // 2 if header.sr_flag else header.width
            coded_h = header.height // 2 if header.sr_flag else header.height
            mode = AdaptationMode.SR_EBD if header.sr_flag else AdaptationMode.EBD_ONLY

            bits_path = tmpdir / f"seg{index}.bin"
            raw_path = tmpdir / f"seg{index}.yuv"
            bits_path.write_bytes(payload)
            qp_for_cmd = apply_qp_offset(qp_base, mode, qp_range) if qp_base is not None else 0
            run_adapter_command(
                adapter.decode_command_template,
                input=str(bits_path), output=str(raw_path),
                qp=_format_number(qp_for_cmd),
                width=coded_w, height=coded_h,
                fps=_format_number(header.frame_rate),
                bitdepth=header.coding_bit_depth)
            if not raw_path.exists():
                raise AdapterError(f"decoder produced no output for segment {index}")
            decoded = read_raw_video(raw_path, coded_w, coded_h,
                                     header.coding_bit_depth, ChromaFormat.C420,
                                     header.frame_rate)
            if len(decoded) != header.frame_count:
                raise FormatError(
                    f"segment {index}: decoder returned {len(decoded)} frames, "
                    f"header says {header.frame_count}")
            # Host payload carries EBD-reduced samples at full coding depth.
            shifted = [replace(f, effective_bit_depth=header.coding_bit_depth - 1)
                       for f in decoded.frames]

            log: dict = {"segment": index, "frames": header.frame_count,
                         "sr_flag": header.sr_flag}
            if cnn_enabled:
                version = AdaptVersion.SR_EBD if header.sr_flag else AdaptVersion.EBD
                key = select_model(qp_base, adapter.codec_id, version)
                if key not in weights:
                    raise ConfigError(
                        f"weight bank has no model for codec={key.codec} "
                        f"version={key.version.name} qp_group={key.qp_group}")
                model = weights[key]
                restored = []
                for f in shifted:
                    if header.sr_flag:
                        f = (nearest_upsample_2x(f) if pre_cnn_upsample == "nearest"
                             else lanczos3_upsample_2x(f))
                    restored.append(reconstruct_frame(f, model, header.sr_flag))
                log["method"] = "cnn"
                log["model"] = {"codec": key.codec, "version": key.version.name,
                                "qp_group": key.qp_group}
                log["pre_upsample"] = pre_cnn_upsample if header.sr_flag else None
            else:
                restored = []
                for f in shifted:
                    f = ebd_upshift(f, 1)
                    if header.sr_flag:
                        f = lanczos3_upsample_2x(f)
                    restored.append(f)
                log["method"] = "Lanczos3 + left shift"
            frames.extend(restored)
            seg_logs.append(log)
            index += 1
    if not seg_logs:
        raise FormatError("empty stream: no segments found")
    return DecodeResult(VideoSequence(frames, frame_rate), seg_logs)
