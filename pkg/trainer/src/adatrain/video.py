"""Raw-video plumbing for dataset preparation.

Self-contained mirror of the coding-side conventions: planar YCbCr 4:2:0
files (2 bytes little-endian above 8 bits), BT.709 limited-range RGB
conversion with co-sited bilinear chroma up-sampling, the stretched/plain
Lanczos3 resamplers, nearest-neighbour up-sampling, and bit shifts.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

KR, KB = 0.2126, 0.0722
KG = 1.0 - KR - KB


@dataclass
class Clip:
    """One 4:2:0 sequence: luma (n, h, w) and chroma (n, h/2, w/2) arrays."""

    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray
    bit_depth: int
    effective_bits: int
    fps: float = 30.0

    @property
    def frame_count(self) -> int:
        return self.y.shape[0]

    @property
    def height(self) -> int:
        return self.y.shape[1]

    @property
    def width(self) -> int:
        return self.y.shape[2]


def read_clip(path: str | Path, width: int, height: int, bit_depth: int,
              fps: float = 30.0) -> Clip:
    bps = 1 if bit_depth <= 8 else 2
    dtype = np.dtype("<u2") if bps == 2 else np.dtype("u1")
    data = np.frombuffer(Path(path).read_bytes(), dtype=dtype)
    yc, cc = width * height, (width // 2) * (height // 2)
    per_frame = yc + 2 * cc
    if data.size == 0 or data.size % per_frame:
        raise ValueError(f"{path}: size does not divide into {per_frame}-sample frames")
    n = data.size // per_frame
    frames = data.reshape(n, per_frame)
    y = frames[:, :yc].reshape(n, height, width).astype(np.uint16)
    cb = frames[:, yc:yc + cc].reshape(n, height // 2, width // 2).astype(np.uint16)
    cr = frames[:, yc + cc:].reshape(n, height // 2, width // 2).astype(np.uint16)
    return Clip(y, cb, cr, bit_depth, bit_depth, fps)


def write_clip(clip: Clip, path: str | Path) -> None:
    bps = 1 if clip.bit_depth <= 8 else 2
    dtype = np.dtype("<u2") if bps == 2 else np.dtype("u1")
    with open(path, "wb") as fh:
        for i in range(clip.frame_count):
            for plane in (clip.y[i], clip.cb[i], clip.cr[i]):
                fh.write(np.ascontiguousarray(plane, dtype=dtype).tobytes())


def shift_down(clip: Clip, bits: int = 1) -> Clip:
    return replace(clip, y=(clip.y >> bits).astype(np.uint16),
                   cb=(clip.cb >> bits).astype(np.uint16),
                   cr=(clip.cr >> bits).astype(np.uint16),
                   effective_bits=clip.effective_bits - bits)


def shift_up(clip: Clip, bits: int = 1) -> Clip:
    top = (1 << clip.bit_depth) - 1

    def up(p):
        return np.minimum(p.astype(np.uint32) << bits, top).astype(np.uint16)

    return replace(clip, y=up(clip.y), cb=up(clip.cb), cr=up(clip.cr),
                   effective_bits=clip.effective_bits + bits)


def _lanczos3(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < 3.0, np.sinc(x) * np.sinc(x / 3.0), 0.0)


def _norm(t: np.ndarray) -> np.ndarray:
    return t / t.sum()

_DOWN_TAPS = _norm(_lanczos3(np.arange(-5.5, 6.0, 1.0) / 2.0))
_UP_EVEN = _norm(_lanczos3(np.arange(-2.75, 2.5, 1.0)))
_UP_ODD = _norm(_lanczos3(np.arange(-2.25, 3.0, 1.0)))


def _down_axis(plane: np.ndarray) -> np.ndarray:
    w = plane.shape[-1]
    padded = np.pad(plane, [(0, 0)] * (plane.ndim - 1) + [(5, 6)], mode="edge")
    out = np.zeros(plane.shape[:-1] + (w // 2,))
    for t, k in enumerate(_DOWN_TAPS):
        out += k * padded[..., t:t + w:2]
    return out


def _up_axis(plane: np.ndarray) -> np.ndarray:
    w = plane.shape[-1]
    padded = np.pad(plane, [(0, 0)] * (plane.ndim - 1) + [(3, 3)], mode="edge")
    out = np.zeros(plane.shape[:-1] + (w * 2,))
    for t, k in enumerate(_UP_EVEN):
        out[..., 0::2] += k * padded[..., t:t + w]
    for t, k in enumerate(_UP_ODD):
        out[..., 1::2] += k * padded[..., t + 1:t + 1 + w]
    return out


def _quantize(plane: np.ndarray, bits: int) -> np.ndarray:
    return np.clip(np.floor(plane + 0.5), 0, (1 << bits) - 1).astype(np.uint16)


def _resample_planes(planes: np.ndarray, axis_fn, bits: int) -> np.ndarray:
    out = axis_fn(planes.astype(np.float64))
    out = axis_fn(out.transpose(0, 2, 1)).transpose(0, 2, 1)
    return _quantize(out, bits)


def lanczos_down2(clip: Clip) -> Clip:
    b = clip.effective_bits
    return replace(clip, y=_resample_planes(clip.y, _down_axis, b),
                   cb=_resample_planes(clip.cb, _down_axis, b),
                   cr=_resample_planes(clip.cr, _down_axis, b))


def lanczos_up2(clip: Clip) -> Clip:
    b = clip.effective_bits
    return replace(clip, y=_resample_planes(clip.y, _up_axis, b),
                   cb=_resample_planes(clip.cb, _up_axis, b),
                   cr=_resample_planes(clip.cr, _up_axis, b))


def nearest_up2(clip: Clip) -> Clip:
    def rep(p):
        return np.repeat(np.repeat(p, 2, axis=1), 2, axis=2)

    return replace(clip, y=rep(clip.y), cb=rep(clip.cb), cr=rep(clip.cr))


def _chroma_to_full(plane: np.ndarray) -> np.ndarray:
    n, hc, wc = plane.shape
    horiz = np.empty((n, hc, wc * 2))
    horiz[:, :, 0::2] = plane
    right = plane[:, :, list(range(1, wc)) + [wc - 1]]
    horiz[:, :, 1::2] = (plane + right) / 2.0
    full = np.empty((n, hc * 2, wc * 2))
    full[:, 0::2, :] = horiz
    below = horiz[:, list(range(1, hc)) + [hc - 1], :]
    full[:, 1::2, :] = (horiz + below) / 2.0
    return full


def clip_to_rgb(clip: Clip) -> np.ndarray:
    """All frames to (n, h, w, 3) RGB in [0, 1] at the clip's effective depth."""
    s = 2.0 ** (clip.effective_bits - 8)
    y = (clip.y.astype(np.float64) - 16.0 * s) / (219.0 * s)
    cb = (_chroma_to_full(clip.cb.astype(np.float64)) - 128.0 * s) / (224.0 * s)
    cr = (_chroma_to_full(clip.cr.astype(np.float64)) - 128.0 * s) / (224.0 * s)
    r = y + 2.0 * (1.0 - KR) * cr
    b = y + 2.0 * (1.0 - KB) * cb
    g = (y - KR * r - KB * b) / KG
    return np.clip(np.stack([r, g, b], axis=-1), 0.0, 1.0)


def rgb_to_luma_codes(rgb: np.ndarray, bits: int) -> np.ndarray:
    """Luma code values of RGB frames/blocks at the given depth (half-up)."""
    rgb = np.clip(rgb, 0.0, 1.0)
    y = KR * rgb[..., 0] + KG * rgb[..., 1] + KB * rgb[..., 2]
    s = 2.0 ** (bits - 8)
    return np.clip(np.floor(16.0 * s + y * 219.0 * s + 0.5),
                   0, (1 << bits) - 1).astype(np.uint16)
