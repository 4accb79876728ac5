"""Spatial 2x down/up-sampling and effective-bit-depth shifting.

Down-sampling uses a separable Lanczos3 kernel stretched by the scale
factor (cutoff halved) so it anti-aliases: 12 source taps per output
sample. Up-sampling uses the plain 6-tap Lanczos3 kernel, two phases.
Filtering runs in float, horizontal then vertical, with edge replication;
integer results are rounded half-up and clipped to the effective sample
range.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .video_io import Frame, round_half_up


@dataclass(frozen=True)
class FilterKernel:
    taps: np.ndarray
    support: float
    scale: tuple[int, int]

    def __post_init__(self):
        if abs(float(self.taps.sum()) - 1.0) > 1e-9:
            raise ConfigError("kernel taps must sum to 1 after normalization")


def lanczos3(x: np.ndarray) -> np.ndarray:
    """Lanczos3 window: sinc(x) * sinc(x/3) on |x| < 3, zero outside."""
    x = np.asarray(x, dtype=np.float64)
    out = np.sinc(x) * np.sinc(x / 3.0)
    return np.where(np.abs(x) < 3.0, out, 0.0)


def _normalize(taps: np.ndarray) -> np.ndarray:
    return taps / taps.sum()


# Output sample o of a 2x decimation sits at source coordinate 2o + 0.5, so
# every output uses the same 12 offsets -5.5..+5.5. Stretching by 2 keeps
# |offset/2| < 3 for all of them.
DOWN2_OFFSETS = np.arange(-5.5, 6.0, 1.0)
DOWN2_TAPS = _normalize(lanczos3(DOWN2_OFFSETS / 2.0))

# Output sample o of a 2x interpolation sits at source coordinate
# o/2 - 0.25: even outputs need offsets -2.75..+2.25, odd ones the mirror.
UP2_EVEN_OFFSETS = np.arange(-2.75, 2.5, 1.0)
UP2_ODD_OFFSETS = np.arange(-2.25, 3.0, 1.0)
UP2_EVEN_TAPS = _normalize(lanczos3(UP2_EVEN_OFFSETS))
UP2_ODD_TAPS = _normalize(lanczos3(UP2_ODD_OFFSETS))

downsample2_kernel = FilterKernel(DOWN2_TAPS, support=6.0, scale=(1, 2))
upsample2_kernel = FilterKernel(UP2_EVEN_TAPS, support=3.0, scale=(2, 1))


def downsample_axis_2x(plane: np.ndarray) -> np.ndarray:
    """Halve the last axis of a float plane with the anti-aliased kernel."""
    w = plane.shape[-1]
    if w % 2:
        raise ConfigError(f"axis length {w} is odd; 2x decimation needs even input")
    padded = np.pad(plane, [(0, 0)] * (plane.ndim - 1) + [(5, 6)], mode="edge")
    out = np.zeros(plane.shape[:-1] + (w // 2,), dtype=np.float64)
    for t, k in enumerate(DOWN2_TAPS):
        out += k * padded[..., t:t + w:2]
    return out


def upsample_axis_2x(plane: np.ndarray) -> np.ndarray:
    """Double the last axis of a float plane with the 6-tap Lanczos3 kernel."""
    w = plane.shape[-1]
    padded = np.pad(plane, [(0, 0)] * (plane.ndim - 1) + [(3, 3)], mode="edge")
    out = np.zeros(plane.shape[:-1] + (w * 2,), dtype=np.float64)
    for t, k in enumerate(UP2_EVEN_TAPS):
        out[..., 0::2] += k * padded[..., t:t + w]
    for t, k in enumerate(UP2_ODD_TAPS):
        out[..., 1::2] += k * padded[..., t + 1:t + 1 + w]
    return out


def downsample_plane_2x(plane: np.ndarray) -> np.ndarray:
    """Separable 2x decimation, horizontal pass then vertical, in float."""
    horiz = downsample_axis_2x(np.asarray(plane, dtype=np.float64))
    return downsample_axis_2x(horiz.T).T


def upsample_plane_2x(plane: np.ndarray) -> np.ndarray:
    horiz = upsample_axis_2x(np.asarray(plane, dtype=np.float64))
    return upsample_axis_2x(horiz.T).T


def _quantize(plane: np.ndarray, bit_depth: int) -> np.ndarray:
    maxval = (1 << bit_depth) - 1
    return np.clip(round_half_up(plane), 0, maxval).astype(np.uint16)


def lanczos3_downsample_2x(frame: Frame) -> Frame:
    """Halve both frame dimensions (every plane at its own resolution)."""
    for p in frame.planes:
        if p.shape[0] % 2 or p.shape[1] % 2:
            raise ConfigError(f"plane {p.shape} has odd dimensions; cannot halve")
    planes = tuple(_quantize(downsample_plane_2x(p), frame.effective_bit_depth)
                   for p in frame.planes)
    return replace(frame, width=frame.width // 2, height=frame.height // 2,
                   planes=planes)


def lanczos3_upsample_2x(frame: Frame) -> Frame:
    """Double both frame dimensions (the non-CNN reconstruction path)."""
    planes = tuple(_quantize(upsample_plane_2x(p), frame.effective_bit_depth)
                   for p in frame.planes)
    return replace(frame, width=frame.width * 2, height=frame.height * 2,
                   planes=planes)


def nearest_upsample_2x(frame: Frame) -> Frame:
    """Replicate each sample into a 2x2 block (pre-CNN up-sampling)."""
    planes = tuple(np.repeat(np.repeat(p, 2, axis=0), 2, axis=1)
                   for p in frame.planes)
    return replace(frame, width=frame.width * 2, height=frame.height * 2,
                   planes=planes)


def ebd_downshift(frame: Frame, bits: int = 1) -> Frame:
    """Right-shift every sample, lowering the effective bit depth."""
    if bits < 1:
        raise ConfigError("shift must be at least 1 bit")
    if frame.effective_bit_depth - bits < 1:
        raise ConfigError(
            f"shifting {bits} bits would reduce effective bit depth "
            f"{frame.effective_bit_depth} below 1"
        )
    planes = tuple((p >> bits).astype(np.uint16) for p in frame.planes)
    return replace(frame, effective_bit_depth=frame.effective_bit_depth - bits,
                   planes=planes)


def ebd_upshift(frame: Frame, bits: int = 1) -> Frame:
    """Left-shift every sample, restoring the effective bit depth.

    Samples saturate at the coding range ceiling; lossy hosts can emit
    values slightly above the declared effective range.
    """
    if bits < 1:
        raise ConfigError("shift must be at least 1 bit")
    if frame.effective_bit_depth + bits > frame.coding_bit_depth:
        raise ConfigError(
            f"shifting {bits} bits would push effective bit depth past the "
            f"coding bit depth {frame.coding_bit_depth}"
        )
    ceiling = (1 << frame.coding_bit_depth) - 1
    planes = tuple(np.minimum(p.astype(np.uint32) << bits, ceiling).astype(np.uint16)
                   for p in frame.planes)
    return replace(frame, effective_bit_depth=frame.effective_bit_depth + bits,
                   planes=planes)
