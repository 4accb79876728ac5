"""Raw planar video I/O, YCbCr<->RGB conversion, and block tiling.

Frames are planar YCbCr with an explicit coding bit depth (the container
depth, constant through a pipeline run) and an effective bit depth (the
number of low-order bits actually carrying signal). RGB images and blocks
are plain float arrays of shape (h, w, 3) with values in [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError

# BT.709 luma coefficients; limited-range quantization follows the usual
# 219/224 excursions anchored at 16/128 (scaled by 2^(bd-8)).
KR = 0.2126
KB = 0.0722
KG = 1.0 - KR - KB


class ChromaFormat(Enum):
    C420 = "420"
    C444 = "444"


@dataclass
class Frame:
    """One planar YCbCr picture.

    planes is (y, cb, cr); luma is height x width, chroma is half size per
    axis for C420 and full size for C444. Samples are unsigned integers
    below 2^coding_bit_depth; after an EBD down-shift they occupy only the
    low effective_bit_depth bits.
    """

    width: int
    height: int
    coding_bit_depth: int
    effective_bit_depth: int
    chroma_format: ChromaFormat
    planes: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def luma(self) -> np.ndarray:
        return self.planes[0]

    def chroma_dims(self) -> tuple[int, int]:
        if self.chroma_format is ChromaFormat.C420:
            return self.width // 2, self.height // 2
        return self.width, self.height

    def validate(self, check_ebd: bool = True) -> None:
        if not (8 <= self.coding_bit_depth <= 16):
            raise ConfigError(f"coding bit depth {self.coding_bit_depth} outside 8..16")
        if not (1 <= self.effective_bit_depth <= self.coding_bit_depth):
            raise ConfigError(
                f"effective bit depth {self.effective_bit_depth} must be in "
                f"1..{self.coding_bit_depth}"
            )
        if self.chroma_format is ChromaFormat.C420 and (self.width % 2 or self.height % 2):
            raise ConfigError("C420 frames need even width and height")
        y, cb, cr = self.planes
        cw, ch = self.chroma_dims()
        if y.shape != (self.height, self.width):
            raise ConfigError(f"luma shape {y.shape} != {(self.height, self.width)}")
        for name, p in (("cb", cb), ("cr", cr)):
            if p.shape != (ch, cw):
                raise ConfigError(f"{name} shape {p.shape} != {(ch, cw)}")
        limit = 1 << (self.effective_bit_depth if check_ebd else self.coding_bit_depth)
        for p in self.planes:
            if p.size and int(p.max()) >= limit:
                raise FormatError(
                    f"sample {int(p.max())} exceeds {limit - 1} for bit depth "
                    f"{self.effective_bit_depth if check_ebd else self.coding_bit_depth}"
                )

    def copy(self) -> "Frame":
        return replace(self, planes=tuple(p.copy() for p in self.planes))


@dataclass
class VideoSequence:
    frames: list[Frame] = field(default_factory=list)
    frame_rate: float = 30.0

    def validate(self) -> None:
        if not self.frames:
            return
        f0 = self.frames[0]
        for f in self.frames:
            if (f.width, f.height, f.coding_bit_depth, f.effective_bit_depth,
                    f.chroma_format) != (f0.width, f0.height, f0.coding_bit_depth,
                                         f0.effective_bit_depth, f0.chroma_format):
                raise ConfigError("all frames in a sequence must share geometry and depths")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class BlockGrid:
    """Tiling plan: square windows of block_size stepping by block_size - overlap,
    with the final row/column clamped flush against the frame border."""

    block_size: int
    overlap: int
    origins: list[tuple[int, int]]
    frame_width: int
    frame_height: int


def _axis_origins(dimension: int, block_size: int, step: int) -> list[int]:
    origins = []
    pos = 0
    while True:
        if pos + block_size >= dimension:
            origins.append(dimension - block_size)
            return origins
        origins.append(pos)
        pos += step


def plan_blocks(width: int, height: int, block_size: int = 96, overlap: int = 4) -> BlockGrid:
    """Plan overlapping square blocks covering a width x height image."""
    if block_size > width or block_size > height:
        raise ConfigError(f"frame {width}x{height} smaller than block {block_size}")
    if not (0 <= overlap < block_size):
        raise ConfigError(f"overlap {overlap} must satisfy 0 <= overlap < {block_size}")
    step = block_size - overlap
    xs = _axis_origins(width, block_size, step)
    ys = _axis_origins(height, block_size, step)
    origins = [(x, y) for y in ys for x in xs]
    return BlockGrid(block_size, overlap, origins, width, height)


def extract_blocks(image: np.ndarray, grid: BlockGrid) -> list[np.ndarray]:
    if image.shape[:2] != (grid.frame_height, grid.frame_width):
        raise ConfigError(f"image shape {image.shape[:2]} does not match grid")
    b = grid.block_size
    return [image[y:y + b, x:x + b].copy() for x, y in grid.origins]


def aggregate_blocks(blocks: list[np.ndarray], grid: BlockGrid) -> np.ndarray:
    """Reassemble blocks; overlapping pixels get the arithmetic mean.

    The mean is computed as first_value + sum(deltas)/count so that pixels
    where every covering block agrees come back bit-exact (a plain
    sum/count divide is not exact for odd cover counts).
    """
    if len(blocks) != len(grid.origins):
        raise ConfigError(f"{len(blocks)} blocks for {len(grid.origins)} grid origins")
    b = grid.block_size
    tail_shape = blocks[0].shape[2:]
    first = np.zeros((grid.frame_height, grid.frame_width) + tail_shape)
    delta = np.zeros_like(first)
    count = np.zeros((grid.frame_height, grid.frame_width) + (1,) * len(tail_shape))
    for blk, (x, y) in zip(blocks, grid.origins):
        if blk.shape[:2] != (b, b):
            raise ConfigError(f"block shape {blk.shape[:2]} != ({b}, {b})")
        window = (slice(y, y + b), slice(x, x + b))
        seen = count[window] > 0
        first[window] = np.where(seen, first[window], blk)
        delta[window] += np.where(seen, blk - first[window], 0.0)
        count[window] += 1
    return first + delta / count


def _frame_geometry(width: int, height: int, chroma: ChromaFormat) -> tuple[int, int]:
    if chroma is ChromaFormat.C420:
        if width % 2 or height % 2:
            raise ConfigError("C420 requires even frame dimensions")
        return width // 2, height // 2
    return width, height


def read_raw_video(path: str | Path, width: int, height: int, bit_depth: int,
                   chroma: ChromaFormat = ChromaFormat.C420,
                   frame_rate: float = 30.0) -> VideoSequence:
    """Read planar Y, Cb, Cr (row-major); 2 bytes little-endian per sample
    above 8 bits, 1 byte otherwise."""
    cw, ch = _frame_geometry(width, height, chroma)
    bps = 1 if bit_depth <= 8 else 2
    y_count = width * height
    c_count = cw * ch
    frame_bytes = (y_count + 2 * c_count) * bps
    data = Path(path).read_bytes()
    if len(data) == 0 or len(data) % frame_bytes:
        raise FormatError(
            f"truncated file: {len(data)} bytes is not a multiple of the "
            f"{frame_bytes}-byte frame size"
        )
    dtype = np.dtype("<u2") if bps == 2 else np.dtype("u1")
    samples = np.frombuffer(data, dtype=dtype)
    maxval = (1 << bit_depth) - 1
    if int(samples.max()) > maxval:
        raise FormatError(f"sample {int(samples.max())} exceeds {maxval} (corrupt input)")
    per_frame = y_count + 2 * c_count
    frames = []
    for i in range(len(samples) // per_frame):
        base = i * per_frame
        y = samples[base:base + y_count].reshape(height, width)
        cb = samples[base + y_count:base + y_count + c_count].reshape(ch, cw)
        cr = samples[base + y_count + c_count:base + per_frame].reshape(ch, cw)
        frames.append(Frame(width, height, bit_depth, bit_depth, chroma,
                            (y.astype(np.uint16), cb.astype(np.uint16),
                             cr.astype(np.uint16))))
    return VideoSequence(frames, frame_rate)


def write_raw_video(seq: VideoSequence, path: str | Path) -> None:
    """Inverse of read_raw_video; bit-exact roundtrip."""
    if not seq.frames:
        raise ConfigError("cannot write an empty sequence")
    seq.validate()
    bps = 1 if seq.frames[0].coding_bit_depth <= 8 else 2
    dtype = np.dtype("<u2") if bps == 2 else np.dtype("u1")
    with open(path, "wb") as fh:
        for frame in seq.frames:
            for plane in frame.planes:
                fh.write(np.ascontiguousarray(plane, dtype=dtype).tobytes())


def _upsample_chroma_cosited(plane: np.ndarray) -> np.ndarray:
    """C420 chroma to full resolution; samples co-sited with even luma
    positions, odd positions bilinear (edge replicated)."""
    hc, wc = plane.shape
    horiz = np.empty((hc, wc * 2), dtype=np.float64)
    horiz[:, 0::2] = plane
    right = plane[:, list(range(1, wc)) + [wc - 1]]
    horiz[:, 1::2] = (plane + right) / 2.0
    full = np.empty((hc * 2, wc * 2), dtype=np.float64)
    full[0::2, :] = horiz
    below = horiz[list(range(1, hc)) + [hc - 1], :]
    full[1::2, :] = (horiz + below) / 2.0
    return full


def _downsample_chroma_mean(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return (plane[0::2, 0::2] + plane[0::2, 1::2]
            + plane[1::2, 0::2] + plane[1::2, 1::2]) / 4.0


def to_rgb(frame: Frame) -> np.ndarray:
    """Convert one frame to an (h, w, 3) RGB array in [0, 1].

    Samples are interpreted at the frame's effective bit depth with the
    BT.709 limited-range matrix; C420 chroma is up-sampled first. Output
    is clipped to [0, 1].
    """
    scale = 2.0 ** (frame.effective_bit_depth - 8)
    y_plane, cb_plane, cr_plane = (p.astype(np.float64) for p in frame.planes)
    if frame.chroma_format is ChromaFormat.C420:
        cb_plane = _upsample_chroma_cosited(cb_plane)
        cr_plane = _upsample_chroma_cosited(cr_plane)
    y = (y_plane - 16.0 * scale) / (219.0 * scale)
    cb = (cb_plane - 128.0 * scale) / (224.0 * scale)
    cr = (cr_plane - 128.0 * scale) / (224.0 * scale)
    r = y + 2.0 * (1.0 - KR) * cr
    b = y + 2.0 * (1.0 - KB) * cb
    g = (y - KR * r - KB * b) / KG
    return np.clip(np.stack([r, g, b], axis=-1), 0.0, 1.0)


def round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def from_rgb(rgb: np.ndarray, template: Frame) -> Frame:
    """Inverse of to_rgb at the template's geometry and effective bit depth.

    Chroma is taken back to C420 by a 2x2 mean when the template asks for
    it; code values are rounded half-up.
    """
    if rgb.shape != (template.height, template.width, 3):
        raise ConfigError(f"rgb shape {rgb.shape} does not match template geometry")
    rgb = np.clip(rgb, 0.0, 1.0)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = KR * r + KG * g + KB * b
    cb = (b - y) / (2.0 * (1.0 - KB))
    cr = (r - y) / (2.0 * (1.0 - KR))
    if template.chroma_format is ChromaFormat.C420:
        cb = _downsample_chroma_mean(cb)
        cr = _downsample_chroma_mean(cr)
    scale = 2.0 ** (template.effective_bit_depth - 8)
    maxval = (1 << template.effective_bit_depth) - 1
    y_code = np.clip(round_half_up(16.0 * scale + y * 219.0 * scale), 0, maxval)
    cb_code = np.clip(round_half_up(128.0 * scale + cb * 224.0 * scale), 0, maxval)
    cr_code = np.clip(round_half_up(128.0 * scale + cr * 224.0 * scale), 0, maxval)
    return Frame(template.width, template.height, template.coding_bit_depth,
                 template.effective_bit_depth, template.chroma_format,
                 (y_code.astype(np.uint16), cb_code.astype(np.uint16),
                  cr_code.astype(np.uint16)))


def make_template(width: int, height: int, coding_bit_depth: int,
                  effective_bit_depth: int | None = None,
                  chroma: ChromaFormat = ChromaFormat.C420) -> Frame:
    """Frame metadata carrier (empty planes are fine for from_rgb templates)."""
    ebd = coding_bit_depth if effective_bit_depth is None else effective_bit_depth
    cw, ch = _frame_geometry(width, height, chroma)
    zero = np.zeros((height, width), dtype=np.uint16)
    zc = np.zeros((ch, cw), dtype=np.uint16)
    return Frame(width, height, coding_bit_depth, ebd, chroma, (zero, zc, zc))
