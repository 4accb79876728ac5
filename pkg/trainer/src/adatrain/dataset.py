"""Dataset preparation: run the encode-side degradation through a host
codec and cut aligned degraded/original RGB block pairs.

The degraded arm reproduces what the decoder-side network will see:
optional 2x Lanczos down-sampling, a one-bit right shift, host
encode/decode at the offset QP, and nearest-neighbour up-sampling back to
full size when spatial adaptation is on. Blocks are augmented with the
four 90-degree rotations.
"""
from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .video import (Clip, clip_to_rgb, lanczos_down2, nearest_up2, read_clip,
                    shift_down, write_clip)

VERSION_EBD = 0
VERSION_SR_EBD = 1

_PLACEHOLDERS = ("{input}", "{output}", "{qp}", "{width}", "{height}",
                 "{fps}", "{bitdepth}")


@dataclass
class SourceClip:
    path: str
    width: int
    height: int
    bit_depth: int = 10
    fps: float = 30.0


@dataclass
class HostCodec:
    encode_template: str
    decode_template: str

    def __post_init__(self):
        for tpl in (self.encode_template, self.decode_template):
            for ph in _PLACEHOLDERS:
                if tpl.count(ph) != 1:
                    raise ValueError(f"template must use {ph} exactly once")


@dataclass
class BlockPairs:
    degraded: np.ndarray   # (n, size, size, 3) in [0, 1]
    original: np.ndarray

    def __len__(self) -> int:
        return self.degraded.shape[0]


def _run(template: str, **params) -> None:
    cmd = [tok.format(**params) for tok in shlex.split(template)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"host command failed ({proc.returncode}): "
                           f"{(proc.stderr or '').strip()[-300:]}")


def degrade_clip(clip: Clip, codec: HostCodec, qp_group: int, version: int,
                 workdir: str | Path | None = None) -> Clip:
    """Push one clip through the coding-side adaptation and the host codec."""
    sr = version == VERSION_SR_EBD
    work = lanczos_down2(clip) if sr else clip
    work = shift_down(work, 1)
    qp = max(qp_group - (12 if sr else 6), 0)
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        tmpdir = Path(tmp)
        raw, bits, out = tmpdir / "in.yuv", tmpdir / "s.bin", tmpdir / "out.yuv"
        write_clip(work, raw)
        common = dict(qp=f"{qp:g}", width=work.width, height=work.height,
                      fps=f"{clip.fps:g}", bitdepth=clip.bit_depth)
        _run(codec.encode_template, input=str(raw), output=str(bits), **common)
        _run(codec.decode_template, input=str(bits), output=str(out), **common)
        decoded = read_clip(out, work.width, work.height, clip.bit_depth, clip.fps)
    decoded = replace(decoded, effective_bits=clip.bit_depth - 1)
    return nearest_up2(decoded) if sr else decoded


def _block_origins(dimension: int, size: int) -> list[int]:
    if dimension < size:
        return []
    xs = list(range(0, dimension - size + 1, size))
    if xs[-1] != dimension - size:
        xs.append(dimension - size)
    return xs


def cut_block_pairs(degraded_rgb: np.ndarray, original_rgb: np.ndarray,
                    block_size: int) -> tuple[np.ndarray, np.ndarray]:
    n, h, w, _ = original_rgb.shape
    deg, orig = [], []
    for i in range(n):
        for y in _block_origins(h, block_size):
            for x in _block_origins(w, block_size):
                deg.append(degraded_rgb[i, y:y + block_size, x:x + block_size])
                orig.append(original_rgb[i, y:y + block_size, x:x + block_size])
    return np.array(deg), np.array(orig)


def rotate_pairs(pairs: BlockPairs) -> BlockPairs:
    """Four 90-degree rotations of every pair (4n blocks out)."""
    deg = np.concatenate([np.rot90(pairs.degraded, k, axes=(1, 2)) for k in range(4)])
    orig = np.concatenate([np.rot90(pairs.original, k, axes=(1, 2)) for k in range(4)])
    return BlockPairs(deg, orig)


def prepare_dataset(sources: list[SourceClip], codec: HostCodec, qp_group: int,
                    version: int, block_size: int = 96,
                    max_blocks: int | None = None, augment: bool = True,
                    rng: np.random.Generator | None = None,
                    workdir: str | Path | None = None) -> BlockPairs:
    """Aligned degraded/original RGB block pairs from raw source clips."""
    if not sources:
        raise ValueError("no source clips")
    all_deg, all_orig = [], []
    for src in sources:
        clip = read_clip(src.path, src.width, src.height, src.bit_depth, src.fps)
        degraded = degrade_clip(clip, codec, qp_group, version, workdir)
        rgb_orig = clip_to_rgb(clip)
        rgb_deg = clip_to_rgb(degraded)
        deg, orig = cut_block_pairs(rgb_deg, rgb_orig, block_size)
        all_deg.append(deg)
        all_orig.append(orig)
    pairs = BlockPairs(np.concatenate(all_deg), np.concatenate(all_orig))
    if max_blocks is not None and len(pairs) > max_blocks:
        rng = rng or np.random.default_rng(0)
        keep = rng.choice(len(pairs), size=max_blocks, replace=False)
        pairs = BlockPairs(pairs.degraded[keep], pairs.original[keep])
    if augment:
        pairs = rotate_pairs(pairs)
    return pairs
