import numpy as np
import pytest

import vidadapt.video_io as vio
from vidadapt.pipeline import CodecAdapter
from vidadapt.video_io import ChromaFormat, Frame, VideoSequence, from_rgb

# Copies input to output; mentions every placeholder exactly once (the
# extra positional args land in $3.. and are ignored by the script).
IDENTITY_TEMPLATE = ("sh -c 'cp \"$1\" \"$2\"' ident {input} {output} "
                     "{qp} {width} {height} {fps} {bitdepth}")


@pytest.fixture
def identity_adapter() -> CodecAdapter:
    return CodecAdapter(IDENTITY_TEMPLATE, IDENTITY_TEMPLATE, "host")


def constant_frame(width: int, height: int, value: int, bit_depth: int = 10,
                   chroma: ChromaFormat = ChromaFormat.C420) -> Frame:
    f = vio.make_template(width, height, bit_depth, chroma=chroma)
    f.planes[0][:] = value
    neutral = 128 << (bit_depth - 8)
    f.planes[1][:] = neutral
    f.planes[2][:] = neutral
    return f


def gradient_frame(width: int, height: int, bit_depth: int = 10,
                   lo: int = 100, hi: int = 800, phase: int = 0) -> Frame:
    """Smooth diagonal luma ramp with neutral chroma (in-gamut by construction)."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    span = hi - lo
    luma = lo + span * (xx / max(width - 1, 1) + yy / max(height - 1, 1) + phase * 0.01) / 2.2
    f = constant_frame(width, height, 0, bit_depth)
    f.planes[0][:] = np.clip(np.round(luma), 0, (1 << bit_depth) - 1).astype(np.uint16)
    return f


def random_ingamut_frame(width: int, height: int, rng: np.random.Generator,
                         bit_depth: int = 10,
                         chroma: ChromaFormat = ChromaFormat.C420) -> Frame:
    """Random frame built from RGB so every sample is inside the limited-range gamut."""
    rgb = rng.random((height, width, 3))
    return from_rgb(rgb, vio.make_template(width, height, bit_depth, chroma=chroma))


def smooth_ingamut_frame(width: int, height: int, rng: np.random.Generator,
                         bit_depth: int = 10,
                         chroma: ChromaFormat = ChromaFormat.C420) -> Frame:
    """Band-limited random content (sums of low-frequency sinusoids), in gamut."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    chans = []
    for _ in range(3):
        img = np.zeros((height, width))
        for _k in range(4):
            fx, fy = rng.uniform(0.2, 2.0, size=2)
            px, py = rng.uniform(0, 2 * np.pi, size=2)
            img += rng.uniform(0.05, 0.2) * np.sin(
                2 * np.pi * fx * xx / width + px) * np.sin(2 * np.pi * fy * yy / height + py)
        chans.append(0.5 + img)
    rgb = np.clip(np.stack(chans, axis=-1), 0.05, 0.95)
    return from_rgb(rgb, vio.make_template(width, height, bit_depth, chroma=chroma))


def sequence_of(frames, fps: float = 30.0) -> VideoSequence:
    return VideoSequence(list(frames), fps)
