import numpy as np
import pytest

from adatrain.dataset import HostCodec
from adatrain.video import Clip

IDENTITY_TEMPLATE = ("sh -c 'cp \"$1\" \"$2\"' ident {input} {output} "
                     "{qp} {width} {height} {fps} {bitdepth}")


@pytest.fixture
def identity_codec() -> HostCodec:
    return HostCodec(IDENTITY_TEMPLATE, IDENTITY_TEMPLATE)


def clip_from_luma(y: np.ndarray, bit_depth: int = 10, fps: float = 30.0) -> Clip:
    n, h, w = y.shape
    neutral = 128 << (bit_depth - 8)
    cb = np.full((n, h // 2, w // 2), neutral, np.uint16)
    cr = np.full((n, h // 2, w // 2), neutral, np.uint16)
    return Clip(y.astype(np.uint16), cb, cr, bit_depth, bit_depth, fps)


def axis_ramps(n: int, h: int, w: int, rng: np.random.Generator,
               slopes=(0.3, 0.8)) -> np.ndarray:
    """Gentle axis-aligned luma ramps: the cleared LSB is recoverable from
    the quantization staircase, so restoration can beat a plain shift."""
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    frames = []
    for _ in range(n):
        slope = rng.uniform(*slopes)
        along_x = rng.random() < 0.5
        base = rng.uniform(150, 850)
        img = base + slope * (xx if along_x else yy)
        frames.append(np.clip(img, 64, 940))
    return np.round(np.array(frames)).astype(np.uint16)


def textured_luma(n: int, h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    frames = []
    for _ in range(n):
        img = rng.uniform(300, 700) + np.zeros_like(xx)
        for _k in range(3):
            wl = rng.uniform(8, 32)
            ang = rng.uniform(0, np.pi)
            ph = rng.uniform(0, 2 * np.pi)
            img = img + rng.uniform(20, 80) * np.sin(
                2 * np.pi * (xx * np.cos(ang) + yy * np.sin(ang)) / wl + ph)
        frames.append(np.clip(img, 64, 940))
    return np.round(np.array(frames)).astype(np.uint16)
