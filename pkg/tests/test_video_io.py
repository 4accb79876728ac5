import numpy as np
import pytest

import vidadapt.video_io as vio
from vidadapt.errors import ConfigError, FormatError
from vidadapt.video_io import (ChromaFormat, VideoSequence, aggregate_blocks,
                               extract_blocks, from_rgb, plan_blocks,
                               read_raw_video, to_rgb, write_raw_video)

from conftest import random_ingamut_frame, smooth_ingamut_frame


class TestRawIO:
    def test_exact_frame_size_ten_bit_c420(self, tmp_path):
        w, h = 16, 8
        path = tmp_path / "clip.yuv"
        path.write_bytes(bytes(int(w * h * 1.5 * 2)))
        seq = read_raw_video(path, w, h, 10)
        assert len(seq) == 1

    def test_extra_byte_is_truncation(self, tmp_path):
        w, h = 16, 8
        path = tmp_path / "clip.yuv"
        path.write_bytes(bytes(int(w * h * 1.5 * 2) + 1))
        with pytest.raises(FormatError, match="truncated"):
            read_raw_video(path, w, h, 10)

    def test_sample_above_bit_depth_rejected(self, tmp_path):
        w, h = 4, 4
        samples = np.zeros(w * h + 2 * (w // 2) * (h // 2), dtype="<u2")
        samples[3] = 1024  # one past the 10-bit ceiling
        path = tmp_path / "bad.yuv"
        path.write_bytes(samples.tobytes())
        with pytest.raises(FormatError, match="exceeds"):
            read_raw_video(path, w, h, 10)

    def test_write_read_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        for bit_depth in (8, 10):
            frames = [random_ingamut_frame(12, 8, rng, bit_depth) for _ in range(3)]
            # overwrite with full-range random samples: roundtrip must not care
            for f in frames:
                top = 1 << bit_depth
                f.planes[0][:] = rng.integers(0, top, f.planes[0].shape)
                f.planes[1][:] = rng.integers(0, top, f.planes[1].shape)
                f.planes[2][:] = rng.integers(0, top, f.planes[2].shape)
            path = tmp_path / f"rt{bit_depth}.yuv"
            write_raw_video(VideoSequence(frames, 30.0), path)
            back = read_raw_video(path, 12, 8, bit_depth)
            assert len(back) == 3
            for a, b in zip(frames, back.frames):
                for pa, pb in zip(a.planes, b.planes):
                    assert np.array_equal(pa, pb)

    def test_eight_bit_c420_file_size(self, tmp_path):
        rng = np.random.default_rng(0)
        f = random_ingamut_frame(16, 8, rng, 8)
        path = tmp_path / "f8.yuv"
        write_raw_video(VideoSequence([f], 30.0), path)
        assert path.stat().st_size == int(16 * 8 * 1.5)

    def test_ten_bit_c444_file_size(self, tmp_path):
        rng = np.random.default_rng(0)
        f = random_ingamut_frame(96, 96, rng, 10, ChromaFormat.C444)
        path = tmp_path / "f444.yuv"
        write_raw_video(VideoSequence([f], 30.0), path)
        assert path.stat().st_size == 96 * 96 * 3 * 2

    def test_empty_sequence_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            write_raw_video(VideoSequence([], 30.0), tmp_path / "x.yuv")


class TestColourConversion:
    def test_limited_range_grey_is_achromatic(self):
        f = vio.make_template(8, 8, 10, chroma=ChromaFormat.C444)
        f.planes[0][:] = 512
        f.planes[1][:] = 512
        f.planes[2][:] = 512
        rgb = to_rgb(f)
        spread = rgb.max(axis=-1) - rgb.min(axis=-1)
        assert spread.max() <= 1.0 / 1023.0

    def test_limited_range_black_maps_to_zero(self):
        f = vio.make_template(8, 8, 10, chroma=ChromaFormat.C444)
        f.planes[0][:] = 64
        f.planes[1][:] = 512
        f.planes[2][:] = 512
        assert np.abs(to_rgb(f)).max() <= 1e-3

    def test_black_rgb_to_codes(self):
        f = from_rgb(np.zeros((8, 8, 3)), vio.make_template(8, 8, 10, chroma=ChromaFormat.C444))
        assert abs(int(f.planes[0][0, 0]) - 64) <= 1
        assert abs(int(f.planes[1][0, 0]) - 512) <= 1
        assert abs(int(f.planes[2][0, 0]) - 512) <= 1

    def test_white_rgb_to_codes(self):
        f = from_rgb(np.ones((8, 8, 3)), vio.make_template(8, 8, 10, chroma=ChromaFormat.C444))
        assert abs(int(f.planes[0][0, 0]) - 940) <= 1

    def test_constant_image_roundtrip_exact(self):
        t = vio.make_template(8, 8, 10, chroma=ChromaFormat.C444)
        f = from_rgb(np.full((8, 8, 3), 0.42), t)
        again = from_rgb(to_rgb(f), t)
        for a, b in zip(f.planes, again.planes):
            assert np.array_equal(a, b)

    def test_c444_roundtrip_luma_within_one_code(self):
        rng = np.random.default_rng(5)
        t = vio.make_template(16, 16, 10, chroma=ChromaFormat.C444)
        for _ in range(30):
            f = from_rgb(rng.random((16, 16, 3)), t)
            back = from_rgb(to_rgb(f), t)
            err = np.abs(back.planes[0].astype(int) - f.planes[0].astype(int))
            assert err.max() <= 1

    def test_c420_natural_roundtrip_mostly_within_one_code(self):
        rng = np.random.default_rng(6)
        f = smooth_ingamut_frame(48, 32, rng)
        back = from_rgb(to_rgb(f), vio.make_template(48, 32, 10))
        err = np.abs(back.planes[0].astype(int) - f.planes[0].astype(int))
        assert (err <= 1).mean() >= 0.95


class TestBlockGrid:
    def test_stride_with_final_clamp(self):
        grid = plan_blocks(192, 96, 96, 4)
        xs = sorted({x for x, _ in grid.origins})
        assert xs == [0, 92, 96]

    def test_single_block_axis(self):
        grid = plan_blocks(96, 96, 96, 4)
        assert grid.origins == [(0, 0)]

    def test_clamp_only_axis(self):
        grid = plan_blocks(100, 96, 96, 4)
        xs = sorted({x for x, _ in grid.origins})
        assert xs == [0, 4]

    def test_frame_smaller_than_block_rejected(self):
        with pytest.raises(ConfigError):
            plan_blocks(64, 128, 96, 4)

    def test_coverage_random_geometries(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            bs = int(rng.integers(4, 32))
            ov = int(rng.integers(0, bs))
            w = int(rng.integers(bs, 200))
            h = int(rng.integers(bs, 200))
            grid = plan_blocks(w, h, bs, ov)
            covered = np.zeros((h, w), dtype=bool)
            for x, y in grid.origins:
                assert 0 <= x <= w - bs and 0 <= y <= h - bs
                covered[y:y + bs, x:x + bs] = True
            assert covered.all()

    def test_extract_constant_blocks(self):
        img = np.full((96, 192, 3), 0.25)
        grid = plan_blocks(192, 96, 96, 4)
        for blk in extract_blocks(img, grid):
            assert np.all(blk == 0.25)

    def test_single_block_equals_image(self):
        rng = np.random.default_rng(1)
        img = rng.random((96, 96, 3))
        grid = plan_blocks(96, 96, 96, 4)
        (blk,) = extract_blocks(img, grid)
        assert np.array_equal(blk, img)

    def test_extract_aggregate_identity_any_grid(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            bs = int(rng.integers(4, 24))
            ov = int(rng.integers(0, bs))
            w = int(rng.integers(bs, 100))
            h = int(rng.integers(bs, 100))
            img = rng.random((h, w, 3))
            grid = plan_blocks(w, h, bs, ov)
            back = aggregate_blocks(extract_blocks(img, grid), grid)
            assert np.array_equal(back, img)

    def test_overlap_seam_is_mean(self):
        # two horizontally adjacent blocks, 4-px seam valued 0.2 and 0.4
        grid = plan_blocks(16, 10, 10, 4)
        assert sorted({x for x, _ in grid.origins}) == [0, 6]
        blocks = [np.full((10, 10), 0.2), np.full((10, 10), 0.4)]
        out = aggregate_blocks(blocks, grid)
        seam = out[:, 6:10]
        assert np.allclose(seam, 0.3, atol=1e-12)
        assert np.all(out[:, :6] == 0.2) and np.all(out[:, 10:] == 0.4)

    def test_single_block_aggregate_identity(self):
        rng = np.random.default_rng(4)
        img = rng.random((20, 20))
        grid = plan_blocks(20, 20, 20, 0)
        assert np.array_equal(aggregate_blocks([img.copy()], grid), img)

    def test_block_count_mismatch(self):
        grid = plan_blocks(16, 10, 10, 4)
        with pytest.raises(ConfigError):
            aggregate_blocks([np.zeros((10, 10))], grid)
