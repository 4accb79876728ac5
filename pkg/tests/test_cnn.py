import numpy as np
import pytest

from vidadapt.cnn import (AdaptVersion, ConvParams, ModelKey, ModelWeights,
                          NetworkSpec, PReluParams, conv2d, load_weights,
                          network_forward, prelu, reconstruct_frame,
                          save_weights, select_model, zero_model)
from vidadapt.errors import ConfigError, FormatError

from conftest import constant_frame, smooth_ingamut_frame


def random_model(spec: NetworkSpec, rng: np.random.Generator,
                 scale: float = 0.3) -> ModelWeights:
    f, io = spec.feature_maps, spec.io_channels

    def conv(out_ch, in_ch):
        return ConvParams(rng.normal(0, scale, (out_ch, in_ch, 3, 3)),
                          rng.normal(0, scale, out_ch))

    blocks = [(conv(f, f), PReluParams(rng.uniform(0, 0.5, f)), conv(f, f))
              for _ in range(spec.n_residual_blocks)]
    return ModelWeights(spec, conv(f, io), PReluParams(rng.uniform(0, 0.5, f)),
                        blocks, conv(f, f), conv(io, f))


def conv_bruteforce(x, weights, bias):
    """Triple-loop reference convolution (zero padded, 3x3, stride 1)."""
    out_ch, in_ch, _, _ = weights.shape
    _, h, w = x.shape
    out = np.zeros((out_ch, h, w))
    for o in range(out_ch):
        for y in range(h):
            for xx in range(w):
                acc = bias[o]
                for i in range(in_ch):
                    for dy in range(3):
                        for dx in range(3):
                            sy = y + dy - 1
                            sx = xx + dx - 1
                            if 0 <= sy < h and 0 <= sx < w:
                                acc += weights[o, i, dy, dx] * x[i, sy, sx]
                out[o, y, xx] = acc
    return out


def forward_straightline(model: ModelWeights, block: np.ndarray) -> np.ndarray:
    """Second implementation of the full topology, built only on the
    brute-force convolution above."""
    def act(t, alpha):
        out = t.copy()
        for c in range(t.shape[0]):
            neg = out[c] < 0
            out[c][neg] = alpha[c] * out[c][neg]
        return out

    x = block.transpose(2, 0, 1).astype(np.float64)
    h0 = act(conv_bruteforce(x, model.head_conv.weights, model.head_conv.bias),
             model.head_prelu.alpha)
    r = h0
    for c1, a, c2 in model.blocks:
        t = conv_bruteforce(r, c1.weights, c1.bias)
        t = act(t, a.alpha)
        t = conv_bruteforce(t, c2.weights, c2.bias)
        r = r + t
    g = conv_bruteforce(r, model.post_blocks_conv.weights, model.post_blocks_conv.bias) + h0
    out = x + np.tanh(conv_bruteforce(g, model.tail_conv.weights, model.tail_conv.bias))
    return np.clip(out, 0.0, 1.0).transpose(1, 2, 0)


class TestConv2d:
    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        x = rng.random((2, 6, 6))
        w = np.zeros((2, 2, 3, 3))
        w[0, 0, 1, 1] = 1.0
        w[1, 1, 1, 1] = 1.0
        out = conv2d(x, ConvParams(w, np.zeros(2)))
        assert np.allclose(out, x)

    def test_all_ones_kernel_constant_interior(self):
        c = 0.7
        x = np.full((1, 8, 8), c)
        out = conv2d(x, ConvParams(np.ones((1, 1, 3, 3)), np.zeros(1)))
        assert np.allclose(out[0, 1:-1, 1:-1], 9 * c)
        assert np.allclose(out[0, 0, 0], 4 * c)  # zero padding at the corner

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            x = rng.normal(size=(1, 5, 5))
            w = rng.normal(size=(1, 1, 3, 3))
            b = rng.normal(size=1)
            assert np.abs(conv2d(x, ConvParams(w, b)) - conv_bruteforce(x, w, b)).max() < 1e-6

    def test_linearity_zero_bias(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            p = ConvParams(rng.normal(size=(3, 2, 3, 3)), np.zeros(3))
            x, y = rng.normal(size=(2, 2, 7, 7))
            a, b = rng.normal(size=2)
            lhs = conv2d(a * x + b * y, p)
            rhs = a * conv2d(x, p) + b * conv2d(y, p)
            assert np.abs(lhs - rhs).max() < 1e-6

    def test_channel_mismatch(self):
        with pytest.raises(ConfigError):
            conv2d(np.zeros((2, 4, 4)), ConvParams(np.zeros((1, 3, 3, 3)), np.zeros(1)))


class TestPRelu:
    def test_positive_passthrough(self):
        out = prelu(np.full((1, 2, 2), 2.0), PReluParams(np.array([0.9])))
        assert np.all(out == 2.0)

    def test_negative_scaled(self):
        out = prelu(np.full((1, 2, 2), -2.0), PReluParams(np.array([0.25])))
        assert np.all(out == -0.5)

    def test_alpha_one_is_identity(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4, 5, 5))
        out = prelu(x, PReluParams(np.ones(4)))
        assert np.array_equal(out, x)


class TestNetworkForward:
    def test_zero_model_is_exact_identity(self):
        rng = np.random.default_rng(4)
        model = zero_model(NetworkSpec(n_residual_blocks=2, feature_maps=4))
        for _ in range(10):
            block = rng.random((12, 12, 3))
            assert np.array_equal(network_forward(model, block), block)

    def test_zero_input_zero_model(self):
        model = zero_model(NetworkSpec(n_residual_blocks=1, feature_maps=2))
        out = network_forward(model, np.zeros((8, 8, 3)))
        assert np.all(out == 0.0)

    def test_matches_straightline_oracle(self):
        rng = np.random.default_rng(5)
        spec = NetworkSpec(n_residual_blocks=1, feature_maps=2)
        for _ in range(5):
            model = random_model(spec, rng)
            block = rng.random((8, 8, 3))
            mine = network_forward(model, block)
            oracle = forward_straightline(model, block)
            assert np.abs(mine - oracle).max() < 1e-5

    def test_shape_and_range(self):
        rng = np.random.default_rng(6)
        spec = NetworkSpec(n_residual_blocks=2, feature_maps=3)
        model = random_model(spec, rng, scale=1.5)
        for shape in ((8, 8), (11, 7), (16, 5)):
            block = rng.random(shape + (3,))
            out = network_forward(model, block)
            assert out.shape == block.shape
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_nonfinite_weights_rejected(self):
        model = zero_model(NetworkSpec(n_residual_blocks=1, feature_maps=2))
        model.tail_conv.bias[:] = np.nan
        with pytest.raises(FormatError):
            network_forward(model, np.full((8, 8, 3), 0.5))


class TestSelectModel:
    @pytest.mark.parametrize("qp,group", [
        (27, 27), (24.5, 22), (39.5, 37),
        (22, 22), (24.6, 27), (29.5, 27), (32, 32), (34.5, 32),
        (37, 37), (39.4, 37), (42, 42), (50, 42),
    ])
    def test_thresholds(self, qp, group):
        key = select_model(qp, "host", AdaptVersion.EBD)
        assert key.qp_group == group

    def test_negative_rejected(self):
        with pytest.raises(ConfigError):
            select_model(-1, "host", AdaptVersion.EBD)

    def test_bad_group_rejected(self):
        with pytest.raises(ConfigError):
            ModelKey("host", AdaptVersion.EBD, 30)


class TestReconstructFrame:
    def test_zero_model_close_to_identity(self):
        rng = np.random.default_rng(7)
        model = zero_model(NetworkSpec(n_residual_blocks=1, feature_maps=2))
        frame = smooth_ingamut_frame(128, 96, rng)
        out = reconstruct_frame(frame, model, sr_flag=False)
        err = np.abs(out.planes[0].astype(int) - frame.planes[0].astype(int))
        assert err.max() <= 1

    def test_constant_frame_exact(self):
        model = zero_model(NetworkSpec(n_residual_blocks=1, feature_maps=2))
        frame = constant_frame(128, 96, 500)
        out = reconstruct_frame(frame, model, sr_flag=False)
        assert np.all(out.planes[0] == 500)

    def test_tiled_identity_despite_overlaps(self):
        # grid with overlaps on both axes; identity network must survive averaging
        rng = np.random.default_rng(8)
        model = zero_model(NetworkSpec(n_residual_blocks=1, feature_maps=2))
        frame = smooth_ingamut_frame(192, 128, rng)
        out = reconstruct_frame(frame, model, sr_flag=False)
        err = np.abs(out.planes[0].astype(int) - frame.planes[0].astype(int))
        assert err.max() <= 1

    def test_small_frame_rejected(self):
        model = zero_model(NetworkSpec(n_residual_blocks=1, feature_maps=2))
        with pytest.raises(ConfigError):
            reconstruct_frame(constant_frame(64, 64, 0), model, sr_flag=False)

    def test_restores_full_effective_depth(self):
        from vidadapt.resampler import ebd_downshift
        rng = np.random.default_rng(9)
        model = zero_model(NetworkSpec(n_residual_blocks=1, feature_maps=2))
        frame = ebd_downshift(smooth_ingamut_frame(96, 96, rng), 1)
        out = reconstruct_frame(frame, model, sr_flag=False)
        assert out.effective_bit_depth == out.coding_bit_depth == 10


class TestWeightBank:
    def _bank(self, rng):
        spec = NetworkSpec(n_residual_blocks=2, feature_maps=3)
        return {
            ModelKey("host", AdaptVersion.EBD, 27): random_model(spec, rng),
            ModelKey("host", AdaptVersion.SR_EBD, 37): random_model(spec, rng),
        }

    def test_roundtrip_float32_exact(self, tmp_path):
        rng = np.random.default_rng(10)
        bank = self._bank(rng)
        path = tmp_path / "bank.vsb"
        save_weights(bank, path)
        loaded = load_weights(path)
        assert set(loaded) == set(bank)
        for key, model in bank.items():
            got = loaded[key]
            assert np.array_equal(got.head_conv.weights,
                                  model.head_conv.weights.astype(np.float32))
            for (c1, a, c2), (g1, ga, g2) in zip(model.blocks, got.blocks):
                assert np.array_equal(g1.weights, c1.weights.astype(np.float32))
                assert np.array_equal(ga.alpha, a.alpha.astype(np.float32))
                assert np.array_equal(g2.bias, c2.bias.astype(np.float32))
            assert np.array_equal(got.tail_conv.bias,
                                  model.tail_conv.bias.astype(np.float32))

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.vsb"
        path.write_bytes(b"NOPE" + bytes(64))
        with pytest.raises(FormatError, match="magic"):
            load_weights(path)

    def test_truncated_payload(self, tmp_path):
        rng = np.random.default_rng(11)
        path = tmp_path / "bank.vsb"
        save_weights(self._bank(rng), path)
        data = path.read_bytes()
        path.write_bytes(data[:-100])
        with pytest.raises(FormatError, match="truncated"):
            load_weights(path)

    def test_declared_blocks_exceed_payload(self, tmp_path):
        # bank claims an extra residual block but carries none of its tensors
        rng = np.random.default_rng(12)
        spec = NetworkSpec(n_residual_blocks=1, feature_maps=2)
        bank = {ModelKey("host", AdaptVersion.EBD, 22): random_model(spec, rng)}
        path = tmp_path / "bank.vsb"
        save_weights(bank, path)
        data = bytearray(path.read_bytes())
        # n_residual_blocks u16 sits after magic(4) version(2) count(2)
        # codec_len(1) codec(4) version(1) qp(1)
        offset = 4 + 2 + 2 + 1 + len("host") + 1 + 1
        data[offset:offset + 2] = (2).to_bytes(2, "little")
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError):
            load_weights(path)

    def test_empty_bank_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            save_weights({}, tmp_path / "x.vsb")
