import numpy as np
import pytest
from PIL import Image

from learntrace.autodiff import Tensor, grad_check
from learntrace.encoder import (
    EncoderConfig,
    encode,
    encoder_param_count,
    init_encoder_params,
    preprocess,
)
from learntrace.errors import ConfigError, IngestionError, ShapeError


class TestConfig:
    def test_flattened_size_for_144px_inputs(self):
        cfg = EncoderConfig(144, 144, img_chns=3)
        assert cfg.img_feats == 1296

    def test_flattened_size_for_128px_inputs_follows_pool_arithmetic(self):
        cfg = EncoderConfig(128, 128, img_chns=3)
        assert cfg.img_feats == 16 * 8 * 8 == 1024

    def test_single_channel_config_allowed(self):
        cfg = EncoderConfig(144, 144, img_chns=1)
        assert cfg.img_chns == 1
        assert cfg.img_feats == 1296

    def test_small_test_geometry(self):
        assert EncoderConfig(32, 32).img_feats == 64

    def test_too_small_input_rejected(self):
        with pytest.raises(ConfigError):
            EncoderConfig(8, 8)

    def test_bad_channel_count_rejected(self):
        with pytest.raises(ConfigError):
            EncoderConfig(64, 64, img_chns=4)


class TestParams:
    def test_param_count_is_function_of_config(self):
        cfg = EncoderConfig(32, 32, img_chns=3, embed_dim=16)
        params = init_encoder_params(cfg, np.random.default_rng(0))
        assert sum(p.data.size for p in params.values()) == encoder_param_count(cfg)

    def test_changing_embed_dim_changes_only_final_layer(self):
        a = encoder_param_count(EncoderConfig(32, 32, embed_dim=8))
        b = encoder_param_count(EncoderConfig(32, 32, embed_dim=16))
        # final layer adds 256 weights + 1 bias per extra output unit
        assert b - a == 8 * 257

    def test_init_is_seeded(self):
        cfg = EncoderConfig(32, 32)
        p1 = init_encoder_params(cfg, np.random.default_rng(5))
        p2 = init_encoder_params(cfg, np.random.default_rng(5))
        for k in p1:
            np.testing.assert_array_equal(p1[k].data, p2[k].data)

    def test_biases_zero_slopes_quarter(self):
        cfg = EncoderConfig(32, 32)
        params = init_encoder_params(cfg, np.random.default_rng(1))
        np.testing.assert_array_equal(params["fc1_b"].data, 0.0)
        assert float(params["conv1_a"].data) == 0.25


class TestEncode:
    def test_output_shape_and_determinism(self):
        cfg = EncoderConfig(32, 32, embed_dim=8)
        params = init_encoder_params(cfg, np.random.default_rng(2))
        rng = np.random.default_rng(3)
        imgs = Tensor(rng.uniform(size=(4, 3, 32, 32)))
        z1 = encode(imgs, cfg, params)
        z2 = encode(imgs, cfg, params)
        assert z1.data.shape == (4, 8)
        np.testing.assert_array_equal(z1.data, z2.data)

    def test_geometry_mismatch_raises(self):
        cfg = EncoderConfig(32, 32)
        params = init_encoder_params(cfg, np.random.default_rng(0))
        with pytest.raises(ShapeError):
            encode(Tensor(np.zeros((1, 3, 64, 64))), cfg, params)

    def test_gradcheck_through_full_encoder(self):
        from learntrace.autodiff import ops

        cfg = EncoderConfig(32, 32, embed_dim=4)
        params = init_encoder_params(cfg, np.random.default_rng(4))
        rng = np.random.default_rng(5)
        imgs = Tensor(rng.uniform(size=(2, 3, 32, 32)))
        coef = Tensor(rng.normal(size=(2, 4)))

        def f():
            return ops.sum_(ops.mul(encode(imgs, cfg, params), coef))

        err = grad_check(
            f, list(params.values()), eps=1e-4, max_entries=8, rng=np.random.default_rng(0)
        )
        assert err < 1e-6


class TestPreprocess:
    @pytest.fixture
    def png(self, tmp_path):
        rng = np.random.default_rng(6)
        arr = rng.integers(0, 256, size=(40, 50, 3), dtype=np.uint8)
        path = tmp_path / "img.png"
        Image.fromarray(arr).save(path)
        return path

    def test_same_file_twice_is_bit_identical(self, png):
        cfg = EncoderConfig(32, 32)
        a = preprocess(png, cfg)
        b = preprocess(png, cfg)
        assert a.shape == (3, 32, 32)
        assert np.array_equal(a, b)

    def test_all_white_maps_to_ones(self, tmp_path):
        path = tmp_path / "white.png"
        Image.fromarray(np.full((16, 16, 3), 255, dtype=np.uint8)).save(path)
        out = preprocess(path, EncoderConfig(32, 32))
        np.testing.assert_array_equal(out, 1.0)

    def test_range_contract(self, png):
        out = preprocess(png, EncoderConfig(48, 48))
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_single_channel_luminance(self, tmp_path):
        arr = np.zeros((16, 16, 3), dtype=np.uint8)
        arr[..., 0] = 255  # pure red
        path = tmp_path / "red.png"
        Image.fromarray(arr).save(path)
        out = preprocess(path, EncoderConfig(16, 16, img_chns=1))
        assert out.shape == (1, 16, 16)
        np.testing.assert_allclose(out, 0.299, atol=1e-12)

    def test_undecodable_file_names_path(self, tmp_path):
        path = tmp_path / "broken.png"
        path.write_bytes(b"not an image at all")
        with pytest.raises(IngestionError, match="broken.png"):
            preprocess(path, EncoderConfig(32, 32))
