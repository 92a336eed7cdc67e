"""Shared time-invariant image encoder.

Two 5x5 stride-1 pad-2 convolutions, each followed by a 4x4 max-pool, then
four linear layers (512, 256, 256, embed_dim), PReLU after every conv and
linear layer. The flattened size after the second pool follows from the
pooling arithmetic: 16 * floor(floor(H/4)/4) * floor(floor(W/4)/4).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .autodiff import Tensor, ops
from .autodiff.init import PRELU_GAIN, prelu_slope, uniform_fan_in, zeros
from .errors import ConfigError, IngestionError, ShapeError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)  # ITU-R 601


@dataclass(frozen=True)
class EncoderConfig:
    input_height: int
    input_width: int
    img_chns: int = 3
    embed_dim: int = 16

    def __post_init__(self):
        if self.img_chns not in (1, 3):
            raise ConfigError(f"img_chns must be 1 or 3, got {self.img_chns}")
        if self.embed_dim < 1:
            raise ConfigError(f"embed_dim must be positive, got {self.embed_dim}")
        if self.img_feats <= 0:
            raise ConfigError(
                f"input {self.input_height}x{self.input_width} too small for two 4x4 pools"
            )

    @property
    def img_feats(self) -> int:
        return 16 * ((self.input_height // 4) // 4) * ((self.input_width // 4) // 4)


# (name, kind, spec) rows describing the backbone in order; linear sizes that
# depend on the config are filled in by _layer_table.
def _layer_table(config: EncoderConfig):
    return [
        ("conv1", "conv", (config.img_chns, 8)),
        ("conv2", "conv", (8, 16)),
        ("fc1", "linear", (config.img_feats, 512)),
        ("fc2", "linear", (512, 256)),
        ("fc3", "linear", (256, 256)),
        ("fc4", "linear", (256, config.embed_dim)),
    ]


def init_encoder_params(config: EncoderConfig, rng: np.random.Generator, dtype=np.float64) -> dict:
    """Seeded parameter set: one weight/bias/slope triple per layer."""
    params = {}
    for name, kind, (cin, cout) in _layer_table(config):
        if kind == "conv":
            fan_in = cin * 5 * 5
            params[f"{name}_w"] = uniform_fan_in(rng, (cout, cin, 5, 5), fan_in, dtype, gain=PRELU_GAIN)
        else:
            params[f"{name}_w"] = uniform_fan_in(rng, (cin, cout), cin, dtype, gain=PRELU_GAIN)
        params[f"{name}_b"] = zeros((cout,), dtype)
        params[f"{name}_a"] = prelu_slope(dtype)
    return params


def encoder_param_count(config: EncoderConfig) -> int:
    total = 0
    for _, kind, (cin, cout) in _layer_table(config):
        total += (cin * 25 * cout if kind == "conv" else cin * cout) + cout + 1
    return total


def encode(images: Tensor, config: EncoderConfig, params: dict) -> Tensor:
    """Map (N, chns, H, W) images to (N, embed_dim) embeddings."""
    n, chns, h, w = images.data.shape
    if (chns, h, w) != (config.img_chns, config.input_height, config.input_width):
        raise ShapeError(
            f"encoder expects (N, {config.img_chns}, {config.input_height}, "
            f"{config.input_width}), got {images.data.shape}"
        )
    x = ops.conv2d(images, params["conv1_w"], params["conv1_b"], stride=1, pad=2)
    x = ops.prelu(x, params["conv1_a"])
    x = ops.maxpool2d(x, 4)
    x = ops.conv2d(x, params["conv2_w"], params["conv2_b"], stride=1, pad=2)
    x = ops.prelu(x, params["conv2_a"])
    x = ops.maxpool2d(x, 4)
    x = ops.reshape(x, (n, config.img_feats))
    for name in ("fc1", "fc2", "fc3", "fc4"):
        x = ops.affine(x, params[f"{name}_w"], params[f"{name}_b"])
        x = ops.prelu(x, params[f"{name}_a"])
    return x


def preprocess(path, config: EncoderConfig) -> np.ndarray:
    """Decode, bilinearly resize, and scale an image file to [0, 1].

    Single-channel configs get ITU-R 601 luminance. Returns a
    (chns, H, W) float64 array; the same file always yields identical bytes.
    """
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB").resize(
                (config.input_width, config.input_height), Image.BILINEAR
            )
    except (OSError, SyntaxError, ValueError) as exc:
        raise IngestionError(f"cannot decode image {path}: {exc}") from exc
    arr = np.asarray(rgb, dtype=np.float64) / 255.0  # (H, W, 3)
    if config.img_chns == 1:
        arr = arr @ np.asarray(LUMA_WEIGHTS)
        return arr[None, :, :]
    return arr.transpose(2, 0, 1).copy()
