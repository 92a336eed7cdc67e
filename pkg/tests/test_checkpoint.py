import numpy as np
import pytest

from learntrace.autodiff import load_checkpoint, save_checkpoint
from learntrace.errors import IngestionError


def test_roundtrip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {
        "enc/conv1_w": rng.normal(size=(8, 3, 5, 5)),
        "enc/conv1_b": np.zeros(8),
        "head/w": rng.normal(size=(16, 5)).astype(np.float32),
        "scalar": np.asarray(0.25),
    }
    meta = {"seed": 3, "hyperparams": {"lr": 1e-3}, "variant": {"kind": "static"}}
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, arrays, meta)
    loaded, meta2 = load_checkpoint(path)
    assert meta2 == meta
    assert list(loaded) == list(arrays)
    for name, arr in arrays.items():
        assert loaded[name].dtype == arr.dtype
        assert loaded[name].shape == arr.shape
        assert np.array_equal(
            loaded[name].view(np.uint8) if arr.shape else loaded[name],
            arr.view(np.uint8) if arr.shape else arr,
        )


def test_double_roundtrip_identical_bytes(tmp_path):
    arrays = {"a": np.linspace(0, 1, 7), "b": np.float32([[1, 2], [3, 4]])}
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(p1, arrays, {"seed": 0})
    loaded, meta = load_checkpoint(p1)
    save_checkpoint(p2, loaded, meta)
    assert p1.read_bytes() == p2.read_bytes()


def test_bad_magic_rejected(tmp_path):
    p = tmp_path / "junk.ckpt"
    p.write_bytes(b"NOTACKPT" + b"\x00" * 32)
    with pytest.raises(IngestionError):
        load_checkpoint(p)


def test_truncated_file_rejected(tmp_path):
    p = tmp_path / "model.ckpt"
    save_checkpoint(p, {"a": np.ones(100)}, {})
    raw = p.read_bytes()
    p.write_bytes(raw[: len(raw) - 8])
    with pytest.raises(IngestionError):
        load_checkpoint(p)


def test_unsupported_dtype_rejected(tmp_path):
    with pytest.raises(IngestionError):
        save_checkpoint(tmp_path / "x.ckpt", {"a": np.arange(3)}, {})
