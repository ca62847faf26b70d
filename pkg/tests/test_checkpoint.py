import numpy as np
import pytest

from qcdiff.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from qcdiff.errors import CheckpointError


def test_bit_exact_roundtrip(tmp_path, rng):
    tensors = {
        "enc1.weight": rng.normal(size=(32, 1, 3, 3)),
        "enc1.bias": rng.normal(size=32),
        "qattn.weights": rng.uniform(-np.pi, np.pi, size=(3, 16)),
        "scalar": np.array(3.14159),
    }
    manifest = {"kind": "checkpoint", "seed": 7, "schedule": {"timesteps": 200, "s": 0.008},
                "ansatz": "ry_variational"}
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, manifest, tensors)
    got_manifest, got_tensors = load_checkpoint(path)
    assert got_manifest == manifest
    assert set(got_tensors) == set(tensors)
    for name, arr in tensors.items():
        assert got_tensors[name].shape == np.asarray(arr).shape
        assert np.array_equal(got_tensors[name], arr), name
        assert got_tensors[name].tobytes() == np.ascontiguousarray(arr, "<f8").tobytes()


def test_double_roundtrip_is_byte_identical(tmp_path, rng):
    tensors = {"w": rng.normal(size=(4, 5))}
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(p1, {"kind": "checkpoint"}, tensors)
    manifest, loaded = load_checkpoint(p1)
    save_checkpoint(p2, manifest, loaded)
    assert p1.read_bytes() == p2.read_bytes()


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_truncated_tensor_names_field(tmp_path, rng):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, {"kind": "checkpoint"}, {"enc1.weight": rng.normal(size=(8, 8))})
    blob = path.read_bytes()
    bad = tmp_path / "cut.ckpt"
    bad.write_bytes(blob[:-17])
    with pytest.raises(CheckpointError, match="enc1.weight"):
        load_checkpoint(bad)


def test_trailing_bytes_rejected(tmp_path, rng):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, {}, {"w": rng.normal(size=3)})
    bad = tmp_path / "extra.ckpt"
    bad.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(bad)


def test_corrupt_manifest(tmp_path, rng):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, {"k": 1}, {"w": rng.normal(size=3)})
    blob = bytearray(path.read_bytes())
    blob[len(MAGIC) + 8] = 0xFF  # stomp the first manifest byte
    bad = tmp_path / "mangled.ckpt"
    bad.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="manifest"):
        load_checkpoint(bad)


def test_unsupported_version(tmp_path, rng):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, {}, {"w": rng.normal(size=3)})
    blob = bytearray(path.read_bytes())
    blob[len(MAGIC)] = 99
    bad = tmp_path / "v99.ckpt"
    bad.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(bad)
