import json

import numpy as np
import pytest

from bmldroom.io import (config_hash, file_digest, provenance, read_wav, sidecar_path, to_json,
                         write_wav)


def test_wav_roundtrip_float32(tmp_path, rng):
    x = rng.uniform(-0.9, 0.9, size=(2, 1000))
    p = tmp_path / "x.wav"
    write_wav(p, x, 44100)
    y, fs = read_wav(p)
    assert fs == 44100 and y.shape == x.shape
    assert np.allclose(y, x, atol=1e-7)


def test_wav_mono_and_bad_rate(tmp_path):
    p = tmp_path / "m.wav"
    write_wav(p, np.zeros(10), 8000)
    y, _ = read_wav(p)
    assert y.shape == (1, 10)
    with pytest.raises(ValueError):
        write_wav(p, np.zeros(10), 8000.5)


def test_json_non_finite_and_numpy():
    d = json.loads(to_json({"a": float("inf"), "b": np.float64("nan"), "c": np.arange(2)}))
    assert d == {"a": "inf", "b": "nan", "c": [0, 1]}


def test_config_hash_stable_and_order_free():
    a = config_hash({"x": 1, "y": [1.5, 2]})
    assert a == config_hash({"y": [1.5, 2], "x": 1})
    assert a != config_hash({"x": 2, "y": [1.5, 2]})
    assert len(a) == 16
    p = provenance({"x": 1}, 7)
    assert set(p) == {"tool_version", "config_hash", "seed"} and p["seed"] == 7


def test_sidecar_path():
    assert sidecar_path("a/b.wav").name == "b.json"


def test_file_digest_depends_on_content_only(tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "sub"
    b.mkdir()
    b = b / "b.bin"
    a.write_bytes(b"xyz")
    b.write_bytes(b"xyz")
    assert file_digest(a) == file_digest(b)
    b.write_bytes(b"xyw")
    assert file_digest(a) != file_digest(b)
