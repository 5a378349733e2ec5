"""WAV, JSON sidecar and CSV helpers.

Audio is stored as 32-bit float WAV with a JSON sidecar next to it.  The
sidecar never carries timestamps so identical runs give identical files.
"""
import hashlib
import json
import math
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from . import __version__
from .rir import RIR


def _plain(obj):
    """JSON-safe copy: numpy scalars and arrays become Python types, non-finite floats strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)  # 'inf', '-inf', 'nan'
    return obj


def to_json(obj):
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def config_hash(cfg):
    """Short SHA-256 of a configuration's canonical JSON form."""
    blob = json.dumps(_plain(cfg), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def file_digest(path):
    """Short SHA-256 of a file's bytes."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def provenance(cfg, seed):
    return {"tool_version": __version__, "config_hash": config_hash(cfg), "seed": seed}


def write_json(path, obj):
    Path(path).write_text(to_json(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def write_wav(path, data, fs):
    """Write (channels, samples) or (samples,) data as float32 WAV."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float32))
    if not float(fs).is_integer():
        raise ValueError("WAV needs an integer sample rate")
    wavfile.write(str(path), int(fs), data.T if data.shape[0] > 1 else data[0])


def read_wav(path):
    """(data (channels, samples) float64, fs)."""
    fs, x = wavfile.read(str(path))
    x = np.asarray(x)
    if x.dtype.kind == "i":
        x = x / float(np.iinfo(x.dtype).max)
    x = np.atleast_2d(x.astype(float).T) if x.ndim > 1 else x.astype(float)[None, :]
    return x, fs


def sidecar_path(wav_path):
    return Path(wav_path).with_suffix(".json")


def save_rir(rir, wav_path, info=None):
    """WAV plus sidecar with t_d, manipulations, tail seed and ``info``."""
    write_wav(wav_path, rir.data, rir.fs)
    meta = dict(info or {})
    meta.update({"fs": rir.fs, "t_direct": rir.t_direct, "manipulations": rir.manipulations,
                 "tail_seed": rir.tail_seed, "channels": rir.n_channels, "meta": rir.meta})
    if getattr(rir, "t_direct_ears", None) is not None:
        meta["t_direct_ears"] = list(rir.t_direct_ears)
    write_json(sidecar_path(wav_path), meta)
    return meta


def load_rir(wav_path):
    """Read a response written by :func:`save_rir` (sidecar optional)."""
    data, fs = read_wav(wav_path)
    side = sidecar_path(wav_path)
    meta = read_json(side) if side.exists() else {}
    return RIR(data, fs, t_direct=meta.get("t_direct"),
               manipulations=meta.get("manipulations", []),
               tail_seed=meta.get("tail_seed"), meta=meta.get("meta", {})), meta
