"""On-disk formats: binary cubes, key=value configs, manifests, exports.

Cube files carry a 20-byte header (magic ``HSC1``, version, dims, dtype
tag) followed by the band-major float32 little-endian payload. Storage is
single precision for economy; all in-memory arithmetic stays float64.

Config files are plain ``key=value`` lines; ``#`` starts a comment.
Unknown keys are rejected with the offending line number so typos never
silently change a run.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .cube import Cube
from .errors import ConfigError, ShapeMismatchError

MAGIC = b"HSC1"
VERSION = 1
DTYPE_F32 = 1
_HEADER = struct.Struct("<4sHIIIH")


def save_cube(c: Cube, path):
    """Write a cube in the binary format; values are quantised to float32."""
    i, j, k = c.dims
    payload = c.data.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, i, j, k, DTYPE_F32))
        fh.write(payload)


def load_cube(path) -> Cube:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ConfigError(f"{path}: truncated cube header")
        magic, version, i, j, k, dtype = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ConfigError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise ConfigError(f"{path}: unsupported version {version}")
        if dtype != DTYPE_F32:
            raise ConfigError(f"{path}: unsupported dtype tag {dtype}")
        payload = fh.read()
    expected = 4 * i * j * k
    if len(payload) != expected:
        raise ConfigError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(k, i, j)
    return Cube(data)


def parse_config_text(text: str, known_keys, source: str = "<config>") -> dict[str, str]:
    """Parse key=value lines; reject unknown keys with line numbers."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known_keys:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path, known_keys) -> dict[str, str]:
    return parse_config_text(Path(path).read_text(), known_keys, source=str(path))


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def write_manifest(path, entries: dict):
    lines = [f"{key}={format_value(value)}" for key, value in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def export_band(c: Cube, k: int, path):
    """Write band k as an 8-bit grayscale image, [min, max] mapped to [0, 255]."""
    band = c.band(k)
    lo, hi = float(band.min()), float(band.max())
    if hi > lo:
        scaled = np.round((band - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(band)
    Image.fromarray(scaled.astype(np.uint8), mode="L").save(path)


def export_spectrum(c: Cube, i: int, j: int, path):
    """Write the (i, j) pixel spectrum as a band,value CSV."""
    ii, jj, _ = c.dims
    if not (0 <= i < ii and 0 <= j < jj):
        raise IndexError(f"pixel ({i}, {j}) out of range for {ii}x{jj} image")
    spectrum = c.spectrum(i, j)
    lines = ["band,value"] + [f"{k},{v!r}" for k, v in enumerate(spectrum)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_spectrum_csv(path) -> np.ndarray:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != "band,value":
        raise ConfigError(f"{path}: not a spectrum CSV")
    return np.array([float(line.split(",")[1]) for line in lines[1:]])
