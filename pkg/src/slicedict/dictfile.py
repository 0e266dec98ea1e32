"""On-disk container for a learned local dictionary.

Layout (all integers little-endian):

    bytes 0-3   magic "SBDL"
    bytes 4-5   format version (currently 1), u16
    bytes 6-7   filter side f, u16
    bytes 8-11  atom count m, u32
    bytes 12-   n*m IEEE-754 float64 values, little-endian, one atom
                after another (column-major for an (n, m) matrix,
                n = f*f)

Atoms are unit-norm; both directions validate that to 1e-8 so a file
produced here always decodes to a usable dictionary bit-exactly.
"""

from __future__ import annotations

import math
import struct

import numpy as np

MAGIC = b"SBDL"
VERSION = 1
_HEADER = struct.Struct("<4sHHI")
_NORM_TOL = 1e-8


class DictionaryFileError(ValueError):
    """Malformed dictionary container content."""


def _validate(D) -> np.ndarray:
    D = np.ascontiguousarray(D, dtype=np.float64)
    if D.ndim != 2 or D.size == 0:
        raise DictionaryFileError("dictionary must be a non-empty 2-D array")
    n, m = D.shape
    f = math.isqrt(n)
    if f * f != n:
        raise DictionaryFileError(f"row count {n} is not a square filter area")
    norms = np.linalg.norm(D, axis=0)
    if np.any(np.abs(norms - 1.0) > _NORM_TOL):
        worst = float(np.abs(norms - 1.0).max())
        raise DictionaryFileError(f"atoms not unit-norm (worst deviation {worst:.3g})")
    return D


def write_dictionary(path, D) -> None:
    """Serialize an (n, m) unit-norm dictionary."""
    D = _validate(D)
    n, m = D.shape
    f = math.isqrt(n)
    payload = D.ravel(order="F").astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, f, m) + payload)


def read_dictionary(path) -> np.ndarray:
    """Decode a dictionary container back to its (n, m) float64 matrix."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise DictionaryFileError("file shorter than the header")
    magic, version, f, m = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DictionaryFileError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DictionaryFileError(f"unsupported format version {version}")
    if f == 0 or m == 0:
        raise DictionaryFileError("empty dictionary dimensions")
    n = f * f
    expected = _HEADER.size + 8 * n * m
    if len(data) != expected:
        raise DictionaryFileError(
            f"payload size mismatch: file has {len(data)} bytes, want {expected}"
        )
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    D = flat.reshape((n, m), order="F").astype(np.float64)
    return _validate(D)


def dictionary_mosaic(D, pad: int = 1, pad_value: float = 0.5) -> np.ndarray:
    """Tile atoms on a near-square grid for visual inspection.

    Each atom is min-max normalized to [0, 1] on its own (a constant
    atom renders mid-gray), so shapes stay visible regardless of scale.
    Returns a float image ready for a graymap writer.
    """
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.size == 0:
        raise DictionaryFileError("dictionary must be a non-empty 2-D array")
    n, m = D.shape
    f = math.isqrt(n)
    if f * f != n:
        raise DictionaryFileError(f"row count {n} is not a square filter area")
    if pad < 0:
        raise DictionaryFileError("pad must be >= 0")
    cols = math.ceil(math.sqrt(m))
    rows = math.ceil(m / cols)
    height = rows * f + (rows + 1) * pad
    width = cols * f + (cols + 1) * pad
    canvas = np.full((height, width), float(pad_value))
    for j in range(m):
        atom = D[:, j].reshape(f, f)
        lo, hi = atom.min(), atom.max()
        tile = np.full((f, f), 0.5) if hi == lo else (atom - lo) / (hi - lo)
        r, c = divmod(j, cols)
        top = pad + r * (f + pad)
        left = pad + c * (f + pad)
        canvas[top : top + f, left : left + f] = tile
    return canvas
