"""Portable graymap/pixmap files (P2/P5 grayscale, P3/P6 color).

Readers accept both the ASCII and binary variants, header comments, and
16-bit samples (stored big-endian in the binary forms, per the format).
Writers emit the binary variants. Sample values are kept as integers
against their maxval; float conversion helpers live alongside so policy
decisions (like the mask threshold) stay in one place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_GRAY_MAGICS = {b"P2", b"P5"}
_RGB_MAGICS = {b"P3", b"P6"}


@dataclass(frozen=True)
class PnmImage:
    """Decoded samples plus the scale they are quantized against.

    samples has shape (H, W) for graymaps and (H, W, 3) for pixmaps,
    dtype uint8 or uint16.
    """

    samples: np.ndarray
    maxval: int

    @property
    def is_color(self) -> bool:
        return self.samples.ndim == 3

    def to_float(self) -> np.ndarray:
        """Samples rescaled to [0, 1]."""
        return self.samples.astype(np.float64) / float(self.maxval)


class PnmError(ValueError):
    """Malformed or unsupported portable-map content."""


def _tokens(data: bytes, count: int, start: int):
    """Yield `count` whitespace-separated tokens, honouring # comments.

    Returns (tokens, next_offset). The offset points one byte past the
    final token's trailing whitespace character, which for the binary
    formats is where the raster begins.
    """
    toks = []
    i = start
    n = len(data)
    while len(toks) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        if j == i:
            raise PnmError("truncated header")
        toks.append(data[i:j])
        i = j
    if i >= n or not data[i : i + 1].isspace():
        raise PnmError("missing whitespace after header")
    return toks, i + 1


def _ascii_samples(data: bytes, offset: int, count: int) -> np.ndarray:
    # Comments are legal between ASCII samples as well.
    stripped = []
    for line in data[offset:].splitlines():
        head, _, _ = line.partition(b"#")
        stripped.append(head)
    values = b" ".join(stripped).split()
    if len(values) < count:
        raise PnmError("truncated ASCII raster")
    if len(values) > count:
        raise PnmError("trailing data after ASCII raster")
    try:
        return np.array([int(v) for v in values], dtype=np.int64)
    except ValueError as exc:
        raise PnmError(f"non-numeric raster value: {exc}") from None


def read_pnm(path) -> PnmImage:
    """Decode a P2/P3/P5/P6 file."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in _GRAY_MAGICS | _RGB_MAGICS:
        raise PnmError(f"unsupported magic {magic!r} (want P2, P3, P5 or P6)")
    channels = 3 if magic in _RGB_MAGICS else 1
    (w_tok, h_tok, max_tok), offset = _tokens(data, 3, 2)
    width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    if width <= 0 or height <= 0:
        raise PnmError("non-positive dimensions")
    if not 0 < maxval < 65536:
        raise PnmError(f"maxval {maxval} out of range [1, 65535]")
    count = width * height * channels

    if magic in (b"P2", b"P3"):
        flat = _ascii_samples(data, offset, count)
    else:
        wide = maxval > 255
        nbytes = count * (2 if wide else 1)
        raster = data[offset : offset + nbytes]
        if len(raster) < nbytes:
            raise PnmError("truncated binary raster")
        if len(data) > offset + nbytes:
            raise PnmError("trailing data after binary raster")
        dtype = ">u2" if wide else np.uint8
        flat = np.frombuffer(raster, dtype=dtype).astype(np.int64)

    if flat.min() < 0 or flat.max() > maxval:
        raise PnmError("sample outside [0, maxval]")
    dtype = np.uint16 if maxval > 255 else np.uint8
    shape = (height, width, 3) if channels == 3 else (height, width)
    return PnmImage(flat.astype(dtype).reshape(shape), maxval)


def _quantize(values, maxval: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise PnmError("cannot quantize non-finite values")
    scaled = np.clip(np.rint(arr * maxval), 0, maxval)
    return scaled.astype(np.uint16 if maxval > 255 else np.uint8)


def _write(path, magic: bytes, samples: np.ndarray, maxval: int) -> None:
    header = b"%s\n%d %d\n%d\n" % (magic, samples.shape[1], samples.shape[0], maxval)
    if maxval > 255:
        raster = samples.astype(">u2").tobytes()
    else:
        raster = samples.astype(np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(header + raster)


def write_pgm(path, values, maxval: int = 255) -> None:
    """Write a [0, 1] float image as a binary graymap (P5)."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise PnmError("graymap wants a 2-D array")
    if not 0 < maxval < 65536:
        raise PnmError(f"maxval {maxval} out of range [1, 65535]")
    _write(path, b"P5", _quantize(arr, maxval), maxval)


def write_ppm(path, values, maxval: int = 255) -> None:
    """Write a [0, 1] float image of shape (H, W, 3) as a binary pixmap (P6)."""
    arr = np.asarray(values)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise PnmError("pixmap wants an (H, W, 3) array")
    if not 0 < maxval < 65536:
        raise PnmError(f"maxval {maxval} out of range [1, 65535]")
    _write(path, b"P6", _quantize(arr, maxval), maxval)


def observation_mask(img: PnmImage) -> np.ndarray:
    """Binary mask from a graymap: a pixel is observed iff its stored
    value exceeds 127 (so 0/255 masks behave as expected)."""
    if img.is_color:
        raise PnmError("mask must be a graymap, not a pixmap")
    return (img.samples.astype(np.int64) > 127).astype(np.float64)
