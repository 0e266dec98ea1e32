"""Patch bookkeeping on zero-padded images.

Every pixel-aligned f x f window of the (f-1)-padded image is a "slice
position". The two core linear maps are extraction (image -> stack of
patch vectors) and its adjoint, aggregation (stack -> image, overlapping
patches summed). Together they satisfy aggregate(extract(x)) == n * x
with n = f * f, which the training engine relies on.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class PatchGeometry:
    """Image height/width plus the square filter side length.

    Slice positions are the top-left corners of all f x f windows of the
    zero-padded image (f - 1 extra pixels per side), laid out row-major
    on a (height + f - 1) x (width + f - 1) grid.
    """

    height: int
    width: int
    filter_size: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("image dimensions must be positive")
        if self.filter_size < 1:
            raise ValueError("filter_size must be >= 1")

    @property
    def pad(self) -> int:
        return self.filter_size - 1

    @property
    def grid_shape(self) -> tuple[int, int]:
        """Rows/cols of the slice-position grid."""
        return (self.height + self.pad, self.width + self.pad)

    @property
    def num_slices(self) -> int:
        gh, gw = self.grid_shape
        return gh * gw

    @property
    def patch_dim(self) -> int:
        """Length n = f * f of a vectorized patch."""
        return self.filter_size * self.filter_size


def _check_image(x, geom: PatchGeometry) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (geom.height, geom.width):
        raise ValueError(
            f"image shape {x.shape} does not match geometry "
            f"({geom.height}, {geom.width})"
        )
    return x


def extract_patch(x, geom: PatchGeometry, index: int) -> np.ndarray:
    """Return the vectorized padded patch at one slice position.

    Reads outside the image count as zeros. Row-major within the patch,
    matching `extract_slices`. Raises IndexError for an out-of-range
    position index.
    """
    x = _check_image(x, geom)
    gh, gw = geom.grid_shape
    if not 0 <= index < geom.num_slices:
        raise IndexError(f"slice index {index} out of range [0, {geom.num_slices})")
    r, c = divmod(index, gw)
    f, p = geom.filter_size, geom.pad
    out = np.zeros(geom.patch_dim)
    for dy in range(f):
        yy = r + dy - p
        if not 0 <= yy < geom.height:
            continue
        for dx in range(f):
            xx = c + dx - p
            if 0 <= xx < geom.width:
                out[dy * f + dx] = x[yy, xx]
    return out


def place_patch_accumulate(acc, geom: PatchGeometry, index: int, patch) -> None:
    """Add a patch back into an image accumulator (adjoint of extract_patch).

    Contributions that fall on padding are discarded. Modifies `acc` in
    place; `acc` must already have the image shape.
    """
    acc = np.asarray(acc)
    if acc.shape != (geom.height, geom.width):
        raise ValueError("accumulator shape does not match geometry")
    patch = np.asarray(patch, dtype=np.float64).reshape(-1)
    if patch.shape[0] != geom.patch_dim:
        raise ValueError(f"patch must have length {geom.patch_dim}")
    gh, gw = geom.grid_shape
    if not 0 <= index < geom.num_slices:
        raise IndexError(f"slice index {index} out of range [0, {geom.num_slices})")
    r, c = divmod(index, gw)
    f, p = geom.filter_size, geom.pad
    for dy in range(f):
        yy = r + dy - p
        if not 0 <= yy < geom.height:
            continue
        for dx in range(f):
            xx = c + dx - p
            if 0 <= xx < geom.width:
                acc[yy, xx] += patch[dy * f + dx]


def extract_slices(x, geom: PatchGeometry) -> np.ndarray:
    """Extract every padded patch at once.

    Parameters
    ----------
    x : array, shape (height, width)
    geom : PatchGeometry

    Returns
    -------
    array, shape (n, num_slices)
        Column i is the vectorized patch at slice position i (row-major
        grid order, row-major within the patch).
    """
    x = _check_image(x, geom)
    f, p = geom.filter_size, geom.pad
    padded = np.zeros((geom.height + 2 * p, geom.width + 2 * p))
    padded[p : p + geom.height, p : p + geom.width] = x
    # windows[r, c] is the f x f patch whose top-left padded pixel is (r, c)
    windows = sliding_window_view(padded, (f, f))
    gh, gw = geom.grid_shape
    assert windows.shape[:2] == (gh, gw)
    return windows.reshape(geom.num_slices, geom.patch_dim).T.copy()


def aggregate(slices, geom: PatchGeometry) -> np.ndarray:
    """Sum all patches back into an image (adjoint of extract_slices).

    Implemented as n shifted adds into a padded accumulator, then a crop
    back to the image support, so cost is O(n * num_slices).
    """
    slices = np.asarray(slices, dtype=np.float64)
    if slices.shape != (geom.patch_dim, geom.num_slices):
        raise ValueError(
            f"slices must have shape ({geom.patch_dim}, {geom.num_slices}), "
            f"got {slices.shape}"
        )
    f, p = geom.filter_size, geom.pad
    gh, gw = geom.grid_shape
    acc = np.zeros((geom.height + 2 * p, geom.width + 2 * p))
    grids = slices.reshape(f, f, gh, gw)
    for dy in range(f):
        for dx in range(f):
            acc[dy : dy + gh, dx : dx + gw] += grids[dy, dx]
    return acc[p : p + geom.height, p : p + geom.width].copy()


def preprocess(x) -> np.ndarray:
    """Zero-mean, unit-variance version of an image.

    Subtracts the mean and divides by the population standard deviation.
    A constant image cannot be contrast-normalized; it is only mean
    subtracted and a warning is emitted.
    """
    x = np.asarray(x, dtype=np.float64)
    centered = x - x.mean()
    sd = x.std()
    if sd == 0.0:
        warnings.warn("constant image: skipping contrast normalization")
        return centered
    return centered / sd


def psnr(reference, estimate) -> float:
    """Peak signal-to-noise ratio in dB, 20*log10(sqrt(N)/||err||_2).

    N is the pixel count. Identical inputs give +inf.
    """
    reference = np.asarray(reference, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if reference.shape != estimate.shape:
        raise ValueError("reference and estimate shapes differ")
    err = np.linalg.norm((reference - estimate).ravel())
    if err == 0.0:
        return math.inf
    return 20.0 * math.log10(math.sqrt(reference.size) / err)
