"""Color plumbing: BT.601 luma and the sRGB ↔ CIELAB round trip.

All conversions take and return float arrays; RGB values live in
[0, 1]. The Lab conversion uses the D65 reference white and the
standard sRGB transfer curve, so pure white maps to L = 100,
a = b = 0.
"""

from __future__ import annotations

import numpy as np

# D65 reference white in XYZ, Y normalized to 1.
WHITE_X = 0.95047
WHITE_Y = 1.0
WHITE_Z = 1.08883

# Linear-RGB -> XYZ for sRGB primaries, D65 white.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)

_DELTA = 6.0 / 29.0


def bt601_luma(rgb) -> np.ndarray:
    """ITU-R BT.601 weighted luminance of an (H, W, 3) image."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("luma wants an (H, W, 3) array")
    return rgb @ np.array([0.299, 0.587, 0.114])


def _srgb_to_linear(c):
    c = np.asarray(c, dtype=np.float64)
    return np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)


def _linear_to_srgb(c):
    c = np.asarray(c, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        high = 1.055 * np.clip(c, 0.0, None) ** (1.0 / 2.4) - 0.055
    return np.where(c > 0.0031308, high, 12.92 * c)


def _lab_f(t):
    return np.where(t > _DELTA**3, np.cbrt(t), t / (3.0 * _DELTA**2) + 4.0 / 29.0)


def _lab_f_inv(t):
    return np.where(t > _DELTA, t**3, 3.0 * _DELTA**2 * (t - 4.0 / 29.0))


def srgb_to_lab(rgb):
    """(H, W, 3) sRGB in [0, 1] → (L, a, b) arrays, L in [0, 100]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("conversion wants an (H, W, 3) array")
    xyz = _srgb_to_linear(rgb) @ _RGB_TO_XYZ.T
    fx = _lab_f(xyz[..., 0] / WHITE_X)
    fy = _lab_f(xyz[..., 1] / WHITE_Y)
    fz = _lab_f(xyz[..., 2] / WHITE_Z)
    return 116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)


def lab_to_srgb(L, a, b):
    """Inverse of srgb_to_lab; output clipped to [0, 1]."""
    L = np.asarray(L, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    fy = (L + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    xyz = np.stack(
        [WHITE_X * _lab_f_inv(fx), WHITE_Y * _lab_f_inv(fy), WHITE_Z * _lab_f_inv(fz)],
        axis=-1,
    )
    rgb = _linear_to_srgb(xyz @ _XYZ_TO_RGB.T)
    return np.clip(rgb, 0.0, 1.0)
