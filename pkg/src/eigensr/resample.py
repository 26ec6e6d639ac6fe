"""Separable bicubic resampling by integer factors.

Both directions use the Keys cubic convolution kernel (a = -0.5) with
half-pixel centred grids and edge-replicated borders.  Downsampling
stretches the kernel by the scale factor (anti-aliasing); upsampling uses
the plain 4-tap kernel.  Every operator is linear and is materialized as a
pair of small 1-D weight matrices, ``out = Wy @ img @ Wx.T``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .cube import HsiCube

KEYS_A = -0.5


def keys_kernel(x, a=KEYS_A):
    """Keys cubic convolution kernel evaluated at ``x``."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    inner = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    outer = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return np.where(x <= 1.0, inner, np.where(x < 2.0, outer, 0.0))


def _weights(n_in, n_out, scale, stretch):
    """Row-normalized ``n_out x n_in`` interpolation matrix.

    Output sample ``i`` sits at source coordinate ``(i + 0.5) / scale - 0.5``.
    ``stretch`` widens the kernel (``stretch = 1/scale`` when shrinking).
    """
    support = 2.0 * stretch
    centers = (np.arange(n_out) + 0.5) / scale - 0.5
    taps = int(np.ceil(2 * support)) + 2
    first = np.floor(centers - support).astype(np.intp) + 1
    W = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for k in range(taps):
        src = first + k
        w = keys_kernel((centers - src) / stretch)
        np.add.at(W, (rows, np.clip(src, 0, n_in - 1)), w)
    W /= W.sum(axis=1, keepdims=True)
    W.flags.writeable = False
    return W


@lru_cache(maxsize=64)
def downsample_matrix(n: int, scale: int) -> np.ndarray:
    """``(n // scale) x n`` anti-aliased bicubic decimation weights."""
    return _weights(n, n // scale, 1.0 / scale, float(scale))


@lru_cache(maxsize=64)
def upsample_matrix(n: int, scale: int) -> np.ndarray:
    """``(n * scale) x n`` bicubic interpolation weights."""
    return _weights(n, n * scale, float(scale), 1.0)


def _check_scale(scale):
    if int(scale) != scale or scale < 2:
        raise ValueError(f"scale must be an integer >= 2, got {scale}")
    return int(scale)


def _apply(img, Wy, Wx):
    # works for (H, W) and (C, H, W)
    return np.matmul(np.matmul(Wy, img), Wx.T)


def bicubic_downsample(img, scale: int) -> np.ndarray:
    """Shrink a 2-D image (or a stack of them) by ``scale`` along both axes."""
    scale = _check_scale(scale)
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[-2:]
    if h % scale or w % scale:
        raise ValueError(f"image size {h}x{w} is not divisible by scale {scale}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return _apply(img, downsample_matrix(h, scale), downsample_matrix(w, scale))


def bicubic_upsample(img, scale: int) -> np.ndarray:
    """Enlarge a 2-D image (or a stack of them) by ``scale`` along both axes."""
    scale = _check_scale(scale)
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[-2:]
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return _apply(img, upsample_matrix(h, scale), upsample_matrix(w, scale))


def operator_matrix(h: int, w: int, scale: int, direction: str = "down") -> np.ndarray:
    """Dense matrix ``M`` with ``vec(out) = M @ vec(img)`` (row-major vec).

    The transpose of the ``down`` matrix is the right-multiplying operator
    ``D`` in ``Y_LR = Y_HR D`` for band-major matrices.
    """
    scale = _check_scale(scale)
    if direction == "down":
        Wy, Wx = downsample_matrix(h, scale), downsample_matrix(w, scale)
    elif direction == "up":
        Wy, Wx = upsample_matrix(h, scale), upsample_matrix(w, scale)
    else:
        raise ValueError(f"direction must be 'down' or 'up', got {direction!r}")
    return np.kron(Wy, Wx)


def downsample_cube(cube, scale: int):
    """Band-wise :func:`bicubic_downsample` of an :class:`~eigensr.cube.HsiCube`."""
    return HsiCube(bicubic_downsample(cube.data, scale))


def upsample_cube(cube, scale: int):
    """Band-wise :func:`bicubic_upsample` of an :class:`~eigensr.cube.HsiCube`."""
    return HsiCube(bicubic_upsample(cube.data, scale))
