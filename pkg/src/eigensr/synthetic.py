"""Synthetic hyperspectral test scenes.

Scenes are linear mixtures of a few smooth endmember spectra with
spatially band-limited abundance maps, so they are spectrally low-rank
and carry no energy above a chosen spatial frequency.
"""

from __future__ import annotations

import numpy as np

from .cube import HsiCube, cube_from_matrix


def smooth_spectra(n: int, bands: int, rng) -> np.ndarray:
    """``n x bands`` positive spectra built from a few Gaussian bumps."""
    grid = np.linspace(0.0, 1.0, bands)
    spectra = np.empty((n, bands))
    for k in range(n):
        s = np.full(bands, rng.uniform(0.05, 0.3))
        for _ in range(rng.integers(1, 4)):
            center, width = rng.uniform(-0.1, 1.1), rng.uniform(0.08, 0.4)
            s += rng.uniform(0.2, 1.0) * np.exp(-0.5 * ((grid - center) / width) ** 2)
        spectra[k] = s
    return spectra


def band_limited_field(height: int, width: int, cutoff: float, rng, decay: float = 1.0) -> np.ndarray:
    """Real random field whose spectrum vanishes above ``cutoff`` cycles per image.

    Amplitudes fall off as ``|f|**-decay``; phases are uniform.  The field is
    scaled to zero mean and unit standard deviation.
    """
    fy = np.fft.fftfreq(height) * height
    fx = np.fft.rfftfreq(width) * width
    radius = np.hypot(fy[:, None], fx[None, :])
    amp = np.where((radius > 0) & (radius <= cutoff), np.maximum(radius, 1.0) ** -decay, 0.0)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=amp.shape)
    field = np.fft.irfft2(amp * np.exp(1j * phase), s=(height, width))
    field -= field.mean()
    std = field.std()
    return field / std if std > 0 else field


def band_limited_cube(
    bands: int = 31,
    height: int = 64,
    width: int = 64,
    rng=None,
    endmembers: int = 4,
    cutoff: float = 12.0,
    decay: float = 1.0,
) -> HsiCube:
    """Low-rank, spatially band-limited cube with values in ``[0, 1]``.

    Each endmember abundance is a constant plus a band-limited field; the
    mixture is linear, so the cube stays band-limited after the final
    shift and rescale.
    """
    rng = np.random.default_rng(rng)
    spectra = smooth_spectra(endmembers, bands, rng)
    fields = np.stack([band_limited_field(height, width, cutoff, rng, decay) for _ in range(endmembers)])
    abundances = 1.0 / endmembers + 0.5 / endmembers * fields
    Y = spectra.T @ abundances.reshape(endmembers, -1)
    Y -= Y.min()
    return cube_from_matrix(Y / Y.max(), height, width)


def low_rank_cube(bands: int, height: int, width: int, rank: int, rng=None) -> HsiCube:
    """Random cube of exact rank ``rank`` (Gaussian factors)."""
    rng = np.random.default_rng(rng)
    Y = rng.standard_normal((bands, rank)) @ rng.standard_normal((rank, height * width))
    return cube_from_matrix(Y, height, width)
