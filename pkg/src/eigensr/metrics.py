"""Full-reference quality metrics for hyperspectral cubes.

PSNR and SSIM are computed band by band and averaged; SAM is the mean
per-pixel spectral angle in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SAM_EPS = 1e-12


def _as_array(cube):
    return np.asarray(getattr(cube, "data", cube), dtype=np.float64)


def _pair(pred, ref):
    pred, ref = _as_array(pred), _as_array(ref)
    if pred.shape != ref.shape:
        raise ValueError(f"geometry mismatch: {pred.shape} vs {ref.shape}")
    if pred.ndim != 3:
        raise ValueError(f"expected (bands, height, width) cubes, got shape {pred.shape}")
    return pred, ref


def _peak(ref, peak):
    peak = float(ref.max()) if peak is None else float(peak)
    if not peak > 0:
        raise ValueError(f"peak must be positive, got {peak}")
    return peak


def _finite_mean(values):
    finite = values[np.isfinite(values)]
    return float(finite.mean()) if finite.size else math.inf


def psnr(pred, ref, peak: float | None = None):
    """Per-band PSNR in dB and their mean.

    Bands with zero error get ``inf`` and are left out of the mean; if every
    band is exact the mean is ``inf`` too.  Returns ``(mean, per_band)``.
    """
    pred, ref = _pair(pred, ref)
    peak = _peak(ref, peak)
    mse = np.mean((pred - ref) ** 2, axis=(1, 2))
    with np.errstate(divide="ignore"):
        per_band = np.where(mse > 0, 10.0 * np.log10(peak**2 / np.where(mse > 0, mse, 1.0)), np.inf)
    return _finite_mean(per_band), per_band


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian taps; the 2-D window is their outer product."""
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def _filter_valid(img, g):
    k = g.size
    rows = sliding_window_view(img, k, axis=0) @ g
    return sliding_window_view(rows, k, axis=1) @ g


def _ssim_band(x, y, g, c1, c2):
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    num = (2.0 * mx * my + c1) * (2.0 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(pred, ref, peak: float | None = None):
    """Per-band single-scale SSIM and their mean; returns ``(mean, per_band)``.

    11x11 Gaussian window (sigma 1.5), ``C1 = (0.01 peak)^2``,
    ``C2 = (0.03 peak)^2``, averaged over the valid (unpadded) region.
    """
    pred, ref = _pair(pred, ref)
    if min(pred.shape[1:]) < SSIM_WINDOW:
        raise ValueError(f"bands must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {pred.shape[1]}x{pred.shape[2]}")
    peak = _peak(ref, peak)
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    g = gaussian_window()
    per_band = np.array([_ssim_band(p, r, g, c1, c2) for p, r in zip(pred, ref)])
    return float(per_band.mean()), per_band


def sam(pred, ref):
    """Mean spectral angle in degrees; returns ``(mean, degenerate_pixel_count)``.

    Pixels where either spectrum is (numerically) zero contribute 0 degrees.
    """
    pred, ref = _pair(pred, ref)
    if pred.shape[0] < 2:
        raise ValueError("spectral angle needs at least 2 bands")
    P = pred.reshape(pred.shape[0], -1)
    Q = ref.reshape(ref.shape[0], -1)
    dot = np.sum(P * Q, axis=0)
    # sqrt of the product keeps identical spectra at exactly cos = 1
    norms = np.sqrt(np.sum(P * P, axis=0) * np.sum(Q * Q, axis=0))
    degenerate = norms < SAM_EPS
    cos = np.clip(dot / np.where(degenerate, 1.0, norms), -1.0, 1.0)
    angles = np.where(degenerate, 0.0, np.degrees(np.arccos(cos)))
    return float(angles.mean()), int(degenerate.sum())


@dataclass
class MetricReport:
    psnr: float
    ssim: float
    sam: float
    peak: float
    psnr_per_band: np.ndarray = field(repr=False)
    ssim_per_band: np.ndarray = field(repr=False)
    psnr_exact_bands: int = 0
    sam_degenerate_pixels: int = 0

    def to_dict(self) -> dict:
        """JSON-ready dict; infinite PSNR values are written as ``"+inf"``."""

        def num(v):
            v = float(v)
            return "+inf" if v == math.inf else v

        return {
            "psnr": num(self.psnr),
            "ssim": float(self.ssim),
            "sam": float(self.sam),
            "peak": float(self.peak),
            "psnr_per_band": [num(v) for v in self.psnr_per_band],
            "ssim_per_band": [float(v) for v in self.ssim_per_band],
            "psnr_exact_bands": self.psnr_exact_bands,
            "sam_degenerate_pixels": self.sam_degenerate_pixels,
        }


def evaluate(pred, ref, peak: float | None = None) -> MetricReport:
    """All three metrics with a shared peak (default: the reference maximum)."""
    pred, ref = _pair(pred, ref)
    peak = _peak(ref, peak)
    p_mean, p_bands = psnr(pred, ref, peak)
    s_mean, s_bands = ssim(pred, ref, peak)
    angle, degenerate = sam(pred, ref)
    return MetricReport(
        psnr=p_mean,
        ssim=s_mean,
        sam=angle,
        peak=peak,
        psnr_per_band=p_bands,
        ssim_per_band=s_bands,
        psnr_exact_bands=int(np.sum(~np.isfinite(p_bands))),
        sam_degenerate_pixels=degenerate,
    )
