"""Quantitative evaluation of a denoised cube against a reference.

Conventions (the common choices for [0, 1]-normalised data, applied
uniformly so numbers are comparable across runs):

* PSNR is computed per band with peak 1.0 by default and averaged over
  bands (MPSNR); a band with zero error reports the 100 dB cap.
* SSIM uses an 11x11 Gaussian window (sigma 1.5), stabilisers
  C1=(0.01*L)^2 and C2=(0.03*L)^2 with L=1, local statistics over the
  valid window positions only, averaged per band and then over bands.
* SAM is the mean per-pixel angle in radians between reference and test
  spectra; pixels where either spectrum has zero norm are skipped.
* SNR is the ratio of reference energy to error energy in dB.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import Cube
from .errors import ShapeMismatchError

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _check_pair(ref: Cube, test: Cube):
    if ref.data.shape != test.data.shape:
        raise ShapeMismatchError(f"cube dims differ: {ref.dims} vs {test.dims}")


def psnr(ref: Cube, test: Cube, peak: float = 1.0) -> tuple[float, np.ndarray]:
    """Mean and per-band peak signal-to-noise ratio in dB."""
    _check_pair(ref, test)
    if peak <= 0:
        raise ValueError("peak must be positive")
    err = ref.data - test.data
    mse = (err * err).mean(axis=(1, 2))
    per_band = np.full(mse.shape, PSNR_CAP_DB)
    nz = mse > 0
    per_band[nz] = 10.0 * np.log10(peak * peak / mse[nz])
    return float(per_band.mean()), per_band


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def _windowed_mean(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(img, kernel.shape)
    return np.tensordot(win, kernel, axes=([2, 3], [0, 1]))


def ssim(ref: Cube, test: Cube, peak: float = 1.0) -> tuple[float, np.ndarray]:
    """Mean and per-band structural similarity."""
    _check_pair(ref, test)
    i, j, k = ref.dims
    if i < SSIM_WINDOW or j < SSIM_WINDOW:
        raise ShapeMismatchError(
            f"image {i}x{j} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    kernel = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    per_band = np.empty(k)
    for band in range(k):
        x = ref.data[band]
        y = test.data[band]
        mx = _windowed_mean(x, kernel)
        my = _windowed_mean(y, kernel)
        vx = _windowed_mean(x * x, kernel) - mx * mx
        vy = _windowed_mean(y * y, kernel) - my * my
        cxy = _windowed_mean(x * y, kernel) - mx * my
        num = (2 * mx * my + c1) * (2 * cxy + c2)
        den = (mx * mx + my * my + c1) * (vx + vy + c2)
        per_band[band] = (num / den).mean()
    return float(per_band.mean()), per_band


def sam(ref: Cube, test: Cube, with_skipped: bool = False):
    """Mean spectral angle in radians; zero-norm pixels are skipped."""
    _check_pair(ref, test)
    i, j, k = ref.dims
    x = ref.data.reshape(k, i * j)
    y = test.data.reshape(k, i * j)
    nx = np.linalg.norm(x, axis=0)
    ny = np.linalg.norm(y, axis=0)
    valid = (nx > 0) & (ny > 0)
    if not valid.any():
        raise ValueError("spectral angle undefined: every pixel has a zero-norm spectrum")
    cos = (x[:, valid] * y[:, valid]).sum(axis=0) / (nx[valid] * ny[valid])
    angle = float(np.arccos(np.clip(cos, -1.0, 1.0)).mean())
    if with_skipped:
        return angle, int((~valid).sum())
    return angle


def snr(clean: Cube, noisy: Cube) -> float:
    """Signal-to-noise ratio 10*log10(||clean||^2 / ||noisy - clean||^2) in dB."""
    _check_pair(clean, noisy)
    signal = float((clean.data * clean.data).sum())
    err = noisy.data - clean.data
    noise_pow = float((err * err).sum())
    if noise_pow == 0:
        return PSNR_CAP_DB
    return 10.0 * np.log10(signal / noise_pow)


@dataclass(frozen=True)
class MetricReport:
    mpsnr: float
    psnr_bands: np.ndarray
    mssim: float
    ssim_bands: np.ndarray
    sam_rad: float
    snr_db: float

    def to_csv(self) -> str:
        lines = ["metric,value"]
        lines.append(f"mpsnr_db,{self.mpsnr!r}")
        lines.append(f"mssim,{self.mssim!r}")
        lines.append(f"sam_rad,{self.sam_rad!r}")
        lines.append(f"snr_db,{self.snr_db!r}")
        lines.append("band,psnr_db,ssim")
        for k, (p, s) in enumerate(zip(self.psnr_bands, self.ssim_bands)):
            lines.append(f"{k},{p!r},{s!r}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        return (
            f"MPSNR: {self.mpsnr:.3f} dB\n"
            f"MSSIM: {self.mssim:.4f}\n"
            f"SAM:   {self.sam_rad:.4f} rad\n"
            f"SNR:   {self.snr_db:.3f} dB\n"
        )


def evaluate(ref: Cube, test: Cube, peak: float = 1.0) -> MetricReport:
    """Full metric report comparing ``test`` against the reference."""
    mpsnr, pb = psnr(ref, test, peak)
    mssim, sb = ssim(ref, test, peak)
    return MetricReport(
        mpsnr=mpsnr,
        psnr_bands=pb,
        mssim=mssim,
        ssim_bands=sb,
        sam_rad=sam(ref, test),
        snr_db=snr(ref, test),
    )
