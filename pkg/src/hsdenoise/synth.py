"""Synthetic ground-truth cubes with known mixture factors.

Generates exact low-rank cubes: smooth nonnegative abundance maps
(Gaussian-filtered seeded noise, rescaled to [0, 1]) combined with smooth
positive spectra (sums of Gaussian bumps over the band axis). Signatures
are rescaled so the assembled cube peaks at 1, and the returned cube is
computed from the returned factors, so the factorisation holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .cube import AbundanceMap, Cube, Signature, outer_accumulate


@dataclass(frozen=True)
class SynthSpec:
    i: int = 32
    j: int = 32
    k: int = 16
    r: int = 3
    spatial_smoothness: float = 4.0
    spectral_smoothness: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if min(self.i, self.j, self.k, self.r) < 1:
            raise ValueError("dims and rank must be positive")
        if self.r > min(self.k, self.i * self.j):
            raise ValueError(f"rank {self.r} exceeds min(K, I*J) = {min(self.k, self.i * self.j)}")
        if self.spatial_smoothness <= 0 or self.spectral_smoothness <= 0:
            raise ValueError("smoothness scales must be positive")


def _smooth_map(rng, i, j, sigma) -> np.ndarray:
    field = gaussian_filter(rng.standard_normal((i, j)), sigma=sigma, mode="reflect")
    lo, hi = field.min(), field.max()
    if hi - lo < 1e-12:
        return np.full((i, j), 0.5)
    return (field - lo) / (hi - lo)


def _bump_spectrum(rng, k, width, segment: tuple[float, float]) -> np.ndarray:
    """Smooth positive curve whose dominant bump sits inside ``segment``.

    Giving each endmember its own band segment keeps the signatures well
    separated, so the assembled cube has R clearly resolvable components
    instead of one dominant mean spectrum.
    """
    bands = np.arange(k, dtype=np.float64)
    spectrum = np.full(k, 0.02)  # positive floor keeps spectra bounded away from zero
    lo, hi = segment
    center = rng.uniform(lo, hi)
    sigma = width * rng.uniform(0.8, 1.4)
    spectrum += rng.uniform(0.7, 1.0) * np.exp(-((bands - center) ** 2) / (2.0 * sigma * sigma))
    # a weaker secondary bump anywhere adds realism without destroying separation
    center2 = rng.uniform(0, k - 1)
    sigma2 = width * rng.uniform(0.8, 1.6)
    spectrum += rng.uniform(0.05, 0.2) * np.exp(-((bands - center2) ** 2) / (2.0 * sigma2 * sigma2))
    return spectrum


def make_lmm_cube(spec: SynthSpec) -> tuple[Cube, list[AbundanceMap], list[Signature]]:
    """Exact rank-R ground truth cube plus its factors."""
    rng = np.random.default_rng(spec.seed)
    maps = [_smooth_map(rng, spec.i, spec.j, spec.spatial_smoothness) for _ in range(spec.r)]
    edges = np.linspace(0, spec.k - 1, spec.r + 1)
    segments = [(edges[r], edges[r + 1]) for r in range(spec.r)]
    sigs = [
        _bump_spectrum(rng, spec.k, spec.spectral_smoothness, segments[r])
        for r in range(spec.r)
    ]
    peak = outer_accumulate(maps, sigs).data.max()
    sigs = [s / peak for s in sigs]
    wrapped_maps = [AbundanceMap(m) for m in maps]
    wrapped_sigs = [Signature(s) for s in sigs]
    return outer_accumulate(wrapped_maps, wrapped_sigs), wrapped_maps, wrapped_sigs
