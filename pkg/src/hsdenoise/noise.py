"""Seeded synthesis of the six benchmark corruption scenarios.

Case 1: dense zero-mean Gaussian noise on every band.
Case 2: Case 1 plus dense zero-mean Laplacian impulse noise.
Case 3: Case 2 plus deadlines (zeroed vertical pixel columns) on a
        random subset of bands.
Case 4: Case 2 plus all-ones diagonal stripes on a random band subset.
Case 5: Case 2 plus constant-valued vertical stripes on a band subset.
Case 6: Case 2 plus deadlines, diagonal stripes, and vertical stripes.

Structured overwrites are applied before the additive noise, so stripes
and deadlines are themselves noisy in the corrupted output. ``corrupt``
also returns a mask cube flagging every overwritten entry.

All functions are pure and draw from generators seeded per call, so
identical (cube, spec, seed) triples give identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import Cube
from .errors import ConfigError

CASES = (1, 2, 3, 4, 5, 6)


@dataclass(frozen=True)
class NoiseSpec:
    case: int = 1
    gaussian_variance: float = 0.1
    laplace_density: float = 0.1
    affected_band_fraction: float = 0.3
    deadline_count: tuple[int, int] = (10, 15)
    deadline_width: tuple[int, int] = (1, 3)
    diag_stripe_count: tuple[int, int] = (15, 30)
    vert_stripe_count: tuple[int, int] = (10, 15)
    vert_stripe_value: tuple[float, float] = (0.6, 0.8)
    seed: int = 0

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigError(f"unknown noise case {self.case}; expected one of {CASES}")
        if self.gaussian_variance < 0:
            raise ConfigError("gaussian_variance must be >= 0")
        if self.laplace_density <= 0:
            raise ConfigError("laplace_density must be > 0")
        if not 0.0 <= self.affected_band_fraction <= 1.0:
            raise ConfigError("affected_band_fraction must lie in [0, 1]")
        for name in ("deadline_count", "deadline_width", "diag_stripe_count",
                     "vert_stripe_count", "vert_stripe_value"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ConfigError(f"{name} range {lo}..{hi} is not ordered")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _select_bands(rng, k: int, fraction: float) -> np.ndarray:
    """Random subset of round(fraction*K) distinct bands."""
    count = int(round(fraction * k))
    return np.sort(rng.choice(k, size=count, replace=False))


def add_gaussian(c: Cube, variance: float, seed) -> Cube:
    if variance < 0:
        raise ValueError("variance must be >= 0")
    if variance == 0:
        return c
    rng = _rng(seed)
    return Cube(c.data + rng.normal(0.0, np.sqrt(variance), size=c.data.shape))


def add_impulse(c: Cube, density: float, seed) -> Cube:
    """Add i.i.d. Laplace(0, density) noise; density is the Laplace scale."""
    if density <= 0:
        raise ValueError("density must be > 0")
    rng = _rng(seed)
    return Cube(c.data + rng.laplace(0.0, density, size=c.data.shape))


def _apply_deadlines(data, mask, rng, spec: NoiseSpec):
    k, i, j = data.shape
    for band in _select_bands(rng, k, spec.affected_band_fraction):
        lo, hi = spec.deadline_count
        n = int(rng.integers(lo, hi + 1))
        n = min(n, j)
        starts = rng.choice(j, size=n, replace=False)
        for start in starts:
            width = int(rng.integers(spec.deadline_width[0], spec.deadline_width[1] + 1))
            stop = min(start + width, j)
            data[band, :, start:stop] = 0.0
            mask[band, :, start:stop] = True


def _apply_diag_stripes(data, mask, rng, spec: NoiseSpec):
    k, i, j = data.shape
    offsets_all = np.arange(-(i - 1), j)  # diagonal d touches (r, r+d)
    for band in _select_bands(rng, k, spec.affected_band_fraction):
        lo, hi = spec.diag_stripe_count
        n = min(int(rng.integers(lo, hi + 1)), offsets_all.size)
        offsets = rng.choice(offsets_all, size=n, replace=False)
        for d in offsets:
            rows = np.arange(max(0, -d), min(i, j - d))
            data[band, rows, rows + d] = 1.0
            mask[band, rows, rows + d] = True


def _apply_vert_stripes(data, mask, rng, spec: NoiseSpec):
    k, i, j = data.shape
    for band in _select_bands(rng, k, spec.affected_band_fraction):
        lo, hi = spec.vert_stripe_count
        n = min(int(rng.integers(lo, hi + 1)), j)
        cols = rng.choice(j, size=n, replace=False)
        values = rng.uniform(spec.vert_stripe_value[0], spec.vert_stripe_value[1], size=n)
        for col, val in zip(cols, values):
            data[band, :, col] = val
            mask[band, :, col] = True


def add_deadlines(c: Cube, spec: NoiseSpec, seed) -> Cube:
    data = np.array(c.data)
    mask = np.zeros(data.shape, dtype=bool)
    _apply_deadlines(data, mask, _rng(seed), spec)
    return Cube(data)


def add_diag_stripes(c: Cube, spec: NoiseSpec, seed) -> Cube:
    data = np.array(c.data)
    mask = np.zeros(data.shape, dtype=bool)
    _apply_diag_stripes(data, mask, _rng(seed), spec)
    return Cube(data)


def add_vert_stripes(c: Cube, spec: NoiseSpec, seed) -> Cube:
    data = np.array(c.data)
    mask = np.zeros(data.shape, dtype=bool)
    _apply_vert_stripes(data, mask, _rng(seed), spec)
    return Cube(data)


# Which structured components each case applies, in fixed order:
# deadlines, then diagonal stripes, then vertical stripes.
_STRUCTURED = {
    1: (),
    2: (),
    3: ("deadlines",),
    4: ("diag",),
    5: ("vert",),
    6: ("deadlines", "diag", "vert"),
}
_APPLIERS = {
    "deadlines": _apply_deadlines,
    "diag": _apply_diag_stripes,
    "vert": _apply_vert_stripes,
}


def corrupt(c: Cube, spec: NoiseSpec) -> tuple[Cube, Cube]:
    """Apply the full corruption for ``spec.case``.

    Returns (corrupted cube, mask cube). The mask holds 1.0 wherever a
    structured overwrite (deadline or stripe) touched the entry; additive
    noise affects every entry and is not masked.
    """
    if spec.case not in CASES:
        raise ConfigError(f"unknown noise case {spec.case}")
    root = np.random.SeedSequence(spec.seed)
    keys = ("deadlines", "diag", "vert", "gaussian", "impulse")
    rngs = dict(zip(keys, (np.random.default_rng(s) for s in root.spawn(len(keys)))))

    data = np.array(c.data)
    mask = np.zeros(data.shape, dtype=bool)
    for component in _STRUCTURED[spec.case]:
        _APPLIERS[component](data, mask, rngs[component], spec)
    out = Cube(data)
    out = add_gaussian(out, spec.gaussian_variance, rngs["gaussian"])
    if spec.case >= 2:
        out = add_impulse(out, spec.laplace_density, rngs["impulse"])
    return out, Cube(mask.astype(np.float64))
