"""Untrained generator networks for the two mixture factors.

Two families:

* hourglass spatial generators: an asymmetric encoder/decoder with
  stride-2 convolutions down, nearest-neighbour upsampling back up, and
  narrow skip connections at every scale. A sigmoid head keeps each
  abundance map in [0, 1].
* spectral generators: three affine layers with ReLU between them and a
  softplus head, so signatures stay nonnegative. Spectra are smooth 1-D
  curves and need very little capacity.

A parameter-shared variant reuses one spatial trunk for all R maps and
gives each map its own 1x1 output head; with independent latent inputs
per map the heads still produce distinct abundances.

All builders are seeded and parameter names are stable, so equal seeds
give bit-identical networks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ShapeMismatchError


@dataclass(frozen=True)
class SpatialNetConfig:
    """Hourglass layout.

    ``channels`` are the encoder widths per scale; ``up_channels`` the
    decoder widths (defaults to the encoder widths). Spatial inputs must
    be divisible by 2**num_scales.
    """

    num_scales: int = 3
    channels: tuple[int, ...] = (8, 16, 32)
    up_channels: tuple[int, ...] | None = None
    kernel_size: int = 3
    skip_channels: int = 4
    in_channels: int = 4
    slope: float = 0.1

    def __post_init__(self):
        if self.num_scales < 1:
            raise ValueError("num_scales must be >= 1")
        if len(self.channels) != self.num_scales:
            raise ValueError("channels must list one width per scale")
        if any(c <= 0 for c in self.channels):
            raise ValueError("channel widths must be positive")
        if self.up_channels is not None and len(self.up_channels) != self.num_scales:
            raise ValueError("up_channels must list one width per scale")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and positive")
        if self.skip_channels < 1 or self.in_channels < 1:
            raise ValueError("skip_channels and in_channels must be positive")

    @property
    def decoder_channels(self) -> tuple[int, ...]:
        return self.up_channels if self.up_channels is not None else self.channels

    def check_dims(self, i: int, j: int):
        div = 2**self.num_scales
        if i % div or j % div:
            raise ShapeMismatchError(
                f"spatial dims {i}x{j} must be divisible by 2^{self.num_scales}"
            )


@dataclass(frozen=True)
class SpectralNetConfig:
    """Three-affine-layer spectrum generator: input -> hidden -> hidden -> K."""

    input_size: int = 16
    hidden: int = 32
    output_size: int = 16

    def __post_init__(self):
        if min(self.input_size, self.hidden, self.output_size) < 1:
            raise ValueError("all spectral net sizes must be positive")


# Sized so five independent spatial nets land near 2.15M trainables.
REFERENCE_SPATIAL = SpatialNetConfig(
    num_scales=5,
    channels=(16, 32, 64, 128, 128),
    up_channels=(16, 32, 64, 64, 64),
    kernel_size=3,
    skip_channels=4,
    in_channels=8,
    slope=0.1,
)
REFERENCE_SPECTRAL_INPUT = 64
REFERENCE_SPECTRAL_HIDDEN = 128

# Small configs for fast experiments and tests.
DESK_SPATIAL = SpatialNetConfig()
DESK_SPECTRAL_INPUT = 16
DESK_SPECTRAL_HIDDEN = 32

LATENT_LOW, LATENT_HIGH = -0.05, 0.05


@dataclass(frozen=True)
class LatentInput:
    """Fixed seeded noise inputs for one endmember's generators."""

    spatial: np.ndarray  # (C_in, I, J)
    spectral: np.ndarray  # (N_s,)
    seed: int

    def __post_init__(self):
        sp = np.asarray(self.spatial, dtype=np.float64)
        sv = np.asarray(self.spectral, dtype=np.float64)
        sp.setflags(write=False)
        sv.setflags(write=False)
        object.__setattr__(self, "spatial", sp)
        object.__setattr__(self, "spectral", sv)


def make_latent_input(in_channels: int, i: int, j: int, spectral_size: int, seed: int) -> LatentInput:
    rng = np.random.default_rng(seed)
    return LatentInput(
        spatial=rng.uniform(LATENT_LOW, LATENT_HIGH, size=(in_channels, i, j)),
        spectral=rng.uniform(LATENT_LOW, LATENT_HIGH, size=spectral_size),
        seed=seed,
    )


def _he_conv(rng, cout, cin, kh, kw):
    std = np.sqrt(2.0 / (cin * kh * kw))
    return std * rng.standard_normal((cout, cin, kh, kw))


def _he_linear(rng, out_dim, in_dim):
    std = np.sqrt(2.0 / in_dim)
    return std * rng.standard_normal((out_dim, in_dim))


def _add_conv(store, rng, name, cin, cout, k, with_norm=True):
    store.add(f"{name}.w", _he_conv(rng, cout, cin, k, k))
    store.add(f"{name}.b", np.zeros(cout))
    if with_norm:
        store.add(f"{name}.g", np.ones(cout))
        store.add(f"{name}.beta", np.zeros(cout))


def _conv_block(store, x, name, stride, padding, slope):
    y = ad.conv2d(x, store[f"{name}.w"], store[f"{name}.b"], stride=stride, padding=padding)
    y = ad.channel_norm(y, store[f"{name}.g"], store[f"{name}.beta"])
    return ad.leaky_relu(y, slope)


def _build_trunk_params(store: ad.ParamStore, cfg: SpatialNetConfig, rng):
    k = cfg.kernel_size
    dec = cfg.decoder_channels
    cin = cfg.in_channels
    for i in range(cfg.num_scales):
        _add_conv(store, rng, f"enc{i}", cin, cfg.channels[i], k)
        _add_conv(store, rng, f"skip{i}", cin, cfg.skip_channels, 1)
        cin = cfg.channels[i]
    for i in reversed(range(cfg.num_scales)):
        deeper = cfg.channels[-1] if i == cfg.num_scales - 1 else dec[i + 1]
        _add_conv(store, rng, f"dec{i}", cfg.skip_channels + deeper, dec[i], k)


def _add_head(store: ad.ParamStore, cfg: SpatialNetConfig, rng, name="head"):
    store.add(f"{name}.w", _he_conv(rng, 1, cfg.decoder_channels[0], 1, 1))
    store.add(f"{name}.b", np.zeros(1))


def _forward_trunk(store: ad.ParamStore, cfg: SpatialNetConfig, z: np.ndarray) -> ad.Node:
    if z.ndim != 3 or z.shape[0] != cfg.in_channels:
        raise ShapeMismatchError(
            f"latent field has shape {z.shape}, expected ({cfg.in_channels}, I, J)"
        )
    cfg.check_dims(z.shape[1], z.shape[2])
    pad = cfg.kernel_size // 2
    x = ad.constant(z)
    skips = []
    for i in range(cfg.num_scales):
        skips.append(_conv_block(store, x, f"skip{i}", 1, 0, cfg.slope))
        x = _conv_block(store, x, f"enc{i}", 2, pad, cfg.slope)
    for i in reversed(range(cfg.num_scales)):
        x = ad.upsample_nearest(x, 2)
        x = ad.concat_channels(skips[i], x)
        x = _conv_block(store, x, f"dec{i}", 1, pad, cfg.slope)
    return x


def _forward_head(store: ad.ParamStore, x: ad.Node, name="head") -> ad.Node:
    y = ad.sigmoid(ad.conv2d(x, store[f"{name}.w"], store[f"{name}.b"]))
    return ad.reshape(y, y.value.shape[1:])


class SpatialGenerator:
    """Hourglass network mapping a fixed noise field to one abundance map."""

    def __init__(self, cfg: SpatialNetConfig, seed: int):
        self.cfg = cfg
        self.store = ad.ParamStore()
        rng = np.random.default_rng(seed)
        _build_trunk_params(self.store, cfg, rng)
        _add_head(self.store, cfg, rng)

    def forward(self, z) -> ad.Node:
        """Abundance map node with values in [0, 1]; shape (I, J)."""
        field = z.spatial if isinstance(z, LatentInput) else np.asarray(z, dtype=np.float64)
        return _forward_head(self.store, _forward_trunk(self.store, self.cfg, field))

    def __call__(self, z) -> np.ndarray:
        return self.forward(z).value


class SharedSpatialGenerator:
    """One trunk shared across R abundance maps, with per-map 1x1 heads."""

    def __init__(self, cfg: SpatialNetConfig, r: int, seed: int):
        if r < 1:
            raise ValueError("need at least one head")
        self.cfg = cfg
        self.r = r
        self.store = ad.ParamStore()
        rng = np.random.default_rng(seed)
        _build_trunk_params(self.store, cfg, rng)
        for idx in range(r):
            _add_head(self.store, cfg, rng, name=f"head{idx}")

    def forward(self, idx: int, z) -> ad.Node:
        if not 0 <= idx < self.r:
            raise IndexError(f"head index {idx} out of range [0, {self.r})")
        field = z.spatial if isinstance(z, LatentInput) else np.asarray(z, dtype=np.float64)
        trunk = _forward_trunk(self.store, self.cfg, field)
        return _forward_head(self.store, trunk, name=f"head{idx}")

    def __call__(self, idx: int, z) -> np.ndarray:
        return self.forward(idx, z).value


class SpectralGenerator:
    """Three-layer fully connected network producing one nonnegative spectrum."""

    def __init__(self, cfg: SpectralNetConfig, seed: int):
        self.cfg = cfg
        self.store = ad.ParamStore()
        rng = np.random.default_rng(seed)
        sizes = [(cfg.hidden, cfg.input_size), (cfg.hidden, cfg.hidden), (cfg.output_size, cfg.hidden)]
        for i, (out_dim, in_dim) in enumerate(sizes):
            self.store.add(f"fc{i}.w", _he_linear(rng, out_dim, in_dim))
            self.store.add(f"fc{i}.b", np.zeros(out_dim))

    def forward(self, w) -> ad.Node:
        """Signature node with nonnegative values; shape (K,)."""
        vec = w.spectral if isinstance(w, LatentInput) else np.asarray(w, dtype=np.float64)
        if vec.shape != (self.cfg.input_size,):
            raise ShapeMismatchError(
                f"latent vector has shape {vec.shape}, expected ({self.cfg.input_size},)"
            )
        h = ad.constant(vec)
        h = ad.relu(ad.linear(h, self.store["fc0.w"], self.store["fc0.b"]))
        h = ad.relu(ad.linear(h, self.store["fc1.w"], self.store["fc1.b"]))
        return ad.softplus(ad.linear(h, self.store["fc2.w"], self.store["fc2.b"]))

    def __call__(self, w) -> np.ndarray:
        return self.forward(w).value


def build_spatial(cfg: SpatialNetConfig, seed: int) -> ad.ParamStore:
    """Seeded parameter store for one independent hourglass network."""
    return SpatialGenerator(cfg, seed).store


def build_shared_spatial(cfg: SpatialNetConfig, r: int, seed: int) -> ad.ParamStore:
    """Seeded store for a shared trunk plus r output heads."""
    return SharedSpatialGenerator(cfg, r, seed).store


def build_spectral(cfg: SpectralNetConfig, seed: int) -> ad.ParamStore:
    return SpectralGenerator(cfg, seed).store


def spatial_param_count(cfg: SpatialNetConfig) -> int:
    """Closed-form trainable count of one independent hourglass network."""
    k2 = cfg.kernel_size**2
    dec = cfg.decoder_channels
    total = 0
    cin = cfg.in_channels
    for i in range(cfg.num_scales):
        c = cfg.channels[i]
        total += c * cin * k2 + c + 2 * c  # enc conv + bias + norm affine
        total += cfg.skip_channels * cin + 3 * cfg.skip_channels  # 1x1 skip + norm
        cin = c
    for i in reversed(range(cfg.num_scales)):
        deeper = cfg.channels[-1] if i == cfg.num_scales - 1 else dec[i + 1]
        total += dec[i] * (cfg.skip_channels + deeper) * k2 + 3 * dec[i]
    total += dec[0] + 1  # 1x1 sigmoid head
    return total


def spectral_param_count(cfg: SpectralNetConfig) -> int:
    return (
        cfg.hidden * cfg.input_size
        + cfg.hidden
        + cfg.hidden * cfg.hidden
        + cfg.hidden
        + cfg.output_size * cfg.hidden
        + cfg.output_size
    )
