"""Alternating solver fitting mixture-factor generators to one noisy cube.

Objective: ``||X - sum_r S_r (x) c_r - Y||_F^2 + lambda * ||Y||_1`` where
the abundance maps S_r and signatures c_r come from the generator
networks and Y collects sparse outliers (stripes, deadlines, impulses).

Each iteration takes one Adam step on all network parameters with Y held
fixed, then solves the Y subproblem exactly via entrywise
soft-thresholding at lambda/2. The denoised estimate is the final
reconstruction from the factors alone; Y is reported separately.

``lam == 0`` drops the outlier variable entirely (Y stays zero and only
the quadratic fit is minimised); otherwise the exact Y minimiser would
absorb the whole residual and the objective would be degenerate.

Inputs are rescaled by their peak magnitude before solving, since the
sigmoid head bounds abundances in [0, 1]; returned signatures and
outliers are scaled back, so the reconstruction identity
``denoised == sum_r map_r (x) sig_r`` holds exactly in the original units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import autodiff as ad
from .cube import AbundanceMap, Cube, Signature, outer_accumulate
from .errors import DivergenceError, ShapeMismatchError
from .metrics import psnr
from .networks import (
    LatentInput,
    SharedSpatialGenerator,
    SpatialGenerator,
    SpatialNetConfig,
    SpectralGenerator,
    SpectralNetConfig,
    make_latent_input,
)

ProgressFn = Callable[[int, float, Optional[float]], None]


@dataclass(frozen=True)
class SolverConfig:
    rank: int = 3
    lam: float = 0.01
    iters: int = 1000
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    spatial: SpatialNetConfig = field(default_factory=SpatialNetConfig)
    spectral_input: int = 16
    spectral_hidden: int = 32
    share_params: bool = False
    snapshot_stride: int = 25
    # ablation switches: replace a generator family by directly trained
    # nonnegative factors, projected after every step
    spatial_prior: bool = True
    spectral_prior: bool = True

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.iters < 0:
            raise ValueError("iteration budget must be >= 0")
        if self.lam < 0:
            raise ValueError("sparsity weight must be >= 0")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")


DIVERGENCE_FACTOR = 100.0


def soft_threshold(x, delta: float):
    """sgn(x) * max(|x| - delta, 0), entrywise on arrays, scalar on scalars."""
    if delta < 0:
        raise ValueError("soft-threshold level must be >= 0")
    if np.isscalar(x):
        return float(np.sign(x) * max(abs(x) - delta, 0.0))
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - delta, 0.0)


def update_outliers(x: Cube, recon: Cube, lam: float) -> Cube:
    """Exact minimiser of the objective in Y for a fixed reconstruction."""
    if x.data.shape != recon.data.shape:
        raise ShapeMismatchError(f"cube dims differ: {x.dims} vs {recon.dims}")
    return Cube(soft_threshold(x.data - recon.data, lam / 2.0))


class _FreeFactor:
    """Directly trained nonnegative array standing in for one generator."""

    def __init__(self, name: str, shape, seed: int, low: float, high: float):
        self.store = ad.ParamStore()
        rng = np.random.default_rng(seed)
        self.param = self.store.add(name, rng.uniform(low, high, size=shape))

    def forward(self) -> ad.Node:
        return self.param

    def clip(self):
        self.param.value = np.maximum(self.param.value, 0.0)


@dataclass
class SolverState:
    """Mutable state of one solve, in the solver's normalised units."""

    abundance_fns: list
    signature_fns: list
    stores: list
    clip_fns: list
    latents: list[LatentInput]
    outliers: np.ndarray
    t: int = 0
    loss_history: list[float] = field(default_factory=list)
    scale: float = 1.0
    initial_loss: float | None = None
    map_values: list[np.ndarray] | None = None
    sig_values: list[np.ndarray] | None = None
    recon: np.ndarray | None = None
    _maps_nodes: list | None = None
    _sigs_nodes: list | None = None


@dataclass(frozen=True)
class DenoiseResult:
    denoised: Cube
    outliers: Cube
    loss_trace: np.ndarray
    maps: list[AbundanceMap]
    signatures: list[Signature]


def _assemble(map_values, sig_values) -> np.ndarray:
    r = len(map_values)
    i, j = map_values[0].shape
    k = sig_values[0].shape[0]
    m = np.stack(map_values).reshape(r, i * j)
    c = np.stack(sig_values)
    return (c.T @ m).reshape(k, i, j)


def init_state(x: Cube, cfg: SolverConfig) -> SolverState:
    """Seeded generators, latent inputs, and a zero outlier cube."""
    i, j, k = x.dims
    if cfg.spatial_prior:
        cfg.spatial.check_dims(i, j)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(3 * cfg.rank + 1)
    latents = [
        make_latent_input(cfg.spatial.in_channels, i, j, cfg.spectral_input, int(seeds[r]))
        for r in range(cfg.rank)
    ]

    abundance_fns = []
    signature_fns = []
    stores = []
    clip_fns = []

    if cfg.spatial_prior:
        if cfg.share_params:
            shared = SharedSpatialGenerator(cfg.spatial, cfg.rank, int(seeds[3 * cfg.rank]))
            stores.append(shared.store)
            for r in range(cfg.rank):
                abundance_fns.append(
                    lambda r=r: shared.forward(r, latents[r])
                )
        else:
            for r in range(cfg.rank):
                gen = SpatialGenerator(cfg.spatial, int(seeds[cfg.rank + r]))
                stores.append(gen.store)
                abundance_fns.append(lambda gen=gen, r=r: gen.forward(latents[r]))
    else:
        for r in range(cfg.rank):
            free = _FreeFactor(f"map{r}", (i, j), int(seeds[cfg.rank + r]), 0.2, 0.8)
            stores.append(free.store)
            clip_fns.append(free.clip)
            abundance_fns.append(free.forward)

    spec_cfg = SpectralNetConfig(cfg.spectral_input, cfg.spectral_hidden, k)
    if cfg.spectral_prior:
        for r in range(cfg.rank):
            gen = SpectralGenerator(spec_cfg, int(seeds[2 * cfg.rank + r]))
            stores.append(gen.store)
            signature_fns.append(lambda gen=gen, r=r: gen.forward(latents[r]))
    else:
        for r in range(cfg.rank):
            free = _FreeFactor(f"sig{r}", (k,), int(seeds[2 * cfg.rank + r]), 0.1, 1.0)
            stores.append(free.store)
            clip_fns.append(free.clip)
            signature_fns.append(free.forward)

    state = SolverState(
        abundance_fns=abundance_fns,
        signature_fns=signature_fns,
        stores=stores,
        clip_fns=clip_fns,
        latents=latents,
        outliers=np.zeros_like(x.data),
    )
    _refresh_forward(state)
    return state


def _refresh_forward(state: SolverState):
    state._maps_nodes = [f() for f in state.abundance_fns]
    state._sigs_nodes = [f() for f in state.signature_fns]
    state.map_values = [n.value for n in state._maps_nodes]
    state.sig_values = [n.value for n in state._sigs_nodes]
    state.recon = _assemble(state.map_values, state.sig_values)


def loss_value(x: Cube, state: SolverState, lam: float) -> float:
    """Current objective value: squared misfit plus the weighted L1 of Y."""
    maps = [f().value for f in state.abundance_fns]
    sigs = [f().value for f in state.signature_fns]
    diff = x.data - _assemble(maps, sigs) - state.outliers
    return float((diff * diff).sum() + lam * np.abs(state.outliers).sum())


def step_networks(x: Cube, state: SolverState, cfg: SolverConfig):
    """One Adam step on every generator with Y held fixed.

    Reuses the forward pass cached by the previous step (the forward does
    not depend on Y), then refreshes the cache from the updated
    parameters so ``state.recon`` always reflects current weights.
    """
    if state._maps_nodes is None:
        _refresh_forward(state)
    data_node = ad.lmm_fit_loss(state._maps_nodes, state._sigs_nodes, x.data - state.outliers)
    total = float(data_node.value) + cfg.lam * float(np.abs(state.outliers).sum())
    if not np.isfinite(total):
        raise DivergenceError(
            f"non-finite loss at iteration {state.t}",
            loss_trace=state.loss_history,
            iteration=state.t,
        )
    ad.backward(data_node)
    for store in state.stores:
        ad.adam_step(store, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    for clip in state.clip_fns:
        clip()
    _refresh_forward(state)


def run(
    x: Cube,
    cfg: SolverConfig,
    progress: ProgressFn | None = None,
    reference: Cube | None = None,
) -> DenoiseResult:
    """Full alternating solve; returns the reconstruction and diagnostics.

    ``progress`` is invoked every ``cfg.snapshot_stride`` iterations (and
    at the last one) with (iteration, loss, metric) where metric is the
    MPSNR against ``reference`` when one is supplied.
    """
    if reference is not None and reference.data.shape != x.data.shape:
        raise ShapeMismatchError(f"reference dims {reference.dims} differ from input {x.dims}")
    scale = float(np.abs(x.data).max())
    if scale == 0.0:
        scale = 1.0
    xn = Cube(x.data / scale)
    state = init_state(xn, cfg)
    state.scale = scale

    diff0 = xn.data - state.recon
    state.initial_loss = float((diff0 * diff0).sum())
    guard = DIVERGENCE_FACTOR * max(state.initial_loss, 1e-12)

    for t in range(1, cfg.iters + 1):
        step_networks(xn, state, cfg)
        if cfg.lam > 0:
            state.outliers = soft_threshold(xn.data - state.recon, cfg.lam / 2.0)
        resid = xn.data - state.recon - state.outliers
        loss_t = float((resid * resid).sum() + cfg.lam * np.abs(state.outliers).sum())
        state.t = t
        state.loss_history.append(loss_t)
        if not np.isfinite(loss_t) or loss_t > guard:
            raise DivergenceError(
                f"loss diverged at iteration {t}: {loss_t!r} (initial {state.initial_loss!r})",
                loss_trace=state.loss_history,
                iteration=t,
            )
        if progress is not None and (t % cfg.snapshot_stride == 0 or t == cfg.iters):
            metric = None
            if reference is not None:
                metric = psnr(reference, Cube(state.recon * scale))[0]
            progress(t, loss_t, metric)

    maps = [AbundanceMap(m) for m in state.map_values]
    signatures = [Signature(s * scale) for s in state.sig_values]
    denoised = outer_accumulate(maps, signatures)
    return DenoiseResult(
        denoised=denoised,
        outliers=Cube(state.outliers * scale),
        loss_trace=np.asarray(state.loss_history),
        maps=maps,
        signatures=signatures,
    )
