"""Command-line front end.

Subcommands: ``simulate`` (corrupt a cube or a synthetic ground truth),
``denoise`` (run the solver), ``evaluate`` (metric report), ``sweep``
(metric vs rank or sparsity weight), ``ablate`` (prior/sparsity ablation
runs), and the ``export-band`` / ``export-spectrum`` helpers.

Values may come from a ``key=value`` config file (``--config``) and be
overridden by explicit flags. Every key that affects the output is echoed
into the run manifest.

Exit codes: 0 success, 2 config/parse error, 3 shape error, 4 solver
divergence, 1 anything else.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import fileio, metrics, noise, solver, synth
from .cube import Cube
from .errors import ConfigError, DivergenceError, ShapeMismatchError
from .networks import SpatialNetConfig, spatial_param_count, spectral_param_count

# Default sparsity-weight grid for sweeps: i*10^j, i in {2,5,8}, j in -6..-2.
LAMBDA_GRID = tuple(i * 10.0**j for j in range(-6, -1) for i in (2, 5, 8))
DEFAULT_LAMBDA = 0.01

SOLVER_KEYS = {
    "rank", "lambda", "iters", "lr", "beta1", "beta2", "epsilon", "seed",
    "share_params", "snapshot_stride", "spatial_prior", "spectral_prior",
    "spatial_scales", "spatial_channels", "spatial_up_channels",
    "kernel_size", "skip_channels", "in_channels", "slope",
    "spectral_input", "spectral_hidden",
}
NOISE_KEYS = {
    "case", "gaussian_variance", "laplace_density", "affected_band_fraction",
    "deadline_count", "deadline_width", "diag_stripe_count",
    "vert_stripe_count", "vert_stripe_value", "noise_seed",
}
SYNTH_KEYS = {
    "synth_i", "synth_j", "synth_k", "synth_rank",
    "spatial_smoothness", "spectral_smoothness", "synth_seed",
}
ALL_KEYS = SOLVER_KEYS | NOISE_KEYS | SYNTH_KEYS


def _parse(kind, key, value):
    try:
        if kind is bool:
            low = value.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(value)
        return kind(value)
    except ValueError:
        raise ConfigError(f"cannot parse {key}={value!r} as {kind.__name__}") from None


def _parse_pair(kind, key, value):
    parts = [p.strip() for p in str(value).split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{key} needs two comma-separated values, got {value!r}")
    return (_parse(kind, key, parts[0]), _parse(kind, key, parts[1]))


def _parse_tuple(kind, key, value):
    return tuple(_parse(kind, key, p.strip()) for p in str(value).split(","))


def _get(options, key, kind, default):
    if key not in options:
        return default
    value = options[key]
    if isinstance(value, str):
        if kind == "pair_int":
            return _parse_pair(int, key, value)
        if kind == "pair_float":
            return _parse_pair(float, key, value)
        if kind == "tuple_int":
            return _parse_tuple(int, key, value)
        return _parse(kind, key, value)
    return value


def solver_config_from(options: dict) -> solver.SolverConfig:
    channels = _get(options, "spatial_channels", "tuple_int", (8, 16, 32))
    scales = _get(options, "spatial_scales", int, len(channels))
    up = _get(options, "spatial_up_channels", "tuple_int", None)
    spatial = SpatialNetConfig(
        num_scales=scales,
        channels=channels,
        up_channels=up,
        kernel_size=_get(options, "kernel_size", int, 3),
        skip_channels=_get(options, "skip_channels", int, 4),
        in_channels=_get(options, "in_channels", int, 4),
        slope=_get(options, "slope", float, 0.1),
    )
    return solver.SolverConfig(
        rank=_get(options, "rank", int, 3),
        lam=_get(options, "lambda", float, DEFAULT_LAMBDA),
        iters=_get(options, "iters", int, 1000),
        lr=_get(options, "lr", float, 0.005),
        beta1=_get(options, "beta1", float, 0.9),
        beta2=_get(options, "beta2", float, 0.999),
        eps=_get(options, "epsilon", float, 1e-8),
        seed=_get(options, "seed", int, 0),
        spatial=spatial,
        spectral_input=_get(options, "spectral_input", int, 16),
        spectral_hidden=_get(options, "spectral_hidden", int, 32),
        share_params=_get(options, "share_params", bool, False),
        snapshot_stride=_get(options, "snapshot_stride", int, 25),
        spatial_prior=_get(options, "spatial_prior", bool, True),
        spectral_prior=_get(options, "spectral_prior", bool, True),
    )


def noise_spec_from(options: dict) -> noise.NoiseSpec:
    return noise.NoiseSpec(
        case=_get(options, "case", int, 1),
        gaussian_variance=_get(options, "gaussian_variance", float, 0.1),
        laplace_density=_get(options, "laplace_density", float, 0.1),
        affected_band_fraction=_get(options, "affected_band_fraction", float, 0.3),
        deadline_count=_get(options, "deadline_count", "pair_int", (10, 15)),
        deadline_width=_get(options, "deadline_width", "pair_int", (1, 3)),
        diag_stripe_count=_get(options, "diag_stripe_count", "pair_int", (15, 30)),
        vert_stripe_count=_get(options, "vert_stripe_count", "pair_int", (10, 15)),
        vert_stripe_value=_get(options, "vert_stripe_value", "pair_float", (0.6, 0.8)),
        seed=_get(options, "noise_seed", int, 0),
    )


def synth_spec_from(options: dict) -> synth.SynthSpec:
    return synth.SynthSpec(
        i=_get(options, "synth_i", int, 32),
        j=_get(options, "synth_j", int, 32),
        k=_get(options, "synth_k", int, 16),
        r=_get(options, "synth_rank", int, 3),
        spatial_smoothness=_get(options, "spatial_smoothness", float, 4.0),
        spectral_smoothness=_get(options, "spectral_smoothness", float, 2.0),
        seed=_get(options, "synth_seed", int, 0),
    )


def _solver_manifest_entries(cfg: solver.SolverConfig) -> dict:
    return {
        "rank": cfg.rank,
        "lambda": cfg.lam,
        "iters": cfg.iters,
        "lr": cfg.lr,
        "beta1": cfg.beta1,
        "beta2": cfg.beta2,
        "epsilon": cfg.eps,
        "seed": cfg.seed,
        "share_params": cfg.share_params,
        "snapshot_stride": cfg.snapshot_stride,
        "spatial_prior": cfg.spatial_prior,
        "spectral_prior": cfg.spectral_prior,
        "spatial_scales": cfg.spatial.num_scales,
        "spatial_channels": cfg.spatial.channels,
        "spatial_up_channels": cfg.spatial.decoder_channels,
        "kernel_size": cfg.spatial.kernel_size,
        "skip_channels": cfg.spatial.skip_channels,
        "in_channels": cfg.spatial.in_channels,
        "slope": cfg.spatial.slope,
        "spectral_input": cfg.spectral_input,
        "spectral_hidden": cfg.spectral_hidden,
    }


def _noise_manifest_entries(spec: noise.NoiseSpec) -> dict:
    return {
        "case": spec.case,
        "gaussian_variance": spec.gaussian_variance,
        "laplace_density": spec.laplace_density,
        "affected_band_fraction": spec.affected_band_fraction,
        "deadline_count": spec.deadline_count,
        "deadline_width": spec.deadline_width,
        "diag_stripe_count": spec.diag_stripe_count,
        "vert_stripe_count": spec.vert_stripe_count,
        "vert_stripe_value": spec.vert_stripe_value,
        "noise_seed": spec.seed,
    }


def _collect_options(args, flag_map: dict[str, str]) -> dict:
    options: dict = {}
    if getattr(args, "config", None):
        options.update(fileio.load_config(args.config, ALL_KEYS))
    for key, attr in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            options[key] = value
    return options


_SOLVER_FLAGS = {
    "rank": "rank", "lambda": "lam", "iters": "iters", "lr": "lr",
    "seed": "seed", "share_params": "share_params",
    "snapshot_stride": "snapshot_stride",
}
_NOISE_FLAGS = {"case": "case", "noise_seed": "seed"}


def cmd_simulate(args) -> int:
    options = _collect_options(args, _NOISE_FLAGS)
    spec = noise_spec_from(options)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = dict(_noise_manifest_entries(spec))

    if args.input:
        clean = fileio.load_cube(args.input)
        manifest["input"] = str(args.input)
    else:
        sspec = synth_spec_from(options)
        clean, maps, sigs = synth.make_lmm_cube(sspec)
        fileio.save_cube(clean, outdir / "clean.hsc")
        for r, m in enumerate(maps):
            fileio.save_cube(Cube(m.data[None, :, :]), outdir / f"clean_map{r}.hsc")
        lines = ["r,band,value"]
        for r, s in enumerate(sigs):
            lines += [f"{r},{k},{v!r}" for k, v in enumerate(s.data)]
        (outdir / "clean_signatures.csv").write_text("\n".join(lines) + "\n")
        manifest.update({
            "synth_i": sspec.i, "synth_j": sspec.j, "synth_k": sspec.k,
            "synth_rank": sspec.r, "spatial_smoothness": sspec.spatial_smoothness,
            "spectral_smoothness": sspec.spectral_smoothness, "synth_seed": sspec.seed,
        })

    corrupted, mask = noise.corrupt(clean, spec)
    fileio.save_cube(corrupted, outdir / "corrupted.hsc")
    fileio.save_cube(mask, outdir / "mask.hsc")
    dims = clean.dims
    manifest.update({"i": dims[0], "j": dims[1], "k": dims[2]})
    fileio.write_manifest(outdir / "manifest.txt", dict(sorted(manifest.items())))
    print(f"wrote {outdir / 'corrupted.hsc'} and mask ({dims[0]}x{dims[1]}x{dims[2]}, case {spec.case})")
    return 0


def _run_denoise(corrupted, cfg, outdir, reference=None, prefix=""):
    """Shared solve-and-save used by denoise, sweep, and ablate."""
    snapshots = {}

    def progress(t, loss, metric):
        snapshots[t] = metric

    start = time.time()
    result = solver.run(corrupted, cfg, progress=progress, reference=reference)
    wall = time.time() - start

    fileio.save_cube(result.denoised, outdir / f"{prefix}denoised.hsc")
    fileio.save_cube(result.outliers, outdir / f"{prefix}outliers.hsc")
    for r, m in enumerate(result.maps):
        fileio.save_cube(Cube(m.data[None, :, :]), outdir / f"{prefix}map{r}.hsc")
    lines = ["r,band,value"]
    for r, s in enumerate(result.signatures):
        lines += [f"{r},{k},{v!r}" for k, v in enumerate(s.data)]
    (outdir / f"{prefix}signatures.csv").write_text("\n".join(lines) + "\n")

    trace_lines = ["iteration,loss,mpsnr"]
    for idx, loss in enumerate(result.loss_trace, start=1):
        metric = snapshots.get(idx)
        trace_lines.append(f"{idx},{loss!r},{'' if metric is None else repr(metric)}")
    (outdir / f"{prefix}trace.csv").write_text("\n".join(trace_lines) + "\n")
    return result, wall


def _param_count_entries(cfg: solver.SolverConfig, k: int) -> dict:
    from .networks import SpectralNetConfig, build_shared_spatial, build_spatial

    entries = {}
    if cfg.spatial_prior:
        if cfg.share_params:
            spatial_total = build_shared_spatial(cfg.spatial, cfg.rank, 0).param_count()
        else:
            spatial_total = cfg.rank * spatial_param_count(cfg.spatial)
    else:
        spatial_total = 0
    if cfg.spectral_prior:
        spectral_total = cfg.rank * spectral_param_count(
            SpectralNetConfig(cfg.spectral_input, cfg.spectral_hidden, k)
        )
    else:
        spectral_total = 0
    entries["spatial_params"] = spatial_total
    entries["spectral_params"] = spectral_total
    entries["total_params"] = spatial_total + spectral_total
    return entries


def cmd_denoise(args) -> int:
    options = _collect_options(args, _SOLVER_FLAGS)
    cfg = solver_config_from(options)
    corrupted = fileio.load_cube(args.input)
    reference = fileio.load_cube(args.reference) if args.reference else None
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)

    result, wall = _run_denoise(corrupted, cfg, outdir, reference=reference)

    manifest = _solver_manifest_entries(cfg)
    manifest.update(_param_count_entries(cfg, corrupted.dims[2]))
    manifest.update({
        "input": str(args.input),
        "i": corrupted.dims[0], "j": corrupted.dims[1], "k": corrupted.dims[2],
        "final_loss": float(result.loss_trace[-1]) if len(result.loss_trace) else float("nan"),
        "wall_time_s": round(wall, 3),
    })
    if reference is not None:
        manifest["mpsnr_vs_reference"] = metrics.psnr(reference, result.denoised)[0]
        manifest["mpsnr_noisy_input"] = metrics.psnr(reference, corrupted)[0]
    fileio.write_manifest(outdir / "manifest.txt", dict(sorted(manifest.items())))
    print(f"denoised {args.input} -> {outdir / 'denoised.hsc'} ({wall:.1f}s)")
    return 0


def cmd_evaluate(args) -> int:
    reference = fileio.load_cube(args.reference)
    test = fileio.load_cube(args.input)
    report = metrics.evaluate(reference, test)
    if args.output:
        outdir = Path(args.output)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "metrics.csv").write_text(report.to_csv())
        (outdir / "metrics.txt").write_text(report.summary())
    print(report.summary(), end="")
    return 0


def cmd_sweep(args) -> int:
    options = _collect_options(args, _SOLVER_FLAGS)
    corrupted = fileio.load_cube(args.input)
    reference = fileio.load_cube(args.reference)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)

    if args.values:
        if args.axis == "rank":
            values = [int(v) for v in args.values.split(",")]
        else:
            values = [float(v) for v in args.values.split(",")]
    else:
        values = [1, 2, 3, 4, 5] if args.axis == "rank" else list(LAMBDA_GRID)

    rows = ["value,mpsnr_db,mssim,sam_rad,snr_db,final_loss"]
    best = None
    for value in values:
        point = dict(options)
        point["rank" if args.axis == "rank" else "lambda"] = value
        cfg = solver_config_from(point)
        subdir = outdir / f"{args.axis}_{value}"
        subdir.mkdir(exist_ok=True)
        result, _ = _run_denoise(corrupted, cfg, subdir, reference=reference)
        report = metrics.evaluate(reference, result.denoised)
        final_loss = float(result.loss_trace[-1]) if len(result.loss_trace) else float("nan")
        rows.append(
            f"{value},{report.mpsnr!r},{report.mssim!r},{report.sam_rad!r},"
            f"{report.snr_db!r},{final_loss!r}"
        )
        if best is None or report.mpsnr > best[1]:
            best = (value, report.mpsnr)
        print(f"{args.axis}={value}: mpsnr={report.mpsnr:.3f}")
    (outdir / "sweep.csv").write_text("\n".join(rows) + "\n")
    print(f"best {args.axis}={best[0]} (mpsnr {best[1]:.3f})")
    return 0


ABLATION_MODES = ("full", "no-spectral-prior", "no-spatial-prior", "no-sparsity")


def apply_ablation(cfg: solver.SolverConfig, mode: str) -> solver.SolverConfig:
    from dataclasses import replace

    if mode == "full":
        return cfg
    if mode == "no-spectral-prior":
        return replace(cfg, spectral_prior=False)
    if mode == "no-spatial-prior":
        return replace(cfg, spatial_prior=False)
    if mode == "no-sparsity":
        return replace(cfg, lam=0.0)
    raise ConfigError(f"unknown ablation mode {mode!r}; expected one of {ABLATION_MODES}")


def cmd_ablate(args) -> int:
    if args.mode not in ABLATION_MODES:
        raise ConfigError(f"unknown ablation mode {args.mode!r}; expected one of {ABLATION_MODES}")
    options = _collect_options(args, _SOLVER_FLAGS)
    base_cfg = solver_config_from(options)
    corrupted = fileio.load_cube(args.input)
    reference = fileio.load_cube(args.reference)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)

    modes = [args.mode] if args.mode == "full" else [args.mode, "full"]
    rows = ["mode,mpsnr_db,mssim,sam_rad,snr_db,final_loss"]
    for mode in modes:
        cfg = apply_ablation(base_cfg, mode)
        prefix = "" if mode == "full" else f"{mode.replace('-', '_')}_"
        result, _ = _run_denoise(corrupted, cfg, outdir, reference=reference, prefix=prefix)
        report = metrics.evaluate(reference, result.denoised)
        final_loss = float(result.loss_trace[-1]) if len(result.loss_trace) else float("nan")
        rows.append(
            f"{mode},{report.mpsnr!r},{report.mssim!r},{report.sam_rad!r},"
            f"{report.snr_db!r},{final_loss!r}"
        )
        print(f"{mode}: mpsnr={report.mpsnr:.3f}")
    (outdir / "ablation.csv").write_text("\n".join(rows) + "\n")
    return 0


def cmd_export_band(args) -> int:
    fileio.export_band(fileio.load_cube(args.input), args.band, args.output)
    return 0


def cmd_export_spectrum(args) -> int:
    fileio.export_spectrum(fileio.load_cube(args.input), args.row, args.col, args.output)
    return 0


def _add_solver_flags(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--rank", type=int, default=None, help="number of endmembers R")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="sparsity weight")
    p.add_argument("--iters", type=int, default=None, help="iteration budget")
    p.add_argument("--lr", type=float, default=None, help="Adam learning rate")
    p.add_argument("--seed", type=int, default=None, help="solver seed")
    p.add_argument("--snapshot-stride", dest="snapshot_stride", type=int, default=None)
    p.add_argument("--share-params", dest="share_params", action="store_const", const=True,
                   default=None, help="share one spatial trunk across all maps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsdenoise",
                                     description="Unsupervised hyperspectral denoising")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="corrupt a clean cube (or a synthetic one)")
    p.add_argument("--input", help="clean cube file; omit to synthesise one")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--case", type=int, default=None, help="noise case 1-6")
    p.add_argument("--seed", type=int, default=None, help="noise seed")
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("denoise", help="run the solver on a corrupted cube")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--reference", help="clean cube for progress metrics")
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_denoise)

    p = sub.add_parser("evaluate", help="metric report for a cube pair")
    p.add_argument("--reference", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None, help="directory for metrics files")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("sweep", help="metric vs rank or sparsity weight")
    p.add_argument("--input", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--axis", choices=("rank", "lambda"), required=True)
    p.add_argument("--values", help="comma-separated values; defaults to a standard grid")
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("ablate", help="compare an ablated run against the full method")
    p.add_argument("--input", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mode", required=True,
                   help="full | no-spectral-prior | no-spatial-prior | no-sparsity")
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("export-band", help="write one band as an 8-bit grayscale image")
    p.add_argument("--input", required=True)
    p.add_argument("--band", type=int, required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_export_band)

    p = sub.add_parser("export-spectrum", help="write one pixel spectrum as CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--row", type=int, required=True)
    p.add_argument("--col", type=int, required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_export_spectrum)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ShapeMismatchError, IndexError) as exc:
        print(f"shape error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
