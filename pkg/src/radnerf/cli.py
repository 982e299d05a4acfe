"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 training divergence.
"""
from __future__ import annotations

import os

if "NRF_THREADS" in os.environ:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["NRF_THREADS"])

import argparse
import logging
import sys
import time
from pathlib import Path

from . import formats
from .errors import ConfigError, DivergedError, DomainError, FormatError
from .experiments import RunConfig, run_case, sampling_rows, simulate, sweep_rows
from .metrics import PSNR_MODES, psnr, ssim
from .phantom import rasterize
from .projection import kspace_to_sinogram
from .reconstructor import TrainConfig

log = logging.getLogger("radnerf")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DIVERGED = 0, 1, 2, 3

# config-file key -> (RunConfig or TrainConfig field, parser)
_KEYS = {
    "phantom": ("phantom", str),
    "n": ("n", int),
    "scheme": ("scheme", str),
    "r_factor": ("R", float),
    "seed": ("seed", int),
    "noise_sigma": ("noise_sigma", float),
    "pe_l": ("pe_L", int),
    "out": ("out", str),
    "baseline": ("baselines", lambda s: tuple(b for b in s.split(",") if b)),
    "psnr_mode": ("psnr_mode", str),
    "density_compensation": ("density_compensation", str),
    "r_list": ("R_list", lambda s: tuple(float(r) for r in s.split(",") if r)),
    "seeds": ("seeds", lambda s: tuple(int(x) for x in s.split(",") if x)),
    "steps": ("train.steps", int),
    "lr": ("train.lr", float),
    "batch": ("train.batch", lambda s: None if s in ("", "all", "none") else int(s)),
    "render": ("train.render", str),
    "width": ("train.width", int),
    "out_scale": ("train.out_scale", float),
    "keep_best": ("train.keep_best", lambda s: s.lower() in ("1", "true", "yes")),
}


def parse_config_text(text):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_").lower()
        if key not in _KEYS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(settings):
    """Turn raw string settings into a validated ``RunConfig``."""
    run, train = {}, {}
    for key, value in settings.items():
        target, conv = _KEYS[key]
        try:
            parsed = conv(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None
        if target.startswith("train."):
            train[target[6:]] = parsed
        else:
            run[target] = parsed
    seed = run.get("seed", 0)
    train.setdefault("seed", seed)
    cfg = RunConfig(**run, train=TrainConfig(**train))
    if cfg.n < 8 or cfg.n % 2:
        raise ConfigError(f"n must be even and >= 8, got {cfg.n}")
    if cfg.R < 1 or any(r < 1 for r in cfg.R_list):
        raise ConfigError("acceleration factors must be >= 1")
    if cfg.psnr_mode not in PSNR_MODES:
        raise ConfigError(f"unknown PSNR mode {cfg.psnr_mode!r}")
    unknown = set(cfg.baselines) - {"ifft", "ink"}
    if unknown:
        raise ConfigError(f"unknown baselines {sorted(unknown)}")
    if cfg.phantom not in ("shepp_logan", "simple") and not Path(cfg.phantom).is_file():
        raise ConfigError(f"phantom file not found: {cfg.phantom}")
    return cfg


def _add_common(p):
    p.add_argument("--config", help="key=value configuration file; flags override it")
    p.add_argument("--phantom", help="builtin name (shepp_logan, simple) or ellipse spec file")
    p.add_argument("--n", help="pixels per side")
    p.add_argument("--scheme", help="uniform, limited, random, stratified or golden")
    p.add_argument("--r-factor", dest="r_factor", help="acceleration factor R")
    p.add_argument("--seed")
    p.add_argument("--noise-sigma", dest="noise_sigma")
    p.add_argument("--steps")
    p.add_argument("--lr")
    p.add_argument("--pe-l", dest="pe_l")
    p.add_argument("--out")
    p.add_argument("--baseline", help="comma list of ifft, ink")
    p.add_argument("--psnr-mode", dest="psnr_mode")
    p.add_argument("--batch", help="rays per step (default: all)")
    p.add_argument("--r-list", dest="r_list", help="comma list for sweep-r")
    p.add_argument("--seeds", help="comma list for sampling-study")


def make_parser():
    parser = argparse.ArgumentParser(prog="radnerf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("simulate", "simulate radial k-space from a phantom"),
                        ("reconstruct", "reconstruct with the network and baselines"),
                        ("sweep-r", "reconstruct over a list of acceleration factors"),
                        ("sampling-study", "compare the five undersampling schemes")]:
        _add_common(sub.add_parser(name, help=help_))
    m = sub.add_parser("metrics", help="compare two NRFIMG01 images")
    m.add_argument("image")
    m.add_argument("reference")
    m.add_argument("--case", default="image")
    m.add_argument("--psnr-mode", dest="psnr_mode", default="mse", choices=PSNR_MODES)
    m.add_argument("--out", help="write the metric CSV here instead of stdout")
    return parser


def config_from_args(args):
    settings = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        settings.update(parse_config_text(path.read_text()))
    for key in _KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return build_config(settings)


def _outdir(cfg, sub=None):
    out = Path(cfg.out) if sub is None else Path(cfg.out) / sub
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(cfg):
    spec, schedule, k = simulate(cfg)
    out = _outdir(cfg)
    formats.write_kspace(out / "kspace.nrfksp", k)
    formats.write_sinogram(out / "sinogram.nrfsin", kspace_to_sinogram(k))
    formats.write_schedule_csv(out / "schedule.csv", schedule)
    formats.write_image(out / "reference.nrfimg", rasterize(spec, cfg.n))
    print(f"N_phi={schedule.n_phi} N_omega={k.omega_grid.n_omega} R={cfg.R:g}")


def _loss_rows(history, stamps):
    return [(i, loss, t) for i, (loss, t) in enumerate(zip(history, stamps))]


def cmd_reconstruct(cfg):
    out = _outdir(cfg)
    stamps = []
    t0 = time.perf_counter()
    res = run_case(cfg, callback=lambda step, loss: stamps.append(time.perf_counter() - t0))
    for name, img in res.images.items():
        formats.write_image(out / f"{name}.nrfimg", img)
        formats.write_pgm(out / f"{name}.pgm", img)
    formats.write_image(out / "reference.nrfimg", res.reference)
    formats.write_params(out / "params.nrfmlp", res.report.params)
    formats.write_csv(out / "loss.csv", formats.LOSS_HEADER, _loss_rows(res.report.loss_history, stamps))
    formats.write_metrics_csv(out / "metrics.csv",
                              [(name, s, p, cfg.psnr_mode) for name, (s, p) in res.metrics.items()])
    for name, (s, p) in res.metrics.items():
        print(f"{name}: ssim={s:.4f} psnr={p:.2f} dB")


def cmd_sweep_r(cfg):
    out = _outdir(cfg)
    rows, results = sweep_rows(cfg)
    for R, res in results.items():
        sub = _outdir(cfg, f"R{R:g}")
        for name, img in res.images.items():
            formats.write_image(sub / f"{name}.nrfimg", img)
        formats.write_params(sub / "params.nrfmlp", res.report.params)
    formats.write_csv(out / "sweep.csv", formats.SWEEP_HEADER, rows)
    for row in rows:
        print(",".join(formats._fmt(v) for v in row))


def cmd_sampling_study(cfg):
    out = _outdir(cfg)
    rows, _ = sampling_rows(cfg)
    formats.write_csv(out / "sampling.csv", formats.SAMPLING_HEADER, rows)
    for row in rows:
        print(",".join(formats._fmt(v) for v in row))


def cmd_metrics(args):
    x = formats.read_image(args.image)
    y = formats.read_image(args.reference)
    row = (args.case, ssim(x, y), psnr(x, y, args.psnr_mode), args.psnr_mode)
    if args.out:
        formats.write_metrics_csv(args.out, [row])
    else:
        print(",".join(formats.METRIC_HEADER))
        print(",".join(formats._fmt(v) for v in row))


COMMANDS = {
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "sweep-r": cmd_sweep_r,
    "sampling-study": cmd_sampling_study,
}


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "metrics":
            cmd_metrics(args)
        else:
            COMMANDS[args.command](config_from_args(args))
    except DivergedError as exc:
        print(f"error: training diverged at step {exc.step}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, DomainError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
