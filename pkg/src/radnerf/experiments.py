"""Experiment drivers: single reconstructions, acceleration sweeps, sampling studies."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import GriddingConfig, adjoint_reconstruct, ink_reconstruct
from .errors import DivergedError
from .forward import simulate_analytic
from .metrics import psnr, ssim
from .network import PeConfig
from .phantom import load_phantom, rasterize
from .reconstructor import TrainConfig, inference_time, reconstruct
from .sampling import SCHEMES, gap_report, make_omega_grid, make_schedule

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    phantom: str = "shepp_logan"
    n: int = 64
    scheme: str = "golden"
    R: float = 8.0
    seed: int = 0
    noise_sigma: float = 0.0
    pe_L: int = 20
    train: TrainConfig = field(default_factory=TrainConfig)
    out: str = "out"
    baselines: tuple = ("ifft",)
    psnr_mode: str = "mse"
    density_compensation: str = "ramp"
    R_list: tuple = (2.0, 4.0, 8.0, 12.0)
    seeds: tuple = (0, 1, 2)

    @property
    def pe(self):
        return PeConfig(self.pe_L)

    def with_seed(self, seed):
        return replace(self, seed=seed, train=replace(self.train, seed=seed))


@dataclass
class CaseResult:
    config: RunConfig
    schedule: object
    kspace: object
    reference: object
    images: dict
    metrics: dict
    report: object
    infer_seconds: float


def simulate(cfg):
    spec = load_phantom(cfg.phantom, float(cfg.n))
    schedule = make_schedule(cfg.scheme, cfg.n, cfg.R, cfg.seed)
    k = simulate_analytic(spec, schedule, make_omega_grid(cfg.n, float(cfg.n)), cfg.noise_sigma, cfg.seed)
    return spec, schedule, k


def run_case(cfg, callback=None):
    """Simulate one acquisition, reconstruct it and score every requested method."""
    spec, schedule, k = simulate(cfg)
    reference = rasterize(spec, cfg.n)
    image, report = reconstruct(k, cfg.train, cfg.pe, cfg.n, callback)
    images = {"ours": image}
    if "ifft" in cfg.baselines:
        images["ifft"] = adjoint_reconstruct(k, GriddingConfig(cfg.density_compensation, cfg.n))
    if "ink" in cfg.baselines:
        images["ink"] = ink_reconstruct(k, cfg.train, cfg.pe, cfg.n)
    metrics = {name: (ssim(img, reference), psnr(img, reference, cfg.psnr_mode)) for name, img in images.items()}
    infer = inference_time(report.params, cfg.pe, cfg.n, float(cfg.n), repeats=3)
    log.info("R=%g scheme=%s seed=%d: %s", cfg.R, cfg.scheme, cfg.seed,
             ", ".join(f"{m} ssim={s:.4f}" for m, (s, _) in metrics.items()))
    return CaseResult(cfg, schedule, k, reference, images, metrics, report, infer)


def sweep_rows(cfg, callback=None):
    """One row per acceleration factor; a diverged row is recorded with NaNs."""
    rows, results = [], {}
    base = replace(cfg, scheme="golden", baselines=tuple(set(cfg.baselines) | {"ifft"}))
    for R in cfg.R_list:
        case_cfg = replace(base, R=float(R))
        try:
            res = run_case(case_cfg, callback)
        except DivergedError as exc:
            log.warning("R=%g diverged at step %d", R, exc.step)
            n_phi = make_schedule("golden", cfg.n, R).n_phi
            rows.append([R, n_phi] + [float("nan")] * 6)
            continue
        results[R] = res
        (s_o, p_o), (s_i, p_i) = res.metrics["ours"], res.metrics["ifft"]
        rows.append([R, res.schedule.n_phi, s_o, s_i, p_o, p_i, res.report.wall_time["train"], res.infer_seconds])
    return rows, results


def sampling_rows(cfg, schemes=SCHEMES, callback=None):
    """Every scheme at the configured R for every configured seed."""
    rows, results = [], {}
    for scheme in schemes:
        for seed in cfg.seeds:
            case_cfg = replace(cfg.with_seed(seed), scheme=scheme, baselines=())
            gaps = gap_report(make_schedule(scheme, cfg.n, cfg.R, seed))
            try:
                res = run_case(case_cfg, callback)
                s, p = res.metrics["ours"]
                results[(scheme, seed)] = res
            except DivergedError as exc:
                log.warning("%s seed %d diverged at step %d", scheme, seed, exc.step)
                s = p = float("nan")
            n_phi = make_schedule(scheme, cfg.n, cfg.R, seed).n_phi
            rows.append([scheme, seed, n_phi, s, p, gaps.max_adjacent_gap, gaps.covering_radius])
    return rows, results


def mean_ssim_by_scheme(rows):
    out = {}
    for scheme in dict.fromkeys(r[0] for r in rows):
        out[scheme] = float(np.mean([r[3] for r in rows if r[0] == scheme]))
    return out

