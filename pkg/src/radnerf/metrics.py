"""Whole-image SSIM and PSNR."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import DomainError

PSNR_MODES = ("mse", "literal")


def _pair(x, y):
    x = np.abs(np.asarray(getattr(x, "values", x)))
    y = np.abs(np.asarray(getattr(y, "values", y)))
    if x.shape != y.shape:
        raise DomainError(f"shape mismatch {x.shape} vs {y.shape}")
    return x.astype(float), y.astype(float)


def ssim(x, y, data_range=None, windowed=False, win_size=7):
    """Structural similarity of ``x`` against the reference ``y``.

    Global statistics by default. ``c1 = (0.01 D)^2`` and ``c2 = (0.03 D)^2``
    with ``D`` the reference maximum unless ``data_range`` is given.
    ``windowed=True`` averages the same expression over ``win_size`` boxes.
    """
    x, y = _pair(x, y)
    d = float(y.max()) if data_range is None else float(data_range)
    c1, c2 = (0.01 * d) ** 2, (0.03 * d) ** 2
    if windowed:
        mx, my = uniform_filter(x, win_size), uniform_filter(y, win_size)
        vx = uniform_filter(x * x, win_size) - mx * mx
        vy = uniform_filter(y * y, win_size) - my * my
        cxy = uniform_filter(x * y, win_size) - mx * my
        smap = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        return float(smap.mean())
    if np.array_equal(x, y):
        return 1.0
    mx, my = x.mean(), y.mean()
    vx, vy = x.var(), y.var()
    cxy = ((x - mx) * (y - my)).mean()
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    if den == 0:
        # only reachable with an all-zero reference and a constant, different x
        return 0.0
    return float(((2 * mx * my + c1) * (2 * cxy + c2)) / den)


def psnr(x, y, mode="mse"):
    """Peak signal-to-noise ratio in dB with the reference ``y`` giving the peak.

    ``mse`` divides the squared peak by the mean squared error; ``literal``
    divides by the summed squared error. Identical images give ``inf``; an
    all-zero reference with any error gives ``-inf``.
    """
    if mode not in PSNR_MODES:
        raise DomainError(f"unknown PSNR mode {mode!r}")
    x, y = _pair(x, y)
    sq = (x - y) ** 2
    err = sq.sum() if mode == "literal" else sq.mean()
    if err == 0:
        return math.inf
    peak = float(y.max()) ** 2
    return float(10 * math.log10(peak / err)) if peak > 0 else -math.inf


@dataclass(frozen=True)
class MetricReport:
    ssim: float
    psnr_db: float
    psnr_mode: str = "mse"
    windowed_ssim: bool = False


def compare(x, y, psnr_mode="mse", windowed=False):
    return MetricReport(ssim(x, y, windowed=windowed), psnr(x, y, psnr_mode), psnr_mode, windowed)
