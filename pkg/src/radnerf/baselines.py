"""Classical and neural reference reconstructions.

``adjoint_reconstruct`` is the density-compensated zero-filled adjoint of
the radial sampling operator ("IFFT"). ``ink_reconstruct`` fits the same
coordinate network in k-space and inverts the interpolated Cartesian grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergedError
from .geometry import ImageGrid
from .network import backward_cached, forward_cached, init_params
from .reconstructor import Adam, _param_arrays
from .sampling import rng_for

COMPENSATIONS = ("ramp", "none")


@dataclass(frozen=True)
class GriddingConfig:
    density_compensation: str = "ramp"
    n: int | None = None

    def __post_init__(self):
        if self.density_compensation not in COMPENSATIONS:
            raise ConfigError(f"unknown density compensation {self.density_compensation!r}")


def radial_weights(omega_grid, kind="ramp"):
    """Quadrature weight of each radial sample for one spoke.

    ``ramp`` integrates ``|w|`` over each sample's cell, which is ``|w| dw``
    except in the cell straddling the origin; ``none`` uses ``dw``.
    """
    w = omega_grid.omegas
    dw = omega_grid.delta_omega
    if kind == "none":
        return np.full(w.size, dw)
    lo, hi = w - dw / 2, w + dw / 2
    out = np.abs(w) * dw
    mid = (lo < 0) & (hi > 0)
    out[mid] = (lo[mid] ** 2 + hi[mid] ** 2) / 2
    return out


def adjoint_reconstruct(k, cfg=GriddingConfig()):
    """Weighted adjoint ``sum w K exp(2 pi i w theta . x)`` at the pixel centers."""
    n = cfg.n if cfg.n is not None else int(round(k.extent_V / k.delta))
    grid = ImageGrid.zeros(n, k.extent_V)
    c = grid.centers_1d()
    weights = radial_weights(k.omega_grid, cfg.density_compensation) * (math.pi / k.schedule.n_phi)
    data = (k.samples * weights).ravel()
    xi = k.frequencies().reshape(-1, 2)
    # separable in x1 and x2 for every sample; chunk over samples to bound memory
    img = np.zeros((n, n), dtype=np.complex128)
    chunk = max(1, 2_000_000 // (n * 2))
    for s in range(0, len(data), chunk):
        e1 = np.exp(2j * math.pi * np.outer(xi[s:s + chunk, 0], c))
        e2 = np.exp(2j * math.pi * np.outer(xi[s:s + chunk, 1], c))
        img += (e1 * data[s:s + chunk, None]).T @ e2
    return ImageGrid(img, k.extent_V)


def kspace_to_unit(xi, delta):
    """Map frequencies in ``[-1/(2 delta), 1/(2 delta)]^2`` to ``[0, 1]^2``."""
    return np.asarray(xi) * delta + 0.5


def cartesian_frequencies(n, delta):
    """Centered frequency axis ``(k - n/2) / (n delta)``."""
    return (np.arange(n) - n // 2) / (n * delta)


def ink_reconstruct(k, cfg, pe, n_out=None, return_model=False):
    """Fit the network to the observed k-space samples, then invert a Cartesian grid."""
    if k.samples.size == 0:
        raise ConfigError("no k-space observations to fit")
    delta = k.delta
    n = int(round(k.extent_V / delta))
    n_out = n if n_out is None else n_out
    coords = kspace_to_unit(k.frequencies().reshape(-1, 2), delta)
    targets = k.samples.ravel()
    scale = float(np.abs(targets).max()) or 1.0
    targets = targets / scale
    params = init_params(pe, cfg.seed, cfg.width, cfg.before_skip, cfg.after_skip, cfg.out_scale)
    opt = Adam(_param_arrays(params), cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    rng = rng_for(cfg.seed, "ink-batch")
    history = []
    for step in range(cfg.steps):
        rows = slice(None)
        if cfg.batch is not None and cfg.batch < len(coords):
            rows = np.sort(rng.choice(len(coords), cfg.batch, replace=False))
        out, cache = forward_cached(params, pe, coords[rows])
        res = targets[rows] - out
        loss = float(np.vdot(res, res).real / res.size)
        if not math.isfinite(loss):
            raise DivergedError(step, loss)
        history.append(loss)
        grad = backward_cached(params, cache, -2.0 / res.size * res)
        opt.step(_param_arrays(params), _param_arrays(grad))

    f = cartesian_frequencies(n_out, k.extent_V / n_out)
    f1, f2 = np.meshgrid(f, f, indexing="ij")
    grid_xi = np.stack([f1.ravel(), f2.ravel()], axis=-1)
    kgrid, _ = forward_cached(params, pe, kspace_to_unit(grid_xi, k.extent_V / n_out))
    kgrid = kgrid.reshape(n_out, n_out) * scale
    x = ImageGrid.zeros(n_out, k.extent_V).centers_1d()
    e = np.exp(2j * math.pi * np.outer(f, x))
    df = f[1] - f[0]
    img = e.T @ kgrid @ e * df * df
    image = ImageGrid(np.abs(img), k.extent_V)
    if return_model:
        return image, params, history, scale
    return image
