"""Projection rendering of the coordinate network and its training loop.

A ray is the line ``x . theta = r``; its points are ``r theta + s theta_perp``
clipped to the support square and sampled at a uniform step. Rendering sums
network values times the step, so the rendered value approximates the line
integral the projection data measure.

Two renderers share one loss:

``direct``
    evaluates the network at every ray sample.
``grid``
    evaluates the network once at the pixel centers and interpolates those
    values bilinearly onto the ray samples. Training cost then scales with
    the pixel count instead of the ray-sample count, and the network is only
    queried on the pixel lattice it represents.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ConfigError, DivergedError
from .geometry import ImageGrid, make_direction
from .network import backward_cached, forward_cached, init_params
from .projection import kspace_to_sinogram
from .sampling import rng_for

RENDER_MODES = ("grid", "direct")


@dataclass(frozen=True)
class RayQuadrature:
    extent_V: float
    step: float

    @classmethod
    def for_grid(cls, n, extent_V):
        return cls(float(extent_V), extent_V / n / 2)

    def points(self, r, direction):
        """Samples on one ray and their spacing; an empty array if the ray misses."""
        h = self.extent_V / 2
        th, tp = direction.theta, direction.theta_perp
        lo, hi = -math.inf, math.inf
        for i in range(2):
            base = r * th[i]
            if abs(tp[i]) < 1e-15:
                if abs(base) > h:
                    return np.empty((0, 2)), self.step
                continue
            a, b = (-h - base) / tp[i], (h - base) / tp[i]
            lo, hi = max(lo, min(a, b)), min(hi, max(a, b))
        length = hi - lo
        m = int(math.floor(length / self.step + 0.5)) if length > 0 else 0
        if m <= 0:
            return np.empty((0, 2)), self.step
        s = (lo + hi) / 2 + (np.arange(m) - (m - 1) / 2) * self.step
        return r * th + s[:, None] * tp, self.step


def to_unit(x, extent_V):
    """Map physical points in ``[-V/2, V/2]^2`` to network coordinates in ``[0, 1]^2``."""
    return (np.asarray(x, dtype=float) + extent_V / 2) / extent_V


def render_ray(params, cfg, quad, r, direction):
    """Sum of network values times the step along one ray."""
    pts, step = quad.points(r, direction)
    if len(pts) == 0:
        return 0j
    out, _ = forward_cached(params, cfg, to_unit(pts, quad.extent_V))
    return complex(out.sum() * step)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 500
    lr: float = 5e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch: int | None = None
    seed: int = 0
    render: str = "grid"
    width: int = 256
    before_skip: int = 4
    after_skip: int = 3
    out_scale: float = 1e-3
    keep_best: bool = True

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.batch is not None and self.batch < 1:
            raise ConfigError("batch must be positive")
        if self.render not in RENDER_MODES:
            raise ConfigError(f"unknown render mode {self.render!r}")


@dataclass
class TrainReport:
    loss_history: list
    wall_time: dict
    params: object
    final_loss: float = math.nan
    complex_image: np.ndarray | None = field(default=None, repr=False)


class RenderProblem:
    """Projection targets and the ray geometry used to fit them.

    Rays are ordered spoke-major, matching ``sinogram.samples.ravel()``.
    """

    def __init__(self, sinogram, quad, mode="grid", n_grid=None):
        if mode not in RENDER_MODES:
            raise ConfigError(f"unknown render mode {mode!r}")
        span = sinogram.delta_r * sinogram.r_grid.size
        if not math.isclose(span, math.sqrt(2) * quad.extent_V, rel_tol=1e-9):
            raise ConfigError(f"offset grid spans {span}, expected sqrt(2) * {quad.extent_V}")
        self.sinogram = sinogram
        self.quad = quad
        self.mode = mode
        self.targets = sinogram.samples.ravel()
        self.n_rays = self.targets.size
        n_grid = n_grid if n_grid is not None else int(round(quad.extent_V / (2 * quad.step)))
        self.grid = ImageGrid.zeros(n_grid, quad.extent_V)
        pts, owner = [], []
        ray = 0
        for phi in sinogram.schedule.angles:
            d = make_direction(phi)
            for r in sinogram.r_grid:
                p, _ = quad.points(r, d)
                pts.append(p)
                owner.append(np.full(len(p), ray))
                ray += 1
        self.ray_points = np.concatenate(pts)
        self.ray_owner = np.concatenate(owner)
        if mode == "grid":
            self.operator = self._interpolation_operator()
            self.coords = to_unit(self.grid.center_points(), quad.extent_V)
        else:
            self.coords = to_unit(self.ray_points, quad.extent_V)

    def _interpolation_operator(self):
        """Sparse ``(rays, pixels)`` matrix of bilinear weights times the step."""
        g = self.grid
        n, d = g.n, g.delta
        f = (self.ray_points + g.extent_V / 2) / d - 0.5
        base = np.floor(f).astype(int)
        frac = f - base
        rows, cols, vals = [], [], []
        for o1 in (0, 1):
            i = base[:, 0] + o1
            w1 = frac[:, 0] if o1 else 1 - frac[:, 0]
            for o2 in (0, 1):
                j = base[:, 1] + o2
                w2 = frac[:, 1] if o2 else 1 - frac[:, 1]
                ok = (i >= 0) & (i < n) & (j >= 0) & (j < n)
                rows.append(self.ray_owner[ok])
                cols.append(i[ok] * n + j[ok])
                vals.append(w1[ok] * w2[ok] * self.quad.step)
        a = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(self.n_rays, n * n))
        return a.tocsr()

    def render(self, chi, rows=None):
        """Rendered projections from network values at ``self.coords``."""
        if self.mode == "grid":
            a = self.operator if rows is None else self.operator[rows]
            return a @ chi
        sums = np.bincount(self.ray_owner, weights=chi.real, minlength=self.n_rays) \
            + 1j * np.bincount(self.ray_owner, weights=chi.imag, minlength=self.n_rays)
        sums *= self.quad.step
        return sums if rows is None else sums[rows]

    def pullback(self, g_rays, rows=None):
        """Adjoint of ``render``: per-ray cotangents to per-coordinate cotangents."""
        if self.mode == "grid":
            a = self.operator if rows is None else self.operator[rows]
            return a.T @ g_rays
        full = g_rays
        if rows is not None:
            full = np.zeros(self.n_rays, dtype=np.complex128)
            np.add.at(full, rows, g_rays)
        return full[self.ray_owner] * self.quad.step


def loss_only(params, cfg, problem):
    """Full rendering loss without the backward pass."""
    chi, _ = forward_cached(params, cfg, problem.coords)
    res = problem.targets - problem.render(chi)
    return float(np.vdot(res, res).real / res.size)


def loss_and_grad(params, cfg, problem, rows=None):
    """Mean squared modulus of the rendering residual and its parameter gradient."""
    chi, cache = forward_cached(params, cfg, problem.coords)
    target = problem.targets if rows is None else problem.targets[rows]
    res = target - problem.render(chi, rows)
    m = res.size
    loss = float(np.vdot(res, res).real / m)
    cot = problem.pullback(-2.0 / m * res, rows)
    return loss, backward_cached(params, cache, cot)


class Adam:
    """Bias-corrected Adam over a list of parameter arrays."""

    def __init__(self, arrays, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.t = 0

    def step(self, arrays, grads):
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            a -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _param_arrays(params):
    return [x for W, b in params.layers for x in (W, b)]


def evaluate_image(params, pe, n_out, extent_V):
    """Complex network values at the pixel centers of an ``n_out`` grid."""
    grid = ImageGrid.zeros(n_out, extent_V)
    out, _ = forward_cached(params, pe, to_unit(grid.center_points(), extent_V))
    return out.reshape(n_out, n_out)


def inference_time(params, pe, n_out, extent_V=None, repeats=1):
    """Best wall time, over ``repeats`` runs, of evaluating the final image."""
    extent_V = float(n_out) if extent_V is None else extent_V
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        evaluate_image(params, pe, n_out, extent_V)
        best = min(best, time.perf_counter() - t0)
    return best


def train(params, pe, problem, cfg, callback=None):
    """Run Adam on the rendering loss in place.

    With ``cfg.keep_best`` and full batches the parameters are left at the
    iterate with the lowest training loss, since full-batch Adam at a constant
    rate can spike late in a run. Returns the loss history and the loss of the returned
    parameters.
    """
    arrays = _param_arrays(params)
    opt = Adam(arrays, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    rng = rng_for(cfg.seed, "batch")
    history = []
    best, best_arrays = math.inf, None
    for step in range(cfg.steps):
        rows = None
        if cfg.batch is not None and cfg.batch < problem.n_rays:
            rows = np.sort(rng.choice(problem.n_rays, cfg.batch, replace=False))
        loss, grad = loss_and_grad(params, pe, problem, rows)
        if not math.isfinite(loss):
            raise DivergedError(step, loss)
        history.append(loss)
        if cfg.keep_best and rows is None and loss < best:
            best, best_arrays = loss, [a.copy() for a in arrays]
        opt.step(arrays, _param_arrays(grad))
        if callback is not None:
            callback(step, loss)
    if not params.all_finite():
        raise DivergedError(cfg.steps, math.nan)
    final = loss_only(params, pe, problem)
    if best_arrays is not None and best < final:
        for a, b in zip(arrays, best_arrays):
            a[...] = b
        final = best
    return history, final


def reconstruct(kspace, cfg, pe, n_out=None, callback=None):
    """Fit a fresh network to one radial acquisition and return ``|chi|`` on the pixel grid."""
    times = {}
    t0 = time.perf_counter()
    sino = kspace_to_sinogram(kspace)
    times["sinogram"] = time.perf_counter() - t0

    extent_V = kspace.extent_V
    n = int(round(extent_V / kspace.delta))
    n_out = n if n_out is None else n_out
    t0 = time.perf_counter()
    problem = RenderProblem(sino, RayQuadrature.for_grid(n, extent_V), cfg.render, n)
    params = init_params(pe, cfg.seed, cfg.width, cfg.before_skip, cfg.after_skip, cfg.out_scale)
    times["setup"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    history, final = train(params, pe, problem, cfg, callback)
    times["train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    chi = evaluate_image(params, pe, n_out, extent_V)
    times["inference"] = time.perf_counter() - t0
    image = ImageGrid(np.abs(chi), extent_V)
    return image, TrainReport(history, times, params, final, chi)
