"""Simulated radial k-space acquisitions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .phantom import kspace_at
from .sampling import rng_for


@dataclass(frozen=True)
class RadialKSpace:
    """Spoke-major samples ``samples[j, k] = K(omega_k, phi_j)``."""

    schedule: object
    omega_grid: object
    samples: np.ndarray
    noise_sigma: float = 0.0
    extent_V: float | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        want = (self.schedule.n_phi, self.omega_grid.n_omega)
        if s.shape != want:
            raise ConfigError(f"samples shape {s.shape} does not match schedule x omega grid {want}")
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)
        if self.extent_V is None:
            object.__setattr__(self, "extent_V", 1 / (math.sqrt(2) * self.omega_grid.delta_omega))

    @property
    def delta(self):
        """Pixel size implied by the frequency band edge."""
        return -1 / (2 * self.omega_grid.omega_min)

    def frequencies(self):
        """Frequency vectors ``omega * theta`` as an ``(N_phi, N_omega, 2)`` array."""
        phi = self.schedule.angles
        w = self.omega_grid.omegas
        return np.stack([np.outer(np.cos(phi), w), np.outer(np.sin(phi), w)], axis=-1)


def _add_noise(samples, sigma, seed):
    if sigma <= 0:
        return samples
    rng = rng_for(seed, "noise")
    return samples + sigma * (rng.standard_normal(samples.shape) + 1j * rng.standard_normal(samples.shape))


def simulate_analytic(spec, schedule, omega_grid, noise_sigma=0.0, seed=0):
    """Sample the phantom's exact Fourier transform on every spoke."""
    xi = np.stack([np.outer(np.cos(schedule.angles), omega_grid.omegas),
                   np.outer(np.sin(schedule.angles), omega_grid.omegas)], axis=-1)
    samples = _add_noise(kspace_at(spec, xi), noise_sigma, seed)
    return RadialKSpace(schedule, omega_grid, samples, float(noise_sigma), spec.extent_V)


def kernel_transform_1d(kernel, f):
    """Fourier transform of one separable kernel factor, centered at the origin."""
    s = np.sinc(kernel.delta * np.asarray(f, dtype=float))
    return s if kernel.kind == "square" else s * s


def simulate_discrete(grid, kernel, schedule, omega_grid):
    """Exact transform of ``sum_v X_v phi_v`` sampled on the radial grid."""
    if not math.isclose(kernel.delta, grid.delta, rel_tol=1e-12):
        raise ConfigError("kernel pixel size differs from the grid's")
    phi = schedule.angles
    w = omega_grid.omegas
    f1 = np.outer(np.cos(phi), w).ravel()
    f2 = np.outer(np.sin(phi), w).ravel()
    c = grid.centers_1d()
    e1 = np.exp(-2j * math.pi * np.outer(f1, c)) * kernel_transform_1d(kernel, f1)[:, None]
    e2 = np.exp(-2j * math.pi * np.outer(f2, c)) * kernel_transform_1d(kernel, f2)[:, None]
    samples = np.einsum("mi,ij,mj->m", e1, grid.values, e2).reshape(phi.size, w.size)
    return RadialKSpace(schedule, omega_grid, samples, 0.0, grid.extent_V)
