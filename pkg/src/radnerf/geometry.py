"""Pixel grid conventions, interpolation kernels and projection directions.

A grid of ``n x n`` pixels covers the square ``[-V/2, V/2]^2``. Pixel indices
are 1-based at the API boundary, ``v = (v1, v2)`` with ``1 <= v_i <= n``, and
stored 0-based: ``values[v1 - 1, v2 - 1]``. The first array axis runs along
the first spatial coordinate ``x1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

KERNELS = ("square", "bilinear")


def _readonly(a):
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ImageGrid:
    """Complex pixel coefficients on a square grid of physical side ``extent_V``."""

    values: np.ndarray
    extent_V: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DomainError(f"grid must be square, got shape {values.shape}")
        n = values.shape[0]
        if n <= 0 or n % 2:
            raise DomainError(f"pixels per side must be even and positive, got {n}")
        if not (self.extent_V > 0 and math.isfinite(self.extent_V)):
            raise DomainError(f"extent must be positive, got {self.extent_V}")
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "extent_V", float(self.extent_V))

    @classmethod
    def zeros(cls, n, extent_V=None):
        return cls(np.zeros((n, n), dtype=np.complex128), float(n) if extent_V is None else extent_V)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def delta(self):
        return self.extent_V / self.n

    def centers_1d(self):
        """Pixel-center coordinates along one axis, ascending."""
        return (np.arange(1, self.n + 1) - 0.5) * self.delta - self.extent_V / 2

    def center_points(self):
        """All pixel centers as an ``(n*n, 2)`` array in storage order."""
        c = self.centers_1d()
        x1, x2 = np.meshgrid(c, c, indexing="ij")
        return np.stack([x1.ravel(), x2.ravel()], axis=-1)

    def magnitude(self):
        return np.abs(self.values)


@dataclass(frozen=True)
class Kernel:
    kind: str
    delta: float

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise DomainError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")
        if not self.delta > 0:
            raise DomainError("kernel pixel size must be positive")

    def weights_1d(self, t):
        """Separable factor of the kernel at offsets ``t`` from a pixel center.

        The 2D kernel is ``weights_1d(t1) * weights_1d(t2)``; each factor
        integrates to 1 so the product integrates to 1 over the plane.
        """
        t = np.asarray(t, dtype=float) / self.delta
        if self.kind == "square":
            w = (np.abs(t) <= 0.5).astype(float)
        else:
            w = np.clip(1.0 - np.abs(t), 0.0, None)
        return w / self.delta


@dataclass(frozen=True)
class Direction:
    phi: float
    theta: np.ndarray = field(repr=False)
    theta_perp: np.ndarray = field(repr=False)


def make_direction(phi):
    """Unit direction ``[cos phi, sin phi]`` and its normal ``[sin phi, -cos phi]``."""
    phi = float(phi)
    if not (0.0 <= phi < math.pi):
        raise DomainError(f"angle must lie in [0, pi), got {phi}")
    c, s = math.cos(phi), math.sin(phi)
    return Direction(phi, _readonly([c, s]), _readonly([s, -c]))


def pixel_center(grid, v):
    """Physical center of the 1-based pixel index ``v``."""
    v1, v2 = (int(i) for i in v)
    n = grid.n
    if not (1 <= v1 <= n and 1 <= v2 <= n):
        raise IndexError(f"pixel index {v} outside 1..{n}")
    d, half = grid.delta, grid.extent_V / 2
    return ((v1 - 0.5) * d - half, (v2 - 0.5) * d - half)


def eval_continuous(grid, kernel, x):
    """Evaluate ``sum_v X_v phi_v(x)`` at one point or an ``(..., 2)`` array of points.

    Only pixels whose kernel support can reach a point are visited, so the
    cost is independent of the grid size.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    pts = x.reshape(-1, 2)
    n, d, half = grid.n, grid.delta, grid.extent_V / 2
    # fractional 0-based index whose integer values are pixel centers
    f = (pts + half) / d - 0.5
    # both kernels reach at most the two pixels bracketing f along each axis
    base = np.floor(f).astype(int)
    out = np.zeros(len(pts), dtype=np.complex128)
    centers = grid.centers_1d()
    for o1 in (0, 1):
        i = base[:, 0] + o1
        ok_i = (i >= 0) & (i < n)
        w1 = np.zeros(len(pts))
        w1[ok_i] = kernel.weights_1d(pts[ok_i, 0] - centers[i[ok_i]])
        for o2 in (0, 1):
            j = base[:, 1] + o2
            ok = ok_i & (j >= 0) & (j < n)
            if not ok.any():
                continue
            w2 = kernel.weights_1d(pts[ok, 1] - centers[j[ok]])
            out[ok] += grid.values[i[ok], j[ok]] * w1[ok] * w2
    out = out.reshape(x.shape[:-1])
    return complex(out) if scalar else out
