"""Analytic ellipse phantoms with closed-form Fourier transforms and projections.

Measurements are simulated from these continuous objects rather than from a
rasterized image, so reconstructions are never tested against the discrete
model they were fitted with.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import j1

from .errors import DomainError, FormatError
from .geometry import ImageGrid

BUILTIN_PHANTOMS = {"shepp_logan": "shepp_logan.txt", "simple": "simple.txt"}


@dataclass(frozen=True)
class Ellipse:
    center: tuple
    semi_axes: tuple
    angle: float
    density: float

    def __post_init__(self):
        a, b = self.semi_axes
        if not (a > 0 and b > 0):
            raise DomainError(f"semi-axes must be positive, got {self.semi_axes}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "semi_axes", (float(a), float(b)))
        object.__setattr__(self, "angle", float(self.angle))
        object.__setattr__(self, "density", float(self.density))

    def half_widths(self):
        """Half side lengths of the axis-aligned bounding box."""
        a, b = self.semi_axes
        c, s = math.cos(self.angle), math.sin(self.angle)
        return math.hypot(a * c, b * s), math.hypot(a * s, b * c)

    def rotated(self, alpha):
        """Copy rotated by ``alpha`` about the origin."""
        c, s = math.cos(alpha), math.sin(alpha)
        x, y = self.center
        return Ellipse((c * x - s * y, s * x + c * y), self.semi_axes, self.angle + alpha, self.density)


@dataclass(frozen=True)
class PhantomSpec:
    ellipses: tuple
    extent_V: float

    def __post_init__(self):
        object.__setattr__(self, "ellipses", tuple(self.ellipses))
        half = self.extent_V / 2
        for e in self.ellipses:
            hx, hy = e.half_widths()
            cx, cy = e.center
            if abs(cx) + hx > half + 1e-12 or abs(cy) + hy > half + 1e-12:
                raise DomainError(f"ellipse {e} leaves the square of side {self.extent_V}")

    def __add__(self, other):
        if other.extent_V != self.extent_V:
            raise DomainError("cannot combine phantoms with different extents")
        return PhantomSpec(self.ellipses + other.ellipses, self.extent_V)

    def rotated(self, alpha):
        return PhantomSpec(tuple(e.rotated(alpha) for e in self.ellipses), self.extent_V)


def parse_phantom(text, extent_V):
    """Parse the six-column ellipse format (``cx cy a b angle density``).

    Positions and semi-axes are given in units of the half-extent ``V/2``.
    """
    scale = extent_V / 2
    ellipses = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 6:
            raise FormatError(f"line {lineno}: expected 6 fields, got {len(fields)}")
        try:
            cx, cy, a, b, angle, rho = (float(f) for f in fields)
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        ellipses.append(Ellipse((cx * scale, cy * scale), (a * scale, b * scale), angle, rho))
    return PhantomSpec(tuple(ellipses), extent_V)


def format_phantom(spec):
    scale = spec.extent_V / 2
    lines = ["# cx cy a b angle density (lengths in units of V/2, angle in radians)"]
    for e in spec.ellipses:
        vals = (e.center[0] / scale, e.center[1] / scale, e.semi_axes[0] / scale,
                e.semi_axes[1] / scale, e.angle, e.density)
        lines.append(" ".join(repr(float(v)) for v in vals))
    return "\n".join(lines) + "\n"


def load_phantom(name_or_path, extent_V):
    """Load a built-in phantom by name or a spec file from disk."""
    if name_or_path in BUILTIN_PHANTOMS:
        text = resources.files("radnerf").joinpath("data").joinpath(BUILTIN_PHANTOMS[name_or_path]).read_text()
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise FileNotFoundError(f"phantom file not found: {path}")
        text = path.read_text()
    return parse_phantom(text, extent_V)


def rasterize(spec, n):
    """Sum of densities of the ellipses containing each pixel center."""
    if n < 8 or n % 2:
        raise DomainError(f"raster size must be even and >= 8, got {n}")
    grid = ImageGrid.zeros(n, spec.extent_V)
    pts = grid.center_points()
    img = np.zeros(len(pts))
    for e in spec.ellipses:
        c, s = math.cos(e.angle), math.sin(e.angle)
        dx = pts[:, 0] - e.center[0]
        dy = pts[:, 1] - e.center[1]
        u = (c * dx + s * dy) / e.semi_axes[0]
        w = (-s * dx + c * dy) / e.semi_axes[1]
        img[u * u + w * w <= 1.0] += e.density
    return ImageGrid(img.reshape(n, n).astype(np.complex128), spec.extent_V)


def _jinc(q):
    """``J1(2 pi q) / q`` with its limit ``pi`` at ``q = 0``."""
    q = np.asarray(q, dtype=float)
    out = np.full(q.shape, math.pi)
    nz = q > 1e-12
    out[nz] = j1(2 * math.pi * q[nz]) / q[nz]
    small = ~nz
    # second-order Taylor term keeps the tiny-q branch continuous
    out[small] = math.pi * (1 - (math.pi * q[small]) ** 2 / 2)
    return out


def kspace_at(spec, xi):
    """Continuous 2D Fourier transform of the phantom at frequency vectors ``xi`` (..., 2)."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros(xi.shape[:-1], dtype=np.complex128)
    for e in spec.ellipses:
        a, b = e.semi_axes
        c, s = math.cos(e.angle), math.sin(e.angle)
        # frequency expressed in the ellipse's own frame, scaled by its axes
        qa = a * (c * xi[..., 0] + s * xi[..., 1])
        qb = b * (-s * xi[..., 0] + c * xi[..., 1])
        q = np.hypot(qa, qb)
        shift = np.exp(-2j * math.pi * (xi[..., 0] * e.center[0] + xi[..., 1] * e.center[1]))
        out += e.density * a * b * _jinc(q) * shift
    return out


def analytic_kspace(spec, omega, direction):
    """Fourier transform of the phantom at ``omega * theta`` along one spoke."""
    omega = np.asarray(omega, dtype=float)
    xi = omega[..., None] * direction.theta
    val = kspace_at(spec, xi)
    return complex(val) if val.ndim == 0 else val


def projection_at(spec, r, phi):
    """Line integrals over ``x . [cos phi, sin phi] = r``; ``r`` and ``phi`` broadcast.

    ``phi`` is not restricted to ``[0, pi)`` here.
    """
    r, phi = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(phi, dtype=float))
    out = np.zeros(r.shape)
    for e in spec.ellipses:
        a, b = e.semi_axes
        t = r - (e.center[0] * np.cos(phi) + e.center[1] * np.sin(phi))
        s2 = (a * np.cos(phi - e.angle)) ** 2 + (b * np.sin(phi - e.angle)) ** 2
        inside = t * t < s2
        chord = np.zeros(r.shape)
        chord[inside] = 2 * a * b * np.sqrt(s2[inside] - t[inside] ** 2) / s2[inside]
        out += e.density * chord
    return out


def analytic_projection(spec, r, direction):
    val = projection_at(spec, r, direction.phi)
    return float(val) if val.ndim == 0 else val
