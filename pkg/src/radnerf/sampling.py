"""Spoke-angle schedules, the radial frequency grid and angular gap statistics."""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

SCHEMES = ("uniform", "limited", "random", "stratified", "golden")
GOLDEN_RATIO = (1 + math.sqrt(5)) / 2


def rng_for(seed, label):
    """Independent generator for one consumer of the top-level seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(label.encode())]))


def full_spoke_count(n):
    """Spokes needed for full sampling of an ``n x n`` image, ``floor(pi/2 * n)``."""
    if n < 8:
        raise DomainError(f"need at least 8 pixels per side, got {n}")
    return math.floor(math.pi / 2 * n)


@dataclass(frozen=True)
class AngleSchedule:
    angles: np.ndarray
    scheme: str = "custom"
    R: float = 1.0
    seed: int = 0
    acquisition_order: tuple = field(default=(), repr=False)

    def __post_init__(self):
        a = np.array(self.angles, dtype=float).ravel()
        if a.size < 1:
            raise DomainError("a schedule needs at least one angle")
        if np.any(a < 0) or np.any(a >= math.pi):
            raise DomainError("angles must lie in [0, pi)")
        if np.any(np.diff(a) <= 0):
            raise DomainError("angles must be strictly ascending")
        a.flags.writeable = False
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "acquisition_order", tuple(float(x) for x in self.acquisition_order))

    def __len__(self):
        return self.angles.size

    @property
    def n_phi(self):
        return self.angles.size


def scheme_angles(scheme, n_phi, rng=None):
    """Angles of one scheme for ``n_phi`` spokes, in acquisition order."""
    k = np.arange(n_phi)
    if scheme == "uniform":
        return k * math.pi / n_phi
    if scheme == "limited":
        return k * math.pi / (2 * n_phi)
    if scheme == "golden":
        return np.mod(k * math.pi / GOLDEN_RATIO, math.pi)
    if rng is None:
        raise DomainError(f"scheme {scheme!r} needs a random generator")
    if scheme == "random":
        draws = np.unique(rng.uniform(0.0, math.pi, n_phi))
        while draws.size < n_phi:
            draws = np.unique(np.concatenate([draws, rng.uniform(0.0, math.pi, n_phi - draws.size)]))
        return draws
    if scheme == "stratified":
        return (k * math.pi + rng.uniform(0.0, math.pi, n_phi)) / n_phi
    raise DomainError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def schedule_from_count(scheme, n_phi, seed=0, R=1.0):
    if n_phi < 1:
        raise DomainError("need at least one spoke")
    order = scheme_angles(scheme, n_phi, rng_for(seed, "schedule"))
    # float mod can land on pi itself; fold it back to 0
    order = np.where(order >= math.pi, 0.0, order)
    return AngleSchedule(np.sort(order), scheme, R, seed, tuple(order))


def make_schedule(scheme, n, R, seed=0):
    """Schedule with ``floor(full_spoke_count(n) / R)`` spokes."""
    if R < 1:
        raise DomainError(f"acceleration factor must be >= 1, got {R}")
    n_phi = math.floor(full_spoke_count(n) / R)
    if n_phi < 2:
        raise DomainError(f"R={R} leaves {n_phi} spokes for n={n}; need at least 2")
    return schedule_from_count(scheme, n_phi, seed, R)


@dataclass(frozen=True)
class OmegaGrid:
    """Uniform radial samples. ``values`` pins exact sample values, e.g. as read from a file."""

    n_omega: int
    delta_omega: float
    omega_min: float
    values: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.values is not None and len(self.values) != self.n_omega:
            raise DomainError(f"{len(self.values)} values for {self.n_omega} samples")

    @property
    def omegas(self):
        if self.values is not None:
            return np.array(self.values, dtype=float)
        return self.omega_min + np.arange(self.n_omega) * self.delta_omega


def make_omega_grid(n, extent_V=None):
    """Radial samples spaced ``1/(sqrt(2) V)`` from ``-1/(2 delta)``; ``floor(sqrt(2) n)`` of them."""
    if n <= 0 or n % 2:
        raise DomainError(f"pixels per side must be even, got {n}")
    extent_V = float(n) if extent_V is None else float(extent_V)
    delta = extent_V / n
    return OmegaGrid(math.isqrt(2 * n * n), 1 / (math.sqrt(2) * extent_V), -1 / (2 * delta))


@dataclass(frozen=True)
class GapReport:
    max_adjacent_gap: float
    covering_radius: float
    per_gap: tuple


def periodic_distance(a, b):
    """Distance on the circle of circumference pi."""
    d = np.mod(np.asarray(a) - np.asarray(b), math.pi)
    return np.minimum(d, math.pi - d)


def gap_report(schedule, n_full=None):
    """Adjacent gaps (wrap gap included) and the covering radius on the pi-circle.

    The covering radius is evaluated on the full-sampling uniform angle set
    (``n_full`` spokes, default ``16 * len(schedule)``) together with the
    midpoint of every gap, so the supremum over the circle is attained.
    """
    a = schedule.angles
    if a.size < 2:
        raise DomainError("gap statistics need at least two angles")
    gaps = np.append(np.diff(a), math.pi - a[-1] + a[0])
    n_full = 16 * a.size if n_full is None else n_full
    mids = np.mod(a + gaps / 2, math.pi)
    targets = np.concatenate([np.arange(n_full) * math.pi / n_full, mids])
    idx = np.searchsorted(a, targets)
    lo = a[(idx - 1) % a.size]
    hi = a[idx % a.size]
    nearest = np.minimum(periodic_distance(targets, lo), periodic_distance(targets, hi))
    return GapReport(float(gaps.max()), float(nearest.max()), tuple(float(g) for g in gaps))
