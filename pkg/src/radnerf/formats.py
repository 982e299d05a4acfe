"""Binary and CSV file formats. All binary layouts are little-endian.

``NRFIMG01``  u32 n, f64 extent, n*n complex (re, im) f64 pairs, row-major
``NRFKSP01``  u32 N_phi, u32 N_omega, f64 angles, f64 omegas, complex samples spoke-major
``NRFSIN01``  u32 N_phi, u32 N_omega, f64 angles, f64 offsets, complex samples spoke-major
``NRFMLP01``  u32 layer count, then per layer u32 rows, u32 cols, f64 weights, f64 biases
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .forward import RadialKSpace
from .geometry import ImageGrid
from .network import MlpParams
from .sampling import AngleSchedule, OmegaGrid

IMG_MAGIC = b"NRFIMG01"
KSP_MAGIC = b"NRFKSP01"
SIN_MAGIC = b"NRFSIN01"
MLP_MAGIC = b"NRFMLP01"

SCHEDULE_HEADER = ["index", "angle_radians"]
METRIC_HEADER = ["case", "ssim", "psnr_db", "psnr_mode"]
LOSS_HEADER = ["step", "loss", "seconds"]
SWEEP_HEADER = ["R", "N_phi", "ssim_ours", "ssim_ifft", "psnr_ours", "psnr_ifft", "train_seconds", "infer_seconds"]
SAMPLING_HEADER = ["scheme", "seed", "N_phi", "ssim_ours", "psnr_ours", "max_adjacent_gap", "covering_radius"]


class _Reader:
    def __init__(self, data, magic):
        if data[:8] != magic:
            raise FormatError(f"bad magic {data[:8]!r}, expected {magic!r}")
        self.data, self.pos = data, 8

    def take(self, nbytes):
        if self.pos + nbytes > len(self.data):
            raise FormatError("file truncated")
        out = self.data[self.pos:self.pos + nbytes]
        self.pos += nbytes
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def f64(self, count=None):
        if count is None:
            return struct.unpack("<d", self.take(8))[0]
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(float)

    def complex(self, count):
        pairs = self.f64(2 * count).reshape(count, 2)
        return pairs[:, 0] + 1j * pairs[:, 1]

    def done(self):
        if self.pos != len(self.data):
            raise FormatError(f"{len(self.data) - self.pos} trailing bytes")


def _f64(a):
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def _cplx(a):
    a = np.asarray(a, dtype=np.complex128).ravel()
    return _f64(np.stack([a.real, a.imag], axis=1))


def _write(path, payload):
    Path(path).write_bytes(payload)


def image_bytes(grid):
    return IMG_MAGIC + struct.pack("<Id", grid.n, grid.extent_V) + _cplx(grid.values)


def write_image(path, grid):
    _write(path, image_bytes(grid))


def read_image(path):
    r = _Reader(Path(path).read_bytes(), IMG_MAGIC)
    n = r.u32()
    extent = r.f64()
    values = r.complex(n * n).reshape(n, n)
    r.done()
    return ImageGrid(values, extent)


def write_pgm(path, grid):
    """8-bit magnitude image, min-max normalized (lossy, for viewing only)."""
    mag = np.abs(getattr(grid, "values", grid))
    lo, hi = float(mag.min()), float(mag.max())
    scaled = np.zeros(mag.shape) if hi == lo else (mag - lo) / (hi - lo)
    pix = np.round(scaled * 255).astype(np.uint8)
    header = f"P5\n{pix.shape[1]} {pix.shape[0]}\n255\n".encode()
    _write(path, header + pix.tobytes())


@dataclass(frozen=True)
class SpokeFile:
    """Raw contents of a k-space or sinogram file: angles, axis values, samples."""

    angles: np.ndarray
    axis: np.ndarray
    samples: np.ndarray


def _spoke_bytes(magic, angles, axis, samples):
    angles, axis = np.asarray(angles, float), np.asarray(axis, float)
    samples = np.asarray(samples, dtype=np.complex128)
    if samples.shape != (angles.size, axis.size):
        raise FormatError(f"samples {samples.shape} do not match ({angles.size}, {axis.size})")
    return magic + struct.pack("<II", angles.size, axis.size) + _f64(angles) + _f64(axis) + _cplx(samples)


def _read_spokes(path, magic):
    r = _Reader(Path(path).read_bytes(), magic)
    n_phi, n_ax = r.u32(), r.u32()
    angles, axis = r.f64(n_phi), r.f64(n_ax)
    samples = r.complex(n_phi * n_ax).reshape(n_phi, n_ax)
    r.done()
    return SpokeFile(angles, axis, samples)


def write_kspace(path, k):
    _write(path, _spoke_bytes(KSP_MAGIC, k.schedule.angles, k.omega_grid.omegas, k.samples))


def read_kspace_raw(path):
    return _read_spokes(path, KSP_MAGIC)


def read_kspace(path):
    """Read a k-space file back into a ``RadialKSpace`` on its uniform frequency grid."""
    raw = read_kspace_raw(path)
    w = raw.axis
    if w.size < 2:
        raise FormatError("need at least two radial samples")
    dw = float(w[-1] - w[0]) / (w.size - 1)
    if not np.allclose(w[0] + np.arange(w.size) * dw, w, rtol=0, atol=1e-9 * abs(w).max()):
        raise FormatError("radial samples are not uniformly spaced")
    grid = OmegaGrid(w.size, dw, float(w[0]), tuple(w.tolist()))
    return RadialKSpace(AngleSchedule(raw.angles), grid, raw.samples)


def write_sinogram(path, sino):
    _write(path, _spoke_bytes(SIN_MAGIC, sino.schedule.angles, sino.r_grid, sino.samples))


def read_sinogram(path):
    return _read_spokes(path, SIN_MAGIC)


def params_bytes(params):
    out = [MLP_MAGIC, struct.pack("<I", len(params.layers))]
    for W, b in params.layers:
        out += [struct.pack("<II", *W.shape), _f64(W), _f64(b)]
    return b"".join(out)


def write_params(path, params):
    _write(path, params_bytes(params))


def read_params(path):
    """Read a checkpoint; the skip layer is the one whose width exceeds its predecessor's output."""
    r = _Reader(Path(path).read_bytes(), MLP_MAGIC)
    layers = []
    for _ in range(r.u32()):
        rows, cols = r.u32(), r.u32()
        layers.append((r.f64(rows * cols).reshape(rows, cols), r.f64(rows)))
    r.done()
    if not layers:
        raise FormatError("checkpoint has no layers")
    skip_at = None
    in_dim = layers[0][0].shape[1]
    for i in range(1, len(layers)):
        if layers[i][0].shape[1] == layers[i - 1][0].shape[0] + in_dim:
            skip_at = i
    return MlpParams(layers, skip_at)


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "inf" if x == math.inf else repr(x)
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path, header=None):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path} is empty")
    if header is not None and rows[0] != list(header):
        raise FormatError(f"unexpected header {rows[0]}, expected {list(header)}")
    return rows[0], rows[1:]


def write_schedule_csv(path, schedule):
    write_csv(path, SCHEDULE_HEADER, ((i, float(a)) for i, a in enumerate(schedule.angles)))


def read_schedule_csv(path):
    _, rows = read_csv(path, SCHEDULE_HEADER)
    return AngleSchedule([float(a) for _, a in rows])


def write_metrics_csv(path, rows):
    """``rows`` of (case, ssim, psnr_db, psnr_mode)."""
    write_csv(path, METRIC_HEADER, rows)


def read_metrics_csv(path):
    _, rows = read_csv(path, METRIC_HEADER)
    return [(c, float(s), float(p), m) for c, s, p, m in rows]
