"""Complex-valued coordinate MLP with positional encoding and hand-written backprop.

The network maps a normalized coordinate ``u in [0, 1]^2`` to one complex
value. Its input is ``[u1, u2, PE(u1), PE(u2)]`` where ``PE`` stacks
``cos(2^l pi u), sin(2^l pi u)`` for ``l < L``. Hidden layers use ``sin``;
the last layer is linear with two outputs read as (real, imag). One layer may
take the encoded input concatenated in front of the previous hidden state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .sampling import rng_for


@dataclass(frozen=True)
class PeConfig:
    L: int = 20

    def __post_init__(self):
        if self.L < 0:
            raise ConfigError("encoding order must be non-negative")

    @property
    def input_dim(self):
        return 2 + 4 * self.L


def encode(v, cfg):
    """Encode coordinates of shape ``(2,)`` or ``(M, 2)``."""
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    v = np.atleast_2d(v)
    if cfg.L == 0:
        out = v.copy()
    else:
        freq = math.pi * 2.0 ** np.arange(cfg.L)
        ang = v[:, :, None] * freq  # (M, 2, L)
        pe = np.stack([np.cos(ang), np.sin(ang)], axis=-1).reshape(len(v), 2, 2 * cfg.L)
        out = np.concatenate([v, pe[:, 0], pe[:, 1]], axis=1)
    return out[0] if single else out


@dataclass
class MlpParams:
    """Weights ``W`` of shape ``(fan_out, fan_in)`` and biases, one pair per linear layer.

    ``skip_at`` is the index of the layer that receives ``[encoded, hidden]``.
    """

    layers: list
    skip_at: int | None = None

    def __post_init__(self):
        self.layers = [(np.asarray(W, dtype=float), np.asarray(b, dtype=float)) for W, b in self.layers]
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        in_dim = self.layers[0][0].shape[1]
        prev = in_dim
        for i, (W, b) in enumerate(self.layers):
            want = prev + in_dim if i == self.skip_at else prev
            if W.ndim != 2 or W.shape[1] != want or b.shape != (W.shape[0],):
                raise ConfigError(f"layer {i}: weight {W.shape} / bias {b.shape} do not fit input width {want}")
            prev = W.shape[0]
        if prev != 2:
            raise ConfigError(f"last layer must have 2 outputs, got {prev}")

    @property
    def input_dim(self):
        return self.layers[0][0].shape[1]

    def copy(self):
        return MlpParams([(W.copy(), b.copy()) for W, b in self.layers], self.skip_at)

    def flat(self):
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in self.layers])

    def with_flat(self, theta):
        out, pos = [], 0
        for W, b in self.layers:
            nw, nb = W.size, b.size
            out.append((theta[pos:pos + nw].reshape(W.shape).copy(), theta[pos + nw:pos + nw + nb].copy()))
            pos += nw + nb
        return MlpParams(out, self.skip_at)

    def all_finite(self):
        return all(np.isfinite(W).all() and np.isfinite(b).all() for W, b in self.layers)


def layer_dims(pe, width=256, before_skip=4, after_skip=3):
    """Fan-in/fan-out of each layer plus the skip index.

    With the defaults and ``L = 20`` this gives 82-256, 256-256 x3,
    338-256, 256-256 x2, 256-2.
    """
    d = pe.input_dim
    dims = [(d, width)] + [(width, width)] * (before_skip - 1)
    skip_at = None
    if after_skip > 0:
        skip_at = len(dims)
        dims += [(width + d, width)] + [(width, width)] * (after_skip - 1)
    dims.append((width, 2))
    return dims, skip_at


def init_params(pe, seed=0, width=256, before_skip=4, after_skip=3, out_scale=1.0):
    """Uniform ``+-sqrt(6 / fan_in)`` weights and zero biases.

    ``out_scale`` shrinks the output layer so the initial field starts near zero.
    """
    dims, skip_at = layer_dims(pe, width, before_skip, after_skip)
    rng = rng_for(seed, "init")
    layers = []
    for i, (fan_in, fan_out) in enumerate(dims):
        bound = math.sqrt(6.0 / fan_in) * (out_scale if i == len(dims) - 1 else 1.0)
        layers.append((rng.uniform(-bound, bound, (fan_out, fan_in)), np.zeros(fan_out)))
    return MlpParams(layers, skip_at)


def _check(params, cfg):
    if params.input_dim != cfg.input_dim:
        raise ConfigError(f"network expects {params.input_dim} inputs but L={cfg.L} encodes {cfg.input_dim}")


def forward_cached(params, cfg, coords):
    """Forward pass over ``(M, 2)`` coordinates keeping what backprop needs."""
    _check(params, cfg)
    enc = encode(np.atleast_2d(coords), cfg)
    inputs, pre = [], []
    h = enc
    last = len(params.layers) - 1
    for i, (W, b) in enumerate(params.layers):
        x = np.concatenate([enc, h], axis=1) if i == params.skip_at else h
        z = x @ W.T
        z += b
        inputs.append(x)
        if i == last:
            h = z
        else:
            pre.append(z)
            h = np.sin(z)
    out = h[:, 0] + 1j * h[:, 1]
    return out, (enc, inputs, pre)


def forward(params, cfg, v):
    """Complex network value at one coordinate pair or an ``(M, 2)`` batch."""
    v = np.asarray(v, dtype=float)
    out, _ = forward_cached(params, cfg, v.reshape(-1, 2))
    return complex(out[0]) if v.ndim == 1 else out


def backward_cached(params, cache, cotangent):
    """Gradient of ``sum_i Re(conj(g_i) chi_i)`` given a forward cache."""
    enc, inputs, pre = cache
    g = np.stack([cotangent.real, cotangent.imag], axis=1).astype(float)
    grads = [None] * len(params.layers)
    d_in = enc.shape[1]
    for i in range(len(params.layers) - 1, -1, -1):
        W, _ = params.layers[i]
        if i != len(params.layers) - 1:
            g = g * np.cos(pre[i])
        grads[i] = (g.T @ inputs[i], g.sum(axis=0))
        if i == 0:
            break
        g = g @ W
        if i == params.skip_at:
            g = g[:, d_in:]
    return MlpParams(grads, params.skip_at)


def backward(params, cfg, batch, cotangents):
    """Parameter gradient of ``sum_i Re(conj(c_i) chi(v_i))`` over a batch."""
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    cotangents = np.atleast_1d(np.asarray(cotangents, dtype=np.complex128))
    if cotangents.shape != (len(batch),):
        raise ConfigError(f"{cotangents.shape[0]} cotangents for {len(batch)} coordinates")
    _, cache = forward_cached(params, cfg, batch)
    return backward_cached(params, cache, cotangents)
