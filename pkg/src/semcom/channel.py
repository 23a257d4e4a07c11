"""AWGN and Rayleigh block-fading channels with perfect-CSI zero-forcing.

Signals are complex arrays shaped ``[blocks, symbols]``; one fading gain is
drawn per block (one block = one sentence).  SNR is per complex symbol
relative to unit signal power, so the noise variance is ``10 ** (-snr_db / 10)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T

AWGN = "awgn"
RAYLEIGH = "rayleigh"
KINDS = (AWGN, RAYLEIGH)


class DegenerateChannelError(ArithmeticError):
    """Channel gain too small to invert."""


def noise_variance(snr_db: float) -> float:
    if np.isinf(snr_db) and snr_db > 0:
        return 0.0
    return float(10.0 ** (-snr_db / 10.0))


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples CN(0, variance)."""
    s = np.sqrt(variance / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator per (seed, stream) pair."""
    return np.random.default_rng([int(seed), int(stream)])


@dataclass
class ChannelRealization:
    """Gains for a batch of blocks plus the generator that draws their noise."""

    kind: str
    snr_db: float
    h: np.ndarray
    seed: int = 0
    stream: int = 0
    rng: np.random.Generator = field(default=None, repr=False)

    @classmethod
    def draw(cls, kind: str, snr_db: float, n_blocks: int, seed: int = 0,
             stream: int = 0, rng: np.random.Generator | None = None) -> "ChannelRealization":
        if kind not in KINDS:
            raise ValueError(f"unknown channel kind {kind!r}; expected one of {KINDS}")
        rng = rng if rng is not None else make_rng(seed, stream)
        if kind == AWGN:
            h = np.ones(n_blocks, dtype=complex)
        else:
            h = complex_normal(rng, n_blocks)
            while np.any(h == 0):
                zero = h == 0
                h[zero] = complex_normal(rng, int(zero.sum()))
        return cls(kind, float(snr_db), h, seed, stream, rng)

    @property
    def sigma2(self) -> float:
        return noise_variance(self.snr_db)

    def effective_noise_variance(self) -> np.ndarray:
        """Per-block noise variance after zero-forcing, sigma^2 / |h|^2."""
        return self.sigma2 / np.abs(self.h) ** 2


def transmit(x: np.ndarray, real: ChannelRealization) -> np.ndarray:
    """y = h x + n with one gain per row of ``x``."""
    x = np.asarray(x)
    if x.ndim == 1:
        return transmit(x[None, :], real)[0]
    if x.shape[0] != real.h.shape[0]:
        raise ValueError(f"{x.shape[0]} blocks but realization has {real.h.shape[0]} gains")
    y = real.h[:, None] * x
    if real.sigma2 > 0:
        y = y + complex_normal(real.rng, x.shape, real.sigma2)
    return y


def equalize(y: np.ndarray, real: ChannelRealization) -> np.ndarray:
    """Zero-forcing with perfect CSI; AWGN passes through unchanged."""
    if real.kind == AWGN:
        return y
    if np.any(np.abs(real.h) < 1e-12):
        raise DegenerateChannelError("channel gain magnitude below 1e-12")
    y = np.asarray(y)
    if y.ndim == 1:
        return y / real.h[0]
    return y / real.h[:, None]


def straight_through(reals: T.Tensor, real: ChannelRealization) -> T.Tensor:
    """Training-mode channel on interleaved real/imag symbols ``[B, ..., 2M]``.

    The forward value is ``equalize(transmit(x))``; the noise term is a
    constant, so the Jacobian with respect to ``x`` is the identity.
    """
    x = reals.data.reshape(reals.shape[0], -1)
    cx = x[:, 0::2] + 1j * x[:, 1::2]
    y = equalize(transmit(cx, real), real)
    offset = np.empty_like(x)
    offset[:, 0::2] = y.real - cx.real
    offset[:, 1::2] = y.imag - cx.imag
    return T.add(reals, offset.reshape(reals.shape))
