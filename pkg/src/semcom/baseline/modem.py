"""Gray-mapped square QAM with exact per-bit log-likelihood ratios.

Each symbol carries ``log2(order)`` bits: the first half select the in-phase
level, the second half the quadrature level.  Bit value 0 maps toward the
positive amplitude.  Average symbol power is 1.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

SUPPORTED_ORDERS = (4, 16, 64, 256)
MIN_NOISE_VAR = 1e-12  # noiseless links still get finite metrics
LLR_LIMIT = 500.0


def bits_per_symbol(order: int) -> int:
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}; choose from {SUPPORTED_ORDERS}")
    return int(np.log2(order))


@lru_cache(maxsize=None)
def pam_levels(bits_per_dim: int):
    """Amplitude for each Gray label (rows of the bit table), unit-power scaled for the QAM.

    Returns ``(amplitudes [m], labels [m, bits_per_dim])``.
    """
    m = 2 ** bits_per_dim
    gray = np.arange(m) ^ (np.arange(m) >> 1)
    # level index i carries Gray label gray[i]; index 0 is the most positive level
    amps = (m - 1) - 2.0 * np.arange(m)
    labels = (gray[:, None] >> np.arange(bits_per_dim - 1, -1, -1)) & 1
    power = 2 * np.mean(amps ** 2)  # I and Q together
    return amps / np.sqrt(power), labels


def modulate(bits, order: int = 4) -> np.ndarray:
    """Bits ``[..., N]`` (N a multiple of log2(order)) to complex symbols ``[..., N / log2(order)]``."""
    k = bits_per_symbol(order)
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] % k:
        raise ValueError(f"bit count {bits.shape[-1]} is not a multiple of {k}")
    half = k // 2
    amps, labels = pam_levels(half)
    weights = 1 << np.arange(half - 1, -1, -1)
    label_to_level = np.empty(len(amps), dtype=np.int64)
    label_to_level[labels @ weights] = np.arange(len(amps))
    groups = bits.reshape(bits.shape[:-1] + (-1, k))
    i_label = groups[..., :half] @ weights
    q_label = groups[..., half:] @ weights
    return amps[label_to_level[i_label]] + 1j * amps[label_to_level[q_label]]


def _pam_llr(y: np.ndarray, noise_var, half: int) -> np.ndarray:
    """LLRs ``[..., N, half]`` for one real dimension with variance ``noise_var / 2``."""
    amps, labels = pam_levels(half)
    metric = -(y[..., None] - amps) ** 2 / np.asarray(noise_var)[..., None]  # [..., N, m]
    out = np.empty(y.shape + (half,))
    for j in range(half):
        zero = labels[:, j] == 0
        out[..., j] = logsumexp(metric[..., zero], axis=-1) - logsumexp(metric[..., ~zero], axis=-1)
    return out


def demodulate_soft(y, noise_var, order: int = 4) -> np.ndarray:
    """Exact LLRs ``log P(b=0|y) / P(b=1|y)`` for symbols ``y`` ``[..., N]``.

    ``noise_var`` is the complex noise variance per symbol and broadcasts
    against ``y`` (e.g. per block after zero-forcing).
    """
    k = bits_per_symbol(order)
    half = k // 2
    y = np.asarray(y)
    noise_var = np.broadcast_to(np.asarray(noise_var, dtype=np.float64), y.shape)
    noise_var = np.maximum(noise_var, MIN_NOISE_VAR)
    li = _pam_llr(y.real, noise_var, half)
    lq = _pam_llr(y.imag, noise_var, half)
    llr = np.concatenate([li, lq], axis=-1).reshape(y.shape[:-1] + (-1,))
    return np.clip(llr, -LLR_LIMIT, LLR_LIMIT)


def hard_decision(llrs) -> np.ndarray:
    return (np.asarray(llrs) < 0).astype(np.uint8)
