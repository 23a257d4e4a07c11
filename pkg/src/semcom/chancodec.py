"""Dense channel encoder/decoder between semantic features and complex symbols.

Transmitter per token: ``d -> 256 (ReLU) -> 16`` reals, read as 8 complex
symbols with even entries real and odd entries imaginary.  Receiver per token:
``16 -> 128 (ReLU) -> 512 (ReLU) -> d``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import tensor as T
from .tensor import Tensor


class PowerNormalizationError(FloatingPointError):
    """Symbols have (near) zero power and cannot be normalized."""


class FramingError(ValueError):
    """Symbol layout does not match the declared frame metadata."""


@dataclass
class SymbolFrame:
    """Channel symbols for one batch.

    ``reals`` is ``[B, L, 2 * M_t]`` with interleaved real/imaginary parts;
    ``token_mask`` marks the tokens that carry symbols (PAD tokens transmit
    zeros and are excluded from the power average).
    """

    reals: Tensor
    length: int
    symbols_per_token: int
    token_mask: np.ndarray

    @property
    def symbols(self) -> np.ndarray:
        """Complex view ``[B, L * M_t]``."""
        x = self.reals.data.reshape(self.reals.shape[0], -1)
        return x[:, 0::2] + 1j * x[:, 1::2]

    def average_power(self) -> float:
        """Mean |x|^2 over symbols of real (non-PAD) tokens."""
        per_token = (self.reals.data ** 2).sum(axis=-1)
        return float(per_token[self.token_mask].sum() / (self.token_mask.sum() * self.symbols_per_token))

    def with_symbols(self, symbols: np.ndarray) -> "SymbolFrame":
        """Same layout carrying new complex symbols (outside the tape)."""
        symbols = np.asarray(symbols)
        b = self.reals.shape[0]
        if symbols.shape != (b, self.length * self.symbols_per_token):
            raise FramingError(f"expected symbols {(b, self.length * self.symbols_per_token)}, "
                               f"got {symbols.shape}")
        x = np.empty((b, symbols.shape[1] * 2))
        x[:, 0::2] = symbols.real
        x[:, 1::2] = symbols.imag
        return SymbolFrame(Tensor(x.reshape(self.reals.shape)), self.length,
                           self.symbols_per_token, self.token_mask)


def power_normalize(x: Tensor, token_mask: np.ndarray, eps: float = 1e-12) -> Tensor:
    """Scale ``x`` ([B, L, 2M]) to unit average complex-symbol power over real tokens.

    PAD-token rows are zeroed.  Differentiable through the power estimate.
    """
    mask = token_mask[..., None].astype(np.float64)
    n_symbols = token_mask.sum() * x.shape[-1] / 2
    if n_symbols == 0:
        raise PowerNormalizationError("no real tokens to normalize")
    masked = x * mask
    power = T.scale(T.tsum(masked * masked), 1.0 / n_symbols)
    if not np.isfinite(power.data) or power.data <= eps:
        raise PowerNormalizationError(f"symbol power {float(power.data):.3g} too small to normalize")
    return masked / T.sqrt(power)


def channel_encode(features: Tensor, p: Mapping[str, Tensor], token_mask: np.ndarray) -> SymbolFrame:
    b, length, _ = features.shape
    hidden = T.relu(T.dense(features, p["tx.w1"], p["tx.b1"]))
    reals = T.dense(hidden, p["tx.w2"], p["tx.b2"])
    if reals.shape[-1] % 2:
        raise FramingError("transmitter must emit an even number of reals per token")
    token_mask = np.asarray(token_mask, dtype=bool)
    if token_mask.shape != (b, length):
        raise FramingError(f"token mask {token_mask.shape} does not match features {features.shape}")
    return SymbolFrame(power_normalize(reals, token_mask), length, reals.shape[-1] // 2, token_mask)


def channel_decode(received: SymbolFrame, p: Mapping[str, Tensor]) -> Tensor:
    reals = received.reals
    expected = 2 * received.symbols_per_token
    if reals.ndim != 3 or reals.shape[1] != received.length or reals.shape[2] != expected \
            or p["rx.w1"].shape[0] != expected:
        raise FramingError(f"frame {reals.shape} does not match layout "
                           f"(L={received.length}, M_t={received.symbols_per_token})")
    h = T.relu(T.dense(reals, p["rx.w1"], p["rx.b1"]))
    h = T.relu(T.dense(h, p["rx.w2"], p["rx.b2"]))
    return T.dense(h, p["rx.w3"], p["rx.b3"])
