"""Separate source/channel coding chain: Huffman -> turbo -> QAM -> channel and back."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import channel as ch
from . import modem, turbo
from .huffman import HuffmanCodebook


@dataclass
class SeparationScheme:
    """Fixed codebook, turbo code and modulation shared by transmitter and receiver.

    The receiver is told each sentence's Huffman bit count (an error-free
    length header), so decoding reads exactly that many bits.
    """

    codebook: HuffmanCodebook
    turbo: turbo.TurboCodeConfig = field(default_factory=turbo.TurboCodeConfig)
    order: int = 4

    def symbols_per_sentence(self, tokens: Sequence[str]) -> int:
        n_bits = len(self.codebook.encode(tokens))
        n_blocks = max(1, -(-n_bits // self.turbo.block_length))
        k = modem.bits_per_symbol(self.order)
        return -(-n_blocks * self.turbo.coded_length // k)


def run_chain(sentences: Sequence[Sequence[str]], scheme: SeparationScheme, kind: str,
              snr_db: float, seed: int = 0, stream: int = 0) -> list[list[str]]:
    """Transmit token lists through the chain over one channel realization per sentence."""
    if not sentences:
        return []
    k_mod = modem.bits_per_symbol(scheme.order)
    cfg = scheme.turbo
    payload = [scheme.codebook.encode(s) for s in sentences]
    blocks, symbols, owners = [], [], []
    for i, bits in enumerate(payload):
        n_blocks = max(1, -(-bits.size // cfg.block_length))
        padded = np.zeros(n_blocks * cfg.block_length, dtype=np.int64)
        padded[:bits.size] = bits
        coded = turbo.encode_blocks(padded.reshape(n_blocks, cfg.block_length), cfg).reshape(-1)
        extra = (-coded.size) % k_mod
        coded = np.concatenate([coded, np.zeros(extra, dtype=coded.dtype)])
        symbols.append(modem.modulate(coded, scheme.order))
        owners.append(n_blocks)
    width = max(s.size for s in symbols)
    x = np.zeros((len(symbols), width), dtype=complex)
    for i, s in enumerate(symbols):
        x[i, :s.size] = s
    real = ch.ChannelRealization.draw(kind, snr_db, len(sentences), seed=seed, stream=stream)
    y = ch.equalize(ch.transmit(x, real), real)
    noise = real.effective_noise_variance()[:, None]
    llr_rows = []
    for i, s in enumerate(symbols):
        llr = modem.demodulate_soft(y[i, :s.size], noise[i], scheme.order)
        llr_rows.append(llr[:owners[i] * cfg.coded_length].reshape(owners[i], cfg.coded_length))
    decoded = turbo.decode_blocks(np.concatenate(llr_rows, axis=0), cfg)
    out, row = [], 0
    for i, bits in enumerate(payload):
        info = decoded[row:row + owners[i]].reshape(-1)[:bits.size]
        row += owners[i]
        out.append(scheme.codebook.decode(info))
    return out
