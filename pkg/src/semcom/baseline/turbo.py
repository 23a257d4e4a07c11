"""Rate-1/3 parallel-concatenated turbo code with (7,5) octal RSC constituents.

LLRs follow the convention ``log P(b=0) / P(b=1)``: positive means bit 0.
Each block of ``K`` information bits becomes ``3K + 8`` coded bits::

    [systematic (K) | parity 1 (K) | parity 2 (K) | tail 1 (4) | tail 2 (4)]

where each tail is two (systematic, parity) pairs that drive its encoder
back to the zero state.  Decoding is iterative log-MAP (BCJR) vectorized
over blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

MEMORY = 2
N_STATES = 4
TAIL = 2 * MEMORY  # coded tail bits per constituent encoder


class FramingError(ValueError):
    """Coded length does not match the configured block structure."""


def _trellis():
    nxt = np.zeros((N_STATES, 2), dtype=np.int64)
    par = np.zeros((N_STATES, 2), dtype=np.int64)
    for s in range(N_STATES):
        r1, r2 = s >> 1, s & 1
        for u in (0, 1):
            a = u ^ r1 ^ r2  # feedback 1 + D + D^2 (octal 7)
            par[s, u] = a ^ r2  # feedforward 1 + D^2 (octal 5)
            nxt[s, u] = (a << 1) | r1
    return nxt, par


NEXT_STATE, PARITY = _trellis()
# predecessors of each state: (state, input) pairs, two per state
_PREV = [[(s, u) for s in range(N_STATES) for u in (0, 1) if NEXT_STATE[s, u] == t] for t in range(N_STATES)]
PREV_STATE = np.array([[p[0] for p in row] for row in _PREV])
PREV_INPUT = np.array([[p[1] for p in row] for row in _PREV])


@dataclass
class TurboCodeConfig:
    block_length: int = 1024
    iterations: int = 5
    interleaver_seed: int = 1234
    _perm: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.block_length < 1:
            raise ValueError("block_length must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")

    @cached_property
    def permutation(self) -> np.ndarray:
        if self._perm is not None:
            return np.asarray(self._perm)
        return np.random.default_rng(self.interleaver_seed).permutation(self.block_length)

    @cached_property
    def inverse_permutation(self) -> np.ndarray:
        return np.argsort(self.permutation)

    @property
    def coded_length(self) -> int:
        return 3 * self.block_length + 2 * TAIL

    @property
    def rate(self) -> float:
        return self.block_length / self.coded_length

    def save(self, path) -> None:
        """Seed on the first line, then the permutation."""
        with open(path, "w") as fh:
            fh.write(f"seed\t{self.interleaver_seed}\n")
            fh.write(" ".join(map(str, self.permutation)) + "\n")

    @classmethod
    def load(cls, path, iterations: int = 5) -> "TurboCodeConfig":
        with open(path) as fh:
            seed = int(fh.readline().split("\t")[1])
            perm = np.array([int(x) for x in fh.readline().split()])
        return cls(len(perm), iterations, seed, perm)


def rsc_encode(bits: np.ndarray):
    """Encode ``[B, K]`` bits; returns ``(parity [B, K], tail [B, 4])``.

    ``tail`` interleaves (systematic, parity) for the two terminating steps.
    """
    b, k = bits.shape
    state = np.zeros(b, dtype=np.int64)
    parity = np.empty((b, k), dtype=np.uint8)
    for t in range(k):
        u = bits[:, t]
        parity[:, t] = PARITY[state, u]
        state = NEXT_STATE[state, u]
    tail = np.empty((b, TAIL), dtype=np.uint8)
    for j in range(MEMORY):
        u = (state >> 1) ^ (state & 1)  # makes the feedback bit zero
        tail[:, 2 * j] = u
        tail[:, 2 * j + 1] = PARITY[state, u]
        state = NEXT_STATE[state, u]
    assert not state.any()
    return parity, tail


def encode_blocks(bits: np.ndarray, cfg: TurboCodeConfig) -> np.ndarray:
    """``[B, K]`` information bits to ``[B, 3K + 8]`` coded bits."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.ndim != 2 or bits.shape[1] != cfg.block_length:
        raise FramingError(f"expected blocks of {cfg.block_length} bits, got shape {bits.shape}")
    p1, t1 = rsc_encode(bits)
    p2, t2 = rsc_encode(bits[:, cfg.permutation])
    return np.concatenate([bits.astype(np.uint8), p1, p2, t1, t2], axis=1)


def turbo_encode(bits, cfg: TurboCodeConfig) -> np.ndarray:
    """Encode a bit stream, zero-padding the final block."""
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    n_blocks = max(1, -(-bits.size // cfg.block_length))
    padded = np.zeros(n_blocks * cfg.block_length, dtype=np.int64)
    padded[:bits.size] = bits
    return encode_blocks(padded.reshape(n_blocks, cfg.block_length), cfg).reshape(-1)


def _lse(a, b):
    return np.logaddexp(a, b)


def log_map(sys_llr: np.ndarray, par_llr: np.ndarray, apriori: np.ndarray) -> np.ndarray:
    """Log-MAP BCJR for one terminated RSC code, batched over rows.

    Inputs are ``[B, T]`` over the full trellis including tail steps (zero
    a-priori on the tail).  Returns a-posteriori LLRs ``[B, T]``.
    """
    b, steps = sys_llr.shape
    u_sign = np.array([1.0, -1.0])  # bit 0 -> +1
    p_sign = 1.0 - 2.0 * PARITY  # [S, 2]
    # branch metrics [B, T, S, 2]
    gamma = 0.5 * (sys_llr + apriori)[:, :, None, None] * u_sign \
        + 0.5 * par_llr[:, :, None, None] * p_sign
    alpha = np.full((b, steps + 1, N_STATES), -np.inf)
    alpha[:, 0, 0] = 0.0
    for t in range(steps):
        cand = alpha[:, t][:, PREV_STATE] + gamma[:, t][:, PREV_STATE, PREV_INPUT]
        a = _lse(cand[..., 0], cand[..., 1])
        alpha[:, t + 1] = a - a.max(axis=1, keepdims=True)
    beta = np.full((b, steps + 1, N_STATES), -np.inf)
    beta[:, steps, 0] = 0.0
    for t in range(steps - 1, -1, -1):
        cand = gamma[:, t] + beta[:, t + 1][:, NEXT_STATE]
        bt = _lse(cand[..., 0], cand[..., 1])
        beta[:, t] = bt - bt.max(axis=1, keepdims=True)
    metric = alpha[:, :-1, :, None] + gamma + beta[:, 1:][:, :, NEXT_STATE]  # [B, T, S, 2]
    m0 = metric[..., 0]
    m1 = metric[..., 1]
    return _logsumexp(m0) - _logsumexp(m1)


def _logsumexp(x):
    top = x.max(axis=-1)
    safe = np.where(np.isfinite(top), top, 0.0)
    return safe + np.log(np.exp(x - safe[..., None]).sum(axis=-1))


def decode_blocks(llrs: np.ndarray, cfg: TurboCodeConfig, return_llr: bool = False):
    """Iterative decoding of ``[B, 3K + 8]`` channel LLRs to hard bits ``[B, K]``."""
    llrs = np.asarray(llrs, dtype=np.float64)
    k = cfg.block_length
    if llrs.ndim != 2 or llrs.shape[1] != cfg.coded_length:
        raise FramingError(f"expected LLR rows of length {cfg.coded_length}, got shape {llrs.shape}")
    ls, lp1, lp2 = llrs[:, :k], llrs[:, k:2 * k], llrs[:, 2 * k:3 * k]
    t1, t2 = llrs[:, 3 * k:3 * k + TAIL], llrs[:, 3 * k + TAIL:]
    perm, inv = cfg.permutation, cfg.inverse_permutation
    sys1 = np.concatenate([ls, t1[:, 0::2]], axis=1)
    par1 = np.concatenate([lp1, t1[:, 1::2]], axis=1)
    sys2 = np.concatenate([ls[:, perm], t2[:, 0::2]], axis=1)
    par2 = np.concatenate([lp2, t2[:, 1::2]], axis=1)
    pad = np.zeros((llrs.shape[0], MEMORY))
    ext2 = np.zeros_like(ls)  # deinterleaved extrinsic from decoder 2
    for _ in range(cfg.iterations):
        apri1 = np.concatenate([ext2, pad], axis=1)
        ext1 = (log_map(sys1, par1, apri1) - sys1 - apri1)[:, :k]
        apri2 = np.concatenate([ext1[:, perm], pad], axis=1)
        ext2_int = (log_map(sys2, par2, apri2) - sys2 - apri2)[:, :k]
        ext2 = ext2_int[:, inv]
    total = ls + ext1 + ext2
    bits = (total < 0).astype(np.uint8)
    return (bits, total) if return_llr else bits


def turbo_decode(llrs, cfg: TurboCodeConfig, n_bits: int | None = None) -> np.ndarray:
    """Decode a concatenation of coded blocks; optionally truncate to ``n_bits``."""
    llrs = np.asarray(llrs, dtype=np.float64).reshape(-1)
    if llrs.size == 0 or llrs.size % cfg.coded_length:
        raise FramingError(f"LLR length {llrs.size} is not a multiple of {cfg.coded_length}")
    bits = decode_blocks(llrs.reshape(-1, cfg.coded_length), cfg).reshape(-1)
    return bits if n_bits is None else bits[:n_bits]
