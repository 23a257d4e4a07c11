"""Dual-attention Transformer semantic encoder and decoder.

Each layer runs two branches on the same input ``Z`` and adds them:

* spatial attention: multi-head self-attention, output projection, residual,
  layer norm (sentence-level, "coarse" features);
* channel attention: three 1D convolution banks of different widths over the
  feature axis, a squeeze gate from a max-pooled summary, a kernel-1
  convolution, residual and layer norm (word-level, "fine" features).

The sum goes through a position-wise feed-forward block.  Parameters live in
a flat ``dict[str, Tensor]`` keyed by dotted names such as ``enc.0.sa.wq``.

Feature tensors are ``[B, L, d]``.  ``block`` masks are boolean arrays
broadcastable to ``[B, heads, L_q, L_k]`` that are true where attention is
forbidden.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from . import tensor as T
from .tensor import Tensor

LN_EPS = 1e-6


class ContractError(ValueError):
    """A call violated an operation's precondition."""


def positional_encoding(length: int, d: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def padding_block(pad_mask: np.ndarray) -> np.ndarray:
    """Block mask forbidding attention to PAD keys; ``pad_mask`` is true at real tokens."""
    return ~pad_mask[:, None, None, :]


def causal_block(length: int) -> np.ndarray:
    return np.triu(np.ones((length, length), dtype=bool), k=1)[None, None]


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    b, length, d = x.shape
    return x.reshape(b, length, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: Tensor) -> Tensor:
    b, h, length, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, length, h * dh)


def attend(queries: Tensor, keys: Tensor, p: Mapping[str, Tensor], prefix: str,
           n_heads: int, block: np.ndarray | None):
    """Multi-head scaled dot-product attention followed by the output projection.

    Returns ``(projected, weights)`` where ``weights`` is ``[B, H, L_q, L_k]``.
    """
    d = queries.shape[-1]
    if d % n_heads:
        raise ContractError(f"model width {d} is not divisible by {n_heads} heads")
    q = _split_heads(T.dense(queries, p[prefix + ".wq"]), n_heads)
    k = _split_heads(T.dense(keys, p[prefix + ".wk"]), n_heads)
    v = _split_heads(T.dense(keys, p[prefix + ".wv"]), n_heads)
    scores = T.scale(q @ k.transpose(0, 1, 3, 2), 1.0 / np.sqrt(d // n_heads))
    if block is not None:
        expected = (queries.shape[0], n_heads, queries.shape[1], keys.shape[1])
        try:
            if np.broadcast_shapes(block.shape, expected) != expected:
                raise ValueError
        except ValueError:
            raise T.DimensionError(f"attention mask {block.shape} does not fit scores {expected}") from None
        scores = T.masked_fill(scores, block, -np.inf)
    weights = T.softmax(scores, axis=-1)
    mixed = _merge_heads(weights @ v)
    return T.dense(mixed, p[prefix + ".wf"]), weights


def spatial_attention(z: Tensor, p: Mapping[str, Tensor], prefix: str, n_heads: int,
                      block: np.ndarray | None = None, return_weights: bool = False):
    """LN(softmax(Q K^T / sqrt(d_h)) V W_F + Z) over ``n_heads`` heads."""
    projected, weights = attend(z, z, p, prefix, n_heads, block)
    out = T.layer_norm(projected + z, p[prefix + ".ln.g"], p[prefix + ".ln.b"], LN_EPS)
    return (out, weights) if return_weights else out


def channel_attention(z: Tensor, p: Mapping[str, Tensor], prefix: str,
                      pad_mask: np.ndarray | None = None, causal: bool = False) -> Tensor:
    """Multi-kernel convolutional channel gating with residual and layer norm.

    ``pad_mask`` ([B, L], true at real tokens) zeroes PAD columns before the
    convolutions and excludes them from the max-pool.  With ``causal`` the
    convolutions pad on the left only and the pool becomes a running max, so
    position ``t`` depends on positions ``<= t`` alone.
    """
    zt = z.transpose(0, 2, 1)  # [B, d, L]
    valid = None
    if pad_mask is not None:
        valid = pad_mask[:, None, :]
        zt = T.masked_fill(zt, ~valid, 0.0)
    padding = "causal" if causal else "same"
    banks = []
    j = 0
    while f"{prefix}.conv{j}.w" in p:
        banks.append(T.conv1d(zt, p[f"{prefix}.conv{j}.w"], p[f"{prefix}.conv{j}.b"], padding))
        j += 1
    merged = T.matmul(p[prefix + ".w1"], T.sigmoid(T.concat(banks, axis=1)))  # [B, d, L]
    if causal:
        pooled = T.cummax(merged, axis=-1)
    else:
        pooled = T.global_maxpool(merged, axis=-1, mask=valid)
    gate = T.sigmoid(T.matmul(p[prefix + ".w2"], T.matmul(p[prefix + ".w3"], pooled)))
    fused = T.conv1d(gate * merged, p[prefix + ".fc.w"], p[prefix + ".fc.b"], padding)
    return T.layer_norm(fused.transpose(0, 2, 1) + z, p[prefix + ".ln.g"], p[prefix + ".ln.b"], LN_EPS)


def feed_forward(u: Tensor, p: Mapping[str, Tensor], prefix: str) -> Tensor:
    hidden = T.relu(T.dense(u, p[prefix + ".w1"], p[prefix + ".b1"]))
    out = T.dense(hidden, p[prefix + ".w2"], p[prefix + ".b2"])
    return T.layer_norm(out + u, p[prefix + ".ln.g"], p[prefix + ".ln.b"], LN_EPS)


def dual_attention(z: Tensor, p: Mapping[str, Tensor], prefix: str, n_heads: int,
                   block: np.ndarray | None, pad_mask: np.ndarray | None, causal: bool,
                   hook: Callable | None = None) -> Tensor:
    """Sum of the spatial and channel branches, both fed the same ``z``."""
    if hook is not None:
        hook("spatial", z)
    coarse = spatial_attention(z, p, prefix + ".sa", n_heads, block)
    if hook is not None:
        hook("channel", z)
    fine = channel_attention(z, p, prefix + ".ca", pad_mask, causal)
    return coarse + fine


def fuse_layer(z: Tensor, p: Mapping[str, Tensor], prefix: str, n_heads: int,
               block: np.ndarray | None = None, pad_mask: np.ndarray | None = None,
               hook: Callable | None = None) -> Tensor:
    """One encoder layer: FFN(spatial(Z) + channel(Z))."""
    return feed_forward(dual_attention(z, p, prefix, n_heads, block, pad_mask, False, hook),
                        p, prefix + ".ffn")


def _embed(ids: np.ndarray, table: Tensor) -> Tensor:
    ids = np.asarray(ids)
    vocab, d = table.shape
    if ids.size and (ids.min() < 0 or ids.max() >= vocab):
        from .corpus import DataError
        raise DataError(f"token id outside vocabulary of size {vocab}")
    x = T.scale(T.embedding_lookup(table, ids), np.sqrt(d))
    return x + positional_encoding(ids.shape[1], d)


def n_layers(p: Mapping[str, Tensor], side: str) -> int:
    n = 0
    while f"{side}.{n}.sa.wq" in p:
        n += 1
    return n


def encode(ids: np.ndarray, pad_mask: np.ndarray, p: Mapping[str, Tensor], n_heads: int,
           hook: Callable | None = None) -> Tensor:
    """Token ids ``[B, L]`` to semantic features ``[B, L, d]``."""
    z = _embed(ids, p["enc.emb"])
    block = padding_block(pad_mask)
    for i in range(n_layers(p, "enc")):
        z = fuse_layer(z, p, f"enc.{i}", n_heads, block, pad_mask, hook)
    return z


def decoder_layer(x: Tensor, memory: Tensor, p: Mapping[str, Tensor], prefix: str,
                  n_heads: int, self_block: np.ndarray, memory_block: np.ndarray | None) -> Tensor:
    u = dual_attention(x, p, prefix, n_heads, self_block, None, causal=True)
    projected, _ = attend(u, memory, p, prefix + ".xa", n_heads, memory_block)
    u = T.layer_norm(projected + u, p[prefix + ".xa.ln.g"], p[prefix + ".xa.ln.b"], LN_EPS)
    return feed_forward(u, p, prefix + ".ffn")


def decode(memory: Tensor, memory_mask: np.ndarray | None, tokens: np.ndarray,
           p: Mapping[str, Tensor], n_heads: int) -> Tensor:
    """Vocabulary logits ``[B, T, V]`` for every prefix of ``tokens`` (teacher forcing)."""
    tokens = np.asarray(tokens)
    if tokens.ndim != 2 or tokens.shape[1] == 0:
        raise ContractError("decoder needs a non-empty [B, T] token prefix")
    x = _embed(tokens, p["dec.emb"])
    length = tokens.shape[1]
    # key 0 is START for every row, so no query row is fully blocked
    self_block = causal_block(length) | (tokens == 0)[:, None, None, :]
    memory_block = None if memory_mask is None else padding_block(memory_mask)
    for i in range(n_layers(p, "dec")):
        x = decoder_layer(x, memory, p, f"dec.{i}", n_heads, self_block, memory_block)
    return T.dense(x, p["dec.out.w"], p["dec.out.b"])


def decode_step(memory: Tensor, memory_mask: np.ndarray | None, partial_tokens: np.ndarray,
                p: Mapping[str, Tensor], n_heads: int, start_id: int = 1) -> Tensor:
    """Logits ``[B, V]`` for the token following ``partial_tokens``."""
    partial_tokens = np.asarray(partial_tokens)
    if partial_tokens.ndim != 2 or partial_tokens.shape[1] == 0:
        raise ContractError("partial_tokens must be a non-empty [B, T] array")
    if np.any(partial_tokens[:, 0] != start_id):
        raise ContractError("partial_tokens must start with START")
    logits = decode(memory, memory_mask, partial_tokens, p, n_heads)
    return logits[:, -1, :]


def greedy_decode(memory: Tensor, memory_mask: np.ndarray | None, p: Mapping[str, Tensor],
                  n_heads: int, max_len: int, start_id: int = 1, end_id: int = 2,
                  pad_id: int = 0) -> np.ndarray:
    """Argmax decoding until every row emits END or ``max_len`` tokens are produced.

    Returns ids ``[B, <= max_len + 1]`` beginning with START; positions after a
    row's END are PAD.
    """
    b = memory.shape[0]
    out = np.full((b, 1), start_id, dtype=np.int64)
    done = np.zeros(b, dtype=bool)
    for _ in range(max_len):
        nxt = np.argmax(decode_step(memory, memory_mask, out, p, n_heads, start_id).data, axis=-1)
        nxt = np.where(done, pad_id, nxt)
        out = np.concatenate([out, nxt[:, None]], axis=1)
        done |= nxt == end_id
        if done.all():
            break
    return out
