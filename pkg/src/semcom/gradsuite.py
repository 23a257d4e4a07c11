"""Finite-difference check of every differentiable operation and the full model.

Each case reduces its output to a scalar with a fixed random weighting, so
no gradient component can cancel by symmetry.  Inputs to kinked operations
(relu, max) are kept away from their kinks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import channel as ch
from . import tensor as T
from .corpus import TokenBatch
from .model import ModelConfig, init_params, teacher_forced_logits
from .tensor import Tensor
from .trainer import loss as masked_loss

OP_TOLERANCE = 1e-4
MODEL_TOLERANCE = 1e-3


@dataclass
class GradResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.error < self.tolerance


def _weighted(fn: Callable, out_shape_rng):
    """Wrap ``fn`` so it returns ``sum(fn(...) * R)`` for a fixed random R."""
    cache = {}

    def wrapped(*xs):
        out = fn(*xs)
        if "r" not in cache:
            cache["r"] = out_shape_rng.normal(size=out.shape)
        return T.tsum(T.mul(out, cache["r"]))

    return wrapped


def _away_from_zero(rng, shape, margin=0.1):
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-12) * margin + x, x)


def _distinct(rng, shape):
    """Values whose pairwise gaps are far larger than the difference step."""
    n = int(np.prod(shape))
    return (rng.permutation(n) * 0.1 + rng.uniform(-0.01, 0.01, n)).reshape(shape)


def op_cases(rng: np.random.Generator) -> dict[str, tuple[Callable, list]]:
    """Name -> (function of Tensors returning a Tensor, input arrays)."""
    n = rng.normal
    mask = rng.random((3, 5)) > 0.3
    mask[:, 0] = True
    ids = rng.integers(0, 7, size=(2, 4))
    targets = rng.integers(0, 6, size=(3, 4))
    ce_mask = rng.random((3, 4)) > 0.3
    ce_mask[0, 0] = True
    return {
        "add (broadcast)": (T.add, [n(size=(3, 4)), n(size=(4,))]),
        "sub": (T.sub, [n(size=(3, 4)), n(size=(3, 1))]),
        "mul (broadcast)": (T.mul, [n(size=(2, 3, 4)), n(size=(3, 1))]),
        "div": (T.div, [n(size=(3, 4)), rng.uniform(0.5, 2.0, (3, 4))]),
        "scale": (lambda x: T.scale(x, -2.5), [n(size=(4, 3))]),
        "sqrt": (T.sqrt, [rng.uniform(0.5, 3.0, (3, 4))]),
        "sigmoid": (T.sigmoid, [n(size=(3, 4)) * 3]),
        "relu": (T.relu, [_away_from_zero(rng, (3, 4))]),
        "masked_fill": (lambda x: T.masked_fill(x, mask, 7.0), [n(size=(3, 5))]),
        "tsum (axis)": (lambda x: T.tsum(x, axis=1, keepdims=True), [n(size=(3, 4, 2))]),
        "mean": (lambda x: T.mean(x, axis=0), [n(size=(3, 4))]),
        "reshape": (lambda x: T.reshape(x, (6, 2)), [n(size=(3, 4))]),
        "transpose": (lambda x: T.transpose(x, (2, 0, 1)), [n(size=(2, 3, 4))]),
        "getitem": (lambda x: T.getitem(x, (slice(None), [0, 2, 2])), [n(size=(3, 4))]),
        "concat": (lambda a, b: T.concat([a, b], axis=-1), [n(size=(2, 3)), n(size=(2, 5))]),
        "matmul (batched)": (T.matmul, [n(size=(2, 3, 4)), n(size=(4, 5))]),
        "dense": (T.dense, [n(size=(2, 3, 4)), n(size=(4, 5)), n(size=(5,))]),
        "softmax": (lambda x: T.softmax(x, axis=-1), [n(size=(3, 5))]),
        "layer_norm": (T.layer_norm, [n(size=(3, 6)), n(size=(6,)), n(size=(6,))]),
        "conv1d (same)": (lambda x, k, b: T.conv1d(x, k, b, "same"),
                          [n(size=(2, 3, 7)), n(size=(4, 3, 5)), n(size=(4,))]),
        "conv1d (causal)": (lambda x, k, b: T.conv1d(x, k, b, "causal"),
                            [n(size=(2, 3, 7)), n(size=(4, 3, 3)), n(size=(4,))]),
        "global_maxpool (masked)": (lambda x: T.global_maxpool(x, axis=-1, mask=mask),
                                    [_distinct(rng, (3, 5))]),
        "cummax": (lambda x: T.cummax(x, axis=-1), [_distinct(rng, (3, 6))]),
        "embedding_lookup": (lambda t: T.embedding_lookup(t, ids), [n(size=(7, 3))]),
        "cross_entropy (masked)": (lambda z: T.cross_entropy_with_logits(z, targets, ce_mask),
                                   [n(size=(3, 4, 6))]),
    }


def check_ops(seed: int = 0) -> list[GradResult]:
    rng = np.random.default_rng(seed)
    results = []
    for name, (fn, arrays) in op_cases(rng).items():
        inputs = [Tensor(np.array(a, dtype=np.float64)) for a in arrays]
        err = T.gradcheck(_weighted(fn, np.random.default_rng(seed + 1)), inputs)
        results.append(GradResult(name, err, OP_TOLERANCE))
    return results


def tiny_model(seed: int = 0, d: int = 16, length: int = 6, vocab: int = 20):
    """Small config and batch for checking the whole encoder-channel-decoder chain."""
    cfg = ModelConfig(vocab_size=vocab, d_model=d, n_heads=2, n_layers=1, d_ff=32,
                      reduction=4, tx_hidden=32, rx_hidden=(32, 32))
    rng = np.random.default_rng(seed)
    ids = np.zeros((2, length), dtype=np.int64)
    ids[:, 0] = 1
    ids[0, 1:-1] = rng.integers(4, vocab, length - 2)
    ids[0, -1] = 2
    ids[1, 1:length - 2] = rng.integers(4, vocab, length - 3)
    ids[1, length - 2] = 2  # second sentence is one token shorter
    batch = TokenBatch(ids, (ids != 0).sum(axis=1), ids != 0)
    return cfg, init_params(cfg, seed), batch


def check_model(seed: int = 0, max_entries: int = 4) -> GradResult:
    cfg, params, batch = tiny_model(seed)
    names = list(params)

    def fn(*tensors):
        p = dict(zip(names, tensors))
        # fresh realization per call so every evaluation sees the same noise
        real = ch.ChannelRealization.draw(ch.RAYLEIGH, 10.0, batch.size, seed=seed)
        return masked_loss(teacher_forced_logits(p, cfg, batch, real), batch)

    err = T.gradcheck(fn, [params[k] for k in names], max_entries=max_entries,
                      rng=np.random.default_rng(seed))
    return GradResult("encoder-channel-decoder", err, MODEL_TOLERANCE)


def run_suite(seed: int = 0) -> list[GradResult]:
    return check_ops(seed) + [check_model(seed)]
