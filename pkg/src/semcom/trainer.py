"""End-to-end training of the transceiver through a simulated channel."""

from __future__ import annotations

import csv
import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import channel as ch
from . import tensor as T
from .corpus import TokenBatch, Vocabulary, make_batch
from .model import ModelConfig, init_params, save_checkpoint, teacher_forced_logits
from .semcodec import ContractError
from .tensor import Tensor

log = logging.getLogger(__name__)


class NumericalError(FloatingPointError):
    """Training produced a non-finite loss or gradient."""


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    batch_size: int = 256
    epochs: int = 80
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    channel: str = "awgn"  # "awgn", "rayleigh", "mixed" or "none"
    snr_policy: str = "uniform"  # "uniform" over snr_range, or "fixed" at snr_db
    snr_range: tuple = (0.0, 20.0)
    snr_db: float = 10.0
    clip_norm: float | None = 1.0
    word_dropout: float = 0.0  # chance a decoder input token is replaced by UNK
    seed: int = 0
    max_steps: int | None = None
    max_seconds: float | None = None  # wall-clock budget, checked after each step
    checkpoint_path: str | None = None
    checkpoint_interval: int = 0
    log_interval: int = 50

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.channel not in ch.KINDS + ("mixed", "none"):
            raise ValueError(f"unknown training channel {self.channel!r}")
        if self.snr_policy not in ("uniform", "fixed"):
            raise ValueError(f"unknown snr_policy {self.snr_policy!r}")
        if not 0.0 <= self.word_dropout < 1.0:
            raise ValueError("word_dropout must be in [0, 1)")
        self.snr_range = tuple(float(s) for s in self.snr_range)


def loss(logits: Tensor, targets: TokenBatch) -> Tensor:
    """Mean token cross-entropy of ``logits`` ([B, L-1, V]) against ``ids[:, 1:]``, PAD excluded."""
    mask = targets.pad_mask[:, 1:]
    if not mask.any():
        raise ContractError("batch contains only PAD targets")
    return T.cross_entropy_with_logits(logits, targets.ids[:, 1:], mask)


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, config: TrainConfig):
    """One bias-corrected Adam update.  Returns ``(new_params, new_state)``; inputs are untouched."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter {name!r}")
    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    new_params, m_new, v_new = dict(params), {}, {}
    for name, g in grads.items():
        m = b1 * state.m.get(name, 0.0) + (1 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_params[name] = Tensor(params[name].data - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps))
        m_new[name], v_new[name] = m, v
    return new_params, AdamState(t, m_new, v_new)


def clip_by_global_norm(grads: dict, max_norm: float | None) -> tuple[dict, float]:
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm is None or norm <= max_norm or norm == 0.0:
        return grads, norm
    factor = max_norm / norm
    return {k: g * factor for k, g in grads.items()}, norm


def value_and_grad(params: dict, cfg: ModelConfig, batch: TokenBatch,
                   realization: ch.ChannelRealization | None, inputs: np.ndarray | None = None):
    names = list(params)
    for t in params.values():
        t.requires_grad = True
    with T.Tape() as tape:
        value = loss(teacher_forced_logits(params, cfg, batch, realization, inputs), batch)
    grads = tape.gradient(value, [params[n] for n in names])
    return float(value.data), dict(zip(names, grads))


def _prefetch(items, depth: int = 2):
    """Yield from ``items`` while a worker thread assembles the next ones."""
    q: queue.Queue = queue.Queue(maxsize=depth)
    done = object()

    def work():
        for item in items:
            q.put(item)
        q.put(done)

    threading.Thread(target=work, daemon=True).start()
    while (item := q.get()) is not done:
        yield item


def drop_words(batch: TokenBatch, rate: float, rng, unk_id: int) -> np.ndarray:
    """Decoder inputs ``ids[:, :-1]`` with real tokens (not START or PAD) replaced by UNK at ``rate``."""
    inputs = batch.ids[:, :-1].copy()
    droppable = batch.pad_mask[:, :-1].copy()
    droppable[:, 0] = False
    inputs[droppable & (rng.random(inputs.shape) < rate)] = unk_id
    return inputs


def _epoch_batches(sentences, vocab, batch_size, rng):
    order = rng.permutation(len(sentences))
    for i in range(0, len(order), batch_size):
        yield make_batch([sentences[j] for j in order[i:i + batch_size]], vocab)


@dataclass
class TrainResult:
    params: dict
    history: list
    state: AdamState


def train(sentences: Sequence[Sequence[str]], vocab: Vocabulary, model_cfg: ModelConfig,
          config: TrainConfig, params: dict | None = None,
          callback: Callable[[int, float, dict], bool] | None = None) -> TrainResult:
    """Teacher-forced training with Adam.

    ``callback(step, loss, params)`` runs after every update; returning true
    stops training, as does reaching ``max_steps`` or ``max_seconds``.
    History rows are ``{step, epoch, loss, snr_db}`` where ``loss`` is the
    value before that step's update.
    """
    if not sentences:
        raise ContractError("no training sentences")
    rng = np.random.default_rng(config.seed)
    drop_rng = np.random.default_rng([config.seed, 2])
    params = params if params is not None else init_params(model_cfg, config.seed)
    state = AdamState()
    history = []
    step = 0
    start = time.monotonic()
    for epoch in range(config.epochs):
        for batch in _prefetch(_epoch_batches(sentences, vocab, config.batch_size, rng)):
            realization, snr = _draw_channel(config, rng, batch.size, step)
            inputs = drop_words(batch, config.word_dropout, drop_rng, vocab.unk_id) \
                if config.word_dropout else None
            value, grads = value_and_grad(params, model_cfg, batch, realization, inputs)
            if not np.isfinite(value):
                if config.checkpoint_path:
                    save_checkpoint(config.checkpoint_path, params, model_cfg,
                                    {"step": step, "aborted": True})
                raise NumericalError(f"non-finite loss at step {step}; last good parameters kept")
            grads, _ = clip_by_global_norm(grads, config.clip_norm)
            params, state = adam_step(params, grads, state, config)
            history.append({"step": step, "epoch": epoch, "loss": value, "snr_db": snr})
            step += 1
            if config.log_interval and step % config.log_interval == 0:
                recent = np.mean([h["loss"] for h in history[-config.log_interval:]])
                log.info("step %d epoch %d loss %.4f", step, epoch, recent)
            if config.checkpoint_path and config.checkpoint_interval \
                    and step % config.checkpoint_interval == 0:
                save_checkpoint(config.checkpoint_path, params, model_cfg, {"step": step})
            stop = callback is not None and callback(step, value, params)
            out_of_time = config.max_seconds is not None and time.monotonic() - start >= config.max_seconds
            if stop or out_of_time or (config.max_steps is not None and step >= config.max_steps):
                return _finish(params, history, state, model_cfg, config, step)
    return _finish(params, history, state, model_cfg, config, step)


def _finish(params, history, state, model_cfg, config, step):
    for t in params.values():
        t.requires_grad = False
    if config.checkpoint_path:
        save_checkpoint(config.checkpoint_path, params, model_cfg, {"step": step})
    return TrainResult(params, history, state)


def _draw_channel(config: TrainConfig, rng, n_blocks: int, step: int):
    if config.channel == "none":
        return None, float("inf")
    snr = config.snr_db if config.snr_policy == "fixed" else float(rng.uniform(*config.snr_range))
    kind = config.channel
    if kind == "mixed":
        kind = ch.KINDS[int(rng.integers(2))]
    return ch.ChannelRealization.draw(kind, snr, n_blocks, seed=config.seed, stream=1_000_000 + step), snr


def write_history(path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["step", "epoch", "loss", "snr_db"])
        writer.writeheader()
        writer.writerows(history)
