"""Full transceiver: parameter initialization, forward passes and checkpoints."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import channel as ch
from . import chancodec, semcodec
from .corpus import TokenBatch
from .tensor import Tensor

CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 128
    n_heads: int = 8
    n_layers: int = 3
    d_ff: int = 512
    kernel_sizes: tuple = (3, 5, 7)
    reduction: int = 8
    tx_hidden: int = 256
    tx_reals: int = 16
    rx_hidden: tuple = (128, 512)

    def __post_init__(self):
        self.kernel_sizes = tuple(int(k) for k in self.kernel_sizes)
        self.rx_hidden = tuple(int(k) for k in self.rx_hidden)
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if self.d_model % self.reduction:
            raise ValueError(f"reduction {self.reduction} does not divide d_model={self.d_model}")
        if any(k % 2 == 0 for k in self.kernel_sizes):
            raise ValueError(f"kernel sizes must be odd, got {self.kernel_sizes}")
        if self.tx_reals % 2:
            raise ValueError("tx_reals must be even (real/imaginary pairs)")
        if self.vocab_size < 5:
            raise ValueError("vocab_size must be at least 5")

    @property
    def symbols_per_token(self) -> int:
        return self.tx_reals // 2


def _glorot(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(cfg: ModelConfig, seed: int = 0) -> dict[str, Tensor]:
    rng = np.random.default_rng(seed)
    d, p = cfg.d_model, {}

    def mat(name, n_in, n_out):
        p[name] = _glorot(rng, n_in, n_out, (n_in, n_out))

    def ln(prefix):
        p[prefix + ".ln.g"] = np.ones(d)
        p[prefix + ".ln.b"] = np.zeros(d)

    def dual_block(prefix):
        for w in ("wq", "wk", "wv", "wf"):
            mat(f"{prefix}.sa.{w}", d, d)
        ln(prefix + ".sa")
        for j, k in enumerate(cfg.kernel_sizes):
            p[f"{prefix}.ca.conv{j}.w"] = _glorot(rng, d * k, d * k, (d, d, k))
            p[f"{prefix}.ca.conv{j}.b"] = np.zeros(d)
        n = len(cfg.kernel_sizes)
        p[prefix + ".ca.w1"] = _glorot(rng, n * d, d, (d, n * d))
        p[prefix + ".ca.w3"] = _glorot(rng, d, d // cfg.reduction, (d // cfg.reduction, d))
        p[prefix + ".ca.w2"] = _glorot(rng, d // cfg.reduction, d, (d, d // cfg.reduction))
        p[prefix + ".ca.fc.w"] = _glorot(rng, d, d, (d, d, 1))
        p[prefix + ".ca.fc.b"] = np.zeros(d)
        ln(prefix + ".ca")
        mat(prefix + ".ffn.w1", d, cfg.d_ff)
        p[prefix + ".ffn.b1"] = np.zeros(cfg.d_ff)
        mat(prefix + ".ffn.w2", cfg.d_ff, d)
        p[prefix + ".ffn.b2"] = np.zeros(d)
        ln(prefix + ".ffn")

    p["enc.emb"] = rng.normal(0.0, 1.0 / np.sqrt(d), (cfg.vocab_size, d))
    for i in range(cfg.n_layers):
        dual_block(f"enc.{i}")
    p["dec.emb"] = rng.normal(0.0, 1.0 / np.sqrt(d), (cfg.vocab_size, d))
    for i in range(cfg.n_layers):
        dual_block(f"dec.{i}")
        for w in ("wq", "wk", "wv", "wf"):
            mat(f"dec.{i}.xa.{w}", d, d)
        ln(f"dec.{i}.xa")
    mat("dec.out.w", d, cfg.vocab_size)
    p["dec.out.b"] = np.zeros(cfg.vocab_size)

    mat("tx.w1", d, cfg.tx_hidden)
    p["tx.b1"] = np.zeros(cfg.tx_hidden)
    mat("tx.w2", cfg.tx_hidden, cfg.tx_reals)
    p["tx.b2"] = np.zeros(cfg.tx_reals)
    widths = (cfg.tx_reals,) + cfg.rx_hidden + (d,)
    for j in range(len(widths) - 1):
        mat(f"rx.w{j + 1}", widths[j], widths[j + 1])
        p[f"rx.b{j + 1}"] = np.zeros(widths[j + 1])
    return {k: Tensor(v) for k, v in p.items()}


def n_parameters(params) -> int:
    return sum(t.size for t in params.values())


def teacher_forced_logits(params, cfg: ModelConfig, batch: TokenBatch,
                          realization: ch.ChannelRealization | None = None,
                          inputs: np.ndarray | None = None) -> Tensor:
    """Logits ``[B, L-1, V]`` predicting ``ids[:, 1:]`` from ``ids[:, :-1]``.

    ``realization=None`` is a noiseless identity channel.  ``inputs`` replaces
    the decoder input ``ids[:, :-1]`` (word dropout).
    """
    features = semcodec.encode(batch.ids, batch.pad_mask, params, cfg.n_heads)
    frame = chancodec.channel_encode(features, params, batch.pad_mask)
    if realization is not None:
        frame = chancodec.SymbolFrame(ch.straight_through(frame.reals, realization),
                                      frame.length, frame.symbols_per_token, frame.token_mask)
    memory = chancodec.channel_decode(frame, params)
    inputs = batch.ids[:, :-1] if inputs is None else inputs
    return semcodec.decode(memory, batch.pad_mask, inputs, params, cfg.n_heads)


def transmit_batch(params, cfg: ModelConfig, batch: TokenBatch,
                   realization: ch.ChannelRealization | None, max_len: int | None = None) -> np.ndarray:
    """Inference: encode, send through the channel, decode greedily.  Returns ids with START."""
    features = semcodec.encode(batch.ids, batch.pad_mask, params, cfg.n_heads)
    frame = chancodec.channel_encode(features, params, batch.pad_mask)
    if realization is not None:
        y = ch.equalize(ch.transmit(frame.symbols, realization), realization)
        frame = frame.with_symbols(y)
    memory = chancodec.channel_decode(frame, params)
    max_len = max_len or batch.max_len + 4
    return semcodec.greedy_decode(memory, batch.pad_mask, params, cfg.n_heads, max_len)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params, cfg: ModelConfig, extra: dict | None = None) -> None:
    """Write a versioned ``.npz`` container: JSON header plus one float64 array per parameter."""
    header = {"version": CHECKPOINT_VERSION, "config": asdict(cfg),
              "shapes": {k: list(v.shape) for k, v in params.items()}, "extra": extra or {}}
    arrays = {"param/" + k: np.ascontiguousarray(v.data, dtype=np.float64) for k, v in params.items()}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **arrays)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Returns ``(params, config, extra)``."""
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["__header__"]))
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        params = {}
        for name, shape in header["shapes"].items():
            arr = np.array(data["param/" + name], dtype=np.float64)
            if list(arr.shape) != shape:
                raise ValueError(f"{path}: parameter {name} has shape {arr.shape}, header says {shape}")
            params[name] = Tensor(arr)
    return params, ModelConfig(**header["config"]), header.get("extra", {})
