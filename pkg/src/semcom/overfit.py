"""Overfit oracle: a tiny model must memorize ten sentences through a noiseless link."""

from __future__ import annotations

import time
from dataclasses import dataclass

from . import corpus
from .model import ModelConfig, transmit_batch
from .trainer import TrainConfig, TrainResult, train

SENTENCES = [
    "last year we introduced activity based budgeting and this year we are creating a clear "
    "link between strategic objectives and the allocation of resources .",
    "mr president , i would like to thank the rapporteur for his excellent report .",
    "the commission must present a new proposal as soon as possible .",
    "we cannot accept this amendment because it undermines the common position .",
    "the council has not yet reached an agreement on the budget .",
    "ladies and gentlemen , the situation in the region remains very serious .",
    "i believe that the single market must protect consumers .",
    "our group will vote in favour of the resolution .",
    "this directive concerns the safety of workers in the transport sector .",
    "finally , we need more transparency in the allocation of structural funds .",
]


@dataclass
class OverfitResult:
    train: TrainResult
    vocab: corpus.Vocabulary
    model: ModelConfig
    decoded: list
    references: list
    seconds: float

    @property
    def exact(self) -> int:
        return sum(d == r for d, r in zip(self.decoded, self.references))

    @property
    def steps(self) -> int:
        return len(self.train.history)

    @property
    def final_loss(self) -> float:
        return self.train.history[-1]["loss"]


def reconstruct(params, cfg, vocab, sentences):
    batch = corpus.make_batch(sentences, vocab)
    return [vocab.decode(row) for row in transmit_batch(params, cfg, batch, None)]


def run(max_steps: int = 2000, target_loss: float = 0.05, learning_rate: float = 5e-4,
        check_every: int = 50, seed: int = 0) -> OverfitResult:
    """Train until the loss is below ``target_loss`` and greedy decoding is exact."""
    sentences = [corpus.tokenize(s) for s in SENTENCES]
    vocab = corpus.Vocabulary.build(sentences)
    cfg = ModelConfig(len(vocab), d_model=32, n_heads=8, n_layers=1, d_ff=128)
    config = TrainConfig(learning_rate=learning_rate, batch_size=len(sentences), epochs=max_steps,
                         channel="none", max_steps=max_steps, seed=seed, log_interval=0)

    def done(step, loss, params):
        if loss >= target_loss or step % check_every:
            return False
        return reconstruct(params, cfg, vocab, sentences) == sentences

    start = time.monotonic()
    result = train(sentences, vocab, cfg, config, callback=done)
    decoded = reconstruct(result.params, cfg, vocab, sentences)
    return OverfitResult(result, vocab, cfg, decoded, sentences, time.monotonic() - start)
