"""Sentence-level BLEU (orders 1-4) and pluggable sentence similarity."""

from __future__ import annotations

import json
import logging
import math
import os
import time
import urllib.error
import urllib.request
import warnings
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

log = logging.getLogger(__name__)

ENDPOINT_ENV = "SEMCOM_EMBEDDING_URL"
TOKEN_ENV = "SEMCOM_EMBEDDING_TOKEN"


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> float:
    """Clipped n-gram precision of a single order times the brevity penalty.

    A candidate with n-grams but no matches gets the floor precision
    ``1 / (2 * #candidate n-grams)``.  A candidate shorter than ``n`` tokens
    scores 1 only if it equals the reference, else 0.
    """
    if n not in (1, 2, 3, 4):
        raise ValueError(f"n must be in 1..4, got {n}")
    candidate, reference = list(candidate), list(reference)
    if not candidate:
        return 0.0
    total = len(candidate) - n + 1
    if total <= 0:
        return 1.0 if candidate == reference else 0.0
    cand, ref = ngrams(candidate, n), ngrams(reference, n)
    matches = sum(min(c, ref[g]) for g, c in cand.items())
    precision = matches / total if matches else 1.0 / (2 * total)
    c, r = len(candidate), len(reference)
    penalty = 1.0 if c >= r else math.exp(1.0 - r / c)
    return precision * penalty


@dataclass
class BleuReport:
    bleu: tuple  # orders 1..4
    n_sentences: int

    @property
    def avg_bleu(self) -> float:
        return float(sum(self.bleu) / 4)

    def as_dict(self) -> dict:
        d = {f"bleu{i + 1}": float(b) for i, b in enumerate(self.bleu)}
        d["avg_bleu"] = self.avg_bleu
        return d


def corpus_bleu(candidates: Sequence[Sequence[str]], references: Sequence[Sequence[str]]) -> BleuReport:
    """Mean sentence-level BLEU for each order 1-4."""
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise ValueError("no sentences to score")
    scores = np.array([[bleu_n(c, r, n) for n in (1, 2, 3, 4)] for c, r in zip(candidates, references)])
    return BleuReport(tuple(float(x) for x in scores.mean(axis=0)), len(candidates))


# ---------------------------------------------------------------------------
# similarity


class SimilarityProvider(Protocol):
    kind: str

    def similarities(self, pairs: Sequence[tuple[str, str]]) -> list[float]: ...


class ProviderUnavailable(RuntimeError):
    """The external embedding service could not be reached."""


class ProviderFallbackWarning(UserWarning):
    """Similarity was computed by the lexical fallback instead of the configured provider."""


def cosine_to_unit(cos: float) -> float:
    return (1.0 + cos) / 2.0


class LexicalSimilarity:
    """Cosine of unigram count vectors mapped to [0, 1]; needs no network."""

    kind = "lexical-fallback"

    def similarity(self, a: str, b: str) -> float:
        ca, cb = Counter(a.split()), Counter(b.split())
        if not ca and not cb:
            return 1.0
        if not ca or not cb:
            return 0.5
        shared = sorted(set(ca) & set(cb))
        dot = float(sum(ca[t] * cb[t] for t in shared))
        na = math.sqrt(sum(v * v for v in ca.values()))
        nb = math.sqrt(sum(v * v for v in cb.values()))
        return cosine_to_unit(min(1.0, dot / (na * nb)))

    def similarities(self, pairs):
        return [self.similarity(a, b) for a, b in pairs]


class EmbeddingServiceSimilarity:
    """Client for a sentence-embedding HTTP service.

    Request body ``{"texts": [...]}``; response ``{"embeddings": [[...], ...]}``.
    Each pair is one request; at most ``max_in_flight`` run concurrently and
    failures are retried with exponential backoff.
    """

    kind = "external-embedding-service"

    def __init__(self, endpoint: str, token: str | None = None, timeout: float = 10.0,
                 max_in_flight: int = 4, retries: int = 3, backoff: float = 0.5):
        self.endpoint = endpoint
        self.token = token
        self.timeout = timeout
        self.max_in_flight = max(1, max_in_flight)
        self.retries = retries
        self.backoff = backoff

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        body = json.dumps({"texts": list(texts)}).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last_error = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            request = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
            try:
                with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                    payload = json.loads(resp.read().decode("utf-8"))
                emb = np.asarray(payload["embeddings"], dtype=np.float64)
                if emb.shape[0] != len(texts):
                    raise ValueError(f"service returned {emb.shape[0]} embeddings for {len(texts)} texts")
                return emb
            except (urllib.error.URLError, OSError, ValueError, KeyError) as exc:
                last_error = exc
                log.debug("embedding request failed (attempt %d): %s", attempt + 1, exc)
        raise ProviderUnavailable(f"embedding service {self.endpoint} unavailable: {last_error}")

    def similarity(self, a: str, b: str) -> float:
        ea, eb = self.embed([a, b])
        na, nb = np.linalg.norm(ea), np.linalg.norm(eb)
        if na == 0 or nb == 0:
            return 0.5
        cos = float(np.clip(ea @ eb / (na * nb), -1.0, 1.0))
        return cosine_to_unit(cos)

    def similarities(self, pairs):
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(lambda ab: self.similarity(*ab), pairs))


def provider_from_env() -> SimilarityProvider:
    endpoint = os.environ.get(ENDPOINT_ENV)
    if endpoint:
        return EmbeddingServiceSimilarity(endpoint, os.environ.get(TOKEN_ENV))
    return LexicalSimilarity()


def score_corpus(candidates: Sequence[Sequence[str]], references: Sequence[Sequence[str]],
                 provider: SimilarityProvider | None = None):
    """Returns ``(BleuReport, mean similarity)`` over sentence pairs of tokens."""
    report = corpus_bleu(candidates, references)
    provider = provider or LexicalSimilarity()
    pairs = [(" ".join(c), " ".join(r)) for c, r in zip(candidates, references)]
    try:
        sims = provider.similarities(pairs)
    except ProviderUnavailable as exc:
        warnings.warn(f"{exc}; using lexical similarity", ProviderFallbackWarning, stacklevel=2)
        sims = LexicalSimilarity().similarities(pairs)
    return report, float(np.mean(sims))
