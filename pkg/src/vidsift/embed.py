"""Text embedding providers and cosine similarity.

The default provider is a deterministic hashed signed projection over unigrams
and adjacent bigrams: offline, reproducible, and cheap. A remote HTTP provider
with the same contract is available for operators who run a real model.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass

import requests

from .core import fnv1a64

DIM = 512
LOCAL_PROVIDER_ID = "hashed-unibigram-v1"
EMBED_ENDPOINT_ENV = "EMBED_ENDPOINT"

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")
# Salt keeps token hashing independent of pair-id hashing; versioned with the provider.
_TOKEN_SALT = b"vs1:"


class EmbeddingError(Exception):
    """Terminal embedding failure (transport or malformed response shape)."""


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    provider_id: str
    source_text_hash: str

    def __post_init__(self):
        if len(self.values) != DIM:
            raise EmbeddingError(f"embedding must have {DIM} values, got {len(self.values)}")


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def _bucket_and_sign(token: str) -> tuple[int, float]:
    h = fnv1a64(_TOKEN_SALT + token.encode("utf-8"))
    bucket = h % DIM
    sign = 1.0 if (h // DIM) % 2 == 0 else -1.0
    return bucket, sign


def text_hash(text: str) -> str:
    return f"{fnv1a64(text.encode('utf-8')):016x}"


class HashingEmbedder:
    """Deterministic local provider: signed hashed unigram+bigram projection.

    Empty or token-free text maps to the zero vector; everything else is
    L2-normalized. Vectors are cached per text, since pipeline inputs repeat
    the same titles, skills, and queries many times.
    """

    provider_id = LOCAL_PROVIDER_ID

    def __init__(self):
        self._cache: dict[str, EmbeddingVector] = {}

    def embed(self, text: str) -> EmbeddingVector:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        tokens = tokenize(text)
        acc = [0.0] * DIM
        for gram in _grams(tokens):
            bucket, sign = _bucket_and_sign(gram)
            acc[bucket] += sign
        norm = math.sqrt(sum(v * v for v in acc))
        if norm > 0.0:
            acc = [v / norm for v in acc]
        vec = EmbeddingVector(tuple(acc), self.provider_id, text_hash(text))
        self._cache[text] = vec
        return vec

    def embed_many(self, texts: list[str]) -> list[EmbeddingVector]:
        return [self.embed(t) for t in texts]


def _grams(tokens: list[str]):
    yield from tokens
    for a, b in zip(tokens, tokens[1:]):
        yield f"{a} {b}"


class RemoteEmbedder:
    """HTTP provider: POST {endpoint}/embed with {"texts": [...]}.

    The response must carry one 512-float vector per input text; anything
    else is terminal.
    """

    def __init__(self, endpoint: str | None = None, provider_id: str = "remote-v1",
                 session: requests.Session | None = None, timeout: float = 30.0):
        endpoint = endpoint or os.environ.get(EMBED_ENDPOINT_ENV, "")
        if not endpoint:
            raise EmbeddingError(f"no embedding endpoint configured ({EMBED_ENDPOINT_ENV} unset)")
        self.endpoint = endpoint.rstrip("/")
        self.provider_id = provider_id
        self._session = session or requests.Session()
        self._timeout = timeout

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_many([text])[0]

    def embed_many(self, texts: list[str]) -> list[EmbeddingVector]:
        try:
            resp = self._session.post(
                f"{self.endpoint}/embed", json={"texts": texts}, timeout=self._timeout
            )
            resp.raise_for_status()
            payload = resp.json()
        except EmbeddingError:
            raise
        except Exception as exc:
            raise EmbeddingError(f"embedding request failed: {exc}") from exc
        vectors = payload.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise EmbeddingError("embedding response must carry one vector per text")
        out = []
        for text, values in zip(texts, vectors):
            if len(values) != DIM:
                raise EmbeddingError(f"expected {DIM}-d vectors, got {len(values)}")
            out.append(EmbeddingVector(tuple(float(v) for v in values),
                                       self.provider_id, text_hash(text)))
        return out


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity in [-1, 1]; 0.0 when either vector has zero norm."""
    if len(a.values) != len(b.values):
        raise EmbeddingError(f"dimension mismatch: {len(a.values)} vs {len(b.values)}")
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a.values, b.values):
        dot += x * y
        na += x * x
        nb += y * y
    if na == 0.0 or nb == 0.0:
        return 0.0
    value = dot / math.sqrt(na * nb)
    return max(-1.0, min(1.0, value))
