"""Embedding backends: a deterministic local feature-hashing encoder and a
remote encode service speaking JSON over HTTP.

Hashing spec (pinned so an independent implementation can reproduce it):
lowercase the sentence, take maximal alphanumeric runs as tokens, and for
each token compute h = SHA-256(seed + ":" + token), interpreted from its
first 8 bytes as a big-endian unsigned 64-bit integer. The token adds
+1 to bucket (h mod dim) when bit 63 of h is zero, else -1. The count
vector is then L2-normalized (the zero vector stays zero).
"""

from __future__ import annotations

import hashlib
import os
import re
import time
from dataclasses import dataclass

import numpy as np
import requests

ENV_SERVICE_URL = "KWSQL_EMBED_URL"

HASHING = "hashing"
REMOTE = "remote"

COSINE = "cosine"
DOT = "dot"

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class EmbeddingError(RuntimeError):
    """Transport or contract failure of an embedding backend."""


@dataclass(frozen=True)
class EmbedderConfig:
    backend: str = HASHING
    model_id: str = ""
    similarity: str = COSINE
    dim: int = 256
    hash_seed: str = "kwsql-v1"
    service_url: str = ""
    batch_size: int = 128
    timeout: float = 30.0
    retries: int = 2

    def __post_init__(self):
        if self.backend not in (HASHING, REMOTE):
            raise ValueError(f"unknown embedding backend {self.backend!r}")
        if self.similarity not in (COSINE, DOT):
            raise ValueError(f"unknown similarity kind {self.similarity!r}")
        if self.dim < 1:
            raise ValueError("embedding dimension must be >= 1")


def hash_encode(sentence: str, dim: int, seed: str) -> np.ndarray:
    """Signed bag-of-tokens feature hashing, L2-normalized."""
    vec = np.zeros(dim, dtype=np.float64)
    for token in _TOKEN_RE.findall(sentence.lower()):
        digest = hashlib.sha256(f"{seed}:{token}".encode("utf-8")).digest()
        h = int.from_bytes(digest[:8], "big")
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        vec[h % dim] += sign
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


class _RemoteSession:
    """One health-checked connection to an encode service."""

    _healthy: dict[tuple[str, str], int] = {}

    def __init__(self, config: EmbedderConfig):
        self.config = config
        self.url = os.environ.get(ENV_SERVICE_URL) or config.service_url
        if not self.url:
            raise EmbeddingError(
                f"remote backend needs a service url (config or ${ENV_SERVICE_URL})")
        self.url = self.url.rstrip("/")

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        last: Exception | None = None
        for attempt in range(self.config.retries + 1):
            try:
                resp = requests.request(method, self.url + path, json=payload,
                                        timeout=self.config.timeout)
                if resp.status_code >= 500:
                    raise EmbeddingError(f"service error {resp.status_code}: {resp.text}")
                if resp.status_code >= 400:
                    raise EmbeddingError(f"request rejected {resp.status_code}: {resp.text}")
                return resp.json()
            except (requests.ConnectionError, requests.Timeout, EmbeddingError) as exc:
                if isinstance(exc, EmbeddingError) and "rejected" in str(exc):
                    raise  # 4xx is not retryable
                last = exc
                time.sleep(0.2 * (attempt + 1))
        raise EmbeddingError(f"embedding service unreachable after "
                             f"{self.config.retries + 1} attempts: {last}")

    def ensure_healthy(self) -> None:
        key = (self.url, self.config.model_id)
        if self._healthy.get(key):
            return
        info = self._request("GET", "/health")
        if info.get("status") != "ok":
            raise EmbeddingError(f"service unhealthy: {info}")
        self._healthy[key] = 1

    def encode_batch(self, sentences: list[str]) -> np.ndarray:
        self.ensure_healthy()
        vectors: list[list[float]] = []
        dim: int | None = None
        for start in range(0, len(sentences), self.config.batch_size):
            chunk = sentences[start:start + self.config.batch_size]
            out = self._request("POST", "/encode",
                                {"model_id": self.config.model_id, "sentences": chunk})
            embeddings = out["embeddings"]
            if len(embeddings) != len(chunk):
                raise EmbeddingError(
                    f"service returned {len(embeddings)} vectors for {len(chunk)} sentences")
            if dim is None:
                dim = int(out["dim"])
            elif int(out["dim"]) != dim:
                raise EmbeddingError("dimension changed across batches")
            vectors.extend(embeddings)
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.ndim != 2 or (dim is not None and arr.shape[1] != dim):
            raise EmbeddingError("ragged embedding matrix from service")
        return arr


def encode_batch(sentences: list[str], config: EmbedderConfig) -> np.ndarray:
    """Encode sentences to a (len(sentences), dim) float matrix. Deterministic
    for a fixed backend and model: identical sentences yield identical rows."""
    if config.backend == HASHING:
        return np.stack([hash_encode(s, config.dim, config.hash_seed)
                         for s in sentences]) if sentences else np.zeros((0, config.dim))
    return _RemoteSession(config).encode_batch(sentences)


def encode(sentence: str, config: EmbedderConfig) -> np.ndarray:
    return encode_batch([sentence], config)[0]


def similarity(a: np.ndarray, b: np.ndarray, kind: str = COSINE) -> float:
    """Cosine (in [-1, 1], zero vectors score 0) or unbounded dot product;
    both symmetric."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if kind == DOT:
        return float(np.dot(a, b))
    if kind != COSINE:
        raise ValueError(f"unknown similarity kind {kind!r}")
    denom = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(np.dot(a, b) / denom)
