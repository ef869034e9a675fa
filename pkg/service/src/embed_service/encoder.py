"""Trainable sentence encoder over hashed token bags.

Tokens are hashed into a fixed bucket space (no vocabulary to ship), looked
up in a learned embedding table, sum-pooled with hash-derived signs, and L2
normalized. Initialization is seeded, so a freshly created model is
deterministic for its spec, and encoding is deterministic for a fixed
parameter state.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np
import torch
from torch import nn

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _hash_token(token: str, seed: str) -> int:
    digest = hashlib.sha256(f"{seed}:{token}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class HashedBagEncoder(nn.Module):
    def __init__(self, dim: int = 256, buckets: int = 4096,
                 seed: int = 0, hash_seed: str = "embed-service-v1"):
        super().__init__()
        self.dim = dim
        self.buckets = buckets
        self.seed = seed
        self.hash_seed = hash_seed
        generator = torch.Generator().manual_seed(seed)
        weight = torch.empty(buckets, dim).normal_(0.0, 0.1, generator=generator)
        self.embedding = nn.EmbeddingBag(buckets, dim, mode="sum", _weight=weight)

    def spec(self) -> dict:
        return {"dim": self.dim, "buckets": self.buckets, "seed": self.seed,
                "hash_seed": self.hash_seed}

    def _bag(self, sentence: str) -> tuple[list[int], list[float]]:
        ids: list[int] = []
        signs: list[float] = []
        for token in _TOKEN_RE.findall(sentence.lower()):
            h = _hash_token(token, self.hash_seed)
            ids.append(h % self.buckets)
            signs.append(1.0 if (h >> 63) & 1 == 0 else -1.0)
        return ids, signs

    def forward(self, sentences: list[str]) -> torch.Tensor:
        flat_ids: list[int] = []
        offsets: list[int] = []
        weights: list[float] = []
        for sentence in sentences:
            offsets.append(len(flat_ids))
            ids, signs = self._bag(sentence)
            flat_ids.extend(ids)
            weights.extend(signs)
        ids_t = torch.tensor(flat_ids, dtype=torch.long)
        offsets_t = torch.tensor(offsets, dtype=torch.long)
        weights_t = torch.tensor(weights, dtype=torch.float32)
        pooled = self.embedding(ids_t, offsets_t, per_sample_weights=weights_t)
        return nn.functional.normalize(pooled, dim=1, eps=1e-12)

    @torch.no_grad()
    def encode(self, sentences: list[str]) -> np.ndarray:
        self.eval()
        if not sentences:
            return np.zeros((0, self.dim), dtype=np.float64)
        return self(sentences).double().numpy()
