"""Hashing backend against a from-scratch reference implementation, and
similarity properties."""

from __future__ import annotations

import hashlib
import math
import random
import re

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kwsql.embed import (COSINE, DOT, EmbedderConfig, EmbeddingError, encode,
                         encode_batch, hash_encode, similarity)


def reference_hash_vector(sentence: str, dim: int, seed: str) -> list[float]:
    """Independent implementation of the pinned hashing spec, written against
    the documented contract only: sha256(seed + ":" + token), first 8 bytes
    big-endian, bucket = h mod dim, sign from bit 63, then L2 normalization."""
    vec = [0.0] * dim
    for token in re.findall(r"[a-z0-9]+", sentence.lower()):
        digest = hashlib.sha256((seed + ":" + token).encode()).digest()
        h = 0
        for byte in digest[:8]:
            h = h * 256 + byte
        bucket = h % dim
        sign = 1.0 if h < 2 ** 63 else -1.0
        vec[bucket] += sign
    norm = math.sqrt(sum(v * v for v in vec))
    return [v / norm for v in vec] if norm else vec


class TestHashingBackend:
    def test_deterministic(self):
        config = EmbedderConfig()
        a = encode("answer: person.name: Smith, Will | movie: films", config)
        b = encode("answer: person.name: Smith, Will | movie: films", config)
        assert np.array_equal(a, b)

    def test_self_similarity(self):
        config = EmbedderConfig()
        v = encode("query: Will Smith films", config)
        assert similarity(v, v, COSINE) == pytest.approx(1.0, abs=1e-6)

    def test_matches_reference_dim8(self):
        for sentence in ["answer: a", "answer: b", "query: Will Smith films",
                         "answer: person.name: Smith, Will | movie: films"]:
            got = hash_encode(sentence, 8, "kwsql-v1")
            want = reference_hash_vector(sentence, 8, "kwsql-v1")
            assert np.allclose(got, want, atol=1e-9)

    def test_reference_cosine_dim8(self):
        got = similarity(hash_encode("answer: a", 8, "kwsql-v1"),
                         hash_encode("answer: b", 8, "kwsql-v1"), COSINE)
        ra = np.array(reference_hash_vector("answer: a", 8, "kwsql-v1"))
        rb = np.array(reference_hash_vector("answer: b", 8, "kwsql-v1"))
        denom = np.linalg.norm(ra) * np.linalg.norm(rb)
        want = float(ra @ rb / denom)
        assert got == pytest.approx(want, abs=1e-9)

    def test_token_order_irrelevant(self):
        rng = random.Random(3)
        tokens = ["person", "name", "smith", "will", "movie", "films"]
        base = hash_encode(" ".join(tokens), 64, "kwsql-v1")
        for _ in range(5):
            rng.shuffle(tokens)
            assert np.allclose(hash_encode(" ".join(tokens), 64, "kwsql-v1"), base)

    def test_unit_norm_or_zero(self):
        assert np.linalg.norm(hash_encode("hello world", 32, "s")) == pytest.approx(1.0)
        assert np.linalg.norm(hash_encode("", 32, "s")) == 0.0

    def test_batch_shape(self):
        config = EmbedderConfig(dim=16)
        out = encode_batch(["a", "b", "c"], config)
        assert out.shape == (3, 16)

    def test_different_seed_different_vector(self):
        a = hash_encode("answer: will smith", 256, "seed-one")
        b = hash_encode("answer: will smith", 256, "seed-two")
        assert not np.allclose(a, b)


class TestSimilarity:
    def test_cosine_self(self):
        v = np.array([0.3, -0.4, 1.0])
        assert similarity(v, v, COSINE) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0]), COSINE) == 0.0

    def test_dot(self):
        assert similarity(np.array([1.0, 2.0, 3.0]),
                          np.array([4.0, 5.0, 6.0]), DOT) == 32.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            similarity(np.zeros(3), np.zeros(4), COSINE)

    def test_zero_vector_cosine(self):
        assert similarity(np.zeros(4), np.ones(4), COSINE) == 0.0

    @given(st.lists(st.floats(-10, 10), min_size=4, max_size=4),
           st.lists(st.floats(-10, 10), min_size=4, max_size=4))
    def test_symmetry(self, a, b):
        va, vb = np.array(a), np.array(b)
        for kind in (COSINE, DOT):
            assert abs(similarity(va, vb, kind) - similarity(vb, va, kind)) <= 1e-12

    def test_cosine_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            a, b = rng.normal(size=8), rng.normal(size=8)
            assert -1.0 - 1e-12 <= similarity(a, b, COSINE) <= 1.0 + 1e-12


class TestConfig:
    def test_unknown_backend_rejected(self):
        with pytest.raises(ValueError):
            EmbedderConfig(backend="quantum")

    def test_unknown_similarity_rejected(self):
        with pytest.raises(ValueError):
            EmbedderConfig(similarity="manhattan")

    def test_remote_without_url_fails(self, monkeypatch):
        monkeypatch.delenv("KWSQL_EMBED_URL", raising=False)
        config = EmbedderConfig(backend="remote", retries=0)
        with pytest.raises(EmbeddingError, match="service url"):
            encode_batch(["x"], config)

    def test_remote_unreachable_exhausts_retries(self, monkeypatch):
        monkeypatch.delenv("KWSQL_EMBED_URL", raising=False)
        config = EmbedderConfig(backend="remote", retries=1, timeout=0.2,
                                service_url="http://127.0.0.1:1")
        with pytest.raises(EmbeddingError, match="unreachable"):
            encode_batch(["x"], config)
