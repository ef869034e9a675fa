"""Ranking of query matches and joining networks, plus the end-to-end search
pipeline under the N_QM / N_CJN / P_CJN setup: keep the top N_QM query
matches, probe up to P_CJN networks per match, keep the first N_CJN that
yield rows, then rank the surviving pool."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Generic, TypeVar

import numpy as np

from .catalog import Catalog, SchemaIndex, ValueIndex
from .cjn import CJN, generate_cjns
from .embed import EmbedderConfig, encode_batch, similarity
from .executor import View, execute, probe
from .linearize import (DEFAULT_SNAPSHOT_ROWS, multivalue_sentence, qm_sentence,
                        query_sentence, row_sentence, snapshot)
from .matcher import find_skms, find_vkms, tokenize_query
from .qmatch import QueryMatch, enumerate_qms, rank_qms_bayesian
from .sqlgen import cjn_to_sql

T = TypeVar("T")

BAYESIAN = "bayesian"
NEURAL = "neural"
SIMPLE = "simple"
NEURAL_MEAN = "neural-mean"
NEURAL_MULTIVALUE = "neural-multivalue"

MEAN = "mean"
MULTIVALUE = "multivalue"


@dataclass(frozen=True)
class SetupTriple:
    """Top query matches kept / non-empty networks kept per match / networks
    probed per match."""

    n_qm: int = 8
    n_cjn: int = 1
    p_cjn: int = 9

    def __post_init__(self):
        if min(self.n_qm, self.n_cjn, self.p_cjn) < 1:
            raise ValueError("setup values must all be >= 1")


@dataclass
class RankedList(Generic[T]):
    """Scores non-increasing; ties broken by the item's canonical string."""

    entries: list[tuple[float, T]]

    @staticmethod
    def from_scored(pairs: list[tuple[float, T]],
                    canonical: Callable[[T], str]) -> "RankedList[T]":
        ordered = sorted(pairs, key=lambda p: (-p[0], canonical(p[1])))
        return RankedList(ordered)

    def items(self) -> list[T]:
        return [item for _, item in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def neural_qm_rank(query: str, qms: set[QueryMatch],
                   embedder: EmbedderConfig) -> RankedList[QueryMatch]:
    """Score each query match by embedding similarity between the query
    sentence and the match sentence."""
    if not qms:
        return RankedList([])
    ordered = sorted(qms, key=lambda q: q.canonical())
    sentences = [query_sentence(query)] + [qm_sentence(q) for q in ordered]
    vectors = encode_batch(sentences, embedder)
    qv = vectors[0]
    pairs = [(similarity(qv, vectors[i + 1], embedder.similarity), q)
             for i, q in enumerate(ordered)]
    return RankedList.from_scored(pairs, lambda q: q.canonical())


def neural_cjn_rank(query: str, cjns: list[CJN], catalog: Catalog,
                    agg: str, embedder: EmbedderConfig,
                    snapshot_rows: int = DEFAULT_SNAPSHOT_ROWS,
                    views: dict[CJN, View] | None = None,
                    ) -> tuple[RankedList[CJN], list[tuple[CJN, str]]]:
    """Rank networks by similarity between the query embedding and the
    aggregated embedding of their snapshot rows.

    mean: embed each snapshot row sentence and average the vectors.
    multivalue: embed the single combined sentence.
    Networks whose view is empty are skipped and reported, not scored.
    """
    if agg not in (MEAN, MULTIVALUE):
        raise ValueError(f"unknown aggregation {agg!r}")
    skipped: list[tuple[CJN, str]] = []
    snapshots: list[tuple[CJN, View]] = []
    for cjn in cjns:
        view = views.get(cjn) if views is not None else None
        if view is None:
            view = execute(cjn, catalog)
        if not view.rows:
            skipped.append((cjn, "empty view"))
            continue
        snapshots.append((cjn, snapshot(view, snapshot_rows)))

    if not snapshots:
        return RankedList([]), skipped

    sentences = [query_sentence(query)]
    spans: list[tuple[CJN, int, int]] = []
    for cjn, snap in snapshots:
        start = len(sentences)
        if agg == MEAN:
            sentences.extend(row_sentence(row, cjn) for row in snap.rows)
        else:
            sentences.append(multivalue_sentence(snap, cjn))
        spans.append((cjn, start, len(sentences)))

    vectors = encode_batch(sentences, embedder)
    qv = vectors[0]
    pairs = []
    for cjn, start, end in spans:
        agg_vec = np.mean(vectors[start:end], axis=0)
        pairs.append((similarity(qv, agg_vec, embedder.similarity), cjn))
    return RankedList.from_scored(pairs, lambda c: c.canonical_form()), skipped


def simple_cjn_rank(scored_qms: RankedList[QueryMatch],
                    cjns_per_qm: dict[QueryMatch, list[CJN]]) -> RankedList[CJN]:
    """Each network scores its source query match's score divided by its
    node count, so smaller networks from stronger matches rank first."""
    qm_scores = {qm.canonical(): score for score, qm in scored_qms}
    pairs: list[tuple[float, CJN]] = []
    for qm, cjns in cjns_per_qm.items():
        base = qm_scores[qm.canonical()]
        pairs.extend((base / len(cjn), cjn) for cjn in cjns)
    return RankedList.from_scored(pairs, lambda c: c.canonical_form())


@dataclass
class SearchHit:
    score: float
    cjn: CJN
    view: View
    sql: str
    source_qm: QueryMatch


@dataclass
class Diagnostics:
    """Per-stage counters and traces for the explain mode."""

    keywords: list[str] = field(default_factory=list)
    uncovered_keywords: list[str] = field(default_factory=list)
    vkm_count: int = 0
    skm_count: int = 0
    qm_count: int = 0
    ranked_qms: list[tuple[float, str]] = field(default_factory=list)
    kept_qms: int = 0
    generated_cjns: int = 0
    probed_cjns: int = 0
    pruned_cjns: int = 0
    surviving_cjns: int = 0
    skipped: list[str] = field(default_factory=list)


@dataclass
class SearchResult:
    hits: list[SearchHit]
    ranked_qms: RankedList[QueryMatch]
    diagnostics: Diagnostics


def search(query: str, catalog: Catalog, value_index: ValueIndex,
           schema_index: SchemaIndex,
           setup: SetupTriple = SetupTriple(),
           qm_ranker: str = BAYESIAN,
           cjn_ranker: str = SIMPLE,
           embedder: EmbedderConfig = EmbedderConfig(),
           max_qm_size: int = 3,
           max_cjn_size: int = 5,
           snapshot_rows: int = DEFAULT_SNAPSHOT_ROWS,
           size_penalty: float = 1.0,
           schema_weight: float = 2.0) -> SearchResult:
    """The full pipeline: tokenize, match, enumerate and rank query matches,
    generate/probe networks eagerly, rank the surviving pool. Every returned
    network is guaranteed non-empty and carries its executed view."""
    diag = Diagnostics()
    keywords = tokenize_query(query, catalog.tokenizer)
    diag.keywords = keywords
    if not keywords:
        return SearchResult([], RankedList([]), diag)

    vkms = find_vkms(keywords, value_index)
    skms = find_skms(keywords, schema_index)
    diag.vkm_count, diag.skm_count = len(vkms), len(skms)
    kms = vkms | skms

    matched = set()
    for km in kms:
        matched.update(km.keywords())
    diag.uncovered_keywords = [k for k in dict.fromkeys(keywords) if k not in matched]

    qms = enumerate_qms(kms, keywords, max_qm_size)
    diag.qm_count = len(qms)
    if not qms:
        return SearchResult([], RankedList([]), diag)

    if qm_ranker == BAYESIAN:
        scored = rank_qms_bayesian(keywords, qms, value_index,
                                   size_penalty, schema_weight)
        ranked_qms = RankedList([(s.score, s.qm) for s in scored])
    elif qm_ranker == NEURAL:
        ranked_qms = neural_qm_rank(query, qms, embedder)
    else:
        raise ValueError(f"unknown query-match ranker {qm_ranker!r}")
    diag.ranked_qms = [(score, qm.canonical()) for score, qm in ranked_qms]

    kept = ranked_qms.entries[:setup.n_qm]
    diag.kept_qms = len(kept)

    survivors: dict[QueryMatch, list[CJN]] = {}
    views: dict[CJN, View] = {}
    source_qm: dict[CJN, QueryMatch] = {}
    for _, qm in kept:
        cjns = generate_cjns(qm, catalog, max_cjn_size, max_generated=setup.p_cjn)
        diag.generated_cjns += len(cjns)
        kept_for_qm: list[CJN] = []
        for cjn in cjns:
            if len(kept_for_qm) >= setup.n_cjn:
                break
            diag.probed_cjns += 1
            if probe(cjn, catalog):
                kept_for_qm.append(cjn)
                views[cjn] = execute(cjn, catalog)
                source_qm[cjn] = qm
            else:
                diag.pruned_cjns += 1
        if kept_for_qm:
            survivors[qm] = kept_for_qm
    diag.surviving_cjns = sum(len(v) for v in survivors.values())
    if not survivors:
        return SearchResult([], ranked_qms, diag)

    if cjn_ranker == SIMPLE:
        ranked_cjns = simple_cjn_rank(ranked_qms, survivors)
    elif cjn_ranker in (NEURAL_MEAN, NEURAL_MULTIVALUE):
        agg = MEAN if cjn_ranker == NEURAL_MEAN else MULTIVALUE
        pool = [c for cjns in survivors.values() for c in cjns]
        ranked_cjns, skipped = neural_cjn_rank(query, pool, catalog, agg, embedder,
                                               snapshot_rows, views)
        diag.skipped = [f"{c.canonical_form()}: {reason}" for c, reason in skipped]
    else:
        raise ValueError(f"unknown network ranker {cjn_ranker!r}")

    hits = [SearchHit(score, cjn, views[cjn], cjn_to_sql(cjn), source_qm[cjn])
            for score, cjn in ranked_cjns]
    return SearchResult(hits, ranked_qms, diag)
