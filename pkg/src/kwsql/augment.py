"""Training-data augmentation: extract wildcard templates from relevant
joining networks, instantiate them from database rows into synthetic
queries, and emit labeled examples for embedder fine-tuning.

Relevant pairs are labeled 1.0; non-relevant query matches and networks
found by searching the synthetic query are labeled through a sigmoid of
their baseline score with a fixed weight of 0.4.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .catalog import Catalog, SchemaIndex, ValueIndex
from .cjn import CJN, CjnNode, validate_cjn
from .executor import View, execute, projected_columns
from .linearize import (DEFAULT_SNAPSHOT_ROWS, multivalue_sentence, qm_sentence,
                        query_sentence, row_sentence, snapshot)
from .matcher import SCHEMA, KeywordMatch
from .qmatch import QueryMatch, bayesian_score
from .rank import BAYESIAN, MEAN, MULTIVALUE, SIMPLE, SetupTriple, search

WILDCARD = "?"

DEFAULT_GENERATION_RATIO = 200
DEFAULT_NEGATIVES_PER_QUERY = 4

QM_KIND = "qm"
CJN_KIND = "cjn"
POSITIVE = "positive"
NEGATIVE = "negative"

LABEL_WEIGHT = 0.4


def label_from_score(score: float) -> float:
    """Sigmoid label for a non-relevant example; always strictly in (0, 1)."""
    x = LABEL_WEIGHT * score
    if x >= 0:
        value = 1.0 / (1.0 + math.exp(-x))
    else:
        e = math.exp(x)
        value = e / (1.0 + e)
    # Keep extreme scores strictly inside the open interval.
    return min(max(value, math.nextafter(0.0, 1.0)), math.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class CJNTemplate:
    """A network with every keyword replaced by the wildcard. Schema matches
    keep their surface terms aside: the wildcarded skeleton drives the SQL,
    the surface terms re-enter the synthetic queries."""

    skeleton: CJN
    origin: str
    schema_surfaces: tuple[tuple[int, str], ...]  # (canonical node position, term)

    def __eq__(self, other) -> bool:
        return (isinstance(other, CJNTemplate)
                and self.skeleton.canonical_form() == other.skeleton.canonical_form()
                and self.schema_surfaces == other.schema_surfaces)

    def __hash__(self) -> int:
        return hash((self.skeleton.canonical_form(), self.schema_surfaces))


@dataclass(frozen=True)
class TrainingExample:
    query_sentence: str
    answer_sentence: str
    label: float
    kind: str  # QM_KIND or CJN_KIND
    polarity: str  # POSITIVE or NEGATIVE
    agg: str | None = None  # aggregation mode for CJN examples

    def __post_init__(self):
        if self.polarity == POSITIVE and self.label != 1.0:
            raise ValueError("positive examples carry label 1.0")
        if self.polarity == NEGATIVE and not 0.0 < self.label < 1.0:
            raise ValueError("negative labels lie strictly in (0, 1)")

    def to_record(self) -> dict:
        return {"kind": self.kind, "query_sentence": self.query_sentence,
                "answer_sentence": self.answer_sentence, "score": self.label,
                "polarity": self.polarity, "agg": self.agg}


def _wildcard_match(match: KeywordMatch) -> KeywordMatch:
    bindings = {attr: {WILDCARD} for attr, _ in match.sorted_bindings()}
    return KeywordMatch(match.relation, match.type,
                        frozenset((a, frozenset(k)) for a, k in bindings.items()))


def extract_template(cjn: CJN) -> CJNTemplate:
    """Same tree, all keyword sets replaced by the wildcard; schema keywords
    are wildcarded too, with their surface terms recorded."""
    nodes = tuple(
        CjnNode(n.relation, _wildcard_match(n.match) if n.match else None,
                n.pk_attribute, n.display_attribute)
        for n in cjn.nodes)
    skeleton = CJN(nodes, cjn.edges, cjn.root)
    surfaces: list[tuple[int, str]] = []
    for pos, idx in enumerate(cjn.dfs_order()):
        match = cjn.nodes[idx].match
        if match is not None and match.type == SCHEMA:
            (_, kws), = match.sorted_bindings()
            surfaces.append((pos, " ".join(sorted(kws))))
    return CJNTemplate(skeleton, cjn.canonical_form(), tuple(surfaces))


def run_template(template: CJNTemplate, catalog: Catalog,
                 generation_ratio: int = DEFAULT_GENERATION_RATIO) -> View:
    """The unconstrained join of the template: keyword predicates dropped,
    structure and pk inequalities kept, limited to the generation ratio."""
    return execute(template.skeleton, catalog, limit=generation_ratio,
                   apply_predicates=False)


def instantiate(template: CJNTemplate, row: tuple[str, ...],
                catalog: Catalog) -> tuple[str, CJN, QueryMatch] | None:
    """Turn one template-result row into (synthetic query, relevant network,
    relevant query match).

    The query uses the row's original-cased tokens in column order, then the
    schema surface terms. Rows that tokenize to nothing, or whose value
    tokens collide with a surface term (which would break cover minimality),
    are skipped by returning None.
    """
    skeleton = template.skeleton
    columns = projected_columns(skeleton)
    order = skeleton.dfs_order()
    surfaces = dict(template.schema_surfaces)

    cased_parts: list[str] = []
    fills: dict[int, dict[str, set[str]]] = {}
    for pos, idx in enumerate(order):
        node = skeleton.nodes[idx]
        if node.match is None or node.match.type == SCHEMA:
            continue
        for attr, _ in node.match.sorted_bindings():
            cell = row[columns.index((pos, attr))]
            cased = catalog.tokenizer.tokenize_cased(cell)
            if not cased:
                return None
            cased_parts.extend(cased)
            fills.setdefault(idx, {})[attr] = {t.lower() for t in cased}

    surface_terms = [term for _, term in template.schema_surfaces]
    lowered = {t.lower() for t in cased_parts}
    if lowered & {term for s in surface_terms for term in s.split()}:
        return None

    query = " ".join(cased_parts + surface_terms)

    nodes = []
    for idx, node in enumerate(skeleton.nodes):
        if node.match is None:
            nodes.append(node)
            continue
        if node.match.type == SCHEMA:
            (element, _), = node.match.sorted_bindings()
            pos = order.index(idx)
            match = KeywordMatch.schema(node.relation, element,
                                        set(surfaces[pos].split()))
        else:
            match = KeywordMatch.value(node.relation, fills[idx])
        nodes.append(CjnNode(node.relation, match, node.pk_attribute,
                             node.display_attribute))
    cjn = CJN(tuple(nodes), skeleton.edges, skeleton.root)
    validate_cjn(cjn)
    keywords = tuple(catalog.tokenizer.tokenize(query))
    qm = QueryMatch(frozenset(n.match for n in cjn.nodes if n.match), keywords)
    return query, cjn, qm


def emit_examples(triples: list[tuple[str, CJN, QueryMatch]], catalog: Catalog,
                  value_index: ValueIndex, schema_index: SchemaIndex,
                  negatives_per_query: int = DEFAULT_NEGATIVES_PER_QUERY,
                  agg_modes: tuple[str, ...] = (MEAN, MULTIVALUE),
                  snapshot_rows: int = DEFAULT_SNAPSHOT_ROWS,
                  setup: SetupTriple = SetupTriple(),
                  max_qm_size: int = 3, max_cjn_size: int = 5,
                  size_penalty: float = 1.0,
                  schema_weight: float = 2.0) -> list[TrainingExample]:
    """Positives straight from each triple; negatives from a full baseline
    search of the synthetic query, labeled by the sigmoid of their score.

    Duplicate triples (the same entity occurring in several joined rows
    yields the same synthetic query) are collapsed first.
    """
    out: list[TrainingExample] = []
    seen: set[tuple[str, str]] = set()
    unique: list[tuple[str, CJN, QueryMatch]] = []
    for triple in triples:
        key = (triple[0], triple[1].canonical_form())
        if key not in seen:
            seen.add(key)
            unique.append(triple)
    for query, cjn, qm in unique:
        qs = query_sentence(query)
        out.append(TrainingExample(qs, qm_sentence(qm), 1.0, QM_KIND, POSITIVE))

        view = execute(cjn, catalog)
        snap = snapshot(view, snapshot_rows) if view.rows else None
        if snap is not None:
            _append_cjn_examples(out, qs, cjn, snap, 1.0, POSITIVE, agg_modes)

        result = search(query, catalog, value_index, schema_index, setup=setup,
                        qm_ranker=BAYESIAN, cjn_ranker=SIMPLE,
                        max_qm_size=max_qm_size, max_cjn_size=max_cjn_size,
                        size_penalty=size_penalty, schema_weight=schema_weight)

        relevant_qm = qm.canonical()
        negatives = 0
        for score, other_qm in result.ranked_qms:
            if other_qm.canonical() == relevant_qm:
                continue
            if negatives >= negatives_per_query:
                break
            out.append(TrainingExample(qs, qm_sentence(other_qm),
                                       label_from_score(score), QM_KIND, NEGATIVE))
            negatives += 1

        relevant_cjn = cjn.canonical_form()
        cjn_negatives = 0
        for hit in result.hits:
            if hit.cjn.canonical_form() == relevant_cjn:
                continue
            if cjn_negatives >= negatives_per_query:
                break
            base = bayesian_score(list(qm.keywords), hit.source_qm, value_index,
                                  size_penalty, schema_weight) / len(hit.cjn)
            label = label_from_score(base)
            if not hit.view.rows:
                continue
            _append_cjn_examples(out, qs, hit.cjn,
                                 snapshot(hit.view, snapshot_rows),
                                 label, NEGATIVE, agg_modes)
            cjn_negatives += 1
    return out


def _append_cjn_examples(out: list[TrainingExample], qs: str, cjn: CJN,
                         snap: View, label: float, polarity: str,
                         agg_modes: tuple[str, ...]) -> None:
    for agg in agg_modes:
        if agg == MEAN:
            for row in snap.rows:
                out.append(TrainingExample(qs, row_sentence(row, cjn),
                                           label, CJN_KIND, polarity, agg))
        elif agg == MULTIVALUE:
            out.append(TrainingExample(qs, multivalue_sentence(snap, cjn),
                                       label, CJN_KIND, polarity, agg))
        else:
            raise ValueError(f"unknown aggregation {agg!r}")


def split_dataset(examples: list[TrainingExample], train_fraction: float = 0.8,
                  seed: int = 0) -> tuple[list[TrainingExample], list[TrainingExample]]:
    """Deterministic query-level split: all examples of one synthetic query
    land in the same half, so no query leaks across the boundary."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    queries = list(dict.fromkeys(e.query_sentence for e in examples))
    rng = random.Random(seed)
    rng.shuffle(queries)
    n_train = int(round(len(queries) * train_fraction))
    train_queries = set(queries[:n_train])
    train = [e for e in examples if e.query_sentence in train_queries]
    test = [e for e in examples if e.query_sentence not in train_queries]
    return train, test


def write_examples(examples: list[TrainingExample], path: str | Path,
                   metadata: dict | None = None) -> None:
    """One JSON record per line; metadata lands next to it as <path>.meta.json."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for example in examples:
            fh.write(json.dumps(example.to_record(), sort_keys=True) + "\n")
    if metadata is not None:
        meta_path = path.with_suffix(path.suffix + ".meta.json")
        meta_path.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")


def read_examples(path: str | Path) -> list[TrainingExample]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        out.append(TrainingExample(rec["query_sentence"], rec["answer_sentence"],
                                   rec["score"], rec["kind"], rec["polarity"],
                                   rec.get("agg")))
    return out
