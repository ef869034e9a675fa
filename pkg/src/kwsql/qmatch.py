"""Query matches: total, minimal covers of the query keywords, plus the
frequency-based baseline scoring used for ranking and for training labels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .catalog import ValueIndex
from .matcher import SCHEMA, KeywordMatch, parse_keyword_match

DEFAULT_MAX_QM_SIZE = 3


@dataclass(frozen=True)
class QueryMatch:
    """A set of keyword matches covering every query keyword, with no
    redundant member. ``keywords`` records the query's token order and does
    not take part in equality."""

    matches: frozenset[KeywordMatch]
    keywords: tuple[str, ...] = field(compare=False)

    def covered(self) -> frozenset[str]:
        out: set[str] = set()
        for m in self.matches:
            out.update(m.keywords())
        return frozenset(out)

    def ordered_matches(self) -> list[KeywordMatch]:
        """Matches by ascending position of their earliest query keyword,
        ties broken by relation then canonical form."""
        def key(m: KeywordMatch):
            positions = [self.keywords.index(k) for k in m.keywords()
                         if k in self.keywords]
            earliest = min(positions) if positions else len(self.keywords)
            return (earliest, m.relation, m.canonical())
        return sorted(self.matches, key=key)

    def ordered_keywords(self, kws: frozenset[str]) -> list[str]:
        """Sort a keyword set by first occurrence in the query."""
        def key(k: str):
            return (self.keywords.index(k) if k in self.keywords else len(self.keywords), k)
        return sorted(kws, key=key)

    def canonical(self) -> str:
        return " + ".join(sorted(m.canonical() for m in self.matches))

    def __str__(self) -> str:
        return self.canonical()


@dataclass(frozen=True)
class ScoredQueryMatch:
    qm: QueryMatch
    score: float


def parse_query_match(text: str, keywords: list[str] | tuple[str, ...]) -> QueryMatch:
    """Parse the ``" + "``-joined canonical form back into a QueryMatch."""
    parts = [p for p in text.split(" + ") if p.strip()]
    if not parts:
        raise ValueError("empty query match string")
    return QueryMatch(frozenset(parse_keyword_match(p) for p in parts), tuple(keywords))


def is_total(matches: frozenset[KeywordMatch] | set[KeywordMatch],
             keywords: list[str] | tuple[str, ...]) -> bool:
    covered: set[str] = set()
    for m in matches:
        covered.update(m.keywords())
    return covered == set(keywords)


def is_minimal(matches: frozenset[KeywordMatch] | set[KeywordMatch],
               keywords: list[str] | tuple[str, ...]) -> bool:
    kwset = set(keywords)
    for m in matches:
        rest: set[str] = set()
        for other in matches:
            if other is not m:
                rest.update(other.keywords())
        if rest == kwset:
            return False
    return True


def enumerate_qms(kms: set[KeywordMatch], keywords: list[str],
                  max_qm_size: int = DEFAULT_MAX_QM_SIZE) -> set[QueryMatch]:
    """Exactly the total, minimal covers with at most max_qm_size matches.

    Branches on the first uncovered keyword, so only covers are explored;
    minimality is checked once a cover is total (supersets of a total cover
    are never minimal, so total states are not extended).
    """
    if max_qm_size < 1:
        raise ValueError("max_qm_size must be >= 1")
    kwset = set(keywords)
    order = list(dict.fromkeys(keywords))
    usable = sorted((m for m in kms if m.keywords() and m.keywords() <= kwset),
                    key=lambda m: m.canonical())
    by_keyword: dict[str, list[KeywordMatch]] = {k: [] for k in order}
    for m in usable:
        for k in m.keywords():
            by_keyword[k].append(m)

    results: set[QueryMatch] = set()
    seen_states: set[frozenset[KeywordMatch]] = set()

    def extend(chosen: list[KeywordMatch], covered: set[str]) -> None:
        if covered == kwset:
            if is_minimal(set(chosen), keywords):
                results.add(QueryMatch(frozenset(chosen), tuple(keywords)))
            return
        if len(chosen) >= max_qm_size:
            return
        target = next(k for k in order if k not in covered)
        for m in by_keyword[target]:
            state = frozenset(chosen) | {m}
            if state in seen_states:
                continue
            seen_states.add(state)
            extend(chosen + [m], covered | m.keywords())

    if kwset:
        extend([], set())
    return results


# Scoring constants; overridable through the engine config.
DEFAULT_SIZE_PENALTY = 1.0
DEFAULT_SCHEMA_WEIGHT = 2.0


def bayesian_score(query: list[str], qm: QueryMatch, index: ValueIndex,
                   size_penalty: float = DEFAULT_SIZE_PENALTY,
                   schema_weight: float = DEFAULT_SCHEMA_WEIGHT) -> float:
    """Frequency-based plausibility score for a query match.

    Value keywords weigh (1 + ln tf) * ln(1 + N/df) where N is the number of
    indexed columns; schema keywords weigh ``schema_weight``; larger covers
    pay ``size_penalty`` per extra match. Unseen terms fall back to tf=1 and
    df=N so hand-written matches still score deterministically.
    """
    n = max(index.n_columns, 1)
    total = 0.0
    # Summation order is pinned (canonical match order, sorted bindings) so
    # equal-scoring matches produce bit-identical floats across processes.
    for m in sorted(qm.matches, key=lambda m: m.canonical()):
        if m.type == SCHEMA:
            for _, kws in m.sorted_bindings():
                total += schema_weight * len(kws)
        else:
            for attr, kws in m.sorted_bindings():
                for k in kws:
                    tf = index.tf.get((k, m.relation, attr), 1)
                    df = index.df.get(k, n)
                    total += (1.0 + math.log(tf)) * math.log(1.0 + n / df)
    return total - size_penalty * (len(qm.matches) - 1)


def rank_qms_bayesian(query: list[str], qms: set[QueryMatch], index: ValueIndex,
                      size_penalty: float = DEFAULT_SIZE_PENALTY,
                      schema_weight: float = DEFAULT_SCHEMA_WEIGHT) -> list[ScoredQueryMatch]:
    """Descending by score; ties broken by canonical form for reproducibility."""
    scored = [ScoredQueryMatch(qm, bayesian_score(query, qm, index,
                                                  size_penalty, schema_weight))
              for qm in qms]
    return sorted(scored, key=lambda s: (-s.score, s.qm.canonical()))
