"""Sentence serialization of queries, query matches, and view rows.

These formats are the contract between the search engine and the embedding
models; they are frozen by golden-string tests. Query-match sentences carry
the match type ("person.name.value: will smith"), result-row sentences do
not ("person.name: Smith, Will"), and schema matches render without a cell
value because the matched keyword names the element, not a value.
"""

from __future__ import annotations

from .cjn import CJN
from .executor import View, projected_columns
from .matcher import SCHEMA, KeywordMatch
from .qmatch import QueryMatch

DEFAULT_SNAPSHOT_ROWS = 3

QUERY_PREFIX = "query: "
ANSWER_PREFIX = "answer: "
FRAGMENT_JOINER = " | "
MULTIVALUE_JOINER = ", "


def _clean_cell(value: str) -> str:
    """Cell values may not contain newlines or the fragment separator."""
    value = value.replace("\r", " ").replace("\n", " ")
    return value.replace(FRAGMENT_JOINER, " / ")


def query_sentence(raw: str) -> str:
    """Exactly the query prefix plus the raw query text, untouched."""
    return QUERY_PREFIX + raw.replace("\r", " ").replace("\n", " ")


def qm_sentence(qm: QueryMatch) -> str:
    """One ``relation.attribute.type: keywords`` fragment per binding, in the
    query match's deterministic order, joined by pipes."""
    fragments: list[str] = []
    for match in qm.ordered_matches():
        for attr, kws in match.sorted_bindings():
            ordered = qm.ordered_keywords(frozenset(kws))
            fragments.append(f"{match.relation}.{attr}.{match.type}: {' '.join(ordered)}")
    return ANSWER_PREFIX + FRAGMENT_JOINER.join(fragments)


def _schema_fragment(node_relation: str, match: KeywordMatch) -> str:
    (element, kws), = match.sorted_bindings()
    name = node_relation if element == "self" else f"{node_relation}.{element}"
    return f"{name}: {' '.join(sorted(kws))}"


def _fragments_per_row(cjn: CJN, cells_for) -> list[str]:
    """Shared fragment walk: ``cells_for(column index)`` renders the payload
    of one value column."""
    columns = projected_columns(cjn)
    fragments: list[str] = []
    for pos, node in enumerate(cjn.ordered_nodes()):
        if node.match is None:
            continue
        if node.match.type == SCHEMA:
            fragments.append(_schema_fragment(node.relation, node.match))
        else:
            for attr, _ in node.match.sorted_bindings():
                col = columns.index((pos, attr))
                fragments.append(f"{node.relation}.{attr}: {cells_for(col)}")
    return fragments


def row_sentence(row: tuple[str, ...], cjn: CJN) -> str:
    """Linearize one view row: fragments follow the network's canonical node
    order; value matches render the cell value, schema matches render their
    keywords. The row must come from the network's projected columns."""
    fragments = _fragments_per_row(cjn, lambda col: _clean_cell(row[col]))
    return ANSWER_PREFIX + FRAGMENT_JOINER.join(fragments)


def multivalue_sentence(snapshot_view: View, cjn: CJN) -> str:
    """Combination form: per column, the cell values of every snapshot row
    concatenated in row order; schema fragments render once."""
    if not snapshot_view.rows:
        raise ValueError("cannot linearize an empty snapshot")

    def cells(col: int) -> str:
        return MULTIVALUE_JOINER.join(_clean_cell(row[col])
                                      for row in snapshot_view.rows)

    return ANSWER_PREFIX + FRAGMENT_JOINER.join(_fragments_per_row(cjn, cells))


def snapshot(view: View, n: int = DEFAULT_SNAPSHOT_ROWS) -> View:
    """The first min(n, |view|) rows in the executor's stable order."""
    if n < 1:
        raise ValueError("snapshot size must be >= 1")
    return View(view.columns, view.rows[:n])
