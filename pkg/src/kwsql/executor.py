"""Built-in evaluator for the restricted algebra the generator emits:
scan + token-containment predicate, hash equi-join on declared foreign keys,
primary-key inequality between nodes sharing a relation, projection, limit.

Predicates use the same case-insensitive token containment as the value
index, so every network generated from witnessed matches evaluates exactly
the semantics it was matched under.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .catalog import Catalog
from .cjn import CJN
from .matcher import SCHEMA, tuple_witnesses


@dataclass(frozen=True)
class View:
    """Result of running a network: columns labeled by (position of the node
    in the network's canonical order, attribute)."""

    columns: tuple[tuple[int, str], ...]
    rows: tuple[tuple[str, ...], ...]

    def __len__(self) -> int:
        return len(self.rows)

    def column_index(self, node_pos: int, attribute: str) -> int:
        return self.columns.index((node_pos, attribute))


def projected_columns(cjn: CJN) -> list[tuple[int, str]]:
    """Projection: schema-matched nodes contribute their display attribute
    (plus the named attribute for schema matches on an attribute), then
    value-matched nodes contribute their matched attributes plus the display
    attribute; node groups follow canonical order."""
    order = cjn.dfs_order()
    schema_cols: list[tuple[int, str]] = []
    value_cols: list[tuple[int, str]] = []
    for pos, idx in enumerate(order):
        node = cjn.nodes[idx]
        if node.match is None:
            continue
        if node.match.type == SCHEMA:
            attrs = [attr for attr, _ in node.match.sorted_bindings() if attr != "self"]
            if node.display_attribute not in attrs:
                attrs.insert(0, node.display_attribute)
            schema_cols.extend((pos, a) for a in attrs)
        else:
            attrs = [attr for attr, _ in node.match.sorted_bindings()]
            if node.display_attribute not in attrs:
                attrs.append(node.display_attribute)
            value_cols.extend((pos, a) for a in attrs)
    return schema_cols + value_cols


def _pk_sort_key(value: str) -> tuple[int, object]:
    return (0, int(value)) if value.isdigit() else (1, value)


def _candidates(cjn: CJN, catalog: Catalog, apply_predicates: bool) -> list[list[dict[str, str]]]:
    out: list[list[dict[str, str]]] = []
    for node in cjn.nodes:
        rows = catalog.relation(node.relation).rows
        if apply_predicates and node.match is not None and node.match.type != SCHEMA:
            rows = [r for r in rows
                    if tuple_witnesses(r, node.match, catalog.tokenizer)]
        out.append(list(rows))
    return out


def _iter_bindings(cjn: CJN, catalog: Catalog,
                   apply_predicates: bool = True) -> Iterator[dict[int, dict[str, str]]]:
    """Enumerate node -> row assignments satisfying all joins, predicates and
    same-relation pk inequalities. Joins probe per-node hash maps built on the
    join attribute; empty join keys never join."""
    order = cjn.dfs_order()
    candidates = _candidates(cjn, catalog, apply_predicates)
    if any(not candidates[idx] for idx in order):
        return

    # For each non-root node: (parent index, own key attribute, parent key attribute)
    join_spec: dict[int, tuple[int, str, str]] = {}
    for idx in order[1:]:
        edge = cjn.parent_edge_of(idx)
        assert edge is not None
        if edge.child_references_parent:
            join_spec[idx] = (edge.parent, edge.fk.fk_attribute, edge.fk.pk_attribute)
        else:
            join_spec[idx] = (edge.parent, edge.fk.pk_attribute, edge.fk.fk_attribute)

    hashed: dict[int, dict[str, list[dict[str, str]]]] = {}
    for idx in order[1:]:
        _, own_attr, _ = join_spec[idx]
        groups: dict[str, list[dict[str, str]]] = {}
        for row in candidates[idx]:
            key = row[own_attr]
            if key:
                groups.setdefault(key, []).append(row)
        hashed[idx] = groups

    same_relation: dict[int, list[int]] = {}
    for i, node in enumerate(cjn.nodes):
        same_relation[i] = [j for j in range(len(cjn.nodes))
                            if j != i and cjn.nodes[j].relation == node.relation]

    binding: dict[int, dict[str, str]] = {}

    def assign(depth: int) -> Iterator[dict[int, dict[str, str]]]:
        if depth == len(order):
            yield dict(binding)
            return
        idx = order[depth]
        if depth == 0:
            pool = candidates[idx]
        else:
            parent, _, parent_attr = join_spec[idx]
            parent_key = binding[parent][parent_attr]
            pool = hashed[idx].get(parent_key, []) if parent_key else []
        pk_attr = cjn.nodes[idx].pk_attribute
        for row in pool:
            clash = False
            for other in same_relation[idx]:
                other_row = binding.get(other)
                if other_row is not None and other_row[pk_attr] == row[pk_attr]:
                    clash = True
                    break
            if clash:
                continue
            binding[idx] = row
            yield from assign(depth + 1)
            del binding[idx]

    yield from assign(0)


def execute(cjn: CJN, catalog: Catalog, limit: int | None = None,
            apply_predicates: bool = True) -> View:
    """Run a network against the catalog.

    Rows are ordered by the primary keys of the bound tuples in canonical
    node order, and bindings that use the same tuples per relation in swapped
    roles are collapsed to one representative row.
    """
    order = cjn.dfs_order()
    columns = tuple(projected_columns(cjn))
    assembled: list[tuple[tuple, tuple, tuple[str, ...]]] = []
    for binding in _iter_bindings(cjn, catalog, apply_predicates):
        sort_key = tuple(_pk_sort_key(binding[idx][cjn.nodes[idx].pk_attribute])
                         for idx in order)
        dedup_key = tuple(sorted(
            (cjn.nodes[idx].relation, binding[idx][cjn.nodes[idx].pk_attribute])
            for idx in order))
        values = tuple(binding[order[pos]][attr] for pos, attr in columns)
        assembled.append((sort_key, dedup_key, values))

    assembled.sort(key=lambda item: item[0])
    seen: set[tuple] = set()
    rows: list[tuple[str, ...]] = []
    for _, dedup_key, values in assembled:
        if dedup_key in seen:
            continue
        seen.add(dedup_key)
        rows.append(values)
        if limit is not None and len(rows) >= limit:
            break
    return View(columns, tuple(rows))


def probe(cjn: CJN, catalog: Catalog) -> bool:
    """True iff the network yields at least one row; short-circuits on the
    first satisfying assignment."""
    return next(_iter_bindings(cjn, catalog), None) is not None
