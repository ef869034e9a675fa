"""SQL rendering for candidate joining networks.

All template fragments live here so the emitted text is byte-stable and
testable. Containment predicates are rendered as case-insensitive LIKE,
which external engines evaluate as substring containment; the built-in
executor applies the stricter token-granular semantics of the value index.
"""

from __future__ import annotations

from .cjn import CJN
from .executor import projected_columns
from .matcher import SCHEMA

SELECT_TEMPLATE = "SELECT {columns}"
FROM_TEMPLATE = "FROM {root} {root_alias}"
JOIN_TEMPLATE = "JOIN {relation} {alias} ON {left} = {right}"
PREDICATE_TEMPLATE = "LOWER({alias}.{attribute}) LIKE '%{keyword}%'"
INEQUALITY_TEMPLATE = "{alias_a}.{pk_a} <> {alias_b}.{pk_b}"
WHERE_PREFIX = "WHERE "
WHERE_JOINER = "\n  AND "


def _alias(pos: int) -> str:
    return f"t{pos + 1}"


def cjn_to_sql(cjn: CJN) -> str:
    """Translate a network into one SQL query: projected columns, a join
    chain following the tree edges, one containment predicate per
    (attribute, keyword), and a pk inequality for every pair of distinct
    nodes sharing a relation."""
    order = cjn.dfs_order()
    pos_of = {idx: pos for pos, idx in enumerate(order)}

    columns = ", ".join(f"{_alias(pos)}.{attr}"
                        for pos, attr in projected_columns(cjn))

    joins: list[str] = []
    for idx in order[1:]:
        edge = cjn.parent_edge_of(idx)
        assert edge is not None
        child_alias = _alias(pos_of[idx])
        parent_alias = _alias(pos_of[edge.parent])
        if edge.child_references_parent:
            left = f"{child_alias}.{edge.fk.fk_attribute}"
            right = f"{parent_alias}.{edge.fk.pk_attribute}"
        else:
            left = f"{child_alias}.{edge.fk.pk_attribute}"
            right = f"{parent_alias}.{edge.fk.fk_attribute}"
        joins.append(JOIN_TEMPLATE.format(relation=cjn.nodes[idx].relation,
                                          alias=child_alias, left=left, right=right))

    predicates: list[str] = []
    for pos, idx in enumerate(order):
        match = cjn.nodes[idx].match
        if match is None or match.type == SCHEMA:
            continue
        for attr, kws in match.sorted_bindings():
            for kw in kws:
                predicates.append(PREDICATE_TEMPLATE.format(
                    alias=_alias(pos), attribute=attr, keyword=kw))

    by_relation: dict[str, list[int]] = {}
    for pos, idx in enumerate(order):
        by_relation.setdefault(cjn.nodes[idx].relation, []).append(pos)
    for positions in by_relation.values():
        for i, pos_a in enumerate(positions):
            for pos_b in positions[i + 1:]:
                pk = cjn.nodes[order[pos_a]].pk_attribute
                predicates.append(INEQUALITY_TEMPLATE.format(
                    alias_a=_alias(pos_a), pk_a=pk,
                    alias_b=_alias(pos_b), pk_b=pk))

    parts = [SELECT_TEMPLATE.format(columns=columns),
             FROM_TEMPLATE.format(root=cjn.nodes[order[0]].relation,
                                  root_alias=_alias(0))]
    parts.extend(joins)
    if predicates:
        parts.append(WHERE_PREFIX + WHERE_JOINER.join(predicates))
    return "\n".join(parts) + ";"
