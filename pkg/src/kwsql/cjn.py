"""Candidate joining networks: connected trees of relation nodes over the
foreign-key graph that place every keyword match of a query match.

A node is either matched (carries exactly one KeywordMatch) or free join
glue; free nodes may never be leaves. Each edge is justified by a declared
foreign key, and a node may use each of its own foreign keys for at most one
edge (two joins through the same fk of one row can never both hold under the
primary-key inequality emitted for same-relation node pairs).
"""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import Catalog, FkEdge
from .matcher import KeywordMatch, parse_keyword_match
from .qmatch import QueryMatch

DEFAULT_MAX_CJN_SIZE = 5

FREE_PREFIX = "free:"


@dataclass(frozen=True)
class CjnNode:
    relation: str
    match: KeywordMatch | None
    pk_attribute: str
    display_attribute: str

    @property
    def is_free(self) -> bool:
        return self.match is None

    def label(self) -> str:
        return FREE_PREFIX + self.relation if self.match is None else self.match.canonical()


@dataclass(frozen=True)
class CjnEdge:
    """parent/child are node indexes; child_references_parent tells which side
    holds the foreign key: True means child.fk_attribute = parent.pk."""

    parent: int
    child: int
    fk: FkEdge
    child_references_parent: bool


class CJN:
    """An immutable rooted tree; node identity is positional."""

    def __init__(self, nodes: tuple[CjnNode, ...], edges: tuple[CjnEdge, ...],
                 root: int = 0):
        self.nodes = nodes
        self.edges = edges
        self.root = root
        self._children: dict[int, list[CjnEdge]] = {i: [] for i in range(len(nodes))}
        for e in edges:
            self._children[e.parent].append(e)
        self._render_cache: dict[int, str] = {}
        self._canonical: str | None = None
        self._dfs: list[int] | None = None

    def __len__(self) -> int:
        return len(self.nodes)

    def children_of(self, idx: int) -> list[CjnEdge]:
        return self._children[idx]

    def matches(self) -> set[KeywordMatch]:
        return {n.match for n in self.nodes if n.match is not None}

    def _edge_token(self, edge: CjnEdge) -> str:
        mark = "<" if edge.child_references_parent else ">"
        return f"{mark}{edge.fk.fk_attribute}:"

    def _render(self, idx: int) -> str:
        cached = self._render_cache.get(idx)
        if cached is not None:
            return cached
        parts = sorted(self._edge_token(e) + self._render(e.child)
                       for e in self._children[idx])
        text = self.nodes[idx].label()
        if parts:
            text += "(" + ",".join(parts) + ")"
        self._render_cache[idx] = text
        return text

    def canonical_form(self) -> str:
        """Deterministic serialization; isomorphic trees (same structure up to
        sibling order) yield identical text."""
        if self._canonical is None:
            self._canonical = self._render(self.root)
        return self._canonical

    def dfs_order(self) -> list[int]:
        """Depth-first node order from the root with siblings in canonical
        order. This order defines the t1..tn aliases used by the SQL
        translation and the fragment order of row sentences."""
        if self._dfs is None:
            order: list[int] = []

            def walk(idx: int) -> None:
                order.append(idx)
                for e in sorted(self._children[idx],
                                key=lambda e: self._edge_token(e) + self._render(e.child)):
                    walk(e.child)

            walk(self.root)
            self._dfs = order
        return self._dfs

    def ordered_nodes(self) -> list[CjnNode]:
        return [self.nodes[i] for i in self.dfs_order()]

    def parent_edge_of(self, idx: int) -> CjnEdge | None:
        for e in self.edges:
            if e.child == idx:
                return e
        return None

    def free_leaves(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes)
                if n.is_free and not self._children[i] and i != self.root]

    def fk_usage_ok(self, extra_user: int | None = None, extra_fk: FkEdge | None = None) -> bool:
        """No node may be the referencing side of the same fk twice."""
        used: set[tuple[int, str, str]] = set()
        pairs = [( (e.child if e.child_references_parent else e.parent), e.fk) for e in self.edges]
        if extra_user is not None and extra_fk is not None:
            pairs.append((extra_user, extra_fk))
        for node_idx, fk in pairs:
            key = (node_idx, fk.from_relation, fk.fk_attribute)
            if key in used:
                return False
            used.add(key)
        return True

    def __eq__(self, other) -> bool:
        return isinstance(other, CJN) and self.canonical_form() == other.canonical_form()

    def __hash__(self) -> int:
        return hash(self.canonical_form())

    def __repr__(self) -> str:
        return f"CJN({self.canonical_form()})"


class CjnInvariantError(ValueError):
    pass


def validate_cjn(cjn: CJN, qm: QueryMatch | None = None,
                 catalog: Catalog | None = None,
                 max_cjn_size: int | None = None) -> None:
    """Structural invariants: connected tree, matches placed exactly once,
    free nodes internal, fk-justified edges, bounded size."""
    n = len(cjn.nodes)
    if n == 0:
        raise CjnInvariantError("empty network")
    if len(cjn.edges) != n - 1:
        raise CjnInvariantError("node/edge count does not form a tree")
    seen: set[int] = set()
    stack = [cjn.root]
    while stack:
        idx = stack.pop()
        if idx in seen:
            raise CjnInvariantError("cycle detected")
        seen.add(idx)
        stack.extend(e.child for e in cjn.children_of(idx))
    if seen != set(range(n)):
        raise CjnInvariantError("network is not connected from the root")

    placed = [node.match for node in cjn.nodes if node.match is not None]
    if len(placed) != len(set(placed)):
        raise CjnInvariantError("a keyword match appears at more than one node")
    if qm is not None and set(placed) != set(qm.matches):
        raise CjnInvariantError("network does not place exactly the query match's matches")
    if cjn.free_leaves() or (cjn.nodes[cjn.root].is_free and not cjn.children_of(cjn.root)):
        raise CjnInvariantError("free nodes may not be leaves")
    if max_cjn_size is not None and n > max_cjn_size:
        raise CjnInvariantError(f"network exceeds the size bound {max_cjn_size}")
    if not cjn.fk_usage_ok():
        raise CjnInvariantError("a node uses the same foreign key for two edges")

    for e in cjn.edges:
        parent, child = cjn.nodes[e.parent], cjn.nodes[e.child]
        ref, target = (child, parent) if e.child_references_parent else (parent, child)
        if e.fk.from_relation != ref.relation or e.fk.to_relation != target.relation:
            raise CjnInvariantError(
                f"edge {e.fk} does not justify a join between "
                f"{parent.relation!r} and {child.relation!r}")
        if catalog is not None and e.fk not in catalog.fk_edges:
            raise CjnInvariantError(f"edge {e.fk} is not a declared foreign key")


def _make_node(relation: str, match: KeywordMatch | None, catalog: Catalog) -> CjnNode:
    rel = catalog.relation(relation)
    return CjnNode(relation, match, rel.primary_key, rel.display_attribute)


def _expansions(catalog: Catalog, relation: str) -> list[tuple[FkEdge, str, bool]]:
    """(fk, adjacent relation, child_references_parent) options for growing
    from a node of the given relation."""
    out: list[tuple[FkEdge, str, bool]] = []
    for fk in catalog.fk_edges:
        if fk.from_relation == relation:
            # this node would reference the new child
            out.append((fk, fk.to_relation, False))
        if fk.to_relation == relation:
            # the new child references this node
            out.append((fk, fk.from_relation, True))
    return out


def generate_cjns(qm: QueryMatch, catalog: Catalog,
                  max_cjn_size: int = DEFAULT_MAX_CJN_SIZE,
                  max_generated: int | None = None) -> list[CJN]:
    """Breadth-first generation of all candidate joining networks for a query
    match, in deterministic order: size ascending, then canonical form.

    Seeds a single-node tree at the match with the earliest query keyword and
    grows by fk-adjacent nodes, either placing an unplaced match or adding
    free glue. States are de-duplicated by canonical form, so each network is
    emitted once. Stops after ``max_generated`` emissions (None = exhaust).
    """
    if max_generated is not None and max_generated < 1:
        raise ValueError("max_generated must be >= 1")
    matches = qm.ordered_matches()
    for m in matches:
        catalog.relation(m.relation)  # fail fast on unknown relations

    root = _make_node(matches[0].relation, matches[0], catalog)
    seed = CJN((root,), ())
    frontier: dict[str, tuple[CJN, frozenset[KeywordMatch]]] = {
        seed.canonical_form(): (seed, frozenset(matches[1:]))}

    emitted: list[CJN] = []
    emitted_keys: set[str] = set()

    while frontier:
        accepted = sorted(
            (state for state, unplaced in frontier.values()
             if not unplaced and not state.free_leaves()),
            key=lambda c: c.canonical_form())
        for state in accepted:
            key = state.canonical_form()
            if key not in emitted_keys:
                emitted_keys.add(key)
                emitted.append(state)
                if max_generated is not None and len(emitted) >= max_generated:
                    return emitted

        next_frontier: dict[str, tuple[CJN, frozenset[KeywordMatch]]] = {}
        for state, unplaced in frontier.values():
            if not unplaced:
                continue  # complete states cannot grow into new valid networks
            if len(state) >= max_cjn_size:
                continue
            for u in range(len(state)):
                for fk, adj_rel, child_refs_parent in _expansions(catalog, state.nodes[u].relation):
                    attachments: list[KeywordMatch | None] = [
                        m for m in unplaced if m.relation == adj_rel]
                    attachments.append(None)  # free node
                    for m in attachments:
                        new_nodes = state.nodes + (_make_node(adj_rel, m, catalog),)
                        new_edge = CjnEdge(u, len(state.nodes), fk, child_refs_parent)
                        candidate = CJN(new_nodes, state.edges + (new_edge,))
                        if not candidate.fk_usage_ok():
                            continue
                        new_unplaced = unplaced - {m} if m is not None else unplaced
                        if len(candidate) + len(new_unplaced) > max_cjn_size:
                            continue
                        if len(candidate.free_leaves()) > len(new_unplaced):
                            continue
                        next_frontier.setdefault(candidate.canonical_form(),
                                                 (candidate, new_unplaced))
        frontier = next_frontier

    return emitted


def single_node_cjn(match: KeywordMatch, catalog: Catalog) -> CJN:
    return CJN((_make_node(match.relation, match, catalog),), ())


# --- canonical-form parsing (gold files, template round-trips) ---------------

def parse_cjn(text: str, catalog: Catalog) -> CJN:
    """Parse canonical form back into a network, resolving fk edges against
    the catalog."""
    pos = 0

    def parse_label() -> str:
        nonlocal pos
        depth = 0
        start = pos
        while pos < len(text):
            c = text[pos]
            if c == "[":
                depth += 1
            elif c == "]":
                depth -= 1
            elif depth == 0 and c in "(),":
                break
            pos += 1
        return text[start:pos]

    nodes: list[CjnNode] = []
    edges: list[CjnEdge] = []

    def make_node(label: str) -> int:
        if label.startswith(FREE_PREFIX):
            node = _make_node(label[len(FREE_PREFIX):], None, catalog)
        else:
            km = parse_keyword_match(label)
            node = _make_node(km.relation, km, catalog)
        nodes.append(node)
        return len(nodes) - 1

    def parse_tree() -> int:
        nonlocal pos
        idx = make_node(parse_label())
        if pos < len(text) and text[pos] == "(":
            pos += 1
            while True:
                mark = text[pos]
                if mark not in "<>":
                    raise ValueError(f"expected edge direction at {pos} in {text!r}")
                pos += 1
                colon = text.index(":", pos)
                fk_attr = text[pos:colon]
                pos = colon + 1
                child = parse_tree()
                child_refs_parent = mark == "<"
                ref_rel = nodes[child].relation if child_refs_parent else nodes[idx].relation
                target_rel = nodes[idx].relation if child_refs_parent else nodes[child].relation
                fk = next((f for f in catalog.fk_edges
                           if f.from_relation == ref_rel and f.fk_attribute == fk_attr
                           and f.to_relation == target_rel), None)
                if fk is None:
                    raise ValueError(
                        f"no declared foreign key {ref_rel}.{fk_attr} -> {target_rel}")
                edges.append(CjnEdge(idx, child, fk, child_refs_parent))
                if text[pos] == ",":
                    pos += 1
                    continue
                if text[pos] == ")":
                    pos += 1
                    break
                raise ValueError(f"unexpected character at {pos} in {text!r}")
        return idx

    root = parse_tree()
    if pos != len(text):
        raise ValueError(f"trailing characters after network in {text!r}")
    cjn = CJN(tuple(nodes), tuple(edges), root)
    validate_cjn(cjn)
    return cjn
