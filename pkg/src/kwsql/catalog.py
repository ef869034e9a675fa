"""Relational data loading, the schema graph, and the value/schema indexes.

The Catalog is built once from CSV tables plus a JSON schema description and
is immutable afterwards; every downstream stage (matching, joining network
generation, execution) reads from it concurrently without locking.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .tokens import Tokenizer

logger = logging.getLogger(__name__)

ATTRIBUTE_KINDS = ("id", "text", "numeric")

# Marker for schema elements that denote the relation itself rather than
# one of its attributes.
SELF_ELEMENT = "self"


class CatalogError(ValueError):
    """Raised for schema violations found while loading a dataset."""


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: str  # one of ATTRIBUTE_KINDS


@dataclass(frozen=True)
class FkEdge:
    """A declared referential constraint: from_relation.fk_attribute -> to_relation.pk_attribute."""

    from_relation: str
    fk_attribute: str
    to_relation: str
    pk_attribute: str


@dataclass
class Relation:
    name: str
    attributes: list[Attribute]
    primary_key: str
    display_attribute: str
    rows: list[dict[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self._by_pk: dict[str, dict[str, str]] = {}

    @property
    def attribute_names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def attribute_kind(self, name: str) -> str:
        for a in self.attributes:
            if a.name == name:
                return a.kind
        raise KeyError(f"{self.name} has no attribute {name!r}")

    def text_attributes(self) -> list[str]:
        return [a.name for a in self.attributes if a.kind == "text"]

    def add_row(self, row: dict[str, str]) -> None:
        pk = row[self.primary_key]
        if pk in self._by_pk:
            raise CatalogError(
                f"duplicate primary key {pk!r} in relation {self.name!r}")
        self._by_pk[pk] = row
        self.rows.append(row)

    def row_by_pk(self, pk: str) -> dict[str, str] | None:
        return self._by_pk.get(pk)


@dataclass
class Catalog:
    relations: dict[str, Relation]
    fk_edges: list[FkEdge]
    tokenizer: Tokenizer

    def relation(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise CatalogError(f"unknown relation {name!r}") from None

    def adjacent_fk_edges(self, relation: str) -> list[FkEdge]:
        """All fk edges touching a relation, in declaration order."""
        return [e for e in self.fk_edges
                if e.from_relation == relation or e.to_relation == relation]

    def fk_between(self, rel_a: str, rel_b: str) -> list[FkEdge]:
        return [e for e in self.fk_edges
                if {e.from_relation, e.to_relation} == {rel_a, rel_b}
                or (e.from_relation == rel_a == rel_b == e.to_relation)]


def _parse_schema(schema_path: Path) -> tuple[list[Relation], list[FkEdge]]:
    spec = json.loads(schema_path.read_text(encoding="utf-8"))
    relations: list[Relation] = []
    seen: set[str] = set()
    for rspec in spec["relations"]:
        name = rspec["name"]
        if name in seen:
            raise CatalogError(f"relation {name!r} declared twice")
        seen.add(name)
        attrs = [Attribute(a["name"], a["kind"]) for a in rspec["attributes"]]
        for a in attrs:
            if a.kind not in ATTRIBUTE_KINDS:
                raise CatalogError(
                    f"relation {name!r}: attribute {a.name!r} has unknown kind {a.kind!r}")
        pk = rspec["primary_key"]
        if pk not in {a.name for a in attrs}:
            raise CatalogError(f"relation {name!r}: primary key {pk!r} not an attribute")
        text_attrs = [a.name for a in attrs if a.kind == "text"]
        display = rspec.get("display_attribute") or (text_attrs[0] if text_attrs else pk)
        if display not in {a.name for a in attrs}:
            raise CatalogError(
                f"relation {name!r}: display attribute {display!r} not an attribute")
        relations.append(Relation(name, attrs, pk, display))

    by_name = {r.name: r for r in relations}
    fk_edges: list[FkEdge] = []
    for fspec in spec.get("foreign_keys", []):
        from_rel, attr, to_rel = fspec["relation"], fspec["attribute"], fspec["references"]
        if from_rel not in by_name or to_rel not in by_name:
            raise CatalogError(
                f"foreign key {from_rel}.{attr}: unknown relation in {from_rel!r} -> {to_rel!r}")
        if attr not in {a.name for a in by_name[from_rel].attributes}:
            raise CatalogError(f"foreign key {from_rel}.{attr}: no such attribute")
        fk_edges.append(FkEdge(from_rel, attr, to_rel, by_name[to_rel].primary_key))
    return relations, fk_edges


def load_catalog(dataset_path: str | Path, schema_path: str | Path,
                 tokenizer: Tokenizer | None = None) -> Catalog:
    """Load CSV tables described by a JSON schema into an in-memory catalog.

    Each relation ``r`` is read from ``<dataset_path>/<r>.csv`` whose header
    must match the declared attributes exactly. Dangling foreign key values
    are an error, not a warning: the executor relies on fk joins resolving.
    """
    dataset_path = Path(dataset_path)
    relations, fk_edges = _parse_schema(Path(schema_path))

    for rel in relations:
        table_file = dataset_path / f"{rel.name}.csv"
        if not table_file.exists():
            raise CatalogError(f"missing table file {table_file}")
        with table_file.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != rel.attribute_names:
                raise CatalogError(
                    f"relation {rel.name!r}: header {header} does not match "
                    f"schema attributes {rel.attribute_names}")
            for lineno, values in enumerate(reader, start=2):
                if len(values) != len(header):
                    raise CatalogError(
                        f"relation {rel.name!r} line {lineno}: expected "
                        f"{len(header)} fields, got {len(values)}")
                rel.add_row(dict(zip(header, values)))

    catalog = Catalog({r.name: r for r in relations}, fk_edges,
                      tokenizer or Tokenizer())
    _check_fk_integrity(catalog)
    return catalog


def _check_fk_integrity(catalog: Catalog) -> None:
    for edge in catalog.fk_edges:
        source = catalog.relation(edge.from_relation)
        target = catalog.relation(edge.to_relation)
        for row in source.rows:
            value = row[edge.fk_attribute]
            if value and target.row_by_pk(value) is None:
                raise CatalogError(
                    f"dangling foreign key: relation {edge.from_relation!r} row "
                    f"{row[source.primary_key]!r} references "
                    f"{edge.to_relation}.{edge.pk_attribute} = {value!r}, which does not exist")


@dataclass
class ValueIndex:
    """Inverted index over the text attributes of a catalog.

    postings: term -> (relation, attribute) -> set of tuple ids (pk values)
    tf:       (term, relation, attribute)   -> total occurrence count
    df:       term -> number of (relation, attribute) columns containing it
    n_columns: number of text columns that were indexed
    """

    postings: dict[str, dict[tuple[str, str], set[str]]]
    tf: dict[tuple[str, str, str], int]
    df: dict[str, int]
    n_columns: int

    def columns_for(self, term: str) -> dict[tuple[str, str], set[str]]:
        return self.postings.get(term, {})


def build_value_index(catalog: Catalog) -> ValueIndex:
    """Index every term of every text attribute; id/numeric attributes are join
    material, not match material, and are skipped."""
    postings: dict[str, dict[tuple[str, str], set[str]]] = {}
    tf: dict[tuple[str, str, str], int] = {}
    n_columns = 0
    for rel in catalog.relations.values():
        text_attrs = rel.text_attributes()
        n_columns += len(text_attrs)
        for row in rel.rows:
            pk = row[rel.primary_key]
            for attr in text_attrs:
                for term in catalog.tokenizer.tokenize(row[attr]):
                    postings.setdefault(term, {}).setdefault((rel.name, attr), set()).add(pk)
                    tf[(term, rel.name, attr)] = tf.get((term, rel.name, attr), 0) + 1
    df = {term: len(cols) for term, cols in postings.items()}
    return ValueIndex(postings, tf, df, n_columns)


@dataclass
class SchemaIndex:
    """Maps surface terms to schema elements (relation, attribute-or-self)."""

    entries: dict[str, set[tuple[str, str]]]

    def lookup(self, term: str) -> set[tuple[str, str]]:
        return self.entries.get(term, set())


def build_schema_index(catalog: Catalog,
                       lexicon: dict[str, list[str]] | None = None) -> SchemaIndex:
    """Index relation names, attribute names, and lexicon synonyms.

    Lexicon values name schema elements either as ``relation`` (the relation
    itself) or ``relation.attribute``. Entries naming unknown elements are
    skipped with a warning.
    """
    entries: dict[str, set[tuple[str, str]]] = {}

    def add(term: str, relation: str, element: str) -> None:
        entries.setdefault(term.lower(), set()).add((relation, element))

    for rel in catalog.relations.values():
        add(rel.name, rel.name, SELF_ELEMENT)
        for attr in rel.attributes:
            add(attr.name, rel.name, attr.name)

    for term, elements in (lexicon or {}).items():
        for element in elements:
            rel_name, _, attr = element.partition(".")
            rel = catalog.relations.get(rel_name)
            if rel is None:
                logger.warning("lexicon entry %r -> %r names unknown relation; skipped",
                               term, element)
                continue
            if attr and attr not in rel.attribute_names:
                logger.warning("lexicon entry %r -> %r names unknown attribute; skipped",
                               term, element)
                continue
            add(term, rel_name, attr or SELF_ELEMENT)

    return SchemaIndex(entries)


def load_lexicon(path: str | Path) -> dict[str, list[str]]:
    """Read a JSON synonym lexicon: surface term -> list of schema element names."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return {str(k).lower(): [str(v) for v in vals] for k, vals in data.items()}
