"""Keyword matching: cleanse the query, then find value and schema matches.

A KeywordMatch associates one relation with keyword sets bound to attributes
(value match, witnessed by at least one tuple) or to a schema element
(schema match on a relation or attribute name).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from .catalog import SchemaIndex, ValueIndex
from .tokens import Tokenizer

VALUE = "value"
SCHEMA = "schema"

Binding = tuple[str, frozenset[str]]  # (attribute-or-self, keywords)


@dataclass(frozen=True)
class KeywordMatch:
    relation: str
    type: str  # VALUE or SCHEMA
    bindings: frozenset[Binding]

    def __post_init__(self):
        if not self.bindings:
            raise ValueError("a keyword match needs at least one binding")
        if any(not kws for _, kws in self.bindings):
            raise ValueError("keyword sets must be non-empty")
        if self.type not in (VALUE, SCHEMA):
            raise ValueError(f"unknown match type {self.type!r}")
        if self.type == SCHEMA and len(self.bindings) != 1:
            raise ValueError("schema matches bind exactly one element")
        total = sum(len(kws) for _, kws in self.bindings)
        if total != len(self.keywords()):
            raise ValueError("keyword sets must be disjoint across attributes")

    @staticmethod
    def value(relation: str, bindings: dict[str, set[str] | frozenset[str]]) -> "KeywordMatch":
        return KeywordMatch(relation, VALUE, _freeze(bindings))

    @staticmethod
    def schema(relation: str, element: str, keywords: set[str] | frozenset[str]) -> "KeywordMatch":
        return KeywordMatch(relation, SCHEMA, _freeze({element: keywords}))

    def keywords(self) -> frozenset[str]:
        out: set[str] = set()
        for _, kws in self.bindings:
            out.update(kws)
        return frozenset(out)

    def sorted_bindings(self) -> list[tuple[str, list[str]]]:
        return [(attr, sorted(kws)) for attr, kws in sorted(self.bindings)]

    def canonical(self) -> str:
        parts = ";".join(f"{attr}={{{','.join(kws)}}}"
                         for attr, kws in self.sorted_bindings())
        return f"{self.type}:{self.relation}[{parts}]"

    def __str__(self) -> str:
        return self.canonical()


def _freeze(bindings: dict[str, set[str] | frozenset[str]]) -> frozenset[Binding]:
    return frozenset((attr, frozenset(kws)) for attr, kws in bindings.items())


_KM_RE = re.compile(r"^(value|schema):([A-Za-z0-9_]+)\[(.*)\]$")
_BINDING_RE = re.compile(r"([A-Za-z0-9_*]+|self)=\{([^}]*)\}")


def parse_keyword_match(text: str) -> KeywordMatch:
    """Parse the canonical form, e.g. ``value:person[name={smith,will}]``."""
    m = _KM_RE.match(text.strip())
    if not m:
        raise ValueError(f"cannot parse keyword match {text!r}")
    mtype, relation, body = m.groups()
    bindings: dict[str, set[str]] = {}
    consumed = 0
    for bm in _BINDING_RE.finditer(body):
        consumed += len(bm.group(0))
        kws = {k for k in bm.group(2).split(",") if k}
        if not kws:
            raise ValueError(f"empty keyword set in {text!r}")
        bindings[bm.group(1)] = kws
    if consumed != len(body.replace(";", "")):
        raise ValueError(f"cannot parse keyword match bindings in {text!r}")
    return KeywordMatch(relation, mtype, _freeze(bindings))


def tokenize_query(raw: str, tokenizer: Tokenizer | None = None) -> list[str]:
    """Cleanse a raw query: lowercase, punctuation-free, stopword-free tokens,
    original order preserved. An empty result is legal."""
    return (tokenizer or Tokenizer()).tokenize(raw)


def find_vkms(keywords: list[str], index: ValueIndex) -> set[KeywordMatch]:
    """All value-keyword matches witnessed by at least one tuple.

    For every relation, every non-empty assignment of a keyword subset to
    text attributes such that a single tuple contains each keyword in its
    assigned attribute is emitted. Single-attribute matches are therefore
    downward-closed: any tuple supporting a set supports its subsets.
    """
    unique_kws = list(dict.fromkeys(keywords))
    # (relation, attribute, keyword) -> supporting tuple ids, via the index only.
    support: dict[str, dict[str, dict[str, set[str]]]] = {}
    for kw in unique_kws:
        for (rel, attr), tuple_ids in index.columns_for(kw).items():
            support.setdefault(rel, {}).setdefault(kw, {})[attr] = tuple_ids

    out: set[KeywordMatch] = set()
    for rel, kw_attrs in support.items():
        candidates: set[str] = set()
        for attrs in kw_attrs.values():
            for ids in attrs.values():
                candidates.update(ids)
        for tid in candidates:
            # Attributes of this tuple containing each keyword.
            options: list[list[Binding | None]] = []
            kws_here: list[str] = []
            for kw in unique_kws:
                attrs = [a for a, ids in kw_attrs.get(kw, {}).items() if tid in ids]
                if attrs:
                    kws_here.append(kw)
                    options.append([None] + [(a, kw) for a in sorted(attrs)])  # type: ignore[list-item]
            if not kws_here:
                continue
            for choice in itertools.product(*options):
                bindings: dict[str, set[str]] = {}
                for item in choice:
                    if item is None:
                        continue
                    attr, kw = item  # type: ignore[misc]
                    bindings.setdefault(attr, set()).add(kw)
                if bindings:
                    out.add(KeywordMatch.value(rel, bindings))
    return out


def find_skms(keywords: list[str], index: SchemaIndex) -> set[KeywordMatch]:
    """One schema match per (keyword, schema element) hit."""
    out: set[KeywordMatch] = set()
    for kw in dict.fromkeys(keywords):
        for rel, element in index.lookup(kw):
            out.add(KeywordMatch.schema(rel, element, {kw}))
    return out


def tuple_witnesses(row: dict[str, str], match: KeywordMatch,
                    tokenizer: Tokenizer) -> bool:
    """Whether one tuple contains every bound keyword in its bound attribute.

    Containment is case-insensitive and token-granular, matching how the
    value index was built. Schema matches impose no tuple predicate.
    """
    if match.type == SCHEMA:
        return True
    for attr, kws in match.bindings:
        tokens = set(tokenizer.tokenize(row.get(attr, "")))
        if not kws <= tokens:
            return False
    return True
