"""Query and value cleansing shared by the indexer, the matcher and the executor.

Index terms and query keywords must agree, so a single Tokenizer is used for
both: lowercase, punctuation replaced by whitespace, stopwords dropped.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a one-word-per-line stopword file (blank lines ignored)."""
    words = Path(path).read_text(encoding="utf-8").split()
    return frozenset(w.lower() for w in words)


def default_stopwords() -> frozenset[str]:
    """The stopword list shipped with the package."""
    text = resources.files("kwsql").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(text.split())


class Tokenizer:
    """Cleansing pipeline: lowercase, strip punctuation, drop stopwords.

    Token order is preserved and duplicates are kept; callers that need a
    keyword set build it themselves.
    """

    def __init__(self, stopwords: frozenset[str] | None = None):
        self.stopwords = default_stopwords() if stopwords is None else stopwords

    def tokenize(self, text: str) -> list[str]:
        return [t.lower() for t in _TOKEN_RE.findall(text)
                if t.lower() not in self.stopwords]

    def tokenize_cased(self, text: str) -> list[str]:
        """Like tokenize() but keeps the original capitalization of each token."""
        return [t for t in _TOKEN_RE.findall(text)
                if t.lower() not in self.stopwords]

    def token_set(self, text: str) -> frozenset[str]:
        return frozenset(self.tokenize(text))
