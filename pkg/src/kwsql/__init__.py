"""Keyword search over relational databases.

Free-form keyword queries are matched against attribute values and schema
element names, combined into total minimal covers (query matches), connected
into joining networks over the foreign-key graph, translated to SQL,
eagerly probed for non-emptiness, and ranked either by a frequency baseline
or by embedding similarity over linearized sentences.
"""

from .catalog import (Catalog, CatalogError, FkEdge, Relation, SchemaIndex,
                      ValueIndex, build_schema_index, build_value_index,
                      load_catalog, load_lexicon)
from .cjn import CJN, CjnInvariantError, generate_cjns, parse_cjn, validate_cjn
from .embed import EmbedderConfig, encode, encode_batch, similarity
from .executor import View, execute, probe
from .linearize import (multivalue_sentence, qm_sentence, query_sentence,
                        row_sentence, snapshot)
from .matcher import (KeywordMatch, find_skms, find_vkms, parse_keyword_match,
                      tokenize_query)
from .qmatch import (QueryMatch, ScoredQueryMatch, bayesian_score, enumerate_qms,
                     parse_query_match, rank_qms_bayesian)
from .rank import (RankedList, SearchResult, SetupTriple, neural_cjn_rank,
                   neural_qm_rank, search, simple_cjn_rank)
from .sqlgen import cjn_to_sql
from .tokens import Tokenizer

__version__ = "0.1.0"
