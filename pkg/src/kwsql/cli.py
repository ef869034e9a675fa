"""Operator commands: index, search, augment, eval.

All randomness flows from the single config seed, and every command is
deterministic given (config, dataset, seed) with the hashing backend:
identical runs produce byte-identical outputs. Diagnostics go to stderr,
data to stdout; exit code 0 means no errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import augment as augment_mod
from .catalog import (Catalog, CatalogError, FkEdge, Relation, Attribute,
                      SchemaIndex, ValueIndex, build_schema_index,
                      build_value_index, load_catalog, load_lexicon)
from .cjn import DEFAULT_MAX_CJN_SIZE, parse_cjn
from .embed import EmbedderConfig
from .evaluation import QueryRun, evaluate, load_gold, render_reports
from .linearize import snapshot
from .qmatch import DEFAULT_MAX_QM_SIZE
from .rank import (BAYESIAN, NEURAL, NEURAL_MEAN, NEURAL_MULTIVALUE, SIMPLE,
                   SetupTriple, search)
from .tokens import Tokenizer, load_stopwords

ENV_CONFIG = "KWSQL_CONFIG"
FORMAT_VERSION = 1

QM_RANKERS = (BAYESIAN, NEURAL)
CJN_RANKERS = (SIMPLE, NEURAL_MEAN, NEURAL_MULTIVALUE)


class ConfigError(ValueError):
    pass


@dataclass
class EngineConfig:
    dataset_dir: Path
    schema_file: Path
    index_dir: Path
    lexicon_file: Path | None = None
    stopword_file: Path | None = None
    setup: SetupTriple = SetupTriple()
    max_qm_size: int = DEFAULT_MAX_QM_SIZE
    max_cjn_size: int = DEFAULT_MAX_CJN_SIZE
    qm_ranker: str = BAYESIAN
    cjn_ranker: str = SIMPLE
    agg_modes: tuple[str, ...] = ("mean", "multivalue")
    size_penalty: float = 1.0
    schema_weight: float = 2.0
    embedder: EmbedderConfig = EmbedderConfig()
    generation_ratio: int = augment_mod.DEFAULT_GENERATION_RATIO
    negatives_per_query: int = augment_mod.DEFAULT_NEGATIVES_PER_QUERY
    snapshot_rows: int = 3
    seed: int = 13


_TOP_KEYS = {"dataset_dir", "schema_file", "index_dir", "lexicon_file",
             "stopword_file", "setup", "max_qm_size", "max_cjn_size",
             "qm_ranker", "cjn_ranker", "agg_modes", "size_penalty",
             "schema_weight", "embedder", "generation_ratio",
             "negatives_per_query", "snapshot_rows", "seed"}
_SETUP_KEYS = {"n_qm", "n_cjn", "p_cjn"}
_EMBED_KEYS = {"backend", "model_id", "similarity", "dim", "hash_seed",
               "service_url", "batch_size", "timeout", "retries"}


def load_config(path: str | Path) -> EngineConfig:
    """Parse and validate the JSON engine config; relative paths resolve
    against the config file's directory; unknown keys are rejected."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc

    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for required in ("dataset_dir", "schema_file", "index_dir"):
        if required not in raw:
            raise ConfigError(f"config key {required!r} is required")

    base = path.parent

    def resolve(key: str) -> Path | None:
        value = raw.get(key)
        return None if value is None else (base / value)

    setup_raw = raw.get("setup", {})
    if set(setup_raw) - _SETUP_KEYS:
        raise ConfigError(f"unknown setup keys: {sorted(set(setup_raw) - _SETUP_KEYS)}")
    embed_raw = raw.get("embedder", {})
    if set(embed_raw) - _EMBED_KEYS:
        raise ConfigError(f"unknown embedder keys: {sorted(set(embed_raw) - _EMBED_KEYS)}")

    config = EngineConfig(
        dataset_dir=base / raw["dataset_dir"],
        schema_file=base / raw["schema_file"],
        index_dir=base / raw["index_dir"],
        lexicon_file=resolve("lexicon_file"),
        stopword_file=resolve("stopword_file"),
        setup=SetupTriple(**setup_raw),
        max_qm_size=int(raw.get("max_qm_size", DEFAULT_MAX_QM_SIZE)),
        max_cjn_size=int(raw.get("max_cjn_size", DEFAULT_MAX_CJN_SIZE)),
        qm_ranker=raw.get("qm_ranker", BAYESIAN),
        cjn_ranker=raw.get("cjn_ranker", SIMPLE),
        agg_modes=tuple(raw.get("agg_modes", ["mean", "multivalue"])),
        size_penalty=float(raw.get("size_penalty", 1.0)),
        schema_weight=float(raw.get("schema_weight", 2.0)),
        embedder=EmbedderConfig(**embed_raw),
        generation_ratio=int(raw.get("generation_ratio",
                                     augment_mod.DEFAULT_GENERATION_RATIO)),
        negatives_per_query=int(raw.get("negatives_per_query",
                                        augment_mod.DEFAULT_NEGATIVES_PER_QUERY)),
        snapshot_rows=int(raw.get("snapshot_rows", 3)),
        seed=int(raw.get("seed", 13)),
    )
    if config.qm_ranker not in QM_RANKERS:
        raise ConfigError(f"qm_ranker must be one of {QM_RANKERS}")
    if config.cjn_ranker not in CJN_RANKERS:
        raise ConfigError(f"cjn_ranker must be one of {CJN_RANKERS}")
    return config


# --- artifact serialization ---------------------------------------------------

def _dump(path: Path, payload: dict) -> None:
    payload = {"format_version": FORMAT_VERSION, **payload}
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")


def _load(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(
            f"index artifact {path} not found; run `kwsql index` first")
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("format_version") != FORMAT_VERSION:
        raise ConfigError(
            f"{path} has format version {payload.get('format_version')}, "
            f"expected {FORMAT_VERSION}; re-run `kwsql index`")
    return payload


def save_artifacts(config: EngineConfig, catalog: Catalog,
                   value_index: ValueIndex, schema_index: SchemaIndex) -> None:
    config.index_dir.mkdir(parents=True, exist_ok=True)
    _dump(config.index_dir / "catalog.json", {
        "stopwords": sorted(catalog.tokenizer.stopwords),
        "relations": [{
            "name": r.name,
            "attributes": [{"name": a.name, "kind": a.kind} for a in r.attributes],
            "primary_key": r.primary_key,
            "display_attribute": r.display_attribute,
            "rows": [[row[a.name] for a in r.attributes] for row in r.rows],
        } for r in catalog.relations.values()],
        "foreign_keys": [{"relation": e.from_relation, "attribute": e.fk_attribute,
                          "references": e.to_relation, "pk": e.pk_attribute}
                         for e in catalog.fk_edges],
    })
    _dump(config.index_dir / "value_index.json", {
        "n_columns": value_index.n_columns,
        "postings": {term: {f"{rel}{attr}": sorted(ids)
                            for (rel, attr), ids in cols.items()}
                     for term, cols in value_index.postings.items()},
        "tf": [[t, r, a, c] for (t, r, a), c in sorted(value_index.tf.items())],
        "df": dict(sorted(value_index.df.items())),
    })
    _dump(config.index_dir / "schema_index.json", {
        "entries": {term: sorted(map(list, elements))
                    for term, elements in schema_index.entries.items()},
    })


def load_artifacts(config: EngineConfig) -> tuple[Catalog, ValueIndex, SchemaIndex]:
    cat = _load(config.index_dir / "catalog.json")
    relations: dict[str, Relation] = {}
    for rspec in cat["relations"]:
        rel = Relation(rspec["name"],
                       [Attribute(a["name"], a["kind"]) for a in rspec["attributes"]],
                       rspec["primary_key"], rspec["display_attribute"])
        names = rel.attribute_names
        for values in rspec["rows"]:
            rel.add_row(dict(zip(names, values)))
        relations[rel.name] = rel
    fk_edges = [FkEdge(f["relation"], f["attribute"], f["references"], f["pk"])
                for f in cat["foreign_keys"]]
    catalog = Catalog(relations, fk_edges, Tokenizer(frozenset(cat["stopwords"])))

    vi = _load(config.index_dir / "value_index.json")
    postings = {term: {tuple(key.split("")): set(ids)
                       for key, ids in cols.items()}
                for term, cols in vi["postings"].items()}
    value_index = ValueIndex(postings,
                             {(t, r, a): c for t, r, a, c in vi["tf"]},
                             dict(vi["df"]), vi["n_columns"])

    si = _load(config.index_dir / "schema_index.json")
    schema_index = SchemaIndex({term: {tuple(e) for e in elements}
                                for term, elements in si["entries"].items()})
    return catalog, value_index, schema_index


def _tokenizer(config: EngineConfig) -> Tokenizer:
    if config.stopword_file is not None:
        return Tokenizer(load_stopwords(config.stopword_file))
    return Tokenizer()


# --- commands -----------------------------------------------------------------

def cmd_index(config: EngineConfig, out=None) -> int:
    out = out or sys.stdout
    catalog = load_catalog(config.dataset_dir, config.schema_file, _tokenizer(config))
    value_index = build_value_index(catalog)
    lexicon = load_lexicon(config.lexicon_file) if config.lexicon_file else {}
    schema_index = build_schema_index(catalog, lexicon)
    save_artifacts(config, catalog, value_index, schema_index)
    n_rows = sum(len(r.rows) for r in catalog.relations.values())
    print(f"indexed {len(catalog.relations)} relations, {len(catalog.fk_edges)} "
          f"fk edges, {n_rows} rows, {len(value_index.postings)} terms "
          f"-> {config.index_dir}", file=out)
    return 0


def _run_search(config: EngineConfig, query: str,
                artifacts: tuple[Catalog, ValueIndex, SchemaIndex]):
    catalog, value_index, schema_index = artifacts
    return search(query, catalog, value_index, schema_index,
                  setup=config.setup, qm_ranker=config.qm_ranker,
                  cjn_ranker=config.cjn_ranker, embedder=config.embedder,
                  max_qm_size=config.max_qm_size, max_cjn_size=config.max_cjn_size,
                  snapshot_rows=config.snapshot_rows,
                  size_penalty=config.size_penalty,
                  schema_weight=config.schema_weight)


def cmd_search(config: EngineConfig, query: str, explain: bool = False,
               top: int | None = None, out=None) -> int:
    out = out or sys.stdout
    result = _run_search(config, query, load_artifacts(config))
    diag = result.diagnostics
    if explain:
        print(f"keywords: {' '.join(diag.keywords) or '(none)'}", file=out)
        if diag.uncovered_keywords:
            print(f"uncovered keywords: {' '.join(diag.uncovered_keywords)}", file=out)
        print(f"keyword matches: {diag.vkm_count} value, {diag.skm_count} schema",
              file=out)
        print(f"query matches: {diag.qm_count} enumerated, {diag.kept_qms} kept",
              file=out)
        for i, (score, text) in enumerate(diag.ranked_qms, start=1):
            print(f"  qm {i}: score={score:.6f}  {text}", file=out)
        print(f"networks: {diag.generated_cjns} generated, {diag.probed_cjns} "
              f"probed, {diag.pruned_cjns} pruned, {diag.surviving_cjns} kept",
              file=out)
        for line in diag.skipped:
            print(f"  skipped {line}", file=out)
    if not result.hits:
        print("no results", file=out)
        return 0
    hits = result.hits if top is None else result.hits[:top]
    for i, hit in enumerate(hits, start=1):
        print(f"# {i}  score={hit.score:.6f}  {hit.cjn.canonical_form()}", file=out)
        print(hit.sql, file=out)
        shown = snapshot(hit.view, config.snapshot_rows)
        print(f"rows ({len(shown.rows)} of {len(hit.view.rows)}):", file=out)
        for row in shown.rows:
            print("  " + " | ".join(row), file=out)
    return 0


def cmd_augment(config: EngineConfig, gold_file: Path, out_file: Path,
                out=None) -> int:
    out = out or sys.stdout
    artifacts = load_artifacts(config)
    catalog, value_index, schema_index = artifacts
    gold = load_gold(gold_file)

    triples = []
    templates = 0
    for entry in gold:
        try:
            cjn = parse_cjn(entry.relevant_cjn, catalog)
        except ValueError as exc:
            raise ConfigError(
                f"gold entry for query {entry.query!r}: cannot parse relevant "
                f"network: {exc}") from exc
        template = augment_mod.extract_template(cjn)
        templates += 1
        view = augment_mod.run_template(template, catalog, config.generation_ratio)
        for row in view.rows:
            triple = augment_mod.instantiate(template, row, catalog)
            if triple is not None:
                triples.append(triple)

    examples = augment_mod.emit_examples(
        triples, catalog, value_index, schema_index,
        negatives_per_query=config.negatives_per_query,
        agg_modes=config.agg_modes, snapshot_rows=config.snapshot_rows,
        setup=config.setup, max_qm_size=config.max_qm_size,
        max_cjn_size=config.max_cjn_size, size_penalty=config.size_penalty,
        schema_weight=config.schema_weight)
    metadata = {
        "templates": templates,
        "synthetic_queries": len({t[0] for t in triples}),
        "examples": len(examples),
        "generation_ratio": config.generation_ratio,
        "negatives_per_query": config.negatives_per_query,
        "agg_modes": list(config.agg_modes),
        "seed": config.seed,
    }
    augment_mod.write_examples(examples, out_file, metadata)
    print(f"wrote {len(examples)} examples for {metadata['synthetic_queries']} "
          f"synthetic queries from {templates} templates -> {out_file}", file=out)
    return 0


def cmd_eval(config: EngineConfig, gold_file: Path, out_dir: Path,
             out=None) -> int:
    out = out or sys.stdout
    artifacts = load_artifacts(config)
    gold = load_gold(gold_file)
    run: dict[str, QueryRun] = {}
    for entry in gold:
        result = _run_search(config, entry.query, artifacts)
        run[entry.query] = QueryRun(
            qms=[qm.canonical() for _, qm in result.ranked_qms],
            cjns=[hit.cjn.canonical_form() for hit in result.hits])
    qm_report, cjn_report = evaluate(run, gold)

    out_dir.mkdir(parents=True, exist_ok=True)
    report_name = f"eval_{config.qm_ranker}_{config.cjn_ranker}.json"
    report_path = out_dir / report_name
    report_path.write_text(json.dumps(
        {"format_version": FORMAT_VERSION, "queries": len(gold),
         "qm_ranker": config.qm_ranker, "cjn_ranker": config.cjn_ranker,
         "qm": qm_report.to_dict(), "cjn": cjn_report.to_dict()},
        sort_keys=True, indent=1) + "\n", encoding="utf-8")
    print(render_reports(qm_report, cjn_report), file=out)
    print(f"report -> {report_path}", file=out)
    return 0


# --- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kwsql",
        description="Keyword search over relational databases")
    parser.add_argument("--config", help=f"engine config file (or ${ENV_CONFIG})")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("index", help="build and persist the catalog and indexes")

    p_search = sub.add_parser("search", help="run one keyword query")
    p_search.add_argument("query")
    p_search.add_argument("--explain", action="store_true",
                          help="print per-stage diagnostics")
    p_search.add_argument("--top", type=int, default=None,
                          help="show only the top K results")

    p_augment = sub.add_parser("augment", help="generate fine-tuning examples")
    p_augment.add_argument("gold_file", type=Path)
    p_augment.add_argument("--out", type=Path, default=Path("training_examples.jsonl"))

    p_eval = sub.add_parser("eval", help="evaluate rankings against a gold file")
    p_eval.add_argument("gold_file", type=Path)
    p_eval.add_argument("--out", type=Path, default=Path("."),
                        help="directory for the report file")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config_path = args.config or os.environ.get(ENV_CONFIG)
    if not config_path:
        print(f"error: no config given (use --config or ${ENV_CONFIG})",
              file=sys.stderr)
        return 2
    try:
        config = load_config(config_path)
        if args.command == "index":
            return cmd_index(config)
        if args.command == "search":
            return cmd_search(config, args.query, explain=args.explain, top=args.top)
        if args.command == "augment":
            return cmd_augment(config, args.gold_file, args.out)
        if args.command == "eval":
            return cmd_eval(config, args.gold_file, args.out)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, CatalogError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
