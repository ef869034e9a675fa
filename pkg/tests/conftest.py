"""Shared fixtures: the toy movie catalog used across the suite."""

from __future__ import annotations

from pathlib import Path

import pytest

from kwsql.catalog import (build_schema_index, build_value_index, load_catalog,
                           load_lexicon)

DATA_DIR = Path(__file__).parent / "data" / "movies"


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"\n[acceptance] {status} {name}", flush=True)


@pytest.fixture(scope="session")
def catalog():
    return load_catalog(DATA_DIR, DATA_DIR / "schema.json")


@pytest.fixture(scope="session")
def value_index(catalog):
    return build_value_index(catalog)


@pytest.fixture(scope="session")
def schema_index(catalog):
    return build_schema_index(catalog, load_lexicon(DATA_DIR / "lexicon.json"))


@pytest.fixture(scope="session")
def indexes(catalog, value_index, schema_index):
    return catalog, value_index, schema_index
