"""Neural and baseline rankers, and the end-to-end search pipeline."""

from __future__ import annotations

import pytest

from kwsql.cjn import generate_cjns
from kwsql.embed import EmbedderConfig
from kwsql.executor import execute, probe
from kwsql.matcher import KeywordMatch
from kwsql.qmatch import QueryMatch
from kwsql.rank import (BAYESIAN, MEAN, MULTIVALUE, NEURAL, NEURAL_MEAN,
                        NEURAL_MULTIVALUE, SIMPLE, RankedList, SetupTriple,
                        neural_cjn_rank, neural_qm_rank, search, simple_cjn_rank)

HASHING = EmbedderConfig()


def km_value(rel, **bindings):
    return KeywordMatch.value(rel, {a: set(k) for a, k in bindings.items()})


M_WILL_SMITH = km_value("person", name={"will", "smith"})
M_WILL = km_value("person", name={"will"})
M_SMITH = km_value("person", name={"smith"})
M_FILMS = KeywordMatch.schema("movie", "self", {"films"})

QUERY = ("will", "smith", "films")


def qm(*matches):
    return QueryMatch(frozenset(matches), QUERY)


class TestNeuralQmRank:
    def test_token_overlap_wins(self):
        sharing = qm(M_WILL_SMITH, M_FILMS)
        # shares no token with the query sentence at all
        distant = QueryMatch(frozenset({km_value("role", name={"actor"})}),
                             ("actor",))
        ranked = neural_qm_rank("Will Smith films", {sharing, distant}, HASHING)
        assert ranked.entries[0][1] == sharing
        assert ranked.entries[0][0] > ranked.entries[1][0]

    def test_single_qm_rank_one(self):
        only = qm(M_WILL_SMITH, M_FILMS)
        ranked = neural_qm_rank("Will Smith films", {only}, HASHING)
        assert len(ranked) == 1 and ranked.items() == [only]

    def test_deterministic_scores(self):
        qms = {qm(M_WILL_SMITH, M_FILMS), qm(M_WILL, M_SMITH, M_FILMS)}
        a = neural_qm_rank("Will Smith films", qms, HASHING)
        b = neural_qm_rank("Will Smith films", qms, HASHING)
        assert [(s, q.canonical()) for s, q in a] == [(s, q.canonical()) for s, q in b]

    def test_empty_input(self):
        assert len(neural_qm_rank("x", set(), HASHING)) == 0


class TestNeuralCjnRank:
    @pytest.fixture()
    def networks(self, catalog):
        c1 = generate_cjns(qm(M_WILL_SMITH, M_FILMS), catalog)[0]
        c2 = generate_cjns(qm(M_WILL, M_SMITH, M_FILMS), catalog)[0]
        return c1, c2

    @pytest.mark.parametrize("agg", [MEAN, MULTIVALUE])
    def test_matching_person_outranks_two_person_split(self, catalog, networks, agg):
        c1, c2 = networks
        ranked, skipped = neural_cjn_rank("Will Smith films", [c1, c2], catalog,
                                          agg, HASHING)
        assert not skipped
        assert ranked.items()[0] == c1

    def test_single_cjn(self, catalog, networks):
        c1, _ = networks
        ranked, _ = neural_cjn_rank("Will Smith films", [c1], catalog, MEAN, HASHING)
        assert len(ranked) == 1

    def test_one_row_view_mean_equals_multivalue(self, catalog):
        c = generate_cjns(qm(M_WILL, M_SMITH, M_FILMS), catalog)[0]
        assert len(execute(c, catalog).rows) == 1
        mean_ranked, _ = neural_cjn_rank("Will Smith films", [c], catalog,
                                         MEAN, HASHING)
        multi_ranked, _ = neural_cjn_rank("Will Smith films", [c], catalog,
                                          MULTIVALUE, HASHING)
        assert mean_ranked.entries[0][0] == pytest.approx(
            multi_ranked.entries[0][0], abs=1e-12)

    def test_empty_view_skipped(self, catalog):
        dead = generate_cjns(qm(km_value("person", name={"zzz"}), M_FILMS), catalog)[0]
        ranked, skipped = neural_cjn_rank("zzz films", [dead], catalog, MEAN, HASHING)
        assert len(ranked) == 0
        assert skipped and skipped[0][0] == dead and "empty" in skipped[0][1]

    def test_unknown_agg_rejected(self, catalog, networks):
        with pytest.raises(ValueError):
            neural_cjn_rank("q", [networks[0]], catalog, "median", HASHING)


class TestSimpleCjnRank:
    def test_score_is_qm_score_over_size(self, catalog):
        q = qm(M_WILL_SMITH, M_FILMS)
        c = generate_cjns(q, catalog)[0]
        ranked = simple_cjn_rank(RankedList([(0.9, q)]), {q: [c]})
        assert ranked.entries[0][0] == pytest.approx(0.9 / 3)

    def test_smaller_network_wins(self, catalog):
        q = qm(M_WILL_SMITH, M_FILMS)
        cjns = generate_cjns(q, catalog)
        small, big = cjns[0], cjns[1]
        assert len(small) < len(big)
        ranked = simple_cjn_rank(RankedList([(1.0, q)]), {q: [big, small]})
        assert ranked.items()[0] == small

    def test_mixed_set_hand_computed(self, catalog):
        q1 = qm(M_WILL_SMITH, M_FILMS)
        q2 = qm(M_WILL, M_SMITH, M_FILMS)
        c1 = generate_cjns(q1, catalog)  # sizes 3, 5, 5
        c2 = generate_cjns(q2, catalog)  # size 5
        ranked = simple_cjn_rank(RankedList([(6.0, q1), (4.0, q2)]),
                                 {q1: c1[:2], q2: c2})
        scores = [s for s, _ in ranked]
        assert scores == [6.0 / 3, 6.0 / 5, 4.0 / 5]


class TestSearch:
    def test_default_setup_top_result_is_will_smith_movies(self, indexes):
        catalog, value_index, schema_index = indexes
        result = search("will smith films", catalog, value_index, schema_index)
        assert result.hits
        top = result.hits[0]
        assert set(top.view.rows) == {("Men in Black", "Will Smith"),
                                      ("I am Legend", "Will Smith")}
        assert result.diagnostics.qm_count == 4

    def test_eager_guarantee_and_pool_bound(self, indexes):
        catalog, value_index, schema_index = indexes
        setup = SetupTriple()
        result = search("will smith films", catalog, value_index, schema_index,
                        setup=setup)
        assert 0 < len(result.hits) <= setup.n_qm * setup.n_cjn
        for hit in result.hits:
            assert len(hit.view.rows) >= 1
            assert probe(hit.cjn, catalog)

    def test_single_keyword_single_column(self, indexes):
        catalog, value_index, schema_index = indexes
        result = search("legend", catalog, value_index, schema_index)
        assert len(result.hits) == 1
        hit = result.hits[0]
        assert len(hit.cjn) == 1
        assert hit.view.rows == (("I am Legend",),)

    def test_absent_keyword_reports_uncovered(self, indexes):
        catalog, value_index, schema_index = indexes
        result = search("will xenomorph", catalog, value_index, schema_index)
        assert result.hits == []
        assert result.diagnostics.uncovered_keywords == ["xenomorph"]

    def test_empty_query(self, indexes):
        catalog, value_index, schema_index = indexes
        result = search("the of and", catalog, value_index, schema_index)
        assert result.hits == [] and result.diagnostics.keywords == []

    @pytest.mark.parametrize("qm_ranker,cjn_ranker", [
        (BAYESIAN, SIMPLE),
        (BAYESIAN, NEURAL_MEAN),
        (NEURAL, NEURAL_MULTIVALUE),
        (NEURAL, SIMPLE),
    ])
    def test_all_ranker_combinations_run_and_stay_eager(self, indexes,
                                                        qm_ranker, cjn_ranker):
        catalog, value_index, schema_index = indexes
        result = search("will smith films", catalog, value_index, schema_index,
                        qm_ranker=qm_ranker, cjn_ranker=cjn_ranker)
        assert result.hits
        for hit in result.hits:
            assert hit.view.rows

    def test_scoring_deterministic_across_runs(self, indexes):
        catalog, value_index, schema_index = indexes
        runs = [search("will smith films", catalog, value_index, schema_index,
                       qm_ranker=NEURAL, cjn_ranker=NEURAL_MULTIVALUE)
                for _ in range(2)]
        a, b = runs
        assert [(h.score, h.cjn.canonical_form()) for h in a.hits] == \
               [(h.score, h.cjn.canonical_form()) for h in b.hits]

    def test_n_cjn_one_keeps_first_probing_survivor(self, indexes):
        catalog, value_index, schema_index = indexes
        result = search("will smith films", catalog, value_index, schema_index)
        per_qm: dict[str, int] = {}
        for hit in result.hits:
            key = hit.source_qm.canonical()
            per_qm[key] = per_qm.get(key, 0) + 1
        assert all(count <= 1 for count in per_qm.values())


class TestSetupTriple:
    def test_defaults(self):
        s = SetupTriple()
        assert (s.n_qm, s.n_cjn, s.p_cjn) == (8, 1, 9)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            SetupTriple(n_qm=0)
