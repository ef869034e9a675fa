"""Ranking metrics against hand-computed values."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from kwsql.evaluation import (GoldenStandard, QueryRun, evaluate, load_gold,
                              max_recall_position, mean_reciprocal_rank, r_at_k,
                              recall, reciprocal_rank, render_reports)


class TestReciprocalRank:
    def test_first_position(self):
        assert reciprocal_rank(["a", "b"], "a") == 1.0

    def test_fourth_position(self):
        assert reciprocal_rank(["a", "b", "c", "d"], "d") == 0.25

    def test_absent(self):
        assert reciprocal_rank(["a", "b"], "z") == 0.0

    def test_mrr_over_three_queries(self):
        ranked = [["r", "x"], ["x", "r"], ["x", "y", "z", "r"]]
        relevants = ["r", "r", "r"]
        assert mean_reciprocal_rank(ranked, relevants) == pytest.approx(7 / 12)


class TestRAtK:
    def test_thirty_five_of_fifty_in_top_three(self):
        ranked, relevants = [], []
        for i in range(50):
            if i < 35:
                ranked.append(["x", "y", "r", "z"])
            else:
                ranked.append(["x", "y", "z", "r"])
            relevants.append("r")
        assert r_at_k(ranked, relevants, 3) == pytest.approx(0.7)

    def test_k_one_all_heads(self):
        ranked = [["r", "a"], ["r"], ["r", "b", "c"]]
        assert r_at_k(ranked, ["r", "r", "r"], 1) == 1.0

    def test_short_list_judged_at_last_result(self):
        # the relevant item is at position 2 of a 2-item list; k=5 counts it
        assert r_at_k([["a", "r"]], ["r"], 5) == 1.0

    def test_monotone_in_k(self):
        ranked = [["a", "r"], ["r"], ["x", "y", "z"], ["b", "c", "r", "d"]]
        relevants = ["r"] * 4
        values = [r_at_k(ranked, relevants, k) for k in range(1, 11)]
        assert values == sorted(values)

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            r_at_k([["a"]], ["a"], 0)


class TestMaxRecallPosition:
    def test_deepest_of_found(self):
        ranked = [["r"], ["x", "r"], ["a", "b", "c", "d", "e", "f", "g", "r"]]
        assert max_recall_position(ranked, ["r"] * 3) == 8

    def test_single_query_at_one(self):
        assert max_recall_position([["r"]], ["r"]) == 1

    def test_missing_query_excluded(self):
        ranked = [["a", "b"], ["x", "y", "r"]]
        assert max_recall_position(ranked, ["r", "r"]) == 3

    def test_none_when_nothing_found(self):
        assert max_recall_position([["a"]], ["r"]) is None


class TestEvaluate:
    def _gold(self):
        return [GoldenStandard("q1", "m1", "c1"),
                GoldenStandard("q2", "m2", "c2"),
                GoldenStandard("q3", "m3", "c3")]

    def test_hand_computed_fixture(self):
        run = {
            "q1": QueryRun(qms=["m1", "x"], cjns=["x", "c1"]),
            "q2": QueryRun(qms=["x", "m2"], cjns=["c2"]),
            "q3": QueryRun(qms=["x", "y"], cjns=["x", "y", "c3"]),
        }
        qm_report, cjn_report = evaluate(run, self._gold())
        assert qm_report.mrr == pytest.approx((1.0 + 0.5 + 0.0) / 3)
        assert qm_report.recall == pytest.approx(2 / 3)
        assert qm_report.max_recall_position == 2
        assert qm_report.r_at_k[1] == pytest.approx(1 / 3)
        assert qm_report.r_at_k[2] == pytest.approx(2 / 3)
        assert cjn_report.mrr == pytest.approx((0.5 + 1.0 + 1 / 3) / 3)
        assert cjn_report.recall == 1.0
        assert cjn_report.max_recall_position == 3

    def test_perfect_run(self):
        run = {q.query: QueryRun([q.relevant_qm], [q.relevant_cjn])
               for q in self._gold()}
        qm_report, cjn_report = evaluate(run, self._gold())
        for report in (qm_report, cjn_report):
            assert report.mrr == 1.0
            assert report.recall == 1.0
            assert report.r_at_k[1] == 1.0
            assert report.max_recall_position == 1

    def test_missing_query_is_error(self):
        run = {"q1": QueryRun(["m1"], ["c1"])}
        with pytest.raises(ValueError, match="q2"):
            evaluate(run, self._gold())

    def test_gold_order_irrelevant(self):
        run = {
            "q1": QueryRun(["m1"], ["c1"]),
            "q2": QueryRun(["x", "m2"], ["x", "c2"]),
            "q3": QueryRun(["x"], ["c3"]),
        }
        a = evaluate(run, self._gold())
        b = evaluate(run, list(reversed(self._gold())))
        assert a[0].to_dict() == b[0].to_dict()
        assert a[1].to_dict() == b[1].to_dict()

    def test_mrr_never_exceeds_recall(self):
        run = {
            "q1": QueryRun(["x", "m1"], ["c1"]),
            "q2": QueryRun(["x"], ["x", "x", "c2"]),
            "q3": QueryRun(["m3"], ["x"]),
        }
        qm_report, cjn_report = evaluate(run, self._gold())
        assert qm_report.mrr <= qm_report.recall
        assert cjn_report.mrr <= cjn_report.recall


@given(st.lists(st.lists(st.sampled_from(["a", "b", "c", "r"]), max_size=6),
                min_size=1, max_size=8))
def test_r_at_k_monotone_property(per_query):
    relevants = ["r"] * len(per_query)
    values = [r_at_k(per_query, relevants, k) for k in range(1, 11)]
    assert values == sorted(values)
    assert recall(per_query, relevants) >= mean_reciprocal_rank(per_query, relevants)


class TestGoldFile:
    def test_load(self, tmp_path):
        path = tmp_path / "gold.json"
        path.write_text('[{"query": "q", "relevant_qm": "m", "relevant_cjn": "c"}]')
        gold = load_gold(path)
        assert gold == [GoldenStandard("q", "m", "c")]

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "gold.json"
        path.write_text("[]")
        with pytest.raises(ValueError):
            load_gold(path)

    def test_malformed_entry_named(self, tmp_path):
        path = tmp_path / "gold.json"
        path.write_text('[{"query": "q"}]')
        with pytest.raises(ValueError, match="entry 0"):
            load_gold(path)


def test_render_reports_aligned():
    run = {"q1": QueryRun(["m1"], ["c1"])}
    qm_report, cjn_report = evaluate(run, [GoldenStandard("q1", "m1", "c1")])
    text = render_reports(qm_report, cjn_report)
    lines = text.splitlines()
    assert lines[0].startswith("metric")
    assert any(line.startswith("mrr") for line in lines)
    assert any(line.startswith("r@10") for line in lines)
