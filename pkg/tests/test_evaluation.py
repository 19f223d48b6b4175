import pytest

from dfarag.corpus import Dialogue, Role, Utterance
from dfarag.evaluation import (
    EvalReport,
    EvaluationError,
    Judgment,
    RetrievalOutcome,
    ScriptedJudge,
    UnparseableVerdictError,
    compute_win_rate,
    expected_random_precision,
    judge_pair,
    parse_verdict,
    retrieval_precision,
)
from dfarag.tagging import RoundTagTable

f = frozenset


def two_turn(user_text, system_text):
    return Dialogue(
        id=0,
        utterances=(
            Utterance(role=Role.USER, text=user_text, round=0),
            Utterance(role=Role.SYSTEM, text=system_text, round=0),
        ),
    )


TRUTH = two_turn("my battery drains fast", "please install the latest update")
CLOSE = two_turn("my battery drains fast", "please install the latest firmware update")
FAR = two_turn("my battery drains fast", "have you tried turning it off")


class TestParseVerdict:
    def test_bare_m(self):
        assert parse_verdict("m") == "m"

    def test_bare_upper(self):
        assert parse_verdict("M") == "M"

    def test_explanation_then_verdict(self):
        assert parse_verdict("The second output mirrors the truth.\nM") == "M"

    def test_trailing_whitespace_tolerated(self):
        assert parse_verdict("verdict: m \n") == "m"

    def test_wrong_final_char(self):
        with pytest.raises(UnparseableVerdictError):
            parse_verdict("the best model is m.")

    def test_empty(self):
        with pytest.raises(UnparseableVerdictError):
            parse_verdict("   ")


class TestScriptedJudge:
    def test_verdict_is_parseable(self):
        judgment = judge_pair(TRUTH, CLOSE, FAR, ScriptedJudge(), seed=0)
        assert parse_verdict(judgment.raw) in ("m", "M")

    @pytest.mark.parametrize("seed", range(20))
    def test_order_invariance(self, seed):
        """The closer completion wins no matter which presentation slot the
        seed assigns it to."""
        judgment = judge_pair(TRUTH, CLOSE, FAR, ScriptedJudge(), seed=seed)
        assert judgment.winner == "candidate"
        flipped = judge_pair(TRUTH, FAR, CLOSE, ScriptedJudge(), seed=seed)
        assert flipped.winner == "competitor"

    def test_both_orders_exercised(self):
        seen = {
            judge_pair(TRUTH, CLOSE, FAR, ScriptedJudge(), seed=seed).presentation
            for seed in range(20)
        }
        assert seen == {"candidate-first", "competitor-first"}

    def test_identical_outputs_tie_deterministically(self):
        first = judge_pair(TRUTH, CLOSE, CLOSE, ScriptedJudge(), seed=4)
        second = judge_pair(TRUTH, CLOSE, CLOSE, ScriptedJudge(), seed=4)
        assert first.winner == second.winner


class TestWinRate:
    def make(self, winners):
        return [
            Judgment(test_id=i, winner=w, raw="m", presentation="candidate-first")
            for i, w in enumerate(winners)
        ]

    def test_empty_rejected(self):
        with pytest.raises(EvaluationError):
            compute_win_rate([])

    def test_all_wins(self):
        assert compute_win_rate(self.make(["candidate"] * 4)) == 100.0

    def test_complement_symmetry(self):
        winners = ["candidate", "competitor", "candidate", "competitor", "candidate"]
        flipped = ["competitor" if w == "candidate" else "candidate" for w in winners]
        assert compute_win_rate(self.make(winners)) + compute_win_rate(self.make(flipped)) == 100.0

    def test_fraction(self):
        assert compute_win_rate(self.make(["candidate", "competitor"])) == 50.0


TABLE = RoundTagTable(
    rounds={
        (0, Role.USER): {
            0: f({"billing"}),
            1: f({"billing"}),
            2: f({"shipping"}),
            3: f({"login"}),
        }
    }
)


def outcome(exemplar_ids, tags):
    return RetrievalOutcome(
        exemplar_ids=tuple(exemplar_ids), round=0, role=Role.USER, test_tags=f(tags)
    )


class TestRetrievalPrecision:
    def test_all_hits(self):
        assert retrieval_precision([outcome([0, 1], {"billing"})], TABLE) == 1.0

    def test_half_hits(self):
        assert retrieval_precision([outcome([0, 2], {"billing"})], TABLE) == 0.5

    def test_pooled_over_outcomes(self):
        outcomes = [outcome([0], {"billing"}), outcome([0, 1, 2], {"shipping"})]
        # hits: 1 of 1, then 1 of 3 -> 2/4
        assert retrieval_precision(outcomes, TABLE) == 0.5

    def test_unknown_exemplar_counts_as_miss(self):
        assert retrieval_precision([outcome([99], {"billing"})], TABLE) == 0.0

    def test_zero_retrieved_rejected(self):
        with pytest.raises(EvaluationError):
            retrieval_precision([outcome([], {"billing"})], TABLE)


class TestExpectedRandomPrecision:
    IDS = [0, 1, 2, 3]

    def test_single_turn_share(self):
        got = expected_random_precision([outcome([0], {"billing"})], TABLE, self.IDS)
        assert got == 2 / 4

    def test_average_over_turns(self):
        outcomes = [outcome([0], {"billing"}), outcome([0], {"login"})]
        got = expected_random_precision(outcomes, TABLE, self.IDS)
        assert got == (2 / 4 + 1 / 4) / 2

    def test_no_matches_anywhere(self):
        got = expected_random_precision([outcome([0], {"unseen"})], TABLE, self.IDS)
        assert got == 0.0

    def test_empty_corpus_rejected(self):
        with pytest.raises(EvaluationError):
            expected_random_precision([outcome([0], {"billing"})], TABLE, [])


def test_report_document_shape():
    report = EvalReport(
        win_rate=62.5,
        counts={"candidate": 5, "competitor": 3},
        retrieval_precision={"dfa": 0.9, "random": 0.3},
        seed=11,
    )
    doc = report.to_document()
    assert doc["win_rate"] == 62.5
    assert doc["counts"] == {"candidate": 5, "competitor": 3}
    assert doc["judge"] == "scripted"
    assert doc["unparseable"] == 0
