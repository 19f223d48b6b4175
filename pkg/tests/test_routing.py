import pytest

from dfarag.automaton import BuildConfig, build_automaton
from dfarag.corpus import Corpus, Dialogue, Role, Utterance
from dfarag.routing import (
    CannedGenerator,
    EchoGenerator,
    RoutingError,
    Session,
    chat_step,
    compile_prompt,
    navigate,
    retrieve_exemplars,
    ExemplarSet,
)
from dfarag.tagging import EMPTY_TURN, EOR, RoundTagTable


def state_by_path(a, *tags):
    node = a.states[a.start]
    for tag in tags:
        node = a.states[node.transitions[tag]]
    return node


class TestNavigate:
    def test_empty_tags_no_move(self, golden_automaton):
        nav = navigate(golden_automaton, golden_automaton.start, set())
        assert nav.state == golden_automaton.start
        assert nav.consumed == ()
        assert nav.matched

    def test_greet_battery_walk(self, golden_automaton):
        a = golden_automaton
        nav = navigate(a, a.start, {"greet", "battery"})
        battery_leaf = state_by_path(a, "greet", "battery")
        assert nav.consumed == ("greet", "battery")
        assert nav.matched
        assert nav.state == battery_leaf.id
        assert nav.path == (a.start, state_by_path(a, "greet").id, battery_leaf.id)

    def test_total_mismatch_stays_put(self, golden_automaton):
        nav = navigate(golden_automaton, golden_automaton.start, {"nba-tickets"})
        assert nav.state == golden_automaton.start
        assert nav.consumed == ()
        assert not nav.matched

    def test_partial_match_counts_consumed(self, golden_automaton):
        nav = navigate(golden_automaton, golden_automaton.start, {"greet", "nba-tickets"})
        assert nav.consumed == ("greet",)
        assert not nav.matched
        assert nav.state == state_by_path(golden_automaton, "greet").id

    def test_eor_hop_prefix(self, golden_automaton):
        a = golden_automaton
        battery_leaf = state_by_path(a, "greet", "battery")
        nav = navigate(a, battery_leaf.id, {"link"})
        assert nav.path[0] == battery_leaf.id
        assert nav.path[1] == battery_leaf.transitions[EOR]
        assert nav.consumed == ("link",)
        assert len(nav.path) == len(nav.consumed) + 2

    def test_population_greedy_order(self):
        from dfarag.corpus import Role

        table = RoundTagTable(
            rounds={
                (0, Role.USER): {
                    1: frozenset({"a", "b"}),
                    2: frozenset({"a", "b"}),
                    3: frozenset({"a"}),
                }
            }
        )
        a = build_automaton(table, BuildConfig(tau=0))
        # both a and b defined at sibling depths; from start only 'a' exists
        nav = navigate(a, a.start, {"b", "a"})
        assert nav.consumed[0] == "a"

    def test_purity(self, golden_automaton):
        args = (golden_automaton, golden_automaton.start, {"greet", "battery"})
        assert navigate(*args) == navigate(*args)


class TestRetrieveExemplars:
    def test_fewer_than_k_returns_all(self, golden_automaton, toy_corpus):
        a = golden_automaton
        refund_leaf = state_by_path(a, "refund")
        ex = retrieve_exemplars(a, refund_leaf.id, toy_corpus, k=5, seed=1)
        assert ex.dialogue_ids == (3,)
        assert ex.source_state == refund_leaf.id

    def test_sampling_deterministic(self):
        from tests.conftest import cluster_corpus
        from dfarag.automaton import Automaton, State

        states = {0: State(id=0, round=0, role="start", dialogue_ids=set(range(1, 11)))}
        a = Automaton(states=states, start=0)
        first = retrieve_exemplars(a, 0, None, k=5, seed=7)
        second = retrieve_exemplars(a, 0, None, k=5, seed=7)
        assert first == second
        assert len(first.dialogue_ids) == 5
        assert set(first.dialogue_ids) <= set(range(1, 11))

    def test_deterministic_mode_lowest_ids(self):
        from dfarag.automaton import Automaton, State

        states = {0: State(id=0, round=0, role="start", dialogue_ids={9, 4, 7, 1, 5, 2})}
        a = Automaton(states=states, start=0)
        ex = retrieve_exemplars(a, 0, None, k=3, seed=0, deterministic=True)
        assert ex.dialogue_ids == (1, 2, 4)

    def test_fallback_to_ancestor(self):
        from dfarag.automaton import Automaton, State

        states = {
            0: State(id=0, round=0, role="start", dialogue_ids={1, 2}, transitions={"a": 1}),
            1: State(id=1, round=0, role="user", dialogue_ids=set()),
        }
        a = Automaton(states=states, start=0)
        ex = retrieve_exemplars(a, 1, None, k=5, seed=0, path=[0, 1])
        assert ex.source_state == 0
        assert ex.dialogue_ids == (1, 2)


class TestCompilePrompt:
    def test_zero_exemplars_legal(self, toy_corpus):
        partial = toy_corpus.get(1)
        bundle = compile_prompt(ExemplarSet(dialogue_ids=(), source_state=0), partial, toy_corpus)
        assert bundle.exemplar_transcripts == ()
        assert "helpful service agent" in bundle.text

    def test_single_exemplar_transcript(self, toy_corpus):
        partial = Dialogue(
            id=-1, utterances=(Utterance(role=Role.USER, text="hi my battery drains", round=0),)
        )
        bundle = compile_prompt(ExemplarSet(dialogue_ids=(1,), source_state=0), partial, toy_corpus)
        (transcript,) = bundle.exemplar_transcripts
        assert transcript.splitlines() == [
            "0 USER: hi there, my battery drains fast",
            "0 SYSTEM: please try update link",
        ]
        assert transcript in bundle.text
        assert "0 USER: hi my battery drains" in bundle.text

    def test_five_exemplars_in_order(self):
        from tests.conftest import cluster_corpus

        corpus, _ = cluster_corpus()
        partial = corpus.get(0)
        ids = (4, 2, 9, 0, 7)
        bundle = compile_prompt(ExemplarSet(dialogue_ids=ids, source_state=0), partial, corpus)
        assert len(bundle.exemplar_transcripts) == 5
        positions = [bundle.text.index(t) for t in bundle.exemplar_transcripts]
        assert positions == sorted(positions)

    def test_unresolvable_id(self, toy_corpus):
        with pytest.raises(RoutingError):
            compile_prompt(ExemplarSet(dialogue_ids=(42,), source_state=0), toy_corpus.get(1), toy_corpus)


class TestChatStep:
    def make_session(self, golden_automaton, toy_corpus, **kwargs):
        return Session(automaton=golden_automaton, corpus=toy_corpus, seed=7, **kwargs)

    def test_golden_transcript(self, golden_automaton, toy_corpus, toy_tagger, canned_responses):
        session = self.make_session(golden_automaton, toy_corpus)
        generator = CannedGenerator(canned_responses)
        response, nav, exemplars = chat_step(session, "hi my battery drains", toy_tagger, generator)
        assert response == "please try update link"
        assert nav.matched
        battery_leaf = state_by_path(golden_automaton, "greet", "battery")
        assert nav.state == battery_leaf.id
        assert exemplars.dialogue_ids == (1,)
        assert session.current == battery_leaf.id

    def test_empty_text_reserved_tag(self, golden_automaton, toy_corpus, toy_tagger, canned_responses):
        session = self.make_session(golden_automaton, toy_corpus)
        generator = CannedGenerator(canned_responses)
        chat_step(session, "hi my battery drains", toy_tagger, generator)
        response, nav, exemplars = chat_step(session, "", toy_tagger, generator)
        assert session.history[-2][2] == (EMPTY_TURN,)
        assert not nav.matched
        assert response  # degraded mode still answers

    def test_ood_fallback_still_responds(self, golden_automaton, toy_corpus, toy_tagger):
        session = self.make_session(golden_automaton, toy_corpus)
        generator = EchoGenerator()
        response, nav, exemplars = chat_step(
            session, "book NBA game tickets", toy_tagger, generator
        )
        assert not nav.matched
        assert nav.state == golden_automaton.start
        assert exemplars.dialogue_ids == (1, 2, 3)
        assert response

    def test_exemplar_count_bounded(self, golden_automaton, toy_corpus, toy_tagger):
        session = self.make_session(golden_automaton, toy_corpus, exemplar_k=2)
        _, _, exemplars = chat_step(session, "hi", toy_tagger, EchoGenerator())
        assert len(exemplars.dialogue_ids) <= 2

    def test_atomic_on_generator_failure(self, golden_automaton, toy_corpus, toy_tagger):
        class Boom:
            def generate(self, bundle, nav):
                raise ConnectionError("down")

        session = self.make_session(golden_automaton, toy_corpus)
        with pytest.raises(ConnectionError):
            chat_step(session, "hi my battery drains", toy_tagger, Boom())
        assert session.history == []
        assert session.current == golden_automaton.start

    def test_session_replay_reproduces(self, golden_automaton, toy_corpus, toy_tagger, canned_responses):
        generator = CannedGenerator(canned_responses)
        script = ["hi my battery drains", "book NBA game tickets", "link please"]

        def run():
            session = self.make_session(golden_automaton, toy_corpus)
            outcomes = [chat_step(session, text, toy_tagger, generator) for text in script]
            return session, outcomes

        s1, o1 = run()
        s2, o2 = run()
        assert o1 == o2
        assert s1.current == s2.current
        assert s1.history == s2.history
