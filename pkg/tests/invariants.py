"""Structural invariant checks for pre-merge automata, shared by the property
tests and the acceptance suite."""

from __future__ import annotations

import random

from dfarag.automaton import Automaton, BuildConfig
from dfarag.corpus import Role
from dfarag.tagging import EOR, RoundTagTable

ROLE_ORDER = (Role.USER, Role.SYSTEM)


def random_table(rng: random.Random, max_dialogues=12, max_rounds=4, vocab_size=6) -> RoundTagTable:
    vocab = [f"t{i}" for i in range(vocab_size)]
    n = rng.randint(1, max_dialogues)
    rounds: dict[tuple[int, Role], dict[int, frozenset[str]]] = {}
    for i in range(n):
        length = rng.randint(1, max_rounds)
        for r in range(length):
            for role in ROLE_ORDER:
                k = rng.randint(0, 3)
                tags = frozenset(rng.sample(vocab, k)) if k else frozenset()
                if tags or rng.random() < 0.3:
                    rounds.setdefault((r, role), {})[i] = tags
    return RoundTagTable(rounds=rounds)


def incoming_counts(a: Automaton) -> dict[int, int]:
    counts = {sid: 0 for sid in a.states}
    for state in a.states.values():
        for target in state.transitions.values():
            counts[target] += 1
    return counts


def check_tree_shape(a: Automaton) -> None:
    counts = incoming_counts(a)
    assert counts[a.start] == 0, "start state has an incoming edge"
    for sid, n in counts.items():
        if sid != a.start:
            assert n == 1, f"state {sid} has {n} incoming edges (pre-merge tree expected)"


def check_containment(a: Automaton) -> None:
    for state in a.states.values():
        for tag, target in state.transitions.items():
            child = a.states[target]
            assert child.dialogue_ids <= state.dialogue_ids, (
                f"edge {state.id} -{tag}-> {target} breaks containment"
            )


def check_sibling_disjointness(a: Automaton) -> None:
    for state in a.states.values():
        tags = [t for t in state.transitions if t != EOR]
        for i, t1 in enumerate(tags):
            for t2 in tags[i + 1 :]:
                ids1 = a.states[state.transitions[t1]].dialogue_ids
                ids2 = a.states[state.transitions[t2]].dialogue_ids
                assert not (ids1 & ids2), (
                    f"siblings {t1}/{t2} at state {state.id} share dialogues"
                )


def check_frequency_first(a: Automaton) -> None:
    for state in a.states.values():
        counts = [state.creation_counts[t] for t in state.transitions if t != EOR]
        assert counts == sorted(counts, reverse=True), (
            f"state {state.id} children not created most-frequent-first: {counts}"
        )


def check_tau_gate(a: Automaton, table: RoundTagTable, config: BuildConfig) -> None:
    for state in a.states.values():
        if EOR not in state.transitions:
            continue
        target = a.states[state.transitions[EOR]]
        present = table.ids_at(target.round, Role(target.role))
        assert len(state.dialogue_ids & present) > config.tau, (
            f"<eor> from state {state.id} violates the tau gate"
        )


def check_start_tracks_all(a: Automaton, table: RoundTagTable) -> None:
    assert a.states[a.start].dialogue_ids == table.all_ids()


def check_path_soundness(a: Automaton, table: RoundTagTable) -> None:
    """Replaying each dialogue's tags greedily from each subtree root it
    entered must consume all its tags for that stage and end on a tracking
    state."""
    for i in table.all_ids():
        node = a.states[a.start]
        assert i in node.dialogue_ids
        while True:
            consumed: set[str] = set()
            # Descend through this stage's subtree along edges tracking i.
            while True:
                nxt = None
                for tag, target in node.transitions.items():
                    if tag == EOR:
                        continue
                    if i in a.states[target].dialogue_ids:
                        assert nxt is None, "two sibling edges track one dialogue"
                        nxt = (tag, target)
                if nxt is None:
                    break
                consumed.add(nxt[0])
                node = a.states[nxt[1]]
                assert i in node.dialogue_ids
            if node.role != "start" or consumed:
                stage_tags = table.entries(node.round, Role(node.role)).get(i, frozenset()) if node.role != "start" else frozenset()
                if node.role != "start" and i in table.entries(node.round, Role(node.role)):
                    # Everything the dialogue carried at this stage was placed
                    # on its path unless it rode along tagless.
                    if consumed:
                        assert consumed == set(stage_tags), (
                            f"dialogue {i} consumed {consumed} != table {set(stage_tags)}"
                        )
            eor_target = node.transitions.get(EOR)
            if eor_target is not None and i in a.states[eor_target].dialogue_ids:
                node = a.states[eor_target]
            else:
                break
        assert i in node.dialogue_ids


def check_all(a: Automaton, table: RoundTagTable, config: BuildConfig) -> None:
    check_tree_shape(a)
    check_containment(a)
    check_sibling_disjointness(a)
    check_frequency_first(a)
    check_tau_gate(a, table, config)
    check_start_tracks_all(a, table)
    check_path_soundness(a, table)
