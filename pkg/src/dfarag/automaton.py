"""Tag-tree automaton construction from round tables, plus the query surface.

States are conversational contexts; edges carry tags.  Each state tracks the
training-dialogue ids whose tag trajectories pass through it, which is the
retrieval source at inference time.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .corpus import Role
from .tagging import EOR, RoundTagTable

START_ROLE = "start"


class AutomatonError(ValueError):
    """Raised on queries against unknown states or malformed structures."""


@dataclass
class State:
    id: int
    round: int
    role: str  # "user" | "system" | "start"
    accept: bool = False
    dialogue_ids: set[int] = field(default_factory=set)
    # Insertion order of this dict is creation order and is semantically
    # meaningful (frequency-first construction).
    transitions: dict[str, int] = field(default_factory=dict)
    # Tag frequency observed when each child edge was created; debug metadata.
    creation_counts: dict[str, int] = field(default_factory=dict)


@dataclass
class BuildConfig:
    tau: int = 5
    merge_lambda: float = 0.1
    max_rounds: int | None = None
    seed: int = 0


@dataclass
class Automaton:
    states: dict[int, State]
    start: int
    build_config: BuildConfig = field(default_factory=BuildConfig)

    def state(self, state_id: int) -> State:
        try:
            return self.states[state_id]
        except KeyError:
            raise AutomatonError(f"unknown state id {state_id}") from None

    @property
    def alphabet(self) -> set[str]:
        return {tag for s in self.states.values() for tag in s.transitions}

    @property
    def accepts(self) -> set[int]:
        return {s.id for s in self.states.values() if s.accept}

    def transition_count(self) -> int:
        return sum(len(s.transitions) for s in self.states.values())


def tag_frequencies(
    table: RoundTagTable, round_index: int, role: Role, ids: Iterable[int]
) -> list[tuple[str, int]]:
    """Tag counts over the given dialogues at one (round, role), most frequent
    first, ties broken lexicographically."""
    entries = table.entries(round_index, role)
    counts: Counter[str] = Counter()
    for i in ids:
        counts.update(entries.get(i, frozenset()))
    return sorted(counts.items(), key=lambda item: (-item[1], item[0]))


class _Builder:
    def __init__(self, table: RoundTagTable, config: BuildConfig):
        self.table = table
        self.config = config
        self.states: dict[int, State] = {}
        self.resting: dict[int, set[int]] = {}
        self._next_id = 0

    def new_state(self, round_index: int, role: str) -> State:
        state = State(id=self._next_id, round=round_index, role=role)
        self._next_id += 1
        self.states[state.id] = state
        self.resting[state.id] = set()
        return state

    def build_tree(
        self,
        node: State,
        ids: set[int],
        remaining: dict[int, set[str]],
        round_index: int,
        role_value: str,
    ) -> None:
        """Recursive expansion: split off the most frequent tag, recurse into
        its population, continue with the rest."""
        pool = set(ids)
        while True:
            counts: Counter[str] = Counter()
            for i in pool:
                counts.update(remaining[i])
            if not counts:
                break
            tag = min(counts, key=lambda t: (-counts[t], t))
            members = {i for i in pool if tag in remaining[i]}
            child = self.new_state(round_index, role_value)
            child.dialogue_ids = set(members)
            node.transitions[tag] = child.id
            node.creation_counts[tag] = counts[tag]
            for i in members:
                remaining[i].discard(tag)
            self.build_tree(child, members, remaining, round_index, role_value)
            pool -= members
        # Everyone left has an exhausted tag set: they rest at this node.
        self.resting[node.id].update(pool)

    def build_stage_tree(self, root: State, round_index: int, role: Role, ids: set[int]) -> None:
        entries = self.table.entries(round_index, role)
        remaining = {i: set(entries.get(i, frozenset())) for i in ids}
        root.dialogue_ids.update(ids)
        self.build_tree(root, ids, remaining, round_index, role.value)


def build_round_tree(
    table: RoundTagTable,
    round_index: int,
    role: Role,
    root: State,
    ids: set[int],
    automaton: Automaton,
) -> None:
    """Expand one (round, role) subtree below an existing root, in place."""
    builder = _Builder(table, automaton.build_config)
    builder.states = automaton.states
    builder.resting = {s: set() for s in automaton.states}
    builder._next_id = max(automaton.states) + 1
    builder.build_stage_tree(root, round_index, role, ids)


def _stages(table: RoundTagTable, max_rounds: int | None) -> list[tuple[int, Role]]:
    top = table.max_round()
    if max_rounds is not None:
        top = min(top, max_rounds - 1)
    return [(r, role) for r in range(top + 1) for role in (Role.USER, Role.SYSTEM)]


def build_automaton(table: RoundTagTable, config: BuildConfig | None = None) -> Automaton:
    """Construct the full pre-merge tag tree.

    Round 0's user tree grows from the start state; every later stage hangs a
    fresh subtree off the states where dialogues came to rest in the previous
    stage, joined by a reserved round-delimiter edge, provided the resting
    population present at the next stage exceeds tau.
    """
    config = config or BuildConfig()
    builder = _Builder(table, config)
    start = builder.new_state(0, START_ROLE)
    all_ids = table.all_ids()
    start.dialogue_ids = set(all_ids)
    last_rest: dict[int, int] = {i: start.id for i in all_ids}

    stages = _stages(table, config.max_rounds)
    if stages:
        first_round, first_role = stages[0]
        first_ids = table.ids_at(first_round, first_role)
        prev_states = [start.id]
        if first_ids:
            remaining = {
                i: set(table.entries(first_round, first_role).get(i, frozenset()))
                for i in first_ids
            }
            builder.build_tree(start, first_ids, remaining, first_round, first_role.value)
            prev_states = [s for s in builder.states]  # creation order
        # Ids with no usable tags at stage 0 rest at the start state.
        builder.resting[start.id].update(all_ids - first_ids)
        for sid, rest in builder.resting.items():
            for i in rest:
                last_rest[i] = sid

        for round_index, role in stages[1:]:
            present = table.ids_at(round_index, role)
            prev_resting = {sid: set(builder.resting[sid]) for sid in prev_states}
            new_states: list[int] = []
            for sid in prev_states:
                rest = prev_resting[sid]
                eligible = rest & present
                if len(eligible) <= config.tau:
                    continue
                before = builder._next_id
                root = builder.new_state(round_index, role.value)
                builder.states[sid].transitions[EOR] = root.id
                builder.resting[sid] -= rest  # they move on through the delimiter
                carried = rest - present
                builder.build_stage_tree(root, round_index, role, eligible)
                # Dialogues with no tags this stage ride along to the new root
                # and rejoin at the next round boundary.
                root.dialogue_ids.update(carried)
                builder.resting[root.id].update(carried)
                new_states.extend(range(before, builder._next_id))
            for sid in new_states:
                for i in builder.resting[sid]:
                    last_rest[i] = sid
            if new_states:
                prev_states = new_states

    for i, sid in last_rest.items():
        builder.states[sid].accept = True

    return Automaton(states=builder.states, start=start.id, build_config=config)


def children_tags(automaton: Automaton, state_id: int) -> set[str]:
    """Outgoing tag labels of a state, round delimiter excluded."""
    state = automaton.state(state_id)
    return {tag for tag in state.transitions if tag != EOR}


def step(automaton: Automaton, state_id: int, tag: str) -> int | None:
    """delta(q, t) when defined, else None."""
    state = automaton.state(state_id)
    return state.transitions.get(tag)
