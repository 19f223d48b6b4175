"""State similarity scoring and merge application for the tag tree.

Two states whose outgoing tags lead to similarly-populated children describe
the same conversational context even when the states were reached through
different surface tags; merging them deduplicates repeated sub-chains.
"""

from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass, field

from .automaton import Automaton, State
from .tagging import EOR


class MergeError(ValueError):
    """Raised when a merge plan references states absent from the automaton."""


@dataclass(frozen=True)
class MergePlan:
    pairs: tuple[tuple[int, int, float], ...]
    merge_lambda: float

    def __len__(self) -> int:
        return len(self.pairs)


def _child_weights(automaton: Automaton, state: State) -> dict[str, int]:
    return {
        tag: len(automaton.state(target).dialogue_ids)
        for tag, target in state.transitions.items()
        if tag != EOR
    }


def similarity(automaton: Automaton, q: int, q2: int) -> float:
    """Child-weighted overlap between two states' outgoing tag sets, in [0,1].

    Weighted by the tracked-dialogue count of each child; zero for childless
    states (the ratio is undefined there and leaves carry no shared structure).
    """
    w1 = _child_weights(automaton, automaton.state(q))
    w2 = _child_weights(automaton, automaton.state(q2))
    denom = sum(w1.values()) * sum(w2.values())
    if denom == 0:
        return 0.0
    shared = set(w1) & set(w2)
    return sum(w1[t] * w2[t] for t in shared) / denom


def plan_merges(automaton: Automaton, merge_lambda: float) -> MergePlan:
    """All same-round same-role state pairs scoring above the threshold,
    best first."""
    states = sorted(automaton.states.values(), key=lambda s: s.id)
    pairs: list[tuple[int, int, float]] = []
    for a, b in itertools.combinations(states, 2):
        if (a.round, a.role) != (b.round, b.role):
            continue
        score = similarity(automaton, a.id, b.id)
        if score > merge_lambda:
            pairs.append((a.id, b.id, score))
    pairs.sort(key=lambda p: (-p[2], p[0], p[1]))
    return MergePlan(pairs=tuple(pairs), merge_lambda=merge_lambda)


def apply_merges(automaton: Automaton, plan: MergePlan) -> Automaton:
    """Merge planned pairs (union-find closure), cascading into children that
    share a tag, on a working copy.  Scores are not recomputed mid-pass."""
    for q, q2, _ in plan.pairs:
        if q not in automaton.states or q2 not in automaton.states:
            raise MergeError(f"merge plan references unknown states ({q}, {q2})")
    result = copy.deepcopy(automaton)
    parent = {sid: sid for sid in result.states}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def merge(x: int, y: int) -> None:
        x, y = find(x), find(y)
        if x == y:
            return
        if y < x:
            x, y = y, x
        parent[y] = x
        keep, drop = result.states[x], result.states[y]
        keep.dialogue_ids |= drop.dialogue_ids
        keep.accept = keep.accept or drop.accept
        for tag, target in drop.transitions.items():
            if tag in keep.transitions:
                merge(keep.transitions[tag], target)
            else:
                keep.transitions[tag] = target
                keep.creation_counts[tag] = drop.creation_counts.get(tag, 0)

    for q, q2, _ in plan.pairs:
        merge(q, q2)

    survivors = {sid: s for sid, s in result.states.items() if find(sid) == sid}
    for state in survivors.values():
        state.transitions = {tag: find(t) for tag, t in state.transitions.items()}
    result.states = survivors
    result.start = find(result.start)

    # A merged state unions its members' dialogue sets, so an unmerged parent
    # can momentarily track fewer dialogues than its child.  Propagate unions
    # upward to a fixpoint so every edge keeps child-within-parent containment.
    changed = True
    while changed:
        changed = False
        for state in result.states.values():
            for target_id in state.transitions.values():
                target_ids = result.states[target_id].dialogue_ids
                if not target_ids <= state.dialogue_ids:
                    state.dialogue_ids |= target_ids
                    changed = True
    return result


@dataclass
class MergeReport:
    pairs: tuple[tuple[int, int, float], ...]
    states_before: int
    states_after: int

    @property
    def merged_fraction(self) -> float:
        if self.states_before == 0:
            return 0.0
        return (self.states_before - self.states_after) / self.states_before

    def to_document(self) -> dict:
        return {
            "pairs": [{"a": a, "b": b, "score": s} for a, b, s in self.pairs],
            "states_before": self.states_before,
            "states_after": self.states_after,
            "merged_fraction": self.merged_fraction,
        }


def merge_automaton(automaton: Automaton, merge_lambda: float | None = None) -> tuple[Automaton, MergeReport]:
    """Convenience plan+apply single pass, with a report of what merged."""
    lam = automaton.build_config.merge_lambda if merge_lambda is None else merge_lambda
    plan = plan_merges(automaton, lam)
    merged = apply_merges(automaton, plan)
    report = MergeReport(
        pairs=plan.pairs,
        states_before=len(automaton.states),
        states_after=len(merged.states),
    )
    return merged, report
