"""Automaton serialization (versioned JSON) and Graphviz DOT export."""

from __future__ import annotations

import json

from .automaton import Automaton, BuildConfig, State, START_ROLE
from .tagging import EOR

DOCUMENT_VERSION = 1


class PersistenceError(ValueError):
    pass


def encode_automaton(automaton: Automaton) -> bytes:
    """Canonical bytes: states sorted by id, transitions in creation order,
    dialogue ids sorted.  Identical automata encode identically."""
    config = automaton.build_config
    document = {
        "version": DOCUMENT_VERSION,
        "build_config": {
            "tau": config.tau,
            "merge_lambda": config.merge_lambda,
            "max_rounds": config.max_rounds,
            "seed": config.seed,
        },
        "start": automaton.start,
        "states": [
            {
                "id": state.id,
                "round": state.round,
                "role": state.role,
                "accept": state.accept,
                "dialogue_ids": sorted(state.dialogue_ids),
                "transitions": [[tag, target] for tag, target in state.transitions.items()],
                "creation_counts": [
                    [tag, state.creation_counts[tag]]
                    for tag in state.transitions
                    if tag in state.creation_counts
                ],
            }
            for state in sorted(automaton.states.values(), key=lambda s: s.id)
        ],
    }
    return (json.dumps(document, ensure_ascii=False, separators=(",", ":")) + "\n").encode("utf-8")


def decode_automaton(data: bytes | str) -> Automaton:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        document = json.loads(data)
    except json.JSONDecodeError as exc:
        raise PersistenceError(f"invalid automaton document: {exc}") from exc
    if document.get("version") != DOCUMENT_VERSION:
        raise PersistenceError(f"unsupported document version: {document.get('version')!r}")
    config_doc = document.get("build_config", {})
    config = BuildConfig(
        tau=config_doc.get("tau", 5),
        merge_lambda=config_doc.get("merge_lambda", 0.1),
        max_rounds=config_doc.get("max_rounds"),
        seed=config_doc.get("seed", 0),
    )
    states: dict[int, State] = {}
    for entry in document.get("states", []):
        transitions: dict[str, int] = {}
        for tag, target in entry.get("transitions", []):
            if tag in transitions:
                raise PersistenceError(
                    f"state {entry['id']} defines tag {tag!r} twice (determinism violation)"
                )
            transitions[tag] = target
        state = State(
            id=entry["id"],
            round=entry["round"],
            role=entry["role"],
            accept=bool(entry.get("accept", False)),
            dialogue_ids=set(entry.get("dialogue_ids", [])),
            transitions=transitions,
            creation_counts={tag: count for tag, count in entry.get("creation_counts", [])},
        )
        states[state.id] = state
    for state in states.values():
        for tag, target in state.transitions.items():
            if target not in states:
                raise PersistenceError(
                    f"state {state.id} transition {tag!r} targets missing state {target}"
                )
    start = document.get("start")
    if start not in states:
        raise PersistenceError(f"start state {start!r} missing from document")
    return Automaton(states=states, start=start, build_config=config)


_ROLE_FILL = {"user": "palegreen", "system": "lightblue", START_ROLE: "white"}


def export_dot(
    automaton: Automaton,
    max_depth: int | None = None,
    min_dialogues: int | None = None,
) -> str:
    """Graphviz DOT: user states green, system states blue, start outlined in
    black, accept states double-circled; round-delimiter edges dashed and
    unlabeled.  Optional filters prune deep or thinly-populated states (the
    start state is always kept)."""
    keep = set(automaton.states)
    if max_depth is not None or min_dialogues is not None:
        keep = {automaton.start}
        frontier = [(automaton.start, 0)]
        while frontier:
            state_id, depth = frontier.pop()
            for target in automaton.states[state_id].transitions.values():
                if target in keep:
                    continue
                if max_depth is not None and depth + 1 > max_depth:
                    continue
                if (
                    min_dialogues is not None
                    and len(automaton.states[target].dialogue_ids) < min_dialogues
                ):
                    continue
                keep.add(target)
                frontier.append((target, depth + 1))

    lines = ["digraph automaton {", "  rankdir=LR;"]
    for state in sorted(automaton.states.values(), key=lambda s: s.id):
        if state.id not in keep:
            continue
        shape = "doublecircle" if state.accept else "circle"
        fill = _ROLE_FILL.get(state.role, "white")
        extra = ", penwidth=2, color=black" if state.id == automaton.start else ""
        lines.append(
            f'  s{state.id} [label="{state.id}", shape={shape}, style=filled, '
            f'fillcolor="{fill}"{extra}];'
        )
    for state in sorted(automaton.states.values(), key=lambda s: s.id):
        if state.id not in keep:
            continue
        for tag, target in state.transitions.items():
            if target not in keep:
                continue
            if tag == EOR:
                lines.append(f"  s{state.id} -> s{target} [style=dashed];")
            else:
                escaped = tag.replace("\\", "\\\\").replace('"', '\\"')
                lines.append(f'  s{state.id} -> s{target} [label="{escaped}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
