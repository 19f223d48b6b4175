"""Inference-time routing: navigate the automaton on the user's tags, retrieve
exemplar dialogues from the reached state, and compile the generation prompt."""

from __future__ import annotations

import json
import random
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

from .automaton import Automaton
from .corpus import Corpus, Dialogue, Role, Utterance
from .tagging import EOR, Tagger


class RoutingError(RuntimeError):
    pass


@dataclass(frozen=True)
class NavigationResult:
    state: int
    consumed: tuple[str, ...]
    matched: bool
    path: tuple[int, ...]


@dataclass(frozen=True)
class ExemplarSet:
    dialogue_ids: tuple[int, ...]
    source_state: int


@dataclass(frozen=True)
class PromptBundle:
    text: str
    exemplar_transcripts: tuple[str, ...]
    partial_transcript: str
    exemplar_ids: tuple[int, ...]


def navigate(automaton: Automaton, from_state: int, tags: Iterable[str]) -> NavigationResult:
    """Walk the automaton greedily over the given tag set.

    An available round-delimiter edge is taken first (the new turn belongs to
    the next conversational round).  Then, while any remaining tag has a
    defined transition, follow the one whose target tracks the most dialogues,
    ties broken lexicographically.  With nothing consumable the state stays at
    the post-delimiter position, which doubles as the fallback context.
    """
    current = automaton.state(from_state)
    path = [current.id]
    remaining = set(tags)
    if not remaining:
        return NavigationResult(state=current.id, consumed=(), matched=True, path=tuple(path))
    if EOR in current.transitions:
        current = automaton.state(current.transitions[EOR])
        path.append(current.id)
    consumed: list[str] = []
    while True:
        options = [t for t in remaining if t in current.transitions and t != EOR]
        if not options:
            break
        options.sort(key=lambda t: (-len(automaton.state(current.transitions[t]).dialogue_ids), t))
        tag = options[0]
        current = automaton.state(current.transitions[tag])
        path.append(current.id)
        consumed.append(tag)
        remaining.discard(tag)
    return NavigationResult(
        state=current.id,
        consumed=tuple(consumed),
        matched=not remaining,
        path=tuple(path),
    )


def retrieve_exemplars(
    automaton: Automaton,
    state: int,
    corpus: Corpus | None,
    k: int,
    seed: int,
    deterministic: bool = False,
    path: Iterable[int] | None = None,
) -> ExemplarSet:
    """Sample up to k tracked dialogue ids from a state, seeded.

    A state tracking nothing falls back to the nearest ancestor on the
    recorded path (ultimately the start state) that tracks dialogues.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    source = automaton.state(state)
    if not source.dialogue_ids and path is not None:
        for ancestor in reversed(list(path)):
            if automaton.state(ancestor).dialogue_ids:
                source = automaton.state(ancestor)
                break
    if not source.dialogue_ids:
        source = automaton.state(automaton.start)
    ids = sorted(source.dialogue_ids)
    if len(ids) > k:
        if deterministic:
            ids = ids[:k]
        else:
            ids = sorted(random.Random(seed).sample(ids, k))
    return ExemplarSet(dialogue_ids=tuple(ids), source_state=source.id)


GENERATION_PROMPT_TEMPLATE = """# Task Description
You are a helpful service agent. Please help me fill in the system response in a dialogue.
Please note that key information is encoded in the dialogue.

The dialogue is with the format:

[ID] [USER/SYSTEM]: [UTTERANCE]

Here is a list of related example dialogues you can use for reference.

{examples}

# Remarks:

1. Please directly generate the completed dialogue according to the format in the example.
2. (**IMPORTANT**) Please make sure the generated utterance ID is consistent with the original input!

# Dialogue to complete

{partial}
"""


def compile_prompt(exemplars: ExemplarSet, partial: Dialogue, corpus: Corpus) -> PromptBundle:
    """Render the in-context-learning prompt: numbered exemplar transcripts in
    retrieval order, then the partial dialogue awaiting its system turn."""
    transcripts = []
    for dialogue_id in exemplars.dialogue_ids:
        try:
            dialogue = corpus.get(dialogue_id)
        except KeyError:
            raise RoutingError(f"exemplar dialogue {dialogue_id} not found in corpus") from None
        transcripts.append("\n".join(dialogue.transcript_lines()))
    partial_text = "\n".join(partial.transcript_lines())
    text = GENERATION_PROMPT_TEMPLATE.format(
        examples="\n\n".join(transcripts),
        partial=partial_text,
    )
    return PromptBundle(
        text=text,
        exemplar_transcripts=tuple(transcripts),
        partial_transcript=partial_text,
        exemplar_ids=exemplars.dialogue_ids,
    )


class Generator(Protocol):
    def generate(self, bundle: PromptBundle, navigation: NavigationResult) -> str: ...


class CannedGenerator:
    """Deterministic test generator keyed by the routed state id."""

    def __init__(self, responses: dict[str, str], default: str = "How can I help you?"):
        self.responses = responses
        self.default = default

    @classmethod
    def from_file(cls, path: str | Path, default: str = "How can I help you?") -> "CannedGenerator":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")), default=default)

    def generate(self, bundle: PromptBundle, navigation: NavigationResult) -> str:
        return self.responses.get(str(navigation.state), self.default)


class EchoGenerator:
    """Parrots the exemplar ids back; handy for prompt plumbing checks."""

    def generate(self, bundle: PromptBundle, navigation: NavigationResult) -> str:
        return f"[echo state={navigation.state} exemplars={list(bundle.exemplar_ids)}]"


@dataclass
class Session:
    automaton: Automaton
    corpus: Corpus
    seed: int = 0
    exemplar_k: int = 5
    deterministic: bool = False
    id: str = field(default_factory=lambda: uuid.uuid4().hex)
    current: int = -1
    last_valid: int = -1
    history: list[tuple[str, str, tuple[str, ...], int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.exemplar_k < 1:
            raise ValueError("exemplar_k must be >= 1")
        if self.current < 0:
            self.current = self.automaton.start
        if self.last_valid < 0:
            self.last_valid = self.automaton.start

    def _partial_dialogue(self, user_text: str) -> Dialogue:
        turns: list[Utterance] = []
        counts = {Role.USER: 0, Role.SYSTEM: 0}
        for role_name, text, _tags, _state in self.history:
            role = Role(role_name)
            turns.append(Utterance(role=role, text=text, round=counts[role]))
            counts[role] += 1
        turns.append(Utterance(role=Role.USER, text=user_text, round=counts[Role.USER]))
        return Dialogue(id=-1, utterances=tuple(turns))


def chat_step(
    session: Session,
    user_text: str,
    tagger: Tagger,
    generator: Generator,
) -> tuple[str, NavigationResult, ExemplarSet]:
    """One full routing cycle: tag, navigate, retrieve, prompt, generate.

    The session is only advanced after the generator succeeds, so a transport
    failure leaves it untouched.
    """
    partial = session._partial_dialogue(user_text)
    user_turn = partial.utterances[-1]
    tags = tuple(tagger.tag_utterance(user_turn))
    if not tags and user_text.strip():
        # Out-of-domain turn: nothing recognizable in the text.  Stay on the
        # most recent valid state and flag the turn as a fallback.
        fallback = session.last_valid
        nav = NavigationResult(state=fallback, consumed=(), matched=False, path=(fallback,))
    else:
        nav = navigate(session.automaton, session.current, tags)
    exemplars = retrieve_exemplars(
        session.automaton,
        nav.state,
        session.corpus,
        k=session.exemplar_k,
        seed=session.seed,
        deterministic=session.deterministic,
        path=nav.path,
    )
    bundle = compile_prompt(exemplars, partial, session.corpus)
    response = generator.generate(bundle, nav)

    session.history.append((Role.USER.value, user_text, tags, nav.state))
    session.history.append((Role.SYSTEM.value, response, (), nav.state))
    session.current = nav.state
    if nav.consumed:
        session.last_valid = nav.state
    return response, nav, exemplars
