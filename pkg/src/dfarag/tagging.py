"""Utterance tagging: normalized tag vocabulary, pluggable taggers, round tables."""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

from .corpus import Corpus, Dialogue, Role, Utterance

# Reserved labels the normalizer must never produce from user text.
EOR = "<eor>"
EMPTY_TURN = "empty-turn"
RESERVED_TAGS = frozenset({EOR, EMPTY_TURN})

MAX_TAG_WORDS = 3

_PUNCT_RE = re.compile(r"[^\w\s-]", re.UNICODE)
_SPLIT_RE = re.compile(r"[\s_]+")


class TagRejected(ValueError):
    """Raised when raw text normalizes to nothing usable as a tag."""


class TaggingError(RuntimeError):
    """Tagger failure; carries the dialogue id and the raw payload when known."""

    def __init__(self, message: str, dialogue_id: int | None = None, raw: str | None = None):
        super().__init__(message)
        self.dialogue_id = dialogue_id
        self.raw = raw


def normalize_tag(raw: str) -> str:
    """Canonicalize a raw tag: lowercase, '#' stripped, punctuation removed,
    whitespace collapsed to '-', capped at three words."""
    text = raw.strip().lstrip("#").lower()
    text = _PUNCT_RE.sub("", text)
    words = [w for w in _SPLIT_RE.split(text) if w]
    if not words:
        raise TagRejected(f"tag normalizes to empty: {raw!r}")
    token = "-".join(words[:MAX_TAG_WORDS]).strip("-")
    if not token or token in RESERVED_TAGS:
        raise TagRejected(f"tag collides with reserved vocabulary: {raw!r}")
    return token


@dataclass(frozen=True)
class TaggerConfig:
    kind: str = "keyword"  # keyword | llm
    lexicon: dict[str, str] = field(default_factory=dict)
    prompt_template_id: str = "compress-dialogue-v1"
    max_tags_per_utterance: int = 4

    def __post_init__(self) -> None:
        if self.kind == "keyword" and not self.lexicon:
            raise ValueError("keyword tagger requires a nonempty lexicon")
        if self.kind not in ("keyword", "llm"):
            raise ValueError(f"unknown tagger kind {self.kind!r}")


class Tagger(Protocol):
    def tag_utterance(self, utterance: Utterance) -> list[str]: ...

    def tag_dialogue(self, dialogue: Dialogue) -> dict[int, list[str]]: ...


def _dedupe_cap(tags: Iterable[str], cap: int) -> list[str]:
    seen: list[str] = []
    for tag in tags:
        if tag not in seen:
            seen.append(tag)
        if len(seen) >= cap:
            break
    return seen


class KeywordTagger:
    """Deterministic lexicon tagger: scans keys in insertion order, matching
    whole words case-insensitively."""

    def __init__(self, config: TaggerConfig):
        if config.kind != "keyword":
            raise ValueError("KeywordTagger requires a keyword config")
        self.config = config
        self._patterns = [
            (re.compile(rf"\b{re.escape(key.lower())}\b", re.IGNORECASE), normalize_tag(value))
            for key, value in config.lexicon.items()
        ]

    def tag_utterance(self, utterance: Utterance) -> list[str]:
        if not utterance.text.strip():
            return [EMPTY_TURN]
        hits = [tag for pattern, tag in self._patterns if pattern.search(utterance.text)]
        return _dedupe_cap(hits, self.config.max_tags_per_utterance)

    def tag_dialogue(self, dialogue: Dialogue) -> dict[int, list[str]]:
        return {i: self.tag_utterance(u) for i, u in enumerate(dialogue.utterances)}


_LINE_RE = re.compile(r"^\s*(\d+)\s+(user|system|agent)\s*:\s*(.+)$", re.IGNORECASE)

TAG_PROMPT_TEMPLATE = """# Task Description

You are helping me compress the following dialog with customer service into the following form:

<id> <User/System>: <compressed phrase>

You will have to follow several principles:
1. Please use words as few as possible, ideally no more than 3 words.
2. The summarization needs to focus on the actual events/issues/queries/solutions.


# Example

Input:
"0 User: What is going on with my keyboard... fix it"
Output:
"0 User: #keyboard #issue"

# Input

{dialogue}
"""


def parse_tagger_output(raw: str, max_tags: int = 4) -> dict[int, list[str]]:
    """Parse completion lines of the form '<id> <User|System>: #t1 #t2 ...'."""
    parsed: dict[int, list[str]] = {}
    for line in raw.splitlines():
        match = _LINE_RE.match(line)
        if not match:
            continue
        index = int(match.group(1))
        tags: list[str] = []
        for chunk in match.group(3).split():
            try:
                tags.append(normalize_tag(chunk))
            except TagRejected:
                continue
        parsed[index] = _dedupe_cap(tags, max_tags)
    if not parsed:
        raise TaggingError("no parseable tag lines in model output", raw=raw)
    return parsed


class LlmTagger:
    """Chat-completion tagger; one request per dialogue, temperature 0.

    Endpoint configured through DFARAG_LLM_BASE_URL / DFARAG_LLM_API_KEY /
    DFARAG_LLM_MODEL.  The HTTP client is injectable for tests.
    """

    def __init__(self, config: TaggerConfig, client=None):
        self.config = config
        self._client = client

    def _complete(self, prompt: str) -> str:
        if self._client is not None:
            return self._client(prompt)
        import httpx

        base_url = os.environ.get("DFARAG_LLM_BASE_URL")
        if not base_url:
            raise TaggingError("DFARAG_LLM_BASE_URL is not configured")
        response = httpx.post(
            f"{base_url.rstrip('/')}/chat/completions",
            headers={"Authorization": f"Bearer {os.environ.get('DFARAG_LLM_API_KEY', '')}"},
            json={
                "model": os.environ.get("DFARAG_LLM_MODEL", ""),
                "temperature": 0,
                "messages": [{"role": "user", "content": prompt}],
            },
            timeout=60.0,
        )
        response.raise_for_status()
        return response.json()["choices"][0]["message"]["content"]

    def tag_dialogue(self, dialogue: Dialogue) -> dict[int, list[str]]:
        lines = "\n".join(
            f"{i} {u.role.value.capitalize()}: {u.text}" for i, u in enumerate(dialogue.utterances)
        )
        try:
            raw = self._complete(TAG_PROMPT_TEMPLATE.format(dialogue=lines))
        except TaggingError:
            raise
        except Exception as exc:
            raise TaggingError(f"tagger transport failure: {exc}", dialogue_id=dialogue.id) from exc
        parsed = parse_tagger_output(raw, self.config.max_tags_per_utterance)
        in_range = {i: tags for i, tags in parsed.items() if 0 <= i < len(dialogue.utterances)}
        result: dict[int, list[str]] = {}
        for i, utt in enumerate(dialogue.utterances):
            if not utt.text.strip():
                result[i] = [EMPTY_TURN]
            else:
                result[i] = in_range.get(i, [])
        return result

    def tag_utterance(self, utterance: Utterance) -> list[str]:
        single = Dialogue(id=-1, utterances=(utterance,))
        return self.tag_dialogue(single)[0]


def make_tagger(config: TaggerConfig, client=None) -> Tagger:
    if config.kind == "keyword":
        return KeywordTagger(config)
    return LlmTagger(config, client=client)


@dataclass(frozen=True)
class RoundTagTable:
    """Per (round, role) map from dialogue id to its unordered tag set."""

    rounds: dict[tuple[int, Role], dict[int, frozenset[str]]]

    def entries(self, round_index: int, role: Role) -> dict[int, frozenset[str]]:
        return self.rounds.get((round_index, role), {})

    def ids_at(self, round_index: int, role: Role) -> set[int]:
        return {i for i, tags in self.entries(round_index, role).items() if tags}

    def all_ids(self) -> set[int]:
        ids: set[int] = set()
        for table in self.rounds.values():
            ids.update(table)
        return ids

    def max_round(self) -> int:
        return max((r for r, _ in self.rounds), default=-1)

    def is_empty(self) -> bool:
        return not any(self.rounds.values())

    def last_stage_of(self, dialogue_id: int) -> tuple[int, Role] | None:
        """The latest (round, role) stage at which this dialogue carries tags."""
        stages = [
            (r, role)
            for (r, role), entries in self.rounds.items()
            if entries.get(dialogue_id)
        ]
        if not stages:
            return None
        return max(stages, key=lambda s: (s[0], 0 if s[1] is Role.USER else 1))

    def to_document(self) -> dict:
        rounds = []
        for (round_index, role) in sorted(self.rounds, key=lambda s: (s[0], s[1].value != "user")):
            entries = self.rounds[(round_index, role)]
            rounds.append(
                {
                    "round": round_index,
                    "role": role.value,
                    "entries": {str(i): sorted(tags) for i, tags in sorted(entries.items())},
                }
            )
        return {"version": 1, "rounds": rounds}

    @classmethod
    def from_document(cls, document: dict) -> "RoundTagTable":
        if document.get("version") != 1:
            raise ValueError(f"unsupported tag table version: {document.get('version')!r}")
        rounds: dict[tuple[int, Role], dict[int, frozenset[str]]] = {}
        for block in document.get("rounds", []):
            key = (int(block["round"]), Role.parse(block["role"]))
            rounds[key] = {
                int(i): frozenset(tags) for i, tags in block.get("entries", {}).items()
            }
        return cls(rounds=rounds)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_document(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RoundTagTable":
        return cls.from_document(json.loads(Path(path).read_text(encoding="utf-8")))


def tag_dialogue_rounds(dialogue: Dialogue, tagger: Tagger) -> dict[tuple[int, Role], frozenset[str]]:
    by_index = tagger.tag_dialogue(dialogue)
    out: dict[tuple[int, Role], frozenset[str]] = {}
    for i, utt in enumerate(dialogue.utterances):
        out[(utt.round, utt.role)] = frozenset(by_index.get(i, []))
    return out


def tag_corpus(corpus: Corpus, tagger: Tagger, skip_errors: bool = False) -> RoundTagTable:
    """Tag every utterance of every dialogue into a (round, role)-keyed table.

    Dialogues are independent; with skip_errors the failures are dropped and
    counted instead of aborting the run.
    """
    rounds: dict[tuple[int, Role], dict[int, frozenset[str]]] = {}
    skipped = 0
    for dialogue in corpus:
        try:
            per_round = tag_dialogue_rounds(dialogue, tagger)
        except TaggingError as exc:
            if skip_errors:
                skipped += 1
                continue
            raise TaggingError(str(exc), dialogue_id=dialogue.id, raw=exc.raw) from exc
        for key, tags in per_round.items():
            rounds.setdefault(key, {})[dialogue.id] = tags
    table = RoundTagTable(rounds=rounds)
    if skipped:
        import logging

        logging.getLogger(__name__).warning("tag_corpus skipped %d failing dialogues", skipped)
    return table
