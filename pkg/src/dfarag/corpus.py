"""Dialogue corpus ingestion, validation, and normalization."""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator


class Role(str, enum.Enum):
    USER = "user"
    SYSTEM = "system"

    @classmethod
    def parse(cls, raw: str) -> "Role":
        key = raw.strip().lower()
        if key == "agent":
            key = "system"
        try:
            return cls(key)
        except ValueError:
            raise CorpusError(f"unknown role {raw!r}") from None


class CorpusError(ValueError):
    """Raised when a dataset fails to parse or validate."""


@dataclass(frozen=True)
class Utterance:
    role: Role
    text: str
    round: int
    synthetic: bool = False


@dataclass(frozen=True)
class Dialogue:
    id: int
    utterances: tuple[Utterance, ...]

    def __len__(self) -> int:
        return len(self.utterances)

    def transcript_lines(self) -> list[str]:
        return [f"{u.round} {u.role.value.upper()}: {u.text}" for u in self.utterances]


@dataclass(frozen=True)
class Corpus:
    dialogues: tuple[Dialogue, ...]
    source: str = ""
    notes: str = ""

    def __post_init__(self) -> None:
        ids = [d.id for d in self.dialogues]
        if len(ids) != len(set(ids)):
            raise CorpusError("duplicate dialogue ids in corpus")

    def __len__(self) -> int:
        return len(self.dialogues)

    def __iter__(self) -> Iterator[Dialogue]:
        return iter(self.dialogues)

    def ids(self) -> list[int]:
        return [d.id for d in self.dialogues]

    def get(self, dialogue_id: int) -> Dialogue:
        for d in self.dialogues:
            if d.id == dialogue_id:
                return d
        raise KeyError(dialogue_id)


def _assign_rounds(utterances: Iterable[tuple[Role, str, bool]]) -> tuple[Utterance, ...]:
    """Number alternating turns so the k-th user and k-th system turn share round k."""
    out: list[Utterance] = []
    counts = {Role.USER: 0, Role.SYSTEM: 0}
    for role, text, synthetic in utterances:
        out.append(Utterance(role=role, text=text, round=counts[role], synthetic=synthetic))
        counts[role] += 1
    return tuple(out)


def normalize_dialogue(raw: Dialogue, first_role: Role = Role.USER) -> Dialogue:
    """Repair a dialogue so roles strictly alternate starting with first_role.

    Consecutive same-role utterances are concatenated with a single space.  A
    dialogue opening with the wrong role gets a synthetic empty first turn.
    """
    if not raw.utterances:
        raise CorpusError(f"dialogue {raw.id} has no utterances")
    merged: list[tuple[Role, str, bool]] = []
    for utt in raw.utterances:
        if merged and merged[-1][0] == utt.role:
            role, text, synth = merged[-1]
            joined = f"{text} {utt.text}".strip()
            merged[-1] = (role, joined, synth and utt.synthetic)
        else:
            merged.append((utt.role, utt.text, utt.synthetic))
    if merged[0][0] != first_role:
        merged.insert(0, (first_role, "", True))
    return Dialogue(id=raw.id, utterances=_assign_rounds(merged))


def _parse_jsonl(path: Path, first_role: Role) -> list[Dialogue]:
    dialogues: list[Dialogue] = []
    explicit_ids: set[int] = set()
    saw_explicit = False
    records: list[tuple[int | None, list[tuple[Role, str]]]] = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict) or "turns" not in obj:
                raise CorpusError(f"{path}:{lineno}: expected object with a 'turns' field")
            turns: list[tuple[Role, str]] = []
            for turn in obj["turns"]:
                text = str(turn.get("text", "")).strip()
                if not text:
                    raise CorpusError(f"{path}:{lineno}: empty utterance text")
                turns.append((Role.parse(str(turn.get("role", ""))), text))
            if not turns:
                raise CorpusError(f"{path}:{lineno}: dialogue has no turns")
            explicit = obj.get("id")
            if explicit is not None:
                explicit = int(explicit)
                if explicit in explicit_ids:
                    raise CorpusError(f"{path}:{lineno}: duplicate dialogue id {explicit}")
                explicit_ids.add(explicit)
                saw_explicit = True
            records.append((explicit, turns))
    for index, (explicit, turns) in enumerate(records):
        did = explicit if saw_explicit and explicit is not None else index
        raw = Dialogue(
            id=did,
            utterances=tuple(Utterance(role=r, text=t, round=0) for r, t in turns),
        )
        dialogues.append(normalize_dialogue(raw, first_role=first_role))
    return dialogues


def _parse_transcript(path: Path, first_role: Role) -> list[Dialogue]:
    """Plain transcripts: 'role: text' lines, dialogues separated by blank lines."""
    dialogues: list[Dialogue] = []
    turns: list[tuple[Role, str]] = []

    def flush() -> None:
        nonlocal turns
        if turns:
            raw = Dialogue(
                id=len(dialogues),
                utterances=tuple(Utterance(role=r, text=t, round=0) for r, t in turns),
            )
            dialogues.append(normalize_dialogue(raw, first_role=first_role))
            turns = []

    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                flush()
                continue
            if ":" not in stripped:
                raise CorpusError(f"{path}:{lineno}: expected 'role: text'")
            role_raw, text = stripped.split(":", 1)
            text = text.strip()
            if not text:
                raise CorpusError(f"{path}:{lineno}: empty utterance text")
            turns.append((Role.parse(role_raw), text))
    flush()
    return dialogues


def load_corpus(
    path: str | Path,
    format: str = "jsonl",
    first_role: Role = Role.USER,
    source: str = "",
) -> Corpus:
    path = Path(path)
    if format == "jsonl":
        dialogues = _parse_jsonl(path, first_role)
    elif format == "plain-transcript":
        dialogues = _parse_transcript(path, first_role)
    else:
        raise CorpusError(f"unknown corpus format {format!r}")
    return Corpus(dialogues=tuple(dialogues), source=source or path.name)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back out as jsonl; load_corpus(save_corpus(c)) == c."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for dialogue in corpus:
            record = {
                "id": dialogue.id,
                "turns": [
                    {"role": u.role.value, "text": u.text} for u in dialogue.utterances if not (u.synthetic and not u.text)
                ],
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def split_corpus(corpus: Corpus, test_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Seeded disjoint train/test partition; same seed gives the same split."""
    if not 0.0 <= test_fraction <= 1.0:
        raise ValueError(f"test_fraction out of range: {test_fraction}")
    n_test = round(len(corpus) * test_fraction)
    rng = random.Random(seed)
    test_ids = set(rng.sample(corpus.ids(), n_test)) if n_test else set()
    train = tuple(d for d in corpus if d.id not in test_ids)
    test = tuple(d for d in corpus if d.id in test_ids)
    meta = {"source": corpus.source, "notes": corpus.notes}
    return (
        Corpus(dialogues=train, **meta),
        Corpus(dialogues=test, **meta),
    )
