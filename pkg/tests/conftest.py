import json
from pathlib import Path

import pytest

from dfarag.automaton import BuildConfig, build_automaton
from dfarag.corpus import Corpus, Role, load_corpus
from dfarag.tagging import KeywordTagger, RoundTagTable, TaggerConfig, tag_corpus

DATA_DIR = Path(__file__).parent / "data"

TOY_LEXICON = {
    "hi": "greet",
    "battery": "battery",
    "screen": "screen",
    "refund": "refund",
    "link": "link",
    "apologies": "apology",
}


@pytest.fixture(scope="session")
def toy_lexicon() -> dict[str, str]:
    return dict(TOY_LEXICON)


@pytest.fixture(scope="session")
def toy_tagger(toy_lexicon) -> KeywordTagger:
    return KeywordTagger(TaggerConfig(kind="keyword", lexicon=toy_lexicon))


@pytest.fixture(scope="session")
def toy_corpus() -> Corpus:
    return load_corpus(DATA_DIR / "toy_corpus.jsonl")


@pytest.fixture(scope="session")
def toy_table(toy_corpus, toy_tagger) -> RoundTagTable:
    return tag_corpus(toy_corpus, toy_tagger)


@pytest.fixture(scope="session")
def golden_automaton(toy_table):
    return build_automaton(toy_table, BuildConfig(tau=0))


@pytest.fixture(scope="session")
def canned_responses() -> dict[str, str]:
    return json.loads((DATA_DIR / "canned_responses.json").read_text(encoding="utf-8"))


def cluster_corpus() -> tuple[Corpus, dict[str, str]]:
    """30 dialogues in 3 disjoint topic clusters, for retrieval-precision tests."""
    from dfarag.corpus import Dialogue, Utterance, normalize_dialogue

    topics = [
        ("billing", "I have a billing problem with my invoice", "billing is being checked"),
        ("shipping", "my shipping is delayed again", "shipping update on the way"),
        ("login", "cannot login to my account", "login reset link sent"),
    ]
    lexicon = {
        "billing": "billing",
        "invoice": "invoice",
        "shipping": "shipping",
        "delayed": "delay",
        "login": "login",
        "reset": "reset",
        "checked": "checked",
        "update": "update",
        "sent": "sent",
    }
    dialogues = []
    did = 0
    for _topic, user_text, system_text in topics:
        for _ in range(10):
            raw = Dialogue(
                id=did,
                utterances=(
                    Utterance(role=Role.USER, text=user_text, round=0),
                    Utterance(role=Role.SYSTEM, text=system_text, round=0),
                ),
            )
            dialogues.append(normalize_dialogue(raw))
            did += 1
    return Corpus(dialogues=tuple(dialogues), source="synthetic-clusters"), lexicon
