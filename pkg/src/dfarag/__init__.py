"""Dialogue-flow automaton router with exemplar retrieval for LLM chat agents."""

from .automaton import Automaton, BuildConfig, State, build_automaton, children_tags, step
from .corpus import Corpus, Dialogue, Role, Utterance, load_corpus, normalize_dialogue, split_corpus
from .merging import apply_merges, merge_automaton, plan_merges, similarity
from .persistence import decode_automaton, encode_automaton, export_dot
from .routing import Session, chat_step, compile_prompt, navigate, retrieve_exemplars
from .tagging import RoundTagTable, TaggerConfig, make_tagger, normalize_tag, tag_corpus

__all__ = [
    "Automaton",
    "BuildConfig",
    "Corpus",
    "Dialogue",
    "Role",
    "RoundTagTable",
    "Session",
    "State",
    "TaggerConfig",
    "Utterance",
    "apply_merges",
    "build_automaton",
    "chat_step",
    "children_tags",
    "compile_prompt",
    "decode_automaton",
    "encode_automaton",
    "export_dot",
    "load_corpus",
    "make_tagger",
    "merge_automaton",
    "navigate",
    "normalize_dialogue",
    "normalize_tag",
    "plan_merges",
    "retrieve_exemplars",
    "similarity",
    "split_corpus",
    "step",
    "tag_corpus",
]
