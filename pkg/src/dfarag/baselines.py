"""Exemplar-selection baselines: random sampling, BM25 sparse retrieval, and a
pluggable embedding retriever."""

from __future__ import annotations

import math
import random
import re
from collections import Counter
from dataclasses import dataclass
from typing import Protocol, Sequence

from .corpus import Corpus


class UnsupportedStrategyError(RuntimeError):
    """Raised when a strategy needs an external client that is not configured."""


_TOKEN_CLEAN_RE = re.compile(r"[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Shared query/index normalizer: lowercase, punctuation stripped,
    whitespace split."""
    return _TOKEN_CLEAN_RE.sub(" ", text.lower()).split()


def retrieve_random(corpus: Corpus, k: int, seed: int) -> list[int]:
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = corpus.ids()
    if not ids:
        return []
    if len(ids) <= k:
        return sorted(ids)
    return sorted(random.Random(seed).sample(ids, k))


@dataclass
class Bm25Index:
    doc_term_counts: dict[int, Counter]
    doc_lengths: dict[int, int]
    doc_freq: Counter
    n_docs: int
    avg_doc_length: float
    k1: float = 1.2
    b: float = 0.75

    @classmethod
    def build(cls, corpus: Corpus, k1: float = 1.2, b: float = 0.75) -> "Bm25Index":
        """Index each dialogue as one document (all utterances concatenated)."""
        doc_term_counts: dict[int, Counter] = {}
        doc_lengths: dict[int, int] = {}
        doc_freq: Counter = Counter()
        for dialogue in corpus:
            tokens = tokenize(" ".join(u.text for u in dialogue.utterances))
            doc_term_counts[dialogue.id] = Counter(tokens)
            doc_lengths[dialogue.id] = len(tokens)
            doc_freq.update(set(tokens))
        n = len(doc_term_counts)
        total = sum(doc_lengths.values())
        return cls(
            doc_term_counts=doc_term_counts,
            doc_lengths=doc_lengths,
            doc_freq=doc_freq,
            n_docs=n,
            avg_doc_length=total / n if n else 0.0,
            k1=k1,
            b=b,
        )

    def idf(self, term: str) -> float:
        df = self.doc_freq[term]
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def score(self, doc_id: int, query_terms: Sequence[str]) -> float:
        counts = self.doc_term_counts[doc_id]
        length = self.doc_lengths[doc_id]
        norm = self.k1 * (1.0 - self.b + self.b * length / self.avg_doc_length) if self.avg_doc_length else 0.0
        total = 0.0
        for term in query_terms:
            tf = counts[term]
            if tf == 0:
                continue
            total += self.idf(term) * tf * (self.k1 + 1.0) / (tf + norm)
        return total


def bm25_retrieve(index: Bm25Index, query: str, k: int) -> list[tuple[int, float]]:
    """Top-k dialogues by BM25 score, descending, ties by ascending id.
    Zero-scoring documents are omitted."""
    terms = tokenize(query)
    if not terms:
        return []
    scored = [
        (doc_id, index.score(doc_id, terms))
        for doc_id in index.doc_term_counts
    ]
    scored = [(doc_id, s) for doc_id, s in scored if s > 0.0]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


class EmbeddingClient(Protocol):
    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def embedding_retrieve(
    client: EmbeddingClient | None, corpus: Corpus, query: str, k: int
) -> list[int]:
    """Cosine top-k over per-dialogue embeddings; needs a configured client."""
    if client is None:
        raise UnsupportedStrategyError("no embedding client configured")
    texts = [" ".join(u.text for u in d.utterances) for d in corpus]
    vectors = client.embed(texts)
    (query_vec,) = client.embed([query])
    scored = [
        (dialogue.id, _cosine(query_vec, vec))
        for dialogue, vec in zip(corpus, vectors)
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return [doc_id for doc_id, _ in scored[:k]]
