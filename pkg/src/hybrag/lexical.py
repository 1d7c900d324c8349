"""Okapi BM25 over an in-memory inverted index.

Scoring uses IDF(t) = ln((N - n_t + 0.5) / (n_t + 0.5) + 1), which stays
positive for every n_t, and the saturated, length-normalized term frequency
(k1 + 1) f / (k1 (1 - b + b |D| / avgDL) + f).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ._io import write_text
from .corpus import Document, Query, tokenize
from .errors import InputError, IntegrityError, ParseError
from .rerank import RankedList

INDEX_FORMAT = "hybrag-lexical-index"
INDEX_VERSION = 1


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75
    # "sequence": every occurrence of a query token adds a summand; "set": unique tokens only.
    query_terms: str = "sequence"

    def __post_init__(self):
        if not self.k1 >= 0:
            raise InputError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise InputError(f"b must lie in [0, 1], got {self.b}")
        if self.query_terms not in ("sequence", "set"):
            raise InputError(f"query_terms must be 'sequence' or 'set', got {self.query_terms!r}")


@dataclass
class InvertedIndex:
    """Postings plus the collection statistics BM25 needs.

    ``postings[term]`` maps doc id to term frequency, keys in ascending doc
    id order. ``doc_lengths`` is likewise ordered by doc id.
    """

    postings: dict[str, dict[str, int]]
    doc_lengths: dict[str, int]
    params: Bm25Params = field(default_factory=Bm25Params)

    def __post_init__(self):
        self.total_docs = len(self.doc_lengths)
        self.avg_doc_length = (
            sum(self.doc_lengths.values()) / self.total_docs if self.total_docs else 0.0
        )
        self.doc_freq = {t: len(p) for t, p in self.postings.items()}

    def postings_list(self, term: str) -> list[tuple[str, int]]:
        return list(self.postings.get(term, {}).items())

    def check(self) -> None:
        """Raise IntegrityError if any structural invariant is broken."""
        for term, plist in self.postings.items():
            if self.doc_freq.get(term) != len(plist):
                raise IntegrityError(f"doc_freq mismatch for {term!r}")
            for doc_id, tf in plist.items():
                if doc_id not in self.doc_lengths:
                    raise IntegrityError(f"posting for unknown doc {doc_id!r}")
                if tf < 1:
                    raise IntegrityError(f"non-positive tf for ({term!r}, {doc_id!r})")


def build_index(docs: Sequence[Document], params: Bm25Params | None = None) -> InvertedIndex:
    if not docs:
        raise InputError("cannot index an empty corpus")
    params = params or Bm25Params()
    by_id: dict[str, Document] = {}
    for d in docs:
        if d.id in by_id:
            raise IntegrityError(f"duplicate document id {d.id!r}")
        by_id[d.id] = d

    doc_lengths: dict[str, int] = {}
    raw: dict[str, dict[str, int]] = {}
    for doc_id in sorted(by_id):
        tokens = tokenize(by_id[doc_id].text)
        doc_lengths[doc_id] = len(tokens)
        for term, tf in Counter(tokens).items():
            raw.setdefault(term, {})[doc_id] = tf
    # doc ids were visited in sorted order, so each postings dict is already sorted
    postings = {term: raw[term] for term in sorted(raw)}
    return InvertedIndex(postings=postings, doc_lengths=doc_lengths, params=params)


def idf(index: InvertedIndex, term: str) -> float:
    n = index.doc_freq.get(term, 0)
    return math.log((index.total_docs - n + 0.5) / (n + 0.5) + 1.0)


def term_weight(tf: int, doc_len: int, avg_doc_len: float, params: Bm25Params) -> float:
    k1, b = params.k1, params.b
    return (k1 + 1.0) * tf / (k1 * (1.0 - b + b * doc_len / avg_doc_len) + tf)


def _query_terms(query, params: Bm25Params) -> list[str]:
    tokens = tokenize(query.text) if isinstance(query, Query) else list(query)
    if params.query_terms == "set":
        return list(dict.fromkeys(tokens))
    return tokens


def bm25_score(index: InvertedIndex, params: Bm25Params | None, query: Iterable[str] | Query,
               doc_id: str) -> float:
    """BM25 of one document; ``query`` is a token sequence or a Query."""
    params = params or index.params
    if doc_id not in index.doc_lengths:
        raise InputError(f"unknown doc id {doc_id!r}")
    dl = index.doc_lengths[doc_id]
    score = 0.0
    for term in _query_terms(query, params):
        tf = index.postings.get(term, {}).get(doc_id, 0)
        if tf == 0:
            continue
        score += idf(index, term) * term_weight(tf, dl, index.avg_doc_length, params)
    return score


def lexical_search(index: InvertedIndex, params: Bm25Params | None, query: Query | Sequence[str],
                   k: int, query_id: str | None = None) -> RankedList:
    """Top-``k`` documents containing at least one query term, by BM25."""
    if k < 1:
        raise InputError("k must be >= 1")
    params = params or index.params
    qid = query_id if query_id is not None else (query.id if isinstance(query, Query) else "")
    avgdl = index.avg_doc_length
    scores: dict[str, float] = {}
    idf_cache: dict[str, float] = {}
    # Term-at-a-time, in query order: per-document sums are accumulated in the
    # same order bm25_score uses, so both paths give bit-identical scores.
    for term in _query_terms(query, params):
        plist = index.postings.get(term)
        if not plist:
            continue
        w = idf_cache.get(term)
        if w is None:
            w = idf_cache[term] = idf(index, term)
        for doc_id, tf in plist.items():
            scores[doc_id] = scores.get(doc_id, 0.0) + w * term_weight(
                tf, index.doc_lengths[doc_id], avgdl, params
            )
    return RankedList.from_scores(qid, scores.items(), k)


def save_index(index: InvertedIndex, path) -> None:
    payload = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "params": {"k1": index.params.k1, "b": index.params.b, "query_terms": index.params.query_terms},
        "doc_lengths": index.doc_lengths,
        "postings": {t: [[d, tf] for d, tf in p.items()] for t, p in index.postings.items()},
    }
    write_text(path, json.dumps(payload, ensure_ascii=False, separators=(",", ":")) + "\n")


def load_index(path) -> InvertedIndex:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid index JSON ({exc.msg})", path) from None
    if payload.get("format") != INDEX_FORMAT:
        raise ParseError("not a lexical index file", path)
    if payload.get("version") != INDEX_VERSION:
        raise ParseError(f"unsupported index version {payload.get('version')!r}", path)
    index = InvertedIndex(
        postings={t: {d: tf for d, tf in p} for t, p in payload["postings"].items()},
        doc_lengths=dict(payload["doc_lengths"]),
        params=Bm25Params(**payload["params"]),
    )
    index.check()
    return index
