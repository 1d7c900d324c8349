"""Ranked result lists, lexical/semantic fusion, and TREC run files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ._io import atomic_open
from .errors import InputError, IntegrityError, ParseError


@dataclass(frozen=True)
class RankedEntry:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankedList:
    query_id: str
    entries: tuple[RankedEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        prev = None
        for i, e in enumerate(self.entries, start=1):
            if e.rank != i:
                raise IntegrityError(f"rank {e.rank} at position {i} for query {self.query_id!r}")
            if e.doc_id in seen:
                raise IntegrityError(f"duplicate doc {e.doc_id!r} in ranking for {self.query_id!r}")
            if prev is not None and e.score > prev:
                raise IntegrityError(f"scores increase at rank {i} for query {self.query_id!r}")
            seen.add(e.doc_id)
            prev = e.score

    @classmethod
    def from_scores(cls, query_id: str, scored: Iterable[tuple[str, float]], k: int | None = None,
                    key=None) -> "RankedList":
        """Sort (doc, score) pairs by score descending, ties by ascending doc id.

        ``key`` overrides the sort key; it receives a ``(doc_id, score)`` pair.
        """
        if key is None:
            key = lambda pair: (-pair[1], pair[0])  # noqa: E731
        ordered = sorted(scored, key=key)
        if k is not None:
            ordered = ordered[:k]
        return cls(query_id, tuple(RankedEntry(d, float(s), r) for r, (d, s) in enumerate(ordered, start=1)))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]

    def truncate(self, k: int) -> "RankedList":
        return RankedList(self.query_id, self.entries[:k])


@dataclass(frozen=True)
class FusionStrategy:
    kind: str = "weighted"
    alpha: float | None = 0.7
    rrf_k: float | None = None

    def __post_init__(self):
        if self.kind not in ("semantic_only", "lexical_only", "weighted", "rrf"):
            raise InputError(f"unknown fusion kind {self.kind!r}")
        if (self.alpha is not None) != (self.kind == "weighted"):
            raise InputError("alpha must be given exactly when kind == 'weighted'")
        if (self.rrf_k is not None) != (self.kind == "rrf"):
            raise InputError("rrf_k must be given exactly when kind == 'rrf'")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise InputError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.rrf_k is not None and not self.rrf_k > 0:
            raise InputError(f"rrf_k must be positive, got {self.rrf_k}")

    @classmethod
    def weighted(cls, alpha: float = 0.7) -> "FusionStrategy":
        return cls("weighted", alpha=alpha)

    @classmethod
    def rrf(cls, rrf_k: float = 60.0) -> "FusionStrategy":
        return cls("rrf", alpha=None, rrf_k=rrf_k)

    @classmethod
    def semantic_only(cls) -> "FusionStrategy":
        return cls("semantic_only", alpha=None)

    @classmethod
    def lexical_only(cls) -> "FusionStrategy":
        return cls("lexical_only", alpha=None)


def _minmax(ranked: RankedList) -> dict[str, float]:
    if not ranked.entries:
        return {}
    scores = [e.score for e in ranked.entries]
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return {e.doc_id: 1.0 for e in ranked.entries}
    span = hi - lo
    return {e.doc_id: (e.score - lo) / span for e in ranked.entries}


def fuse(lex: RankedList, sem: RankedList, strategy: FusionStrategy, k: int) -> RankedList:
    """Merge a lexical and a semantic ranking for the same query into one list of at most ``k``.

    ``weighted`` min-max normalizes each list on its own and mixes them as
    ``alpha * semantic + (1 - alpha) * lexical``; a document missing from a
    list gets 0 from it. Equal fused scores are ordered by weighted source
    coverage (so at ``alpha == 1`` documents the semantic list never saw
    come last), then by doc id. ``rrf`` sums ``1 / (rrf_k + rank)`` over
    the lists a document appears in.
    """
    if lex.query_id != sem.query_id:
        raise InputError(f"query id mismatch: {lex.query_id!r} vs {sem.query_id!r}")
    if k < 1:
        raise InputError("k must be >= 1")
    qid = lex.query_id

    if strategy.kind == "semantic_only":
        return sem.truncate(k)
    if strategy.kind == "lexical_only":
        return lex.truncate(k)

    if strategy.kind == "rrf":
        fused: dict[str, float] = {}
        for source in (lex, sem):
            for e in source.entries:
                fused[e.doc_id] = fused.get(e.doc_id, 0.0) + 1.0 / (strategy.rrf_k + e.rank)
        return RankedList.from_scores(qid, fused.items(), k)

    alpha = strategy.alpha
    lex_norm = _minmax(lex)
    sem_norm = _minmax(sem)
    coverage: dict[str, float] = {}
    fused = {}
    for doc in lex_norm.keys() | sem_norm.keys():
        fused[doc] = alpha * sem_norm.get(doc, 0.0) + (1.0 - alpha) * lex_norm.get(doc, 0.0)
        coverage[doc] = alpha * (doc in sem_norm) + (1.0 - alpha) * (doc in lex_norm)
    return RankedList.from_scores(
        qid, fused.items(), k, key=lambda pair: (-pair[1], -coverage[pair[0]], pair[0])
    )


def write_run(runs: Sequence[RankedList], path, tag: str = "hybrag") -> None:
    """Write rankings as a TREC run file: ``qid Q0 docid rank score tag``."""
    with atomic_open(path) as fh:
        for ranked in runs:
            for e in ranked.entries:
                fh.write(f"{ranked.query_id} Q0 {e.doc_id} {e.rank} {e.score!r} {tag}\n")


def format_run_lines(runs: Sequence[RankedList], tag: str = "hybrag") -> str:
    return "".join(
        f"{r.query_id} Q0 {e.doc_id} {e.rank} {e.score!r} {tag}\n" for r in runs for e in r.entries
    )


def read_run(path) -> dict[str, RankedList]:
    """Parse a TREC run file into rankings keyed by query id.

    Each query's lines are re-sorted by score descending, ties by the file's
    rank column; repeated (query, doc) lines keep their first occurrence.
    """
    path = Path(path)
    rows: dict[str, list[tuple[float, int, str]]] = {}
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            cols = line.split()
            if not cols:
                continue
            if len(cols) < 5:
                raise ParseError(f"expected at least 5 columns, got {len(cols)}", path, lineno)
            qid, _, did, rank, score = cols[:5]
            try:
                rank_i = int(rank)
                score_f = float(score)
            except ValueError:
                raise ParseError("rank must be an integer and score a number", path, lineno) from None
            if (qid, did) in seen:
                continue
            seen.add((qid, did))
            rows.setdefault(qid, []).append((score_f, rank_i, did))
    out = {}
    for qid, items in rows.items():
        items.sort(key=lambda t: (-t[0], t[1]))
        out[qid] = RankedList(qid, tuple(RankedEntry(d, s, i) for i, (s, _, d) in enumerate(items, start=1)))
    return out
