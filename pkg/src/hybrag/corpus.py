"""Benchmark corpora, queries, relevance judgments and the shared tokenizer.

File formats follow the BEIR layout: ``corpus.jsonl`` (``_id``, ``title``,
``text``), ``queries.jsonl`` (``_id``, ``text``) and a ``qrels`` TSV.  QA
question/gold files are JSONL as well (see :func:`load_questions`).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

from .errors import IntegrityError, ParseError

# Letters and digits only: underscores and hyphens are separators.
_WORD_RE = re.compile(r"[^\W_]+")

_QRELS_HEADER_FIELDS = {"query-id", "query_id", "qid", "query"}


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it into Unicode word tokens.

    No stemming and no stopword removal. Punctuation, whitespace and
    underscores separate tokens and never appear in them.

    >>> tokenize("Heart Attack, myocardial-infarction")
    ['heart', 'attack', 'myocardial', 'infarction']
    >>> tokenize("COVID-19")
    ['covid', '19']
    """
    if not text:
        return []
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class Document:
    id: str
    body: str
    title: str = ""

    def __post_init__(self):
        if not self.id:
            raise IntegrityError("document id must be non-empty")
        if not self.body and not self.title:
            raise IntegrityError(f"document {self.id!r} has neither title nor body")

    @property
    def text(self) -> str:
        """Indexable text: title and body joined by a space."""
        return self.title + " " + self.body


@dataclass(frozen=True)
class Query:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise IntegrityError("query id must be non-empty")
        if not self.text or not self.text.strip():
            raise IntegrityError(f"query {self.id!r} has empty text")


@dataclass(frozen=True)
class RelevanceJudgments:
    """Graded judgments: ``entries[query_id][doc_id] -> grade``."""

    entries: Mapping[str, Mapping[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        for qid, docs in self.entries.items():
            for did, grade in docs.items():
                if isinstance(grade, bool) or not isinstance(grade, int):
                    raise IntegrityError(f"grade for ({qid}, {did}) is not an integer: {grade!r}")
                if grade < 0:
                    raise IntegrityError(f"negative grade {grade} for ({qid}, {did})")

    def __contains__(self, query_id: str) -> bool:
        return query_id in self.entries

    def query_ids(self) -> list[str]:
        return sorted(self.entries)

    def grades(self, query_id: str) -> Mapping[str, int]:
        return self.entries.get(query_id, {})

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.entries.get(query_id, {}).get(doc_id, 0)

    def relevant(self, query_id: str) -> set[str]:
        """Doc ids judged relevant (grade >= 1) for ``query_id``."""
        return {d for d, g in self.grades(query_id).items() if g >= 1}


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", path, lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", path, lineno)
            yield lineno, obj


def _require_str(obj: dict, key: str, path: Path, lineno: int, default=None) -> str:
    value = obj.get(key, default)
    if value is None:
        raise ParseError(f"missing field {key!r}", path, lineno)
    if not isinstance(value, str):
        raise ParseError(f"field {key!r} must be a string", path, lineno)
    return value


def load_corpus(path, format: str = "beir_jsonl") -> list[Document]:
    """Load every document of a BEIR ``corpus.jsonl`` in file order."""
    if format != "beir_jsonl":
        raise ValueError(f"unsupported corpus format: {format!r}")
    path = Path(path)
    docs: list[Document] = []
    seen: set[str] = set()
    for lineno, obj in _iter_jsonl(path):
        doc_id = obj.get("_id")
        if isinstance(doc_id, int) and not isinstance(doc_id, bool):
            doc_id = str(doc_id)
        if not isinstance(doc_id, str):
            raise ParseError("missing or non-string field '_id'", path, lineno)
        if doc_id in seen:
            raise IntegrityError(f"{path}:{lineno}: duplicate document id {doc_id!r}")
        seen.add(doc_id)
        title = _require_str(obj, "title", path, lineno, default="")
        body = _require_str(obj, "text", path, lineno, default="")
        try:
            docs.append(Document(id=doc_id, title=title, body=body))
        except IntegrityError as exc:
            raise IntegrityError(f"{path}:{lineno}: {exc}") from None
    return docs


def write_corpus(docs: Sequence[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({"_id": doc.id, "title": doc.title, "text": doc.body}, ensure_ascii=False))
            fh.write("\n")


def load_queries(path) -> list[Query]:
    path = Path(path)
    queries: list[Query] = []
    seen: set[str] = set()
    for lineno, obj in _iter_jsonl(path):
        qid = obj.get("_id", obj.get("id"))
        if isinstance(qid, int) and not isinstance(qid, bool):
            qid = str(qid)
        if not isinstance(qid, str):
            raise ParseError("missing or non-string field '_id'", path, lineno)
        if qid in seen:
            raise IntegrityError(f"{path}:{lineno}: duplicate query id {qid!r}")
        seen.add(qid)
        text = _require_str(obj, "text", path, lineno)
        try:
            queries.append(Query(id=qid, text=text))
        except IntegrityError as exc:
            raise IntegrityError(f"{path}:{lineno}: {exc}") from None
    return queries


def load_qrels(path) -> RelevanceJudgments:
    """Parse a qrels file.

    Accepts the BEIR TSV layout (``query-id  corpus-id  score``, optional
    header) and the 4-column TREC layout (``qid  Q0  docid  grade``); the
    layout is detected per line from the column count.
    """
    path = Path(path)
    entries: dict[str, dict[str, int]] = {}
    first = True
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            cols = line.split()
            if not cols:
                continue
            if first:
                first = False
                if cols[0].lower() in _QRELS_HEADER_FIELDS:
                    continue
            if len(cols) == 3:
                qid, did, raw = cols
            elif len(cols) == 4:
                qid, _, did, raw = cols
            else:
                raise ParseError(f"expected 3 or 4 columns, got {len(cols)}", path, lineno)
            try:
                grade = int(raw)
            except ValueError:
                raise ParseError(f"non-integer relevance grade {raw!r}", path, lineno) from None
            if grade < 0:
                raise IntegrityError(f"{path}:{lineno}: negative relevance grade {grade}")
            per_query = entries.setdefault(qid, {})
            if did in per_query:
                raise IntegrityError(f"{path}:{lineno}: duplicate judgment for ({qid}, {did})")
            per_query[did] = grade
    return RelevanceJudgments(entries)


@dataclass(frozen=True)
class Question:
    """A QA item: question text plus optional answer options."""

    id: str
    text: str
    options: Mapping[str, str] | None = None
    option_set: str = "abcd"


def load_questions(path) -> list[Question]:
    """Read QA questions from JSONL.

    Each line: ``{"id": ..., "question": ..., "options": {"A": ..., ...}?,
    "option_set": "abcd" | "yes_no" | "yes_no_maybe"?}``.  Without options
    and without an explicit option set, ``yes_no_maybe`` is assumed.
    """
    path = Path(path)
    out: list[Question] = []
    seen: set[str] = set()
    for lineno, obj in _iter_jsonl(path):
        qid = obj.get("id", obj.get("_id"))
        if isinstance(qid, int) and not isinstance(qid, bool):
            qid = str(qid)
        if not isinstance(qid, str) or not qid:
            raise ParseError("missing or non-string field 'id'", path, lineno)
        if qid in seen:
            raise IntegrityError(f"{path}:{lineno}: duplicate question id {qid!r}")
        seen.add(qid)
        text = _require_str(obj, "question", path, lineno)
        options = obj.get("options")
        if options is not None:
            if isinstance(options, list):
                options = {chr(ord("A") + i): str(o) for i, o in enumerate(options)}
            elif isinstance(options, dict):
                options = {str(k).upper(): str(v) for k, v in options.items()}
            else:
                raise ParseError("field 'options' must be a list or object", path, lineno)
        option_set = obj.get("option_set") or ("abcd" if options else "yes_no_maybe")
        if option_set not in ("abcd", "yes_no", "yes_no_maybe"):
            raise ParseError(f"unknown option_set {option_set!r}", path, lineno)
        out.append(Question(id=qid, text=text, options=options, option_set=option_set))
    return out


def load_gold(path) -> dict[str, str]:
    """Read gold answers: JSONL lines ``{"id": ..., "answer": ...}``."""
    path = Path(path)
    gold: dict[str, str] = {}
    for lineno, obj in _iter_jsonl(path):
        qid = obj.get("id", obj.get("_id"))
        if isinstance(qid, int) and not isinstance(qid, bool):
            qid = str(qid)
        if not isinstance(qid, str):
            raise ParseError("missing or non-string field 'id'", path, lineno)
        if qid in gold:
            raise IntegrityError(f"{path}:{lineno}: duplicate gold id {qid!r}")
        gold[qid] = _require_str(obj, "answer", path, lineno)
    return gold
