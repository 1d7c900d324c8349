"""Retrieve -> prompt -> generate -> filter orchestration used by the CLI."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._io import write_json
from .config import RunConfig
from .corpus import Document, Query, Question
from .errors import ConfigError, EmptyAnswerError, HybragError, InputError, TransportError
from .lexical import Bm25Params, InvertedIndex, build_index, lexical_search, load_index, save_index
from .ragen.generate import (
    GeneratedAnswer,
    confidence_filter,
    generate,
    run_bounded,
    try_parse_closed_answer,
)
from .ragen.profiles import GenerationProfile, get_profile
from .ragen.prompt import PromptBundle, build_prompt
from .rerank import FusionStrategy, RankedList, fuse
from .semantic import (
    VectorIndex,
    build_vector_index,
    load_vector_index,
    make_encoder,
    save_vector_index,
    semantic_search,
)

log = logging.getLogger(__name__)

LEXICAL_FILE = "lexical.json"
VECTOR_FILE = "vectors.npz"
META_FILE = "meta.json"


def encoder_from_config(cfg: RunConfig):
    e = cfg.encoder
    if e.kind == "local_test":
        return make_encoder("local_test", e.dim)
    if not e.endpoint or not e.model:
        raise ConfigError("encoder.endpoint and encoder.model are required for kind 'remote_api'")
    return make_encoder(
        "remote_api", e.dim, endpoint=e.endpoint, model=e.model, api_key_env=e.api_key_env,
        batch_size=e.batch_size, max_in_flight=e.max_in_flight, timeout=e.timeout,
        retries=e.retries, cache_dir=e.cache_dir,
    )


def index_exists(index_dir: Path) -> bool:
    return any((Path(index_dir) / f).exists() for f in (LEXICAL_FILE, VECTOR_FILE, META_FILE))


def build_indexes(docs: Sequence[Document], index_dir, params: Bm25Params, encoder=None,
                  lexical: bool = True, semantic: bool = True, batch_size: int = 64) -> dict:
    """Build and persist the requested indexes; returns the summary written to meta.json."""
    index_dir = Path(index_dir)
    index_dir.mkdir(parents=True, exist_ok=True)
    summary: dict = {"num_docs": len(docs)}
    if lexical:
        lex = build_index(docs, params)
        save_index(lex, index_dir / LEXICAL_FILE)
        summary["lexical"] = {
            "total_docs": lex.total_docs,
            "avg_doc_length": lex.avg_doc_length,
            "vocabulary": len(lex.postings),
            "k1": params.k1,
            "b": params.b,
        }
    if semantic:
        vec = build_vector_index(encoder, docs, batch_size=batch_size)
        save_vector_index(vec, index_dir / VECTOR_FILE)
        summary["semantic"] = {"encoder": encoder.kind, "dim": vec.dim, "entries": len(vec)}
    write_json(index_dir / META_FILE, summary)
    return summary


@dataclass
class Retriever:
    lexical: InvertedIndex | None = None
    vectors: VectorIndex | None = None
    encoder: object = None
    params: Bm25Params = field(default_factory=Bm25Params)
    fusion: FusionStrategy = field(default_factory=FusionStrategy)
    depth: int = 100

    @classmethod
    def from_config(cls, cfg: RunConfig, need_lexical: bool = True, need_semantic: bool = True) -> "Retriever":
        index_dir = Path(cfg.index.dir)
        lex = vec = enc = None
        if need_lexical:
            p = index_dir / LEXICAL_FILE
            if not p.exists():
                raise ConfigError(f"lexical index not found: {p} (run 'hybrag index' first)")
            lex = load_index(p)
        if need_semantic:
            p = index_dir / VECTOR_FILE
            if not p.exists():
                raise ConfigError(f"vector index not found: {p} (run 'hybrag index' first)")
            vec = load_vector_index(p)
            enc = encoder_from_config(cfg)
            if vec.dim != enc.dim:
                raise ConfigError(f"vector index dim {vec.dim} != encoder dim {enc.dim}")
        return cls(lexical=lex, vectors=vec, encoder=enc, params=cfg.bm25.params(),
                   fusion=cfg.fusion.strategy(), depth=cfg.fusion.depth)

    def lexical_ranking(self, query: Query, k: int) -> RankedList:
        return lexical_search(self.lexical, self.params, query, k)

    def semantic_ranking(self, query: Query, k: int) -> RankedList:
        vec = self.encoder.encode(query.text)
        if not np.any(vec):
            return RankedList(query.id)
        return semantic_search(self.vectors, vec, k, query_id=query.id)

    def search(self, query: Query, k: int, mode: str = "hybrid") -> RankedList:
        if k < 1:
            raise InputError("k must be >= 1")
        if mode == "lexical":
            return self.lexical_ranking(query, k)
        if mode == "semantic":
            return self.semantic_ranking(query, k)
        if mode == "hybrid":
            depth = max(k, self.depth)
            return fuse(self.lexical_ranking(query, depth), self.semantic_ranking(query, depth), self.fusion, k)
        raise InputError(f"unknown search mode {mode!r}")


@dataclass
class AnswerRecord:
    id: str
    text: str
    confidence: float | None
    refined: bool
    cited: list[str]
    option_set: str | None = None
    label: str | None = None

    def to_json(self) -> dict:
        row = {
            "id": self.id,
            "text": self.text,
            "confidence": self.confidence,
            "refined": self.refined,
            "cited": self.cited,
        }
        if self.option_set is not None:
            row["option_set"] = self.option_set
            row["label"] = self.label
        return row


@dataclass
class Answerer:
    """Answers questions with retrieved context through one backend."""

    backend: object
    profile: GenerationProfile
    documents: Mapping[str, Document]
    retriever: Retriever | None = None
    mode: str = "hybrid"
    k: int = 5
    budget: int = 8000
    threshold: float = 0.1
    model: str | None = None
    max_in_flight: int = 4

    def prompt_for(self, q: Question) -> PromptBundle:
        ranked = None
        if self.retriever is not None and self.k > 0:
            ranked = self.retriever.search(Query(q.id, q.text), self.k, self.mode)
        return build_prompt(
            self.profile.task, q.text, options=q.options, contexts=ranked, documents=self.documents,
            budget=self.budget, option_set=q.option_set, system_message=self.profile.system_message,
        )

    def answer_one(self, q: Question) -> AnswerRecord:
        bundle = self.prompt_for(q)

        def regenerate() -> GeneratedAnswer:
            return generate(bundle, self.profile, self.backend, model=self.model)

        ans = confidence_filter(regenerate(), self.threshold, regenerate)
        rec = AnswerRecord(q.id, ans.text, ans.confidence, ans.refined, list(bundle.cited_doc_ids))
        if self.profile.task == "closed_ended":
            rec.option_set = q.option_set
            rec.label = try_parse_closed_answer(ans.text, q.option_set)
        return rec

    def answer_all(self, questions: Sequence[Question]) -> tuple[list[AnswerRecord], dict[str, str]]:
        """Answer every question; returns (successes in input order, failed id -> reason)."""
        results = run_bounded(questions, self.answer_one, self.max_in_flight)
        done, failed = [], {}
        for q, res in zip(questions, results):
            if isinstance(res, (TransportError, EmptyAnswerError)):
                failed[q.id] = f"{type(res).__name__}: {res}"
            elif isinstance(res, HybragError):
                raise res
            else:
                done.append(res)
        return done, failed


def profile_from_config(cfg: RunConfig, task: str | None = None) -> GenerationProfile:
    base = get_profile(task or cfg.generation.task)
    o = cfg.generation.overrides.model_dump(exclude_none=True)
    if "stop" in o:
        o["stop"] = tuple(o["stop"])
    return base.with_overrides(**o)


def read_answers(path) -> dict[str, dict]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                row = json.loads(line)
                out[str(row["id"])] = row
    return out


@dataclass
class QAScore:
    task: str
    metrics: dict[str, float]
    missing: list[str]
    unparsable: list[str]
    count: int
    per_item: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "count": self.count,
            "metrics": self.metrics,
            "missing": self.missing,
            "unparsable": self.unparsable,
            "per_item": self.per_item,
        }


def score_answers(task: str, answers: Mapping[str, dict], gold: Mapping[str, str],
                  option_set: str = "abcd") -> QAScore:
    """Join answers to gold on id and score them.

    Gold ids without an answer are scored as wrong (closed-ended) or as an
    empty candidate (free text) and listed in ``missing``.
    """
    from .evalkit.generation import accuracy, evaluate_generation

    ids = sorted(gold)
    if not ids:
        raise InputError("gold file is empty")
    missing = [i for i in ids if i not in answers]
    extra = sorted(set(answers) - set(gold))
    if extra:
        log.warning("%d answers have no gold label and are ignored: %s", len(extra), ", ".join(extra))
    if task == "closed_ended":
        preds, golds, unparsable, per_item = [], [], [], {}
        for i in ids:
            row = answers.get(i)
            label = None
            if row is not None:
                label = try_parse_closed_answer(row.get("text", ""), row.get("option_set") or option_set)
                if label is None:
                    unparsable.append(i)
            g = gold[i].strip()
            g = g.upper() if (row or {}).get("option_set", option_set) == "abcd" else g.lower()
            preds.append(label)
            golds.append(g)
            per_item[i] = {"prediction": label, "gold": g, "correct": label == g}
        acc = accuracy(preds, golds) * 100.0
        return QAScore(task, {"accuracy": acc}, missing, unparsable, len(ids), per_item)
    items = [(i, (answers.get(i) or {}).get("text", ""), gold[i]) for i in ids]
    report = evaluate_generation(items)
    metrics = {m: getattr(report, m) for m in ("rouge1", "rouge2", "rougeL", "bleu")}
    return QAScore(task, metrics, missing, [], len(ids), report.per_item)
