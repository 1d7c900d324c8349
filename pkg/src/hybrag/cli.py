"""Command-line interface.

Exit codes: 0 success, 1 partial failure, 2 usage or configuration error.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import logging
import sys
from pathlib import Path

import click

from . import pipeline
from ._io import write_json, write_jsonl, write_text
from .config import RunConfig, load_config, require_path
from .corpus import Query, load_corpus, load_gold, load_qrels, load_queries, load_questions
from .errors import HybragError
from .evalkit.generation import evaluate_generation, read_generation_pairs
from .evalkit.retrieval import evaluate_run, format_table
from .ragen.backends import make_backend
from .ragen.finetune import manifest_rows, write_manifest
from .ragen.profiles import BUILTIN_PROFILES, FINETUNE_RECORDS
from .rerank import format_run_lines, read_run

log = logging.getLogger("hybrag")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


def _fail(message: str, code: int = EXIT_USAGE):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HybragError as exc:
            _fail(str(exc))
        except json.JSONDecodeError as exc:
            _fail(f"invalid JSON: {exc}")

    return wrapper


def _config(ctx) -> RunConfig:
    return ctx.obj["config"]


def _apply_retrieval_overrides(cfg: RunConfig, mode, k, fusion, alpha, rrf_k):
    if mode:
        cfg.retrieval.mode = mode
    if k is not None:
        cfg.retrieval.k = k
    if fusion:
        cfg.fusion.kind = fusion
    if alpha is not None:
        cfg.fusion.alpha = alpha
    if rrf_k is not None:
        cfg.fusion.rrf_k = rrf_k


def retrieval_options(fn):
    fn = click.option("--rrf-k", type=float, default=None, help="RRF constant (fusion=rrf).")(fn)
    fn = click.option("--alpha", type=click.FloatRange(0, 1), default=None,
                      help="Semantic weight for weighted fusion.")(fn)
    fn = click.option("--fusion", type=click.Choice(["weighted", "rrf", "semantic_only", "lexical_only"]),
                      default=None, help="Fusion strategy for hybrid mode.")(fn)
    fn = click.option("--mode", type=click.Choice(["lexical", "semantic", "hybrid"]), default=None,
                      help="Retrieval mode (default from config: hybrid).")(fn)
    return fn


@click.group()
@click.option("--config", "-c", "config_path", type=click.Path(dir_okay=False), default=None,
              help="YAML run configuration.")
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
@click.pass_context
def cli(ctx, config_path, verbose):
    """Hybrid BM25 + dense retrieval with retrieval-augmented QA on top."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s: %(message)s")
    ctx.ensure_object(dict)
    try:
        ctx.obj["config"] = load_config(config_path)
    except HybragError as exc:
        _fail(str(exc))


@cli.command("index")
@click.option("--corpus", type=click.Path(dir_okay=False), default=None, help="BEIR corpus.jsonl.")
@click.option("--index-dir", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--what", type=click.Choice(["both", "lexical", "semantic"]), default="both", show_default=True)
@click.option("--force", is_flag=True, help="Overwrite an existing index.")
@click.pass_context
@handle_errors
def cmd_index(ctx, corpus, index_dir, what, force):
    """Build the BM25 and/or vector index for a corpus."""
    cfg = _config(ctx)
    corpus_path = require_path(Path(corpus) if corpus else cfg.corpus.corpus, "corpus")
    out = Path(index_dir) if index_dir else Path(cfg.index.dir)
    if pipeline.index_exists(out) and not force:
        _fail(f"index already exists at {out}; pass --force to rebuild")
    docs = load_corpus(corpus_path)
    encoder = pipeline.encoder_from_config(cfg) if what in ("both", "semantic") else None
    summary = pipeline.build_indexes(
        docs, out, cfg.bm25.params(), encoder,
        lexical=what in ("both", "lexical"), semantic=what in ("both", "semantic"),
        batch_size=cfg.encoder.batch_size,
    )
    parts = [f"N={summary['num_docs']}"]
    if "lexical" in summary:
        parts.append(f"avgDL={summary['lexical']['avg_doc_length']:.4f}")
        parts.append(f"vocab={summary['lexical']['vocabulary']}")
    if "semantic" in summary:
        parts.append(f"dim={summary['semantic']['dim']}")
    click.echo(f"indexed {corpus_path}: " + " ".join(parts) + f" -> {out}")


def _retriever(cfg: RunConfig, mode: str) -> tuple[pipeline.Retriever, str]:
    need_lex = mode in ("lexical", "hybrid")
    need_sem = mode in ("semantic", "hybrid")
    if mode == "hybrid":
        need_lex = cfg.fusion.kind != "semantic_only"
        need_sem = cfg.fusion.kind != "lexical_only"
        if not need_lex or not need_sem:
            mode = "semantic" if need_sem else "lexical"
    return pipeline.Retriever.from_config(cfg, need_lexical=need_lex, need_semantic=need_sem), mode


@cli.command("search")
@click.option("--query", "query_text", default=None, help="Single query text (id 'q0').")
@click.option("--queries", type=click.Path(dir_okay=False), default=None, help="BEIR queries.jsonl.")
@click.option("-k", type=click.IntRange(min=1), default=None, help="Results per query (default 10).")
@retrieval_options
@click.option("--out", "-o", type=click.Path(dir_okay=False), default=None, help="TREC run file (default stdout).")
@click.pass_context
@handle_errors
def cmd_search(ctx, query_text, queries, k, mode, fusion, alpha, rrf_k, out):
    """Retrieve documents and write a TREC run file."""
    cfg = _config(ctx)
    _apply_retrieval_overrides(cfg, mode, k, fusion, alpha, rrf_k)
    if query_text:
        qs = [Query("q0", query_text)]
    else:
        qs = load_queries(require_path(Path(queries) if queries else cfg.corpus.queries, "queries file"))
    retriever, eff_mode = _retriever(cfg, cfg.retrieval.mode)
    runs = [retriever.search(q, cfg.retrieval.k, eff_mode) for q in qs]
    text = format_run_lines(runs, tag=f"{cfg.tag}-{cfg.retrieval.mode}")
    if out:
        write_text(out, text)
    else:
        click.echo(text, nl=False)


@cli.command("eval-retrieval")
@click.argument("run", type=click.Path(exists=True, dir_okay=False))
@click.argument("qrels", type=click.Path(exists=True, dir_okay=False))
@click.option("-k", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--json", "json_out", type=click.Path(dir_okay=False), default=None, help="Write JSON report.")
@click.option("--table", "table_out", type=click.Path(dir_okay=False), default=None, help="Write text table.")
@click.option("--label", default="run", show_default=True, help="Column label in the table.")
@handle_errors
def cmd_eval_retrieval(run, qrels, k, json_out, table_out, label):
    """Score a TREC run against qrels (DCG, NDCG, MRR, P, R, F1, MAP at k)."""
    report = evaluate_run(read_run(run), load_qrels(qrels), k)
    for q in report.unknown_queries:
        click.echo(f"warning: query {q!r} has no judgments; excluded", err=True)
    table = format_table({label: report})
    click.echo(table, nl=False)
    if table_out:
        write_text(table_out, table)
    if json_out:
        write_json(json_out, report.to_dict())


def _backend(cfg: RunConfig):
    settings = cfg.backend.model_dump(exclude={"kind", "request_log"})
    return make_backend(cfg.backend.kind, **settings)


def _answerer(cfg: RunConfig, task: str, k: int, mode: str | None, backend=None) -> pipeline.Answerer:
    docs = {}
    retriever = None
    eff_mode = mode or cfg.retrieval.mode
    if k > 0:
        corpus_path = require_path(cfg.corpus.corpus, "corpus")
        docs = {d.id: d for d in load_corpus(corpus_path)}
        retriever, eff_mode = _retriever(cfg, eff_mode)
    if backend is None:
        backend = _backend(cfg)
    return pipeline.Answerer(
        backend=backend,
        profile=pipeline.profile_from_config(cfg, task),
        documents=docs,
        retriever=retriever,
        mode=eff_mode,
        k=k,
        budget=cfg.generation.context_budget,
        threshold=cfg.generation.confidence_threshold,
        model=cfg.generation.model or cfg.backend.model,
        max_in_flight=cfg.generation.max_in_flight,
    )


def _dump_request_log(cfg: RunConfig, backend, path):
    target = path or cfg.backend.request_log
    if target and hasattr(backend, "dump_log"):
        backend.dump_log(target)


@cli.command("answer")
@click.option("--questions", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Questions JSONL (id, question, options?, option_set?).")
@click.option("--task", type=click.Choice(list(BUILTIN_PROFILES)), default=None, help="Default from config.")
@click.option("-k", type=click.IntRange(min=0), default=None, help="Passages per prompt; 0 disables retrieval.")
@retrieval_options
@click.option("--out", "-o", type=click.Path(dir_okay=False), required=True, help="Answers JSONL.")
@click.option("--request-log", type=click.Path(dir_okay=False), default=None,
              help="Write the mock backend's request log here.")
@click.pass_context
@handle_errors
def cmd_answer(ctx, questions, task, k, mode, fusion, alpha, rrf_k, out, request_log):
    """Answer questions with retrieved context through the configured LLM backend."""
    cfg = _config(ctx)
    _apply_retrieval_overrides(cfg, mode, None, fusion, alpha, rrf_k)
    task = task or cfg.generation.task
    qs = load_questions(questions)
    answerer = _answerer(cfg, task, cfg.retrieval.k if k is None else k, mode)
    done, failed = answerer.answer_all(qs)
    write_jsonl(out, [r.to_json() for r in done])
    _dump_request_log(cfg, answerer.backend, request_log)
    click.echo(f"answered {len(done)}/{len(qs)} questions -> {out}", err=True)
    if failed:
        for qid, reason in failed.items():
            click.echo(f"failed: {qid}: {reason}", err=True)
        sys.exit(EXIT_PARTIAL)


def _format_qa(score: pipeline.QAScore) -> str:
    lines = [f"task: {score.task}  items: {score.count}"]
    for name, value in score.metrics.items():
        lines.append(f"{name:<10}{value:>10.2f}")
    if score.missing:
        lines.append(f"missing answers ({len(score.missing)}): {', '.join(score.missing)}")
    if score.unparsable:
        lines.append(f"unparsable answers ({len(score.unparsable)}): {', '.join(score.unparsable)}")
    return "\n".join(lines) + "\n"


@cli.command("eval-qa")
@click.argument("answers", type=click.Path(exists=True, dir_okay=False))
@click.argument("gold", type=click.Path(exists=True, dir_okay=False))
@click.option("--task", type=click.Choice(list(BUILTIN_PROFILES)), required=True)
@click.option("--option-set", type=click.Choice(["abcd", "yes_no", "yes_no_maybe"]), default="abcd",
              show_default=True, help="Used when an answer record carries no option_set.")
@click.option("--json", "json_out", type=click.Path(dir_okay=False), default=None)
@handle_errors
def cmd_eval_qa(answers, gold, task, option_set, json_out):
    """Score answers against gold: accuracy (closed_ended) or ROUGE/BLEU (free text)."""
    score = pipeline.score_answers(task, pipeline.read_answers(answers), load_gold(gold), option_set)
    click.echo(_format_qa(score), nl=False)
    if json_out:
        write_json(json_out, score.to_dict())


@cli.command("eval-gen")
@click.argument("pairs", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "json_out", type=click.Path(dir_okay=False), default=None)
@handle_errors
def cmd_eval_gen(pairs, json_out):
    """ROUGE-1/2/L and BLEU over a JSONL of {id, candidate, reference}."""
    report = evaluate_generation(read_generation_pairs(pairs))
    for m in ("rouge1", "rouge2", "rougeL", "bleu"):
        click.echo(f"{m:<10}{getattr(report, m):>10.2f}")
    if json_out:
        write_json(json_out, report.to_dict())


def _parse_k_list(raw: str) -> list[int]:
    try:
        ks = [int(x) for x in raw.replace(" ", "").split(",") if x]
    except ValueError:
        raise click.BadParameter(f"not a comma-separated list of integers: {raw!r}") from None
    if not ks or any(k < 1 for k in ks):
        raise click.BadParameter("k values must be positive integers")
    unique = list(dict.fromkeys(ks))
    if len(unique) != len(ks):
        click.echo(f"warning: duplicate k values removed: {ks} -> {unique}", err=True)
    return unique


@cli.command("sweep-topk")
@click.option("--k-list", required=True, help="Comma-separated cutoffs, e.g. 1,2,4,8.")
@click.option("--questions", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--gold", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--task", type=click.Choice(list(BUILTIN_PROFILES)), default=None)
@retrieval_options
@click.option("--out", "-o", type=click.Path(dir_okay=False), required=True, help="CSV output.")
@click.pass_context
@handle_errors
def cmd_sweep_topk(ctx, k_list, questions, gold, task, mode, fusion, alpha, rrf_k, out):
    """Answer and score the question set once per top-k value; write one CSV row per k."""
    cfg = _config(ctx)
    _apply_retrieval_overrides(cfg, mode, None, fusion, alpha, rrf_k)
    ks = _parse_k_list(k_list)
    task = task or cfg.generation.task
    qs = load_questions(questions)
    gold_map = load_gold(gold)
    backend = _backend(cfg)
    base = _answerer(cfg, task, max(ks), mode, backend=backend)
    metric_names = ["accuracy"] if task == "closed_ended" else ["rouge1", "rouge2", "rougeL", "bleu"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", *metric_names, "answered", "failed"])
    any_failed = False
    for k in ks:
        base.k = k
        done, failed = base.answer_all(qs)
        any_failed = any_failed or bool(failed)
        score = pipeline.score_answers(task, {r.id: r.to_json() for r in done}, gold_map)
        writer.writerow([k, *(f"{score.metrics[m]:.6f}" for m in metric_names), len(done), len(failed)])
    write_text(out, buf.getvalue())
    click.echo(buf.getvalue(), nl=False)
    if any_failed:
        sys.exit(EXIT_PARTIAL)


@cli.command("finetune-manifest")
@click.option("--questions", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--gold", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--task", type=click.Choice(list(BUILTIN_PROFILES)), default=None)
@click.option("-k", type=click.IntRange(min=0), default=None, help="Passages per example; 0 for none.")
@retrieval_options
@click.option("--out", "-o", type=click.Path(dir_okay=False), required=True, help="JSONL of {x, y}.")
@click.pass_context
@handle_errors
def cmd_finetune_manifest(ctx, questions, gold, task, k, mode, fusion, alpha, rrf_k, out):
    """Emit (prompt-with-context, gold answer) pairs for an external fine-tuning job."""
    cfg = _config(ctx)
    _apply_retrieval_overrides(cfg, mode, None, fusion, alpha, rrf_k)
    answerer = _answerer(cfg, task or cfg.generation.task, cfg.retrieval.k if k is None else k, mode,
                         backend=object())
    rows = manifest_rows(load_questions(questions), load_gold(gold), answerer.prompt_for)
    write_manifest(rows, out)
    click.echo(f"wrote {len(rows)} examples -> {out}", err=True)


@cli.command("profiles")
@click.option("--finetune", is_flag=True, help="Show recorded fine-tuning configurations instead.")
def cmd_profiles(finetune):
    """Print the built-in decoding profiles (or fine-tuning records) as JSON."""
    if finetune:
        payload = [r.as_dict() for r in FINETUNE_RECORDS]
    else:
        payload = {t: {"system_message": p.system_message, **p.decoding_params()} for t, p in BUILTIN_PROFILES.items()}
    click.echo(json.dumps(payload, indent=2))


def main():
    cli(obj={})

