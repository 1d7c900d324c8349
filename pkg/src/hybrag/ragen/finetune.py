"""Provider-agnostic fine-tuning manifests: one ``{x, y}`` pair per line."""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

from .._io import write_jsonl
from ..corpus import Question
from .prompt import PromptBundle


def manifest_rows(questions: Sequence[Question], gold: Mapping[str, str],
                  prompt_for: Callable[[Question], PromptBundle]) -> list[dict]:
    """Pair each question's prompt (query plus packed context) with its gold answer.

    Questions without a gold answer are skipped.
    """
    rows = []
    for q in questions:
        if q.id not in gold:
            continue
        rows.append({"x": prompt_for(q).user, "y": gold[q.id]})
    return rows


def write_manifest(rows: Sequence[dict], path) -> None:
    write_jsonl(path, rows)
