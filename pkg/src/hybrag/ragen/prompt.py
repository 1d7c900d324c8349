"""Prompt construction with character-budgeted context packing."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from ..corpus import Document
from ..errors import InputError
from ..rerank import RankedList
from .profiles import get_profile

TRUNCATION_MARKER = " [...]"
DEFAULT_CONTEXT_BUDGET = 8000

_WS_RE = re.compile(r"\s+")

_OPTION_HINTS = {
    "yes_no": "Answer with yes or no.",
    "yes_no_maybe": "Answer with yes, no, or maybe.",
}


@dataclass(frozen=True)
class PromptBundle:
    system: str
    user: str
    context_budget: int
    cited_doc_ids: tuple[str, ...] = ()


def _passage_text(doc: Document) -> str:
    return _WS_RE.sub(" ", doc.text).strip()


def pack_contexts(ranked: RankedList | None, documents: Mapping[str, Document], budget: int) -> tuple[str, list[str]]:
    """Greedily pack passages in rank order into at most ``budget`` characters.

    Returns the packed block and the cited doc ids. Packing stops at the
    first passage that no longer fits; only a passage that would be the
    first one is truncated (with a marker) rather than dropped.
    """
    if budget <= 0:
        raise InputError("context budget must be positive")
    lines: list[str] = []
    cited: list[str] = []
    used = 0
    if ranked is None:
        return "", cited
    for entry in ranked.entries:
        doc = documents.get(entry.doc_id)
        if doc is None:
            raise InputError(f"retrieved doc {entry.doc_id!r} not found in corpus")
        prefix = f"[{len(lines) + 1}] [doc:{doc.id}] "
        line = prefix + _passage_text(doc)
        sep = 1 if lines else 0
        if used + sep + len(line) <= budget:
            lines.append(line)
            cited.append(doc.id)
            used += sep + len(line)
            continue
        if not lines and len(prefix) + len(TRUNCATION_MARKER) < budget:
            keep = budget - len(TRUNCATION_MARKER)
            lines.append(line[:keep] + TRUNCATION_MARKER)
            cited.append(doc.id)
        break
    return "\n".join(lines), cited


def build_prompt(task: str, question: str, options: Mapping[str, str] | None = None,
                 contexts: RankedList | None = None, documents: Mapping[str, Document] | None = None,
                 budget: int = DEFAULT_CONTEXT_BUDGET, option_set: str | None = None,
                 system_message: str | None = None) -> PromptBundle:
    profile = get_profile(task)
    packed, cited = pack_contexts(contexts, documents or {}, budget)
    parts = []
    if packed:
        parts.append("Context passages:\n" + packed)
    parts.append(f"Question: {question.strip()}")
    if options:
        parts.append("Options:\n" + "\n".join(f"{k}. {v}" for k, v in sorted(options.items())))
    elif task == "closed_ended" and option_set in _OPTION_HINTS:
        parts.append(_OPTION_HINTS[option_set])
    parts.append("Answer:")
    return PromptBundle(
        system=system_message or profile.system_message,
        user="\n\n".join(parts),
        context_budget=budget,
        cited_doc_ids=tuple(cited),
    )
