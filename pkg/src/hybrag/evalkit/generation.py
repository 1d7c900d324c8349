"""Answer-quality metrics: accuracy, ROUGE-1/2/L and sentence BLEU.

Texts are tokenized with :func:`hybrag.corpus.tokenize`; every function
also accepts pre-tokenized sequences.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..corpus import tokenize
from ..errors import InputError, ParseError


def _tokens(text) -> list[str]:
    return tokenize(text) if isinstance(text, str) else list(text)


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _prf(overlap: int, cand_total: int, ref_total: int) -> tuple[float, float, float]:
    p = overlap / cand_total if cand_total else 0.0
    r = overlap / ref_total if ref_total else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def rouge_n(candidate, reference, n: int = 1) -> tuple[float, float, float]:
    """Clipped n-gram overlap as (precision, recall, F1)."""
    if n < 1:
        raise InputError("n must be >= 1")
    c = ngrams(_tokens(candidate), n)
    r = ngrams(_tokens(reference), n)
    overlap = sum((c & r).values())
    return _prf(overlap, sum(c.values()), sum(r.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, reference) -> tuple[float, float, float]:
    c = _tokens(candidate)
    r = _tokens(reference)
    return _prf(lcs_length(c, r), len(c), len(r))


def bleu(candidate, reference, max_n: int = 4) -> float:
    """Single-reference sentence BLEU.

    Geometric mean of clipped n-gram precisions for n = 1..min(max_n,
    len(candidate)), times the brevity penalty. Orders n >= 2 are smoothed
    by adding one to both the match count and the total; unigram precision
    is unsmoothed, so zero unigram overlap gives 0.
    """
    if max_n < 1:
        raise InputError("max_n must be >= 1")
    c = _tokens(candidate)
    r = _tokens(reference)
    if not c or not r:
        return 0.0
    orders = min(max_n, len(c))
    log_sum = 0.0
    for n in range(1, orders + 1):
        cand = ngrams(c, n)
        matches = sum((cand & ngrams(r, n)).values())
        total = sum(cand.values())
        if n == 1:
            if matches == 0:
                return 0.0
            log_sum += math.log(matches / total)
        else:
            log_sum += math.log((matches + 1) / (total + 1))
    bp = 1.0 if len(c) > len(r) else math.exp(1.0 - len(r) / len(c))
    return bp * math.exp(log_sum / orders)


def accuracy(predictions: Sequence[str | None], gold: Sequence[str]) -> float:
    """Fraction of exact matches; ``None`` predictions (unparsable) count as wrong."""
    if not gold:
        raise InputError("accuracy of an empty set is undefined")
    if len(predictions) != len(gold):
        raise InputError(f"{len(predictions)} predictions for {len(gold)} gold labels")
    return sum(1 for p, g in zip(predictions, gold) if p is not None and p == g) / len(gold)


GEN_METRICS = ("rouge1", "rouge2", "rougeL", "bleu")


def item_scores(candidate, reference) -> dict[str, float]:
    return {
        "rouge1": rouge_n(candidate, reference, 1)[2],
        "rouge2": rouge_n(candidate, reference, 2)[2],
        "rougeL": rouge_l(candidate, reference)[2],
        "bleu": bleu(candidate, reference),
    }


@dataclass
class GenMetricsReport:
    rouge1: float
    rouge2: float
    rougeL: float
    bleu: float
    per_item: dict[str, dict[str, float]]
    count: int

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "metrics": {m: getattr(self, m) for m in GEN_METRICS},
            "per_item": self.per_item,
        }


def evaluate_generation(items: Sequence[tuple[str, str, str]]) -> GenMetricsReport:
    """Macro-average ROUGE F1 and BLEU (x100) over ``(id, candidate, reference)`` items."""
    if not items:
        raise InputError("no items to evaluate")
    per_item = {}
    for item_id, cand, ref in items:
        if item_id in per_item:
            raise InputError(f"duplicate item id {item_id!r}")
        per_item[item_id] = {m: v * 100.0 for m, v in item_scores(cand, ref).items()}
    ids = sorted(per_item)
    agg = {m: math.fsum(per_item[i][m] for i in ids) / len(ids) for m in GEN_METRICS}
    return GenMetricsReport(**agg, per_item={i: per_item[i] for i in ids}, count=len(ids))


def read_generation_pairs(path) -> list[tuple[str, str, str]]:
    """Read JSONL lines ``{"id", "candidate", "reference"}``."""
    path = Path(path)
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                items.append((str(obj["id"]), str(obj["candidate"]), str(obj["reference"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"bad generation record ({exc})", path, lineno) from None
    return items
