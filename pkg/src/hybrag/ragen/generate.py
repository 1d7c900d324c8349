"""Answer generation, confidence scoring and refinement, closed-answer parsing."""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence, TypeVar

from ..errors import EmptyAnswerError, HybragError, IntegrityError, UnparsableAnswerError
from .profiles import GenerationProfile
from .prompt import PromptBundle

DEFAULT_CONFIDENCE_THRESHOLD = 0.1

T = TypeVar("T")
R = TypeVar("R")


def confidence_from_logprobs(logprobs: Sequence[float] | None) -> float | None:
    """Geometric-mean token probability: ``exp(mean(logprobs))``."""
    if not logprobs:
        return None
    for lp in logprobs:
        if not math.isfinite(lp) and lp != -math.inf:
            raise IntegrityError(f"invalid token log-probability {lp!r}")
        if lp > 0:
            raise IntegrityError(f"token log-probability must be <= 0, got {lp}")
    mean = math.fsum(logprobs) / len(logprobs)
    return math.exp(mean)


@dataclass(frozen=True)
class GeneratedAnswer:
    text: str
    token_logprobs: tuple[float, ...] | None = None
    confidence: float | None = None
    refined: bool = False

    @classmethod
    def from_output(cls, text: str, token_logprobs: Sequence[float] | None = None) -> "GeneratedAnswer":
        lps = tuple(float(x) for x in token_logprobs) if token_logprobs else None
        return cls(text=text, token_logprobs=lps, confidence=confidence_from_logprobs(lps))


def build_request(bundle: PromptBundle, profile: GenerationProfile, model: str | None = None,
                  logprobs: bool = True) -> dict:
    request = {"system": bundle.system, "user": bundle.user, **profile.decoding_params(), "logprobs": logprobs}
    if model:
        request["model"] = model
    return request


def generate(bundle: PromptBundle, profile: GenerationProfile, backend, model: str | None = None) -> GeneratedAnswer:
    """Send one request with the profile's decoding parameters.

    Log-probabilities are requested whenever the backend advertises them.
    Transport failures propagate as :class:`TransportError`; empty output
    raises :class:`EmptyAnswerError`.
    """
    want_lp = bool(getattr(backend, "supports_logprobs", False))
    out = backend.complete(build_request(bundle, profile, model=model, logprobs=want_lp))
    text = out.get("text")
    if not isinstance(text, str) or not text.strip():
        raise EmptyAnswerError("backend returned an empty answer")
    return GeneratedAnswer.from_output(text, out.get("token_logprobs"))


def confidence_filter(ans: GeneratedAnswer, threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
                      regenerate: Callable[[], GeneratedAnswer] | None = None) -> GeneratedAnswer:
    """Regenerate at most once when confidence falls below ``threshold``.

    A retry that clears the threshold (or carries no confidence) is
    returned. Otherwise the more confident of the two is returned (the
    original wins ties), flagged ``refined``.
    """
    if ans.confidence is None or ans.confidence >= threshold:
        return ans
    if regenerate is None:
        return replace(ans, refined=True)
    retry = replace(regenerate(), refined=True)
    if retry.confidence is None or retry.confidence >= threshold:
        return retry
    if retry.confidence > ans.confidence:
        return retry
    return replace(ans, refined=True)


OPTION_SETS = {
    "abcd": ("A", "B", "C", "D"),
    "yes_no": ("yes", "no"),
    "yes_no_maybe": ("yes", "no", "maybe"),
}

_LETTER_RE = re.compile(r"^\s*\(?([A-Da-d])\)?(?=$|[\s.,:;!?)\]])")
_WORD_RE = re.compile(r"[^\W_]+")


def parse_closed_answer(ans: GeneratedAnswer | str, option_set: str = "abcd") -> str:
    """Extract the answer label from generated text.

    ``abcd``: the text must open with a bare letter, optionally bracketed
    and/or followed by punctuation ("B", "B.", "(c)"). ``yes_no`` /
    ``yes_no_maybe``: the first word that is one of the options.
    """
    text = ans.text if isinstance(ans, GeneratedAnswer) else ans
    if option_set not in OPTION_SETS:
        raise ValueError(f"unknown option set {option_set!r}")
    if option_set == "abcd":
        m = _LETTER_RE.match(text or "")
        if m:
            return m.group(1).upper()
        raise UnparsableAnswerError(f"no option letter in {text!r}")
    allowed = OPTION_SETS[option_set]
    for word in _WORD_RE.findall((text or "").lower()):
        if word in allowed:
            return word
    raise UnparsableAnswerError(f"no {'/'.join(allowed)} label in {text!r}")


def try_parse_closed_answer(text: str, option_set: str = "abcd") -> str | None:
    try:
        return parse_closed_answer(text, option_set)
    except UnparsableAnswerError:
        return None


def run_bounded(items: Sequence[T], fn: Callable[[T], R], max_in_flight: int = 4) -> list[R | HybragError]:
    """Apply ``fn`` to each item with bounded concurrency, results in input order.

    Hybrag errors are captured and returned in place of the result.
    """

    def safe(item):
        try:
            return fn(item)
        except HybragError as exc:
            return exc

    if max_in_flight <= 1:
        return [safe(x) for x in items]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(safe, items))
