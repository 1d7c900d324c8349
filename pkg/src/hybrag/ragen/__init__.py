from .backends import HttpBackend, MockBackend, make_backend
from .generate import (
    DEFAULT_CONFIDENCE_THRESHOLD,
    GeneratedAnswer,
    confidence_filter,
    confidence_from_logprobs,
    generate,
    parse_closed_answer,
)
from .profiles import BUILTIN_PROFILES, FINETUNE_RECORDS, FineTuneRecord, GenerationProfile, get_profile
from .prompt import PromptBundle, build_prompt

__all__ = [
    "BUILTIN_PROFILES",
    "DEFAULT_CONFIDENCE_THRESHOLD",
    "FINETUNE_RECORDS",
    "FineTuneRecord",
    "GeneratedAnswer",
    "GenerationProfile",
    "HttpBackend",
    "MockBackend",
    "PromptBundle",
    "build_prompt",
    "confidence_filter",
    "confidence_from_logprobs",
    "generate",
    "get_profile",
    "make_backend",
    "parse_closed_answer",
]
