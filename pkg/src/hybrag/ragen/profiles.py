"""Task-specific decoding profiles and fine-tuning configuration records."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

from ..errors import InputError

TASKS = ("closed_ended", "long_form", "short_form")


@dataclass(frozen=True)
class GenerationProfile:
    task: str
    system_message: str
    max_tokens: int
    temperature: float
    top_p: float
    frequency_penalty: float = 0.0
    presence_penalty: float = 0.0
    stop: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise InputError(f"unknown task {self.task!r}")
        if self.max_tokens < 1:
            raise InputError("max_tokens must be positive")
        if self.temperature < 0:
            raise InputError("temperature must be >= 0")
        if not 0.0 < self.top_p <= 1.0:
            raise InputError("top_p must lie in (0, 1]")
        if self.stop is not None:
            object.__setattr__(self, "stop", tuple(self.stop))

    def decoding_params(self) -> dict:
        """Parameters sent verbatim with every request."""
        return {
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "frequency_penalty": self.frequency_penalty,
            "presence_penalty": self.presence_penalty,
            "stop": list(self.stop) if self.stop is not None else None,
        }

    def with_overrides(self, **overrides) -> "GenerationProfile":
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **overrides)


CLOSED_ENDED = GenerationProfile(
    task="closed_ended",
    system_message=(
        "You are an expert medical AI assistant. "
        "Answer the following question using only one letter: A, B, C, or D."
    ),
    max_tokens=2,
    temperature=0.1,
    top_p=0.7,
    frequency_penalty=0.5,
    presence_penalty=0.1,
    stop=("\n",),
)

LONG_FORM = GenerationProfile(
    task="long_form",
    system_message="You are a biomedical research expert. Generate precise and well-structured answers.",
    max_tokens=300,
    temperature=0.2,
    top_p=0.8,
    frequency_penalty=0.0,
    presence_penalty=0.0,
)

SHORT_FORM = GenerationProfile(
    task="short_form",
    system_message="You are an expert medical AI assistant. Provide concise and accurate answers.",
    max_tokens=50,
    temperature=0.2,
    top_p=0.85,
    frequency_penalty=0.2,
    presence_penalty=0.0,
)

BUILTIN_PROFILES = {p.task: p for p in (CLOSED_ENDED, LONG_FORM, SHORT_FORM)}


def get_profile(task: str) -> GenerationProfile:
    try:
        return BUILTIN_PROFILES[task]
    except KeyError:
        raise InputError(f"unknown task {task!r}; expected one of {', '.join(TASKS)}") from None


@dataclass(frozen=True)
class FineTuneRecord:
    """One fine-tuning run configuration (metadata only; nothing is trained here)."""

    task: str
    train_dataset: str
    train_samples: int
    epochs: int
    batch_size: int
    base_model: str = "gpt-4o"
    training_duration: str | None = None

    def as_dict(self) -> dict:
        return asdict(self)


# Reported fine-tuning runs; dataset names kept as published.
FINETUNE_RECORDS = (
    FineTuneRecord("closed_ended", "MedQA", 10178, 2, 13, training_duration="3h 25m 33s"),
    FineTuneRecord("closed_ended", "PubMedQA (PQA-L)", 552, 3, 1, training_duration="7h 46m 44s"),
    FineTuneRecord("closed_ended", "BioSQA", 5049, 3, 2, training_duration="3h 10m 7s"),
    FineTuneRecord("long_form", "PubMedQA (PQA-A)", 196144, 1, 64, training_duration="1d 6h 29m 20s"),
    FineTuneRecord("long_form", "MedicationQA", 551, 3, 1, training_duration="1h 44m 18s"),
    FineTuneRecord("long_form", "LiveQA", 500, 3, 1, training_duration="1h 46m 17s"),
    FineTuneRecord("long_form", "BioSQA", 5049, 3, 10, training_duration="2h 36m 49s"),
    FineTuneRecord("long_form", "Combined Custom Dataset", 6652, 3, 13, training_duration="2h 6m 1s"),
    FineTuneRecord("short_form", "MedQA", 10178, 2, 13, training_duration="1h 49m 44s"),
)
