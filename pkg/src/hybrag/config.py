"""Run configuration: a YAML file with ``${VAR}`` / ``${VAR:-default}`` interpolation.

Relative paths are resolved against the config file's directory. Unknown
keys are rejected.
"""

from __future__ import annotations

import os
import re
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError
from .lexical import Bm25Params
from .rerank import FusionStrategy

_VAR_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)(?::-([^}]*))?\}")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CorpusConfig(_Section):
    corpus: Optional[Path] = None
    queries: Optional[Path] = None
    qrels: Optional[Path] = None


class IndexConfig(_Section):
    dir: Path = Path("index")


class Bm25Config(_Section):
    k1: float = Field(1.2, ge=0)
    b: float = Field(0.75, ge=0, le=1)
    query_terms: Literal["sequence", "set"] = "sequence"

    def params(self) -> Bm25Params:
        return Bm25Params(k1=self.k1, b=self.b, query_terms=self.query_terms)


class EncoderConfig(_Section):
    kind: Literal["local_test", "remote_api"] = "local_test"
    dim: int = Field(256, ge=1)
    endpoint: Optional[str] = None
    model: Optional[str] = None
    api_key_env: Optional[str] = "EMBEDDING_API_KEY"
    batch_size: int = Field(32, ge=1)
    max_in_flight: int = Field(4, ge=1)
    timeout: float = Field(30.0, gt=0)
    retries: int = Field(3, ge=0)
    cache_dir: Optional[Path] = None


class FusionConfig(_Section):
    kind: Literal["semantic_only", "lexical_only", "weighted", "rrf"] = "weighted"
    alpha: float = Field(0.7, ge=0, le=1)
    rrf_k: float = Field(60.0, gt=0)
    depth: int = Field(100, ge=1)

    def strategy(self) -> FusionStrategy:
        if self.kind == "weighted":
            return FusionStrategy.weighted(self.alpha)
        if self.kind == "rrf":
            return FusionStrategy.rrf(self.rrf_k)
        if self.kind == "semantic_only":
            return FusionStrategy.semantic_only()
        return FusionStrategy.lexical_only()


class RetrievalConfig(_Section):
    mode: Literal["lexical", "semantic", "hybrid"] = "hybrid"
    k: int = Field(10, ge=1)


class ProfileOverrides(_Section):
    system_message: Optional[str] = None
    max_tokens: Optional[int] = Field(None, ge=1)
    temperature: Optional[float] = Field(None, ge=0)
    top_p: Optional[float] = Field(None, gt=0, le=1)
    frequency_penalty: Optional[float] = None
    presence_penalty: Optional[float] = None
    stop: Optional[list[str]] = None


class GenerationConfig(_Section):
    task: Literal["closed_ended", "long_form", "short_form"] = "closed_ended"
    model: Optional[str] = None
    context_budget: int = Field(8000, ge=1)
    confidence_threshold: float = Field(0.1, ge=0, le=1)
    max_in_flight: int = Field(4, ge=1)
    overrides: ProfileOverrides = ProfileOverrides()


class BackendConfig(_Section):
    kind: Literal["mock", "http"] = "mock"
    script: Optional[Path] = None
    endpoint: Optional[str] = None
    model: Optional[str] = None
    api_key_env: Optional[str] = "LLM_API_KEY"
    timeout: float = Field(60.0, gt=0)
    retries: int = Field(3, ge=0)
    backoff: float = Field(1.0, ge=0)
    request_log: Optional[Path] = None


class RunConfig(_Section):
    corpus: CorpusConfig = CorpusConfig()
    index: IndexConfig = IndexConfig()
    bm25: Bm25Config = Bm25Config()
    encoder: EncoderConfig = EncoderConfig()
    fusion: FusionConfig = FusionConfig()
    retrieval: RetrievalConfig = RetrievalConfig()
    generation: GenerationConfig = GenerationConfig()
    backend: BackendConfig = BackendConfig()
    tag: str = "hybrag"


def interpolate(value, env=None):
    """Substitute ``${VAR}`` in every string of a parsed YAML tree."""
    env = os.environ if env is None else env

    def sub(m):
        name, default = m.group(1), m.group(2)
        if name in env:
            return env[name]
        if default is not None:
            return default
        raise ConfigError(f"environment variable {name} is not set")

    if isinstance(value, str):
        return _VAR_RE.sub(sub, value)
    if isinstance(value, dict):
        return {k: interpolate(v, env) for k, v in value.items()}
    if isinstance(value, list):
        return [interpolate(v, env) for v in value]
    return value


def _resolve_paths(cfg: RunConfig, base: Path) -> RunConfig:
    def fix(p):
        if p is None or p.is_absolute():
            return p
        return base / p

    cfg.corpus.corpus = fix(cfg.corpus.corpus)
    cfg.corpus.queries = fix(cfg.corpus.queries)
    cfg.corpus.qrels = fix(cfg.corpus.qrels)
    cfg.index.dir = fix(cfg.index.dir)
    cfg.encoder.cache_dir = fix(cfg.encoder.cache_dir)
    cfg.backend.script = fix(cfg.backend.script)
    cfg.backend.request_log = fix(cfg.backend.request_log)
    return cfg


def load_config(path=None, env=None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        cfg = RunConfig.model_validate(interpolate(raw, env))
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return _resolve_paths(cfg, path.parent)


def require_path(p: Path | None, what: str) -> Path:
    if p is None:
        raise ConfigError(f"{what} is not configured")
    if not Path(p).exists():
        raise ConfigError(f"{what} not found: {p}")
    return Path(p)
