"""LLM backends: a JSON-over-HTTP client and a scripted mock for tests.

Request (both backends)::

    {"model", "system", "user", "max_tokens", "temperature", "top_p",
     "frequency_penalty", "presence_penalty", "stop", "logprobs"}

Response::

    {"text": str, "token_logprobs": [float] | null}
"""

from __future__ import annotations

import copy
import json
import logging
import os
import re
import threading
import time
from pathlib import Path

import httpx
import yaml

from .._io import write_jsonl
from ..errors import ConfigError, ParseError, TransportError

log = logging.getLogger(__name__)

_PASSAGE_RE = re.compile(r"^\[\d+\] \[doc:", re.MULTILINE)


class HttpBackend:
    supports_logprobs = True

    def __init__(self, endpoint: str, model: str, api_key_env: str | None = "LLM_API_KEY",
                 timeout: float = 60.0, retries: int = 3, backoff: float = 1.0,
                 supports_logprobs: bool = True, transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint
        self.model = model
        self.retries = retries
        self.backoff = backoff
        self.supports_logprobs = supports_logprobs
        headers = {}
        key = os.environ.get(api_key_env) if api_key_env else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def close(self):
        self._client.close()

    def complete(self, request: dict) -> dict:
        payload = dict(request)
        payload.setdefault("model", self.model)
        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self.endpoint, json=payload)
            except httpx.HTTPError as exc:
                last = exc
                log.warning("LLM request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                log.warning("LLM backend returned %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"LLM backend rejected request: HTTP {resp.status_code}")
            try:
                body = resp.json()
            except ValueError:
                raise TransportError("LLM backend returned non-JSON body") from None
            if not isinstance(body, dict):
                raise TransportError("LLM backend returned a non-object body")
            return {"text": body.get("text"), "token_logprobs": body.get("token_logprobs")}
        raise TransportError(f"LLM backend failed after {self.retries + 1} attempts: {last}")


class MockBackend:
    """Deterministic backend driven by a script (dict, or a JSON/YAML file).

    Script keys: ``supports_logprobs`` (default true), ``default`` response
    and ``rules``. A rule matches when all of its conditions hold against
    the request: ``contains`` / ``not_contains`` (substrings of the user
    text), ``system_contains``, ``min_passages`` / ``max_passages`` (count
    of packed ``[n] [doc:...]`` lines). The first matching rule answers
    with ``text``/``logprobs``, or with ``responses`` (a list consumed in
    order per distinct prompt, the last repeating), or fails via
    ``error: transport | empty``. Every request is recorded.
    """

    def __init__(self, script: dict | None = None):
        script = script or {}
        self.supports_logprobs = bool(script.get("supports_logprobs", True))
        self.default = script.get("default", {"text": "A", "logprobs": [0.0]})
        self.rules = list(script.get("rules", []))
        self.requests: list[dict] = []
        self._counters: dict[tuple[int, str], int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"mock script not found: {path}")
        try:
            script = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ParseError(f"invalid mock script ({exc})", path) from None
        return cls(script)

    @staticmethod
    def count_passages(user: str) -> int:
        return len(_PASSAGE_RE.findall(user))

    def _matches(self, rule: dict, request: dict) -> bool:
        user = request.get("user", "")
        system = request.get("system", "")
        if any(s not in user for s in rule.get("contains", [])):
            return False
        if any(s in user for s in rule.get("not_contains", [])):
            return False
        if "system_contains" in rule and rule["system_contains"] not in system:
            return False
        n = self.count_passages(user)
        if "max_passages" in rule and n > rule["max_passages"]:
            return False
        if "min_passages" in rule and n < rule["min_passages"]:
            return False
        return True

    def complete(self, request: dict) -> dict:
        with self._lock:
            self.requests.append(copy.deepcopy(request))
            chosen, idx = self.default, -1
            for i, rule in enumerate(self.rules):
                if self._matches(rule, request):
                    chosen, idx = rule, i
                    break
            if "responses" in chosen:
                key = (idx, request.get("system", "") + "\x00" + request.get("user", ""))
                n = self._counters.get(key, 0)
                self._counters[key] = n + 1
                seq = chosen["responses"]
                chosen = seq[min(n, len(seq) - 1)]
        error = chosen.get("error")
        if error == "transport":
            raise TransportError("mock backend: scripted transport failure")
        if error == "empty":
            return {"text": "", "token_logprobs": None}
        logprobs = chosen.get("logprobs")
        if not (self.supports_logprobs and request.get("logprobs")):
            logprobs = None
        return {"text": chosen.get("text", ""), "token_logprobs": logprobs}

    def dump_log(self, path) -> None:
        rows = sorted(self.requests, key=lambda r: json.dumps(r, sort_keys=True))
        write_jsonl(path, rows)


def make_backend(kind: str, **settings):
    if kind == "mock":
        script = settings.get("script")
        if script is None:
            return MockBackend()
        return MockBackend.from_file(script)
    if kind == "http":
        if not settings.get("endpoint"):
            raise ConfigError("backend.endpoint is required for kind 'http'")
        return HttpBackend(
            endpoint=settings["endpoint"],
            model=settings.get("model") or "default",
            api_key_env=settings.get("api_key_env", "LLM_API_KEY"),
            timeout=settings.get("timeout", 60.0),
            retries=settings.get("retries", 3),
            backoff=settings.get("backoff", 1.0),
        )
    raise ConfigError(f"unknown backend kind {kind!r}")

