"""Dense encoders and exact cosine-similarity search.

Two encoders are provided. :class:`TrigramEncoder` is the deterministic,
dependency-free ``local_test`` encoder: every token produced by
:func:`hybrag.corpus.tokenize` is padded with one space on each side, its
character trigrams are hashed with 32-bit FNV-1a (over the UTF-8 bytes)
into ``dim`` buckets, bucket counts are accumulated and the vector is
L2-normalized. :class:`RemoteEncoder` talks to an embedding service over
JSON/HTTP (``{model, inputs}`` -> ``{vectors}``) with batching, retries
and an on-disk cache.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np

from ._io import atomic_open
from .corpus import Document, tokenize
from .errors import InputError, IntegrityError, ParseError, TransportError
from .rerank import RankedList

log = logging.getLogger(__name__)

VECTOR_INDEX_FORMAT = "hybrag-vector-index"
VECTOR_INDEX_VERSION = 1

_FNV_OFFSET = 0x811C9DC5
_FNV_PRIME = 0x01000193


def fnv1a_32(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFF
    return h


def _as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InputError("embedding must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise IntegrityError("embedding contains non-finite values")
    return arr


def _rescale(v: np.ndarray) -> np.ndarray:
    # dividing by the largest magnitude first keeps the norm from under/overflowing
    m = np.max(np.abs(v), axis=-1, keepdims=True)
    return np.divide(v, m, out=np.zeros_like(v), where=m > 0)


def cosine_sim(a, b) -> float:
    a = _as_vector(a)
    b = _as_vector(b)
    if a.shape != b.shape:
        raise InputError(f"dimension mismatch: {a.size} vs {b.size}")
    a, b = _rescale(a), _rescale(b)
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        raise InputError("cosine similarity undefined for a zero vector")
    return float(np.dot(a, b)) / (na * nb)


class TrigramEncoder:
    kind = "local_test"

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise InputError("dim must be positive")
        self.dim = dim

    def trigrams(self, text: str) -> list[str]:
        grams = []
        for tok in tokenize(text):
            padded = f" {tok} "
            grams.extend(padded[i:i + 3] for i in range(len(padded) - 2))
        return grams

    def encode(self, text: str) -> np.ndarray:
        """Hashed trigram counts, L2-normalized. May be all zeros for punctuation-only text."""
        if not text or not text.strip():
            raise InputError("cannot encode empty text")
        vec = np.zeros(self.dim, dtype=np.float64)
        for gram in self.trigrams(text):
            vec[fnv1a_32(gram.encode("utf-8")) % self.dim] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec

    def encode_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.encode(t) for t in texts]


class EmbeddingCache:
    """Content-addressed store: one ``.npy`` file per sha256(model, text)."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(model: str, text: str) -> str:
        return hashlib.sha256(model.encode("utf-8") + b"\x00" + text.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.npy"

    def get(self, model: str, text: str) -> np.ndarray | None:
        p = self._path(self.key(model, text))
        if not p.exists():
            return None
        return np.load(p, allow_pickle=False)

    def put(self, model: str, text: str, vec: np.ndarray) -> None:
        p = self._path(self.key(model, text))
        with atomic_open(p, "wb") as fh:
            np.save(fh, np.asarray(vec, dtype=np.float64), allow_pickle=False)


class RemoteEncoder:
    """Batched client for a JSON-over-HTTP embedding endpoint.

    Batches are sent with at most ``max_in_flight`` concurrent requests;
    results are reassembled in input order whatever order they finish in.
    """

    kind = "remote_api"

    def __init__(self, endpoint: str, model: str, dim: int, api_key: str | None = None,
                 batch_size: int = 32, max_in_flight: int = 4, timeout: float = 30.0,
                 retries: int = 3, backoff: float = 0.5, cache_dir=None,
                 transport: httpx.BaseTransport | None = None):
        if dim < 1:
            raise InputError("dim must be positive")
        self.endpoint = endpoint
        self.model = model
        self.dim = dim
        self.batch_size = max(1, batch_size)
        self.max_in_flight = max(1, max_in_flight)
        self.retries = retries
        self.backoff = backoff
        self.cache = EmbeddingCache(cache_dir) if cache_dir else None
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        self._lock = threading.Lock()

    def close(self):
        self._client.close()

    def _post(self, texts: list[str]) -> list[np.ndarray]:
        payload = {"model": self.model, "inputs": texts}
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self.endpoint, json=payload)
            except httpx.HTTPError as exc:
                last_exc = exc
                log.warning("embedding request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_exc = TransportError(f"HTTP {resp.status_code}")
                log.warning("embedding endpoint returned %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"embedding endpoint rejected request: HTTP {resp.status_code}")
            try:
                vectors = resp.json()["vectors"]
            except (ValueError, KeyError, TypeError):
                raise IntegrityError("embedding response lacks a 'vectors' list") from None
            if not isinstance(vectors, list) or len(vectors) != len(texts):
                raise IntegrityError(f"expected {len(texts)} vectors in response")
            out = []
            for v in vectors:
                arr = _as_vector(v)
                if arr.size != self.dim:
                    raise IntegrityError(f"backend returned dimension {arr.size}, expected {self.dim}")
                out.append(arr)
            return out
        raise TransportError(f"embedding endpoint failed after {self.retries + 1} attempts: {last_exc}")

    def encode_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        for t in texts:
            if not t or not t.strip():
                raise InputError("cannot encode empty text")
        result: list[np.ndarray | None] = [None] * len(texts)
        todo: list[int] = []
        for i, t in enumerate(texts):
            cached = self.cache.get(self.model, t) if self.cache else None
            if cached is not None and cached.size == self.dim:
                result[i] = cached
            else:
                todo.append(i)
        batches = [todo[i:i + self.batch_size] for i in range(0, len(todo), self.batch_size)]

        def run(batch):
            return batch, self._post([texts[i] for i in batch])

        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            for batch, vecs in pool.map(run, batches):
                for i, v in zip(batch, vecs):
                    result[i] = v
                    if self.cache:
                        self.cache.put(self.model, texts[i], v)
        return result  # type: ignore[return-value]

    def encode(self, text: str) -> np.ndarray:
        return self.encode_batch([text])[0]


def encode(enc, text: str) -> np.ndarray:
    vec = enc.encode(text)
    if vec.shape != (enc.dim,):
        raise IntegrityError(f"encoder produced shape {vec.shape}, expected ({enc.dim},)")
    return vec


@dataclass
class VectorIndex:
    """Exact-scan vector store. Rows are unit-normalized copies of the input vectors."""

    doc_ids: list[str]
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.doc_ids):
            raise IntegrityError("vectors must be a (n_docs, dim) matrix")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise IntegrityError("duplicate doc ids in vector index")
        if not np.all(np.isfinite(self.vectors)):
            raise IntegrityError("vector index contains non-finite values")
        scaled = _rescale(self.vectors)
        norms = np.linalg.norm(scaled, axis=1)
        if np.any(norms == 0):
            bad = self.doc_ids[int(np.argmin(norms))]
            raise IntegrityError(f"zero-norm embedding for doc {bad!r}")
        self._unit = scaled / norms[:, None]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.doc_ids)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[str, np.ndarray]], dim: int | None = None) -> "VectorIndex":
        if not pairs:
            return cls([], np.zeros((0, dim or 1)))
        ids = [p[0] for p in pairs]
        mat = np.vstack([_as_vector(p[1]) for p in pairs])
        if dim is not None and mat.shape[1] != dim:
            raise IntegrityError(f"embedding dim {mat.shape[1]} != index dim {dim}")
        return cls(ids, mat)


def semantic_search(idx: VectorIndex, query_vec, k: int, query_id: str = "") -> RankedList:
    """Top-``k`` documents by cosine similarity, ties by ascending doc id."""
    if k < 1:
        raise InputError("k must be >= 1")
    if len(idx) == 0:
        return RankedList(query_id)
    q = _as_vector(query_vec)
    if q.size != idx.dim:
        raise InputError(f"query dim {q.size} != index dim {idx.dim}")
    q = _rescale(q)
    qn = np.linalg.norm(q)
    if qn == 0:
        raise InputError("query embedding has zero norm")
    # row-wise reduction rather than a BLAS mat-vec: identical rows must get
    # bit-identical scores so that ties fall through to the doc id
    sims = np.sum(idx._unit * (q / qn), axis=1)
    return RankedList.from_scores(query_id, zip(idx.doc_ids, sims.tolist()), k)


def build_vector_index(enc, docs: Sequence[Document], batch_size: int = 64) -> VectorIndex:
    """Encode every document; entries are stored in ascending doc id order."""
    if not docs:
        raise InputError("cannot index an empty corpus")
    ordered = sorted(docs, key=lambda d: d.id)
    pairs = []
    for start in range(0, len(ordered), max(1, batch_size)):
        chunk = ordered[start:start + batch_size]
        try:
            vecs = enc.encode_batch([d.text for d in chunk])
        except (InputError, IntegrityError):
            # re-run one by one to name the offending document
            vecs = []
            for d in chunk:
                try:
                    vecs.append(enc.encode(d.text))
                except (InputError, IntegrityError) as exc:
                    raise type(exc)(f"doc {d.id!r}: {exc}") from None
        for d, v in zip(chunk, vecs):
            v = np.asarray(v, dtype=np.float64)
            if v.shape != (enc.dim,):
                raise IntegrityError(f"doc {d.id!r}: embedding dim {v.size}, expected {enc.dim}")
            if not np.any(v):
                raise IntegrityError(f"doc {d.id!r}: embedding is the zero vector")
            pairs.append((d.id, v))
    return VectorIndex.from_pairs(pairs)


def save_vector_index(idx: VectorIndex, path) -> None:
    """Persist as ``.npz``: format/version header, doc ids, float32 vectors."""
    with atomic_open(path, "wb") as fh:
        np.savez(
            fh,
            format=np.array(VECTOR_INDEX_FORMAT),
            version=np.array(VECTOR_INDEX_VERSION),
            doc_ids=np.array(idx.doc_ids, dtype=str),
            vectors=idx.vectors.astype(np.float32),
        )


def load_vector_index(path) -> VectorIndex:
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            if str(data["format"]) != VECTOR_INDEX_FORMAT:
                raise ParseError("not a vector index file", path)
            if int(data["version"]) != VECTOR_INDEX_VERSION:
                raise ParseError(f"unsupported vector index version {int(data['version'])}", path)
            ids = [str(x) for x in data["doc_ids"]]
            vectors = data["vectors"].astype(np.float64)
    except (OSError, KeyError, ValueError) as exc:
        raise ParseError(f"unreadable vector index ({exc})", path) from None
    return VectorIndex(ids, vectors)


def make_encoder(kind: str = "local_test", dim: int = 256, **remote) -> TrigramEncoder | RemoteEncoder:
    if kind == "local_test":
        return TrigramEncoder(dim)
    if kind == "remote_api":
        api_key_env = remote.pop("api_key_env", None)
        if api_key_env and "api_key" not in remote:
            remote["api_key"] = os.environ.get(api_key_env)
        return RemoteEncoder(dim=dim, **remote)
    raise InputError(f"unknown encoder kind {kind!r}")
