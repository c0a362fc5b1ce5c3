"""Static word vectors and contextual fragment-embedding providers.

Two provider implementations exist: :class:`HttpEmbeddingProvider` talks
to a running embedding service, :class:`HashEmbeddingProvider` is an
offline deterministic stand-in.

Hash provider rule (stable across processes and platforms): for a token
string ``w`` the vector is::

    seed = int.from_bytes(sha256(w.encode("utf-8")).digest()[:8], "little")
    numpy.random.default_rng(seed).standard_normal(dim)

Token vectors use the lower-cased token surface. A fragment vector is the
mean of the token vectors of ``tokenize(fragment)``; a fragment without
tokens maps to the zero vector.
"""

from __future__ import annotations

import hashlib
import os
import threading
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .tokenization import Token, tokenize

__all__ = [
    "DEFAULT_SENTENCE_DIM",
    "DEFAULT_WORD_DIM",
    "EmbeddingProvider",
    "HashEmbeddingProvider",
    "HttpEmbeddingProvider",
    "ProviderError",
    "WordVectorTable",
    "embed_fragment",
    "load_word_vectors",
    "lookup_sequence",
    "provider_from_env",
]

DEFAULT_WORD_DIM = 100
DEFAULT_SENTENCE_DIM = 768
ENDPOINT_ENV = "PROPDETECT_EMBEDDING_URL"


class ProviderError(RuntimeError):
    """The embedding provider failed or returned inconsistent vectors."""


@dataclass
class WordVectorTable:
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    oov_vector: np.ndarray | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.oov_vector is None:
            self.oov_vector = np.zeros(self.dim)
        if self.oov_vector.shape != (self.dim,):
            raise ValueError("oov_vector has wrong length")
        for word, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise ValueError(f"vector for {word!r} has length {vec.shape}")

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, word):
        return word in self.vectors

    def get(self, word: str) -> np.ndarray:
        return self.vectors.get(word, self.oov_vector)

    def token_vectors(self, tokens: Sequence[Token], lowercase: bool = True):
        return lookup_sequence(self, tokens, lowercase)


def load_word_vectors(stream: Iterable[str] | str,
                      expected_dim: int | None = None) -> WordVectorTable:
    """Read a GloVe-style text file: ``token v1 v2 ... vd`` per line.

    A path may be passed instead of an open stream. Duplicate tokens keep
    the last vector seen.
    """
    if isinstance(stream, (str, os.PathLike)):
        with open(stream, encoding="utf-8") as f:
            return load_word_vectors(f, expected_dim)

    dim = expected_dim
    vectors: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(stream, start=1):
        parts = line.rstrip("\r\n").split(" ")
        parts = [p for p in parts if p]
        if not parts:
            continue
        word, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
            if dim == 0:
                raise ValueError(f"no vector values at line {lineno}")
        if len(values) != dim:
            raise ValueError(
                f"dimension mismatch at line {lineno}: expected {dim}, "
                f"got {len(values)}")
        try:
            vectors[word] = np.array([float(v) for v in values])
        except ValueError:
            raise ValueError(f"unparseable float at line {lineno}") from None
    if not vectors:
        raise ValueError("empty word-vector stream")
    return WordVectorTable(dim, vectors)


def lookup_sequence(table: WordVectorTable, tokens: Sequence[Token],
                    lowercase: bool = True) -> np.ndarray:
    """Stack one row per token; unknown words get the OOV vector."""
    out = np.empty((len(tokens), table.dim))
    for i, tok in enumerate(tokens):
        word = tok.surface.lower() if lowercase else tok.surface
        out[i] = table.get(word)
    return out


class EmbeddingProvider:
    """Maps fragment text to a fixed-dimension vector.

    Subclasses implement :meth:`_encode_batch`. Results are cached by exact
    text; the cache is guarded by a lock so one provider can serve several
    threads.
    """

    dim: int

    def __init__(self, dim: int, cache: bool = True):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.cache_enabled = cache
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def _encode_batch(self, texts: list[str]) -> np.ndarray:
        raise NotImplementedError

    def supports_token_vectors(self) -> bool:
        return False

    def token_vectors(self, tokens: Sequence[Token], lowercase: bool = True):
        raise NotImplementedError(
            f"{type(self).__name__} does not provide per-token vectors")

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.empty((0, self.dim))
        with self._lock:
            known = {t: self._cache[t] for t in texts if t in self._cache}
        missing = [t for t in dict.fromkeys(texts) if t not in known]
        if missing:
            try:
                vecs = np.asarray(self._encode_batch(missing), dtype=np.float64)
            except ProviderError:
                raise
            except Exception as exc:
                raise ProviderError(
                    f"embedding provider failed for fragment {missing[0]!r}"
                    f"{f' (+{len(missing) - 1} more)' if len(missing) > 1 else ''}: {exc}"
                ) from exc
            if vecs.shape != (len(missing), self.dim):
                raise ProviderError(
                    f"provider returned shape {vecs.shape}, expected "
                    f"({len(missing)}, {self.dim}) for fragment {missing[0]!r}")
            if not np.all(np.isfinite(vecs)):
                raise ProviderError(
                    f"non-finite embedding for fragment {missing[0]!r}")
            fresh = dict(zip(missing, vecs))
            known.update(fresh)
            if self.cache_enabled:
                with self._lock:
                    self._cache.update(fresh)
        return np.stack([known[t] for t in texts])

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]


def embed_fragment(provider: EmbeddingProvider, text: str) -> np.ndarray:
    return provider.embed(text)


def _hash_vector(word: str, dim: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(word.encode("utf-8")).digest()[:8], "little")
    return np.random.default_rng(seed).standard_normal(dim)


class HashEmbeddingProvider(EmbeddingProvider):
    """Deterministic offline provider (see module docstring for the rule)."""

    def __init__(self, dim: int = DEFAULT_SENTENCE_DIM, cache: bool = True):
        super().__init__(dim, cache)
        self._words: dict[str, np.ndarray] = {}

    def word_vector(self, word: str) -> np.ndarray:
        vec = self._words.get(word)
        if vec is None:
            vec = self._words[word] = _hash_vector(word, self.dim)
        return vec

    def _encode_batch(self, texts):
        out = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            toks = tokenize(text)
            if toks:
                out[i] = np.mean([self.word_vector(t.surface.lower()) for t in toks], axis=0)
        return out

    def supports_token_vectors(self) -> bool:
        return True

    def token_vectors(self, tokens, lowercase=True):
        out = np.empty((len(tokens), self.dim))
        for i, tok in enumerate(tokens):
            out[i] = self.word_vector(tok.surface.lower() if lowercase else tok.surface)
        return out


class HttpEmbeddingProvider(EmbeddingProvider):
    """Client for an embedding service exposing ``POST /encode``.

    Request body ``{"id": n, "texts": [...]}``; the response carries the
    vectors in ``"result"`` in request order.
    """

    def __init__(self, host: str = "localhost", port: int = 8125,
                 dim: int = DEFAULT_SENTENCE_DIM, timeout: float = 30.0,
                 batch_size: int = 64, cache: bool = True, client=None,
                 url: str | None = None):
        super().__init__(dim, cache)
        self.url = url or f"http://{host}:{port}/encode"
        self.timeout = timeout
        self.batch_size = batch_size
        self._client = client
        self._req_id = 0

    def _post(self, texts):
        import httpx

        self._req_id += 1
        payload = {"id": self._req_id, "texts": texts, "is_tokenized": False}
        if self._client is not None:
            resp = self._client.post(self.url, json=payload, timeout=self.timeout)
        else:
            resp = httpx.post(self.url, json=payload, timeout=self.timeout)
        resp.raise_for_status()
        body = resp.json()
        if "result" not in body:
            raise ProviderError(f"malformed service response: keys {sorted(body)}")
        return body["result"]

    def _encode_batch(self, texts):
        rows = []
        for i in range(0, len(texts), self.batch_size):
            chunk = texts[i:i + self.batch_size]
            result = self._post(chunk)
            if len(result) != len(chunk):
                raise ProviderError(
                    f"service returned {len(result)} vectors for {len(chunk)} "
                    f"fragments starting with {chunk[0]!r}")
            rows.extend(result)
        return np.asarray(rows, dtype=np.float64)


def provider_from_env(mock: bool = False, dim: int = DEFAULT_SENTENCE_DIM,
                      timeout: float = 30.0) -> EmbeddingProvider:
    """Mock provider when asked, else an HTTP client.

    The endpoint comes from ``PROPDETECT_EMBEDDING_URL`` (full URL of the
    encode route) and defaults to ``http://localhost:8125/encode``.
    """
    if mock:
        return HashEmbeddingProvider(dim)
    url = os.environ.get(ENDPOINT_ENV)
    return HttpEmbeddingProvider(dim=dim, timeout=timeout, url=url)
