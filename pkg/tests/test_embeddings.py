import io
import threading

import httpx
import numpy as np
import pytest

from propdetect.embeddings import (
    HashEmbeddingProvider,
    HttpEmbeddingProvider,
    ProviderError,
    embed_fragment,
    load_word_vectors,
    lookup_sequence,
    provider_from_env,
)
from propdetect.tokenization import Token, tokenize


def test_load_two_line_fixture():
    table = load_word_vectors(io.StringIO("the 0.1 0.2\ncat 0.3 0.4\n"))
    assert table.dim == 2
    assert len(table) == 2
    # Stored decimals are kept exactly.
    assert table.get("cat").tolist() == [0.3, 0.4]


def test_load_dimension_mismatch():
    with pytest.raises(ValueError, match="line 2"):
        load_word_vectors(["a 1.0\n", "b 1.0 2.0\n"])


def test_load_expected_dim_and_errors():
    with pytest.raises(ValueError, match="dimension mismatch at line 1"):
        load_word_vectors(["a 1.0 2.0\n"], expected_dim=3)
    with pytest.raises(ValueError, match="empty"):
        load_word_vectors([])
    with pytest.raises(ValueError, match="unparseable"):
        load_word_vectors(["a 1.0 zz\n"])


def test_duplicate_token_last_wins():
    table = load_word_vectors(["a 1 1\n", "a 2 2\n"])
    assert table.get("a").tolist() == [2.0, 2.0]


def test_oov_is_zero():
    table = load_word_vectors(["the 0.1 0.2\n"])
    assert table.get("zzz").tolist() == [0.0, 0.0]


def test_lookup_sequence():
    table = load_word_vectors(["the 0.1 0.2\n", "cat 0.3 0.4\n"])
    m = lookup_sequence(table, [Token("the", 0, 3), Token("cat", 4, 7)])
    assert m.tolist() == [[0.1, 0.2], [0.3, 0.4]]
    assert lookup_sequence(table, []).shape == (0, 2)
    upper = [Token("The", 0, 3)]
    assert lookup_sequence(table, upper, lowercase=True).tolist() == [[0.1, 0.2]]
    assert lookup_sequence(table, upper, lowercase=False).tolist() == [[0.0, 0.0]]


def test_hash_provider_documented_vector():
    # seed = first 8 bytes of sha256(b"abc"), little-endian, fed to
    # numpy.random.default_rng(seed).standard_normal(4); computed offline.
    expected = [0.21489595536145886, -0.16436298075474856,
                0.999453170941752, 0.5168203074665674]
    vec = embed_fragment(HashEmbeddingProvider(4), "abc")
    assert vec.tolist() == expected


def test_hash_provider_mean_of_tokens():
    p = HashEmbeddingProvider(8)
    v = p.embed("Shocking, vile")
    words = [p.word_vector(w) for w in ("shocking", ",", "vile")]
    np.testing.assert_allclose(v, np.mean(words, axis=0))
    assert p.embed("   ").tolist() == [0.0] * 8


def test_provider_deterministic_and_cache_transparent():
    cached, uncached = HashEmbeddingProvider(16), HashEmbeddingProvider(16, cache=False)
    a = cached.embed("a very, very different")
    b = cached.embed("a very, very different")
    c = uncached.embed("a very, very different")
    assert a.tobytes() == b.tobytes() == c.tobytes()
    assert len(cached._cache) == 1 and not uncached._cache


def test_provider_token_vectors():
    p = HashEmbeddingProvider(8)
    toks = tokenize("The thugs")
    m = p.token_vectors(toks)
    assert m.shape == (2, 8)
    assert m[0].tolist() == p.word_vector("the").tolist()


class _FakeService:
    def __init__(self, dim=3, fail=False, wrong_dim=False):
        self.dim, self.fail, self.wrong_dim = dim, fail, wrong_dim
        self.requests = []

    def __call__(self, request):
        import json

        body = json.loads(request.content)
        self.requests.append(body)
        if self.fail:
            return httpx.Response(503, json={"error": "down"})
        dim = self.dim + (1 if self.wrong_dim else 0)
        result = [[float(len(t)) + i for i in range(dim)] for t in body["texts"]]
        return httpx.Response(200, json={"id": body["id"], "result": result})


def _client(service):
    return httpx.Client(transport=httpx.MockTransport(service))


def test_http_provider_batches_and_orders():
    service = _FakeService()
    p = HttpEmbeddingProvider(dim=3, batch_size=2, client=_client(service))
    out = p.embed_many(["a", "bbb", "cc", "a"])
    assert out.tolist() == [[1, 2, 3], [3, 4, 5], [2, 3, 4], [1, 2, 3]]
    # Duplicate fragment sent once; batches of at most two.
    assert [r["texts"] for r in service.requests] == [["a", "bbb"], ["cc"]]
    p.embed("bbb")
    assert len(service.requests) == 2


def test_http_provider_down():
    p = HttpEmbeddingProvider(dim=3, client=_client(_FakeService(fail=True)))
    with pytest.raises(ProviderError, match="'a very, very different'") as info:
        p.embed("a very, very different")
    assert info.value.__cause__ is not None


def test_http_provider_connection_refused():
    p = HttpEmbeddingProvider(host="127.0.0.1", port=9, dim=3, timeout=0.5)
    with pytest.raises(ProviderError, match="fragment 'x'"):
        p.embed("x")


def test_http_provider_dimension_drift():
    p = HttpEmbeddingProvider(dim=3, client=_client(_FakeService(wrong_dim=True)))
    with pytest.raises(ProviderError, match="shape"):
        p.embed("abc")


def test_provider_from_env(monkeypatch):
    assert isinstance(provider_from_env(mock=True, dim=4), HashEmbeddingProvider)
    monkeypatch.setenv("PROPDETECT_EMBEDDING_URL", "http://embed.example:9000/encode")
    p = provider_from_env()
    assert p.url == "http://embed.example:9000/encode"
    assert not p.supports_token_vectors()


def test_cache_is_thread_safe():
    p = HashEmbeddingProvider(32)
    texts = [f"fragment {i % 7}" for i in range(200)]
    results = {}

    def work(k):
        results[k] = p.embed_many(texts)

    threads = [threading.Thread(target=work, args=(k,)) for k in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    ref = HashEmbeddingProvider(32, cache=False).embed_many(texts)
    for out in results.values():
        assert out.tobytes() == ref.tobytes()
