import json
import math
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from tokpack.embedding import (
    AdditiveProvider,
    FileCacheProvider,
    HashProvider,
    RemoteProvider,
    SubsetCache,
    cosine,
    load_embedding_cache,
    positions_mask,
    subset_similarity,
    write_embedding_cache,
)
from tokpack.errors import DimensionMismatch, ProviderError, ZeroNormError
from tokpack.model import tokenize_words

from conftest import random_message


class TestCosine:
    def test_self_similarity_is_one(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            v = rng.standard_normal(16)
            assert cosine(v, v) == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal_unit_vectors(self):
        a = np.array([1.0, 0.0])
        b = np.array([0.0, 1.0])
        assert cosine(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_sixty_degrees(self):
        # unit vectors at 60 degrees: dot = cos(60) = 0.5
        a = np.array([1.0, 0.0])
        b = np.array([0.5, math.sqrt(3) / 2])
        assert cosine(a, b) == pytest.approx(0.5, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a, b = rng.standard_normal(8), rng.standard_normal(8)
        assert cosine(a, b) == pytest.approx(cosine(b, a), abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine(np.ones(3), np.ones(4))

    def test_zero_norm(self):
        with pytest.raises(ZeroNormError):
            cosine(np.zeros(3), np.ones(3))


class TestHashProvider:
    def test_repeat_calls_identical(self):
        provider = HashProvider(seed=7)
        v1 = provider.embed("cat")
        v2 = provider.embed("cat")
        np.testing.assert_array_equal(v1, v2)

    def test_reproducible_across_instances(self):
        texts = ["cat", "basket", "", "a small basket"]
        a = HashProvider(seed=7)
        b = HashProvider(seed=7)
        for text in texts:
            np.testing.assert_array_equal(a.embed(text), b.embed(text))

    def test_seed_changes_geometry(self):
        a = HashProvider(seed=1).embed("cat")
        b = HashProvider(seed=2).embed("cat")
        assert not np.allclose(a, b)

    def test_unit_norm(self):
        v = HashProvider(seed=3).embed("anything at all")
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)

    def test_counters(self):
        provider = HashProvider(seed=0)
        provider.embed("x")
        provider.embed("x")
        provider.embed("y")
        assert provider.counter.raw_requests == 3
        assert provider.counter.cache_misses == 2

    def test_frozen_regression_vector(self):
        # pins the text -> vector map across runs and platforms
        head = HashProvider(seed=7).embed("cat")[:4]
        np.testing.assert_allclose(
            head,
            [0.265964075137, 0.002081123106, -0.055764845705, -0.104273989467],
            atol=1e-12,
        )


class TestAdditiveProvider:
    def test_two_word_embedding_is_normalized_sum(self):
        msg = tokenize_words("cat basket dog tree")
        provider = AdditiveProvider.for_message(msg)
        vec = provider.embed("cat basket")
        expected = np.zeros(provider.dim)
        expected[0] = 1.0  # cat
        expected[1] = 1.0  # basket
        expected /= np.linalg.norm(expected)
        np.testing.assert_allclose(vec, expected, atol=1e-12)

    def test_unknown_word_raises(self):
        provider = AdditiveProvider(["cat"])
        with pytest.raises(ProviderError):
            provider.embed("dog")

    def test_empty_text_raises(self):
        provider = AdditiveProvider(["cat"])
        with pytest.raises(ProviderError):
            provider.embed("")

    def test_conflicting_duplicate_weights_rejected(self):
        with pytest.raises(ValueError):
            AdditiveProvider(["a", "a"], weights=[1.0, 2.0])

    def test_duplicate_surfaces_share_direction(self):
        provider = AdditiveProvider(["a", "a", "b"], weights=[1.0, 1.0, 1.0])
        va = provider.embed("a")
        vaa = provider.embed("a a")
        np.testing.assert_allclose(va, vaa, atol=1e-12)

    def test_vocabulary_must_fit_dimension(self):
        with pytest.raises(ValueError):
            AdditiveProvider([f"w{i}" for i in range(5)], dim=4)


class TestSubsetSimilarity:
    def test_full_survivors_score_one(self, cat_basket):
        provider = AdditiveProvider.for_message(cat_basket)
        cache = SubsetCache(cat_basket)
        score = subset_similarity(cache, provider, cat_basket, range(8))
        assert score == pytest.approx(1.0, abs=1e-9)
        assert cache.similarities[cache.full_mask] == pytest.approx(1.0, abs=1e-9)

    def test_empty_survivors_score_zero(self, cat_basket):
        provider = AdditiveProvider.for_message(cat_basket)
        cache = SubsetCache(cat_basket)
        assert subset_similarity(cache, provider, cat_basket, set()) == 0.0

    def test_half_survivors_equal_weights(self):
        # orthonormal equal weights: similarity = sqrt(|S| / K)
        msg = tokenize_words("a b c d")
        provider = AdditiveProvider.for_message(msg)
        cache = SubsetCache(msg)
        score = subset_similarity(cache, provider, msg, {0, 2})
        assert score == pytest.approx(math.sqrt(2) / 2, abs=1e-12)

    def test_monotone_in_survivor_count(self):
        msg = tokenize_words("a b c d e f g h")
        provider = AdditiveProvider.for_message(msg)
        cache = SubsetCache(msg)
        scores = [
            subset_similarity(cache, provider, msg, set(range(size)))
            for size in range(1, 9)
        ]
        for size, score in enumerate(scores, start=1):
            assert score == pytest.approx(math.sqrt(size / 8), abs=1e-12)
        assert all(b > a for a, b in zip(scores, scores[1:]))

    def test_cache_soundness(self):
        # cached and cache-free evaluations agree on random subsets
        rng = np.random.default_rng(5)
        for _ in range(10):
            msg = random_message(rng, 6)
            provider = HashProvider(seed=int(rng.integers(1000)))
            shared = SubsetCache(msg)
            subsets = [
                {int(p) for p in rng.choice(6, size=int(rng.integers(1, 6)), replace=False)}
                for _ in range(12)
            ]
            with_cache = [subset_similarity(shared, provider, msg, s) for s in subsets]
            without = [
                subset_similarity(SubsetCache(msg), provider, msg, s) for s in subsets
            ]
            np.testing.assert_allclose(with_cache, without, atol=1e-12)

    def test_counter_law_second_pass_costs_nothing(self, cat_basket):
        provider = AdditiveProvider.for_message(cat_basket)
        cache = SubsetCache(cat_basket)
        subsets = [{0, 1}, {2, 3}, {0, 1, 2, 3}, set(range(8))]
        for s in subsets:
            subset_similarity(cache, provider, cat_basket, s)
        misses_after_first = provider.counter.cache_misses
        for s in subsets:
            subset_similarity(cache, provider, cat_basket, s)
        assert provider.counter.cache_misses == misses_after_first
        assert provider.counter.raw_requests == 2 * len(subsets)

    def test_misses_never_outrun_raw_requests(self):
        # adversarial order: a proper subset as the very first query
        rng = np.random.default_rng(6)
        for _ in range(10):
            msg = random_message(rng, 6)
            provider = HashProvider(seed=int(rng.integers(1000)))
            cache = SubsetCache(msg)
            for _ in range(15):
                size = int(rng.integers(0, 7))
                subset = {int(p) for p in rng.choice(6, size=size, replace=False)}
                subset_similarity(cache, provider, msg, subset)
                assert provider.counter.cache_misses <= provider.counter.raw_requests

    def test_wrong_message_rejected(self, cat_basket):
        other = tokenize_words("a different sentence")
        cache = SubsetCache(other)
        provider = HashProvider()
        with pytest.raises(ValueError):
            subset_similarity(cache, provider, cat_basket, {0})

    def test_concurrent_queries_match_sequential(self, cat_basket):
        import itertools
        from concurrent.futures import ThreadPoolExecutor

        subsets = [set(c) for r in range(9) for c in itertools.combinations(range(8), r)]
        sequential_provider = AdditiveProvider.for_message(cat_basket)
        sequential_cache = SubsetCache(cat_basket)
        expected = [
            subset_similarity(sequential_cache, sequential_provider, cat_basket, s)
            for s in subsets
        ]

        provider = AdditiveProvider.for_message(cat_basket)
        cache = SubsetCache(cat_basket)
        with ThreadPoolExecutor(max_workers=8) as pool:
            got = list(
                pool.map(
                    lambda s: subset_similarity(cache, provider, cat_basket, s),
                    subsets * 4,
                )
            )
        np.testing.assert_allclose(got, expected * 4, atol=0)
        assert provider.counter.raw_requests == 4 * len(subsets)
        assert provider.counter.cache_misses <= len(subsets)

    def test_k_limit_enforced(self):
        msg = tokenize_words(" ".join(f"w{i}" for i in range(65)))
        with pytest.raises(ValueError):
            SubsetCache(msg)

    def test_positions_mask(self):
        assert positions_mask({0, 3}, 4) == 0b1001
        with pytest.raises(ValueError):
            positions_mask({4}, 4)


class TestFileCache:
    def test_round_trip(self, tmp_path):
        source = HashProvider(seed=9, dim=8)
        texts = ["cat", "basket", "cat basket"]
        path = tmp_path / "cache.jsonl"
        write_embedding_cache(
            path, dim=8, model="hash:9", entries=[(t, source.embed(t)) for t in texts]
        )
        header, entries = load_embedding_cache(path)
        assert header["model"] == "hash:9"
        provider = FileCacheProvider.from_path(path)
        for text in texts:
            np.testing.assert_allclose(provider.embed(text), source.embed(text), atol=1e-12)

    def test_strict_miss_raises(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        write_embedding_cache(path, dim=4, model="m", entries=[("cat", [1, 0, 0, 0])])
        provider = FileCacheProvider.from_path(path, strict=True)
        with pytest.raises(ProviderError):
            provider.embed("dog")

    def test_fallback_when_lenient(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        write_embedding_cache(path, dim=64, model="m", entries=[])
        fallback = HashProvider(seed=1)
        provider = FileCacheProvider.from_path(path, strict=False, fallback=fallback)
        np.testing.assert_allclose(
            provider.embed("dog"), HashProvider(seed=1).embed("dog"), atol=1e-12
        )

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ProviderError):
            load_embedding_cache(path)


class _StubEmbedHandler(BaseHTTPRequestHandler):
    fail_remaining = 0
    dim = 6

    def log_message(self, *args):  # silence test output
        pass

    def _vector_for(self, text):
        rng = np.random.default_rng(abs(hash(("stub", text))) % (2**32))
        v = rng.standard_normal(self.dim)
        return (v / np.linalg.norm(v)).tolist()

    def do_GET(self):
        if self.path == "/health":
            self._send(200, {"model": "stub", "dim": self.dim})
        else:
            self._send(404, {"error": "not found"})

    def do_POST(self):
        cls = type(self)
        if cls.fail_remaining > 0:
            cls.fail_remaining -= 1
            self._send(500, {"error": "transient"})
            return
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        texts = body.get("texts")
        if not isinstance(texts, list) or not texts:
            self._send(400, {"error": "texts required"})
            return
        self._send(
            200,
            {"model": "stub", "dim": self.dim, "vectors": [self._vector_for(t) for t in texts]},
        )

    def _send(self, status, payload):
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


@pytest.fixture
def stub_service():
    server = HTTPServer(("127.0.0.1", 0), _StubEmbedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _StubEmbedHandler.fail_remaining = 0
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()
    thread.join(timeout=5)


class TestRemoteProvider:
    def test_health_and_embed(self, stub_service):
        provider = RemoteProvider(stub_service)
        assert provider.model == "stub"
        assert provider.dim == 6
        v1 = provider.embed("cat")
        v2 = provider.embed("cat")
        np.testing.assert_array_equal(v1, v2)
        assert provider.counter.cache_misses == 1

    def test_retries_once_on_transient_failure(self, stub_service):
        provider = RemoteProvider(stub_service)
        _StubEmbedHandler.fail_remaining = 1
        vec = provider.embed("cat")
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-9)

    def test_two_failures_raise(self, stub_service):
        provider = RemoteProvider(stub_service)
        _StubEmbedHandler.fail_remaining = 2
        with pytest.raises(ProviderError):
            provider.embed("dog")

    def test_unreachable_service(self):
        with pytest.raises(ProviderError):
            RemoteProvider("http://127.0.0.1:9", timeout=0.2)
