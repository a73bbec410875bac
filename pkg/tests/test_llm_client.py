import json
import time

import pytest

from explainrank.llm_client import (
    CompletionRequest,
    GenerationConfig,
    GenerationError,
    LlmClient,
    ResponseCache,
    RetryPolicy,
    request_cache_key,
)
from mockserver import MockChatServer, make_chat_payload

CFG = GenerationConfig(model_id="mock-model", temperature=0.0, max_output_tokens=256)
FAST_RETRY = RetryPolicy(max_retries=5, backoff_base=0.001)


def req(user="hello", **kw):
    return CompletionRequest(config=CFG, user=user, **kw)


class TestGenerate:
    def test_scripted_echo(self):
        behavior = lambda body, key, i: (200, make_chat_payload("true. Explanation: X"))
        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, retry=FAST_RETRY)
            result = client.generate(req())
            assert result.text == "true. Explanation: X"
            assert result.finish_reason == "stop"
            assert result.from_cache is False
            client.close()

    def test_finish_reason_length(self):
        behavior = lambda body, key, i: (200, make_chat_payload("truncated", "length"))
        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, retry=FAST_RETRY)
            assert client.generate(req()).finish_reason == "length"
            client.close()

    def test_wire_format(self):
        seen = {}

        def behavior(body, key, i):
            seen.update(body)
            return 200, make_chat_payload("ok")

        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, api_key="secret-key", retry=FAST_RETRY)
            client.generate(req(user="U", system="S"))
            client.close()
        assert seen["model"] == "mock-model"
        assert seen["temperature"] == 0.0
        assert seen["max_tokens"] == 256
        assert seen["stop"] == []
        assert seen["messages"] == [
            {"role": "system", "content": "S"},
            {"role": "user", "content": "U"},
        ]

    def test_retry_429_twice_then_success(self):
        def behavior(body, key, i):
            if i <= 2:
                return 429, {"error": "rate limited"}
            return 200, make_chat_payload("finally")

        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, retry=FAST_RETRY)
            result = client.generate(req())
            assert result.text == "finally"
            assert client.stats.retries == 2
            assert client.stats.network_calls == 3
            client.close()

    def test_retries_exhausted(self):
        behavior = lambda body, key, i: (503, {"error": "down"})
        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, retry=RetryPolicy(max_retries=2, backoff_base=0.001))
            with pytest.raises(GenerationError, match="after 2 retries"):
                client.generate(req())
            assert client.stats.failures == 1
            client.close()

    def test_malformed_response_carries_body(self):
        behavior = lambda body, key, i: (200, {"unexpected": "shape"})
        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, retry=FAST_RETRY)
            with pytest.raises(GenerationError, match="unexpected"):
                client.generate(req())
            client.close()

    def test_client_error_not_retried(self):
        behavior = lambda body, key, i: (400, {"error": "bad request"})
        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, retry=FAST_RETRY)
            with pytest.raises(GenerationError, match="HTTP 400"):
                client.generate(req())
            assert client.stats.network_calls == 1
            client.close()


class TestCache:
    def test_second_call_hits_cache(self, tmp_path):
        calls = []

        def behavior(body, key, i):
            calls.append(key)
            return 200, make_chat_payload("cached text")

        cache = ResponseCache(tmp_path / "cache.jsonl")
        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, cache=cache, retry=FAST_RETRY)
            first = client.generate(req())
            second = client.generate(req())
            client.close()
        assert first.from_cache is False
        assert second.from_cache is True
        assert second.text == first.text
        assert len(calls) == 1
        cache.close()

    def test_cache_survives_restart(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        behavior = lambda body, key, i: (200, make_chat_payload("persisted"))
        with MockChatServer(behavior) as server:
            cache = ResponseCache(path)
            client = LlmClient(server.base_url, cache=cache, retry=FAST_RETRY)
            client.generate(req())
            client.close()
            cache.close()

            cache2 = ResponseCache(path)
            client2 = LlmClient(server.base_url, cache=cache2, retry=FAST_RETRY)
            result = client2.generate(req())
            client2.close()
            cache2.close()
            assert result.from_cache is True
            assert server.state.received == 1

    def test_salt_busts_cache(self, tmp_path):
        cache = ResponseCache(tmp_path / "cache.jsonl")
        behavior = lambda body, key, i: (200, make_chat_payload(f"call {i}"))
        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, cache=cache, retry=FAST_RETRY)
            a = client.generate(req())
            b = client.generate(req(cache_salt="retry=1"))
            client.close()
        assert a.from_cache is False and b.from_cache is False
        assert a.text != b.text
        cache.close()

    def test_key_depends_on_model_and_config(self):
        base = request_cache_key(req())
        other_model = CompletionRequest(
            config=GenerationConfig(model_id="other"), user="hello"
        )
        other_temp = CompletionRequest(
            config=GenerationConfig(model_id="mock-model", temperature=0.3), user="hello"
        )
        assert request_cache_key(other_model) != base
        assert request_cache_key(other_temp) != base

    def test_torn_trailing_line_skipped(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        good = {"key": "k1", "model_id": "m", "text": "t", "finish_reason": "stop",
                "created_unix": 0}
        path.write_text(json.dumps(good) + "\n" + '{"key": "k2", "model_', encoding="utf-8")
        cache = ResponseCache(path)
        assert cache.get("k1") is not None
        assert cache.get("k2") is None
        cache.close()

    def test_compaction_dedupes(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = ResponseCache(path)
        cache.put("k", "m", "v1", "stop")
        cache.put("k", "m", "v2", "stop")
        assert path.read_text().count('"k"') >= 2
        kept = cache.compact()
        assert kept == 1
        assert path.read_text().count("\n") == 1
        assert cache.get("k")["text"] == "v2"
        cache.close()


class TestBatch:
    def test_empty(self):
        client = LlmClient("http://127.0.0.1:9")  # never contacted
        assert client.batch_generate([], max_in_flight=4) == []
        client.close()

    def test_bad_max_in_flight(self):
        client = LlmClient("http://127.0.0.1:9")
        with pytest.raises(ValueError):
            client.batch_generate([req()], max_in_flight=0)
        client.close()

    def test_order_preserved_under_random_latency(self):
        def behavior(body, key, i):
            time.sleep((hash(key) % 5) / 100)
            return 200, make_chat_payload(f"answer to {key}")

        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, retry=FAST_RETRY)
            requests = [req(user=f"prompt {i}") for i in range(20)]
            results = client.batch_generate(requests, max_in_flight=8)
            client.close()
        assert [r.text for r in results] == [f"answer to prompt {i}" for i in range(20)]

    def test_concurrency_capped(self):
        def behavior(body, key, i):
            time.sleep(0.03)
            return 200, make_chat_payload("ok")

        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, retry=FAST_RETRY)
            client.batch_generate([req(user=f"p{i}") for i in range(40)], max_in_flight=8)
            client.close()
            assert 1 <= server.state.peak_in_flight <= 8

    def test_serial_when_max_one(self):
        def behavior(body, key, i):
            time.sleep(0.01)
            return 200, make_chat_payload("ok")

        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, retry=FAST_RETRY)
            client.batch_generate([req(user=f"p{i}") for i in range(6)], max_in_flight=1)
            client.close()
            assert server.state.peak_in_flight == 1

    def test_item_failure_isolated(self):
        def behavior(body, key, i):
            if "item-3" in key:
                return 400, {"error": "poisoned item"}
            return 200, make_chat_payload("fine")

        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, retry=FAST_RETRY)
            requests = [req(user=f"item-{i}") for i in range(10)]
            results = client.batch_generate(requests, max_in_flight=4)
            client.close()
        assert sum(r.finish_reason == "error" for r in results) == 1
        assert results[3].finish_reason == "error"
        assert "poisoned" in results[3].error
        assert all(r.text == "fine" for i, r in enumerate(results) if i != 3)

    def test_thread_safe_cache_writes(self, tmp_path):
        cache = ResponseCache(tmp_path / "cache.jsonl")
        behavior = lambda body, key, i: (200, make_chat_payload(f"v:{key}"))
        with MockChatServer(behavior) as server:
            client = LlmClient(server.base_url, cache=cache, retry=FAST_RETRY)
            requests = [req(user=f"p{i}") for i in range(50)]
            client.batch_generate(requests, max_in_flight=16)
            client.close()
        cache.close()
        lines = (tmp_path / "cache.jsonl").read_text().strip().splitlines()
        assert len(lines) == 50
        for line in lines:
            json.loads(line)  # every line intact


class TestRequestValidation:
    def test_empty_user_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest(config=CFG, user="")

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GenerationConfig(model_id="m", max_output_tokens=0)
        with pytest.raises(ValueError):
            GenerationConfig(model_id="m", temperature=-0.1)
