from __future__ import annotations

import dataclasses
import json

import httpx
import pytest

from constructminer import prompts
from constructminer.errors import (
    CacheCorrupt,
    ConfigError,
    EmptyInput,
    MixedLabels,
    NoSummaryGenerated,
    PromptBudgetExceeded,
    ProviderError,
    SameFamilyViolation,
)
from constructminer.llm import (
    DEFAULT_QUERIER,
    DEFAULT_SUMMARIZER,
    ActivitySummary,
    CompletionCache,
    FixtureEntry,
    FixtureTransport,
    Gateway,
    GeminiTransport,
    HttpTransport,
    OpenAIChatTransport,
    RetryPolicy,
    SummarizationConfig,
    cached_complete,
    extract_json_object,
    parse_summary_response,
    sample_instances,
)
from constructminer.textualizer import InstanceParagraph


def _paras(label, n, size=60):
    return [InstanceParagraph(label, f"p{i} " + "x" * size, 1, f"{label}#{i + 1:04d}") for i in range(n)]


class ScriptedTransport:
    """Returns queued responses; exceptions in the queue are raised."""

    def __init__(self, *responses):
        self.queue = list(responses)
        self.invocations = 0
        self.prompts = []

    def complete(self, profile, prompt):
        self.invocations += 1
        self.prompts.append(prompt)
        item = self.queue.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def no_sleep(_seconds):
    pass


# -- prompts ---------------------------------------------------------------------------


def test_summarization_prompt_substitutes_label_only_in_format_line():
    prompt = prompts.build_summarization_prompt("Relax", _paras("Relax", 2))
    assert "The output should be a json (key: Relax) containing" in prompt
    assert "short summarized text (1) from" in prompt
    assert [l for l in prompt.splitlines() if l.startswith("(Paragraph: p")] == [
        f"(Paragraph: p{i} " + "x" * 60 + ")" for i in range(2)
    ]
    assert prompts.summarization_label(prompt) == "Relax"


def test_summarization_prompt_errors():
    with pytest.raises(EmptyInput):
        prompts.build_summarization_prompt("Relax", [])
    with pytest.raises(MixedLabels):
        prompts.build_summarization_prompt("Relax", _paras("Relax", 1) + _paras("Work", 1))


def test_construct_query_keeps_stray_quotes_and_rejects_empty_summary():
    query = prompts.build_construct_query("S")
    assert query.splitlines() == [
        'You are an AI assistant helping with identifying categories of a summarized activity leveraging world knowledge."',
        'The summary of the given activity is S."',
        'Can you provide the sub-actions that make up this activity?"',
    ]
    with pytest.raises(EmptyInput):
        prompts.build_construct_query("   ")


def test_template_regions_exclude_summary():
    query = prompts.build_construct_query("the Kitchen summary")
    regions = prompts.template_regions(query, "the Kitchen summary")
    assert all("Kitchen" not in r for r in regions)
    assert "".join(regions) + "the Kitchen summary" == query.replace("the Kitchen summary", "") + "the Kitchen summary"


def test_estimate_tokens():
    assert prompts.estimate_tokens("") == 0
    assert prompts.estimate_tokens("abcd") == 1
    assert prompts.estimate_tokens("abcde") == 2


# -- sampling ---------------------------------------------------------------------------


def test_sampling_is_seeded_and_keeps_input_order():
    paras = _paras("Relax", 50)
    config = SummarizationConfig(n=20, sample_seed=42)
    first = sample_instances("Relax", paras, config)
    assert first == sample_instances("Relax", paras, config)
    assert len(first) == 20
    positions = [paras.index(p) for p in first]
    assert positions == sorted(positions)
    assert first != sample_instances("Relax", paras, SummarizationConfig(n=20, sample_seed=43))


def test_sampling_takes_all_when_fewer_than_n():
    paras = _paras("Relax", 5)
    assert sample_instances("Relax", paras, SummarizationConfig(n=20)) == paras


def test_sampling_shrinks_to_budget_by_whole_paragraphs():
    paras = _paras("Relax", 10, size=400)
    base = prompts.estimate_tokens(prompts.build_summarization_prompt("Relax", paras[:3]))
    chosen = sample_instances("Relax", paras, SummarizationConfig(n=10, token_budget=base))
    assert chosen == paras[:3]


def test_sampling_budget_too_small_for_one_paragraph():
    with pytest.raises(PromptBudgetExceeded):
        sample_instances("Relax", _paras("Relax", 3, size=400), SummarizationConfig(n=3, token_budget=10))


# -- JSON extraction ------------------------------------------------------------------


@pytest.mark.parametrize(
    "text, expected",
    [
        ('{"Relax": "sat down"}', {"Relax": "sat down"}),
        ('Sure! ```json\n{"Relax": "a {b} c"}\n``` hope this helps', {"Relax": "a {b} c"}),
        ('noise {not json} then {"k": "v"}', {"k": "v"}),
        ('{"k": "escaped \\" quote }"}', {"k": 'escaped " quote }'}),
        ("no braces at all", None),
        ("[1, 2, 3]", None),
    ],
)
def test_extract_json_object(text, expected):
    assert extract_json_object(text) == expected


def test_parse_summary_response():
    assert parse_summary_response("Relax", '{"Relax": " resting "}') == "resting"
    assert parse_summary_response("Relax", '{"summary": "resting"}') == "resting"
    for bad in ("plain prose", '{"Relax": ""}', '{"a": "x", "b": "y"}', '{"Relax": 3}'):
        with pytest.raises(NoSummaryGenerated):
            parse_summary_response("Relax", bad)


# -- cache and retries ------------------------------------------------------------------


def test_cache_hit_skips_transport(tmp_path):
    cache = CompletionCache(tmp_path)
    transport = ScriptedTransport("first")
    assert cached_complete(DEFAULT_SUMMARIZER, "p", transport, cache) == "first"
    assert cached_complete(DEFAULT_SUMMARIZER, "p", transport, cache) == "first"
    assert transport.invocations == 1
    record = json.loads(cache.path_for(DEFAULT_SUMMARIZER, "p").read_text())
    assert record["provider"] == "openai" and record["model"] == "gpt-4"


def test_cache_key_depends_on_provider_model_and_prompt():
    other_model = dataclasses.replace(DEFAULT_SUMMARIZER, model_name="gpt-4o")
    keys = {
        CompletionCache.key(DEFAULT_SUMMARIZER, "p"),
        CompletionCache.key(other_model, "p"),
        CompletionCache.key(DEFAULT_SUMMARIZER, "q"),
        CompletionCache.key(DEFAULT_QUERIER, "p"),
    }
    assert len(keys) == 4


def test_corrupt_cache_entry_is_quarantined_and_refetched(tmp_path):
    cache = CompletionCache(tmp_path)
    path = cache.path_for(DEFAULT_SUMMARIZER, "p")
    path.write_text("{truncated")
    with pytest.raises(CacheCorrupt):
        cache.get(DEFAULT_SUMMARIZER, "p")
    transport = ScriptedTransport("fresh")
    assert cached_complete(DEFAULT_SUMMARIZER, "p", transport, cache) == "fresh"
    assert transport.invocations == 1
    assert list((tmp_path / "quarantine").iterdir())
    assert cache.get(DEFAULT_SUMMARIZER, "p").response_text == "fresh"


def test_retry_on_transient_errors():
    delays = []
    transport = ScriptedTransport(ProviderError(429, "slow down"), ProviderError(None, "reset"), "ok")
    retry = RetryPolicy(attempts=5, base_delay=1.0, jitter=False, sleep=delays.append)
    assert cached_complete(DEFAULT_QUERIER, "p", transport, None, retry) == "ok"
    assert delays == [1.0, 2.0]


def test_no_retry_on_client_error():
    transport = ScriptedTransport(ProviderError(401, "bad key"), "unused")
    with pytest.raises(ProviderError):
        cached_complete(DEFAULT_QUERIER, "p", transport, None, RetryPolicy(sleep=no_sleep))
    assert transport.invocations == 1


def test_retry_gives_up_after_attempts():
    transport = ScriptedTransport(*[ProviderError(503, "down")] * 3)
    with pytest.raises(ProviderError):
        cached_complete(DEFAULT_QUERIER, "p", transport, None, RetryPolicy(attempts=3, sleep=no_sleep))
    assert transport.invocations == 3
    with pytest.raises(ConfigError):
        RetryPolicy(attempts=0)


# -- gateway ---------------------------------------------------------------------------


def _gateway(transport, cache=None, **kw):
    return Gateway(
        DEFAULT_SUMMARIZER,
        DEFAULT_QUERIER,
        {"summarizer": transport, "querier": transport},
        cache,
        RetryPolicy(sleep=no_sleep),
        **kw,
    )


def test_same_family_is_rejected():
    same = dataclasses.replace(DEFAULT_QUERIER, provider_name="openai")
    with pytest.raises(SameFamilyViolation):
        Gateway(DEFAULT_SUMMARIZER, same, {})
    gateway = _gateway(ScriptedTransport())
    summary = ActivitySummary("Relax", "text", (), ("google", "gemini-pro", "h"))
    with pytest.raises(SameFamilyViolation):
        gateway.query_constructs(summary)


def test_summarize_and_query_with_fixture_transport():
    fixture = FixtureTransport({"Relax": FixtureEntry("The resident sat.", "1. Sitting; 2. Walking")})
    gateway = _gateway(fixture)
    summary = gateway.summarize_activity("Relax", _paras("Relax", 2))
    assert summary.text == "The resident sat."
    assert summary.source_instance_refs == ("Relax#0001", "Relax#0002")
    assert summary.provider_fingerprint[:2] == ("openai", "gpt-4")
    assert ActivitySummary.from_record(summary.to_record()) == summary
    assert gateway.query_constructs(summary) == "1. Sitting; 2. Walking"


def test_summarize_many_returns_failures_as_values():
    fixture = FixtureTransport(
        {"Relax": FixtureEntry("sat", "1. Sitting"), "Housekeeping": FixtureEntry("", "")}
    )
    results = _gateway(fixture, max_concurrency=3).summarize_many(
        {"Relax": _paras("Relax", 1), "Housekeeping": _paras("Housekeeping", 1), "Work": _paras("Work", 1)}
    )
    assert isinstance(results["Relax"], ActivitySummary)
    assert isinstance(results["Housekeeping"], NoSummaryGenerated)
    assert isinstance(results["Work"], ProviderError)


def test_fixture_transport_load_accepts_flat_mapping(tmp_path):
    path = tmp_path / "fx.json"
    path.write_text(json.dumps({"Relax": {"summary_text": "s", "construct_response_text": "1. a"}}))
    assert FixtureTransport.load(path).fixtures["Relax"].construct_response_text == "1. a"


# -- live transports (against a mock HTTP server) ---------------------------------------------


def _mock_client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_openai_transport_request_and_response(monkeypatch):
    monkeypatch.setenv("CM_SUMMARIZER_API_KEY", "sk-test")
    seen = {}

    def handler(request):
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json={"choices": [{"message": {"content": '{"Relax": "ok"}'}}]})

    before = HttpTransport.network_calls
    transport = OpenAIChatTransport(_mock_client(handler))
    assert transport.complete(DEFAULT_SUMMARIZER, "hello") == '{"Relax": "ok"}'
    assert seen["auth"] == "Bearer sk-test"
    assert seen["body"]["model"] == "gpt-4"
    assert seen["body"]["messages"] == [{"role": "user", "content": "hello"}]
    assert HttpTransport.network_calls == before + 1


def test_gemini_transport_and_error_status(monkeypatch):
    monkeypatch.setenv("CM_QUERIER_API_KEY", "g-test")
    responses = [
        httpx.Response(503, text="overloaded"),
        httpx.Response(200, json={"candidates": [{"content": {"parts": [{"text": "1. A"}, {"text": "; 2. B"}]}}]}),
    ]

    def handler(request):
        assert request.headers["x-goog-api-key"] == "g-test"
        return responses.pop(0)

    transport = GeminiTransport(_mock_client(handler))
    with pytest.raises(ProviderError) as info:
        transport.complete(DEFAULT_QUERIER, "q")
    assert info.value.status == 503
    assert transport.complete(DEFAULT_QUERIER, "q") == "1. A; 2. B"


def test_live_transport_requires_credentials(monkeypatch):
    monkeypatch.delenv("CM_SUMMARIZER_API_KEY", raising=False)
    transport = OpenAIChatTransport(_mock_client(lambda r: httpx.Response(200, json={})))
    with pytest.raises(ConfigError):
        transport.complete(DEFAULT_SUMMARIZER, "hello")
