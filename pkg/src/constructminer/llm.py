"""Provider profiles, transports, the completion cache, and the two LLM stages.

Transports are plain objects with a ``complete(profile, prompt)`` method and
an ``invocations`` counter. Two talk HTTP (an OpenAI-style chat endpoint for
the summarizer family and a Gemini-style ``generateContent`` endpoint for the
querier family); :class:`FixtureTransport` answers from a local fixture file
and never touches the network.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import os
import random
import re
import shutil
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

from . import prompts
from .errors import (
    CacheCorrupt,
    ConfigError,
    NoSummaryGenerated,
    PromptBudgetExceeded,
    ProviderError,
    SameFamilyViolation,
)
from .textualizer import InstanceParagraph

logger = logging.getLogger(__name__)

SUMMARIZER = "summarizer"
QUERIER = "querier"


@dataclass(frozen=True)
class SummarizationConfig:
    n: int = 20
    sample_seed: int = 42
    token_budget: int = 24_000
    temperature: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.token_budget < 1:
            raise ConfigError("token_budget must be positive")


@dataclass(frozen=True)
class ProviderProfile:
    role: str
    provider_name: str
    model_name: str
    endpoint: str = ""
    credential_ref: str = ""

    def __post_init__(self):
        if self.role not in (SUMMARIZER, QUERIER):
            raise ConfigError(f"unknown provider role {self.role!r}")

    @property
    def fingerprint(self) -> tuple[str, str]:
        return (self.provider_name, self.model_name)


DEFAULT_SUMMARIZER = ProviderProfile(
    SUMMARIZER,
    "openai",
    "gpt-4",
    "https://api.openai.com/v1/chat/completions",
    "CM_SUMMARIZER_API_KEY",
)
DEFAULT_QUERIER = ProviderProfile(
    QUERIER,
    "google",
    "gemini-pro",
    "https://generativelanguage.googleapis.com/v1beta/models/gemini-pro:generateContent",
    "CM_QUERIER_API_KEY",
)


def check_families(summarizer: ProviderProfile, querier: ProviderProfile) -> None:
    if summarizer.provider_name == querier.provider_name:
        raise SameFamilyViolation(
            f"summarizer and querier both use provider {summarizer.provider_name!r}"
        )


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ActivitySummary:
    activity_label: str
    text: str
    source_instance_refs: tuple[str, ...]
    # (provider, model, prompt hash)
    provider_fingerprint: tuple[str, str, str]

    def to_record(self) -> dict:
        provider, model, phash = self.provider_fingerprint
        return {
            "activity": self.activity_label,
            "text": self.text,
            "fingerprint": {"provider": provider, "model": model, "prompt_hash": phash},
            "source_instance_refs": list(self.source_instance_refs),
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "ActivitySummary":
        fp = record["fingerprint"]
        return cls(
            record["activity"],
            record["text"],
            tuple(record.get("source_instance_refs", ())),
            (fp["provider"], fp["model"], fp["prompt_hash"]),
        )


@dataclass(frozen=True)
class CompletionRecord:
    prompt_hash: str
    request_time: str
    response_text: str
    provider_fingerprint: tuple[str, str]

    def to_json(self) -> str:
        return json.dumps(
            {
                "prompt_hash": self.prompt_hash,
                "request_time": self.request_time,
                "response_text": self.response_text,
                "provider": self.provider_fingerprint[0],
                "model": self.provider_fingerprint[1],
            },
            sort_keys=True,
            indent=1,
        )


# -- transports ------------------------------------------------------------------


class Transport(Protocol):
    invocations: int

    def complete(self, profile: ProviderProfile, prompt: str) -> str: ...


class HttpTransport:
    """Base for the live transports; ``client`` is an ``httpx.Client``."""

    # every HTTP request made by any live transport in this process
    network_calls = 0

    def __init__(self, client=None, temperature: float = 0.0, timeout: float = 120.0):
        self._client = client
        self.temperature = temperature
        self.timeout = timeout
        self.invocations = 0
        self._lock = threading.Lock()

    @property
    def client(self):
        if self._client is None:
            import httpx

            self._client = httpx.Client(timeout=self.timeout)
        return self._client

    def _api_key(self, profile: ProviderProfile) -> str:
        key = os.environ.get(profile.credential_ref, "")
        if not key:
            raise ConfigError(f"environment variable {profile.credential_ref} is not set")
        return key

    def _post(self, url: str, headers: dict, body: dict) -> dict:
        import httpx

        with self._lock:
            self.invocations += 1
            HttpTransport.network_calls += 1
        try:
            resp = self.client.post(url, headers=headers, json=body)
        except httpx.HTTPError as exc:
            raise ProviderError(None, str(exc)) from exc
        if resp.status_code >= 400:
            raise ProviderError(resp.status_code, resp.text[:200])
        try:
            return resp.json()
        except ValueError as exc:
            raise ProviderError(resp.status_code, "response is not JSON") from exc


class OpenAIChatTransport(HttpTransport):
    def complete(self, profile: ProviderProfile, prompt: str) -> str:
        data = self._post(
            profile.endpoint,
            {"Authorization": f"Bearer {self._api_key(profile)}"},
            {
                "model": profile.model_name,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": self.temperature,
            },
        )
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(200, "unexpected chat completion payload") from exc


class GeminiTransport(HttpTransport):
    def complete(self, profile: ProviderProfile, prompt: str) -> str:
        data = self._post(
            profile.endpoint,
            {"x-goog-api-key": self._api_key(profile)},
            {
                "contents": [{"role": "user", "parts": [{"text": prompt}]}],
                "generationConfig": {"temperature": self.temperature},
            },
        )
        try:
            parts = data["candidates"][0]["content"]["parts"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(200, "unexpected generateContent payload") from exc
        return "".join(p.get("text", "") for p in parts)


@dataclass(frozen=True)
class FixtureEntry:
    summary_text: str
    construct_response_text: str


class FixtureTransport:
    """Offline stand-in answering both stages from fixtures keyed by label."""

    def __init__(self, fixtures: Mapping[str, FixtureEntry]):
        self.fixtures = dict(fixtures)
        self.invocations = 0
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: str | Path) -> "FixtureTransport":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        activities = raw.get("activities", raw)
        return cls(
            {
                label: FixtureEntry(entry.get("summary_text", ""), entry.get("construct_response_text", ""))
                for label, entry in activities.items()
            }
        )

    def complete(self, profile: ProviderProfile, prompt: str) -> str:
        with self._lock:
            self.invocations += 1
        if profile.role == SUMMARIZER:
            label = prompts.summarization_label(prompt)
            if label not in self.fixtures:
                raise ProviderError(404, f"no fixture for activity {label!r}")
            return json.dumps({label: self.fixtures[label].summary_text})
        # the label is withheld from construct queries: identify the fixture by its summary
        hits = [
            entry
            for entry in self.fixtures.values()
            if entry.summary_text and entry.summary_text in prompt
        ]
        if not hits:
            raise ProviderError(404, "no fixture summary found in construct query")
        return max(hits, key=lambda e: len(e.summary_text)).construct_response_text


def live_transports(client=None, temperature: float = 0.0) -> dict[str, Transport]:
    return {
        SUMMARIZER: OpenAIChatTransport(client, temperature),
        QUERIER: GeminiTransport(client, temperature),
    }


# -- cache --------------------------------------------------------------------------


class CompletionCache:
    """One JSON record per file under ``root``; corrupt entries are moved aside."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.quarantine_dir = self.root / "quarantine"
        self._write_lock = threading.Lock()

    @staticmethod
    def key(profile: ProviderProfile, prompt: str) -> str:
        h = hashlib.sha256()
        for part in (profile.provider_name, profile.model_name, prompt):
            h.update(part.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()

    def path_for(self, profile: ProviderProfile, prompt: str) -> Path:
        return self.root / f"{self.key(profile, prompt)}.json"

    def get(self, profile: ProviderProfile, prompt: str) -> CompletionRecord | None:
        path = self.path_for(profile, prompt)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None
        try:
            data = json.loads(text)
            record = CompletionRecord(
                data["prompt_hash"],
                data["request_time"],
                data["response_text"],
                (data["provider"], data["model"]),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise CacheCorrupt(path.name, f"unreadable record: {exc}") from None
        if record.prompt_hash != prompt_hash(prompt) or record.provider_fingerprint != profile.fingerprint:
            raise CacheCorrupt(path.name, "record does not match its key")
        return record

    def put(self, profile: ProviderProfile, prompt: str, record: CompletionRecord) -> None:
        path = self.path_for(profile, prompt)
        with self._write_lock:
            fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-", suffix=".json")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    fh.write(record.to_json())
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, path)
            except BaseException:
                Path(tmp).unlink(missing_ok=True)
                raise

    def quarantine(self, profile: ProviderProfile, prompt: str) -> Path:
        path = self.path_for(profile, prompt)
        self.quarantine_dir.mkdir(exist_ok=True)
        target = self.quarantine_dir / f"{path.stem}.{time.time_ns()}.json"
        with self._write_lock:
            shutil.move(str(path), target)
        return target


@dataclass
class RetryPolicy:
    attempts: int = 5
    base_delay: float = 1.0
    jitter: bool = True
    sleep: Callable[[float], None] = time.sleep
    rng: random.Random = field(default_factory=random.Random)

    def __post_init__(self):
        if self.attempts < 1:
            raise ConfigError("retry attempts must be >= 1")

    def delay(self, attempt: int) -> float:
        wait = self.base_delay * (2 ** attempt)
        if self.jitter:
            wait += self.rng.uniform(0, self.base_delay)
        return wait


def _retryable(exc: ProviderError) -> bool:
    return exc.status is None or exc.status == 429 or exc.status >= 500


def cached_complete(
    profile: ProviderProfile,
    prompt: str,
    transport: Transport,
    cache: CompletionCache | None = None,
    retry: RetryPolicy | None = None,
) -> str:
    retry = retry or RetryPolicy()
    if cache is not None:
        try:
            hit = cache.get(profile, prompt)
        except CacheCorrupt as exc:
            moved = cache.quarantine(profile, prompt)
            logger.warning("%s; quarantined to %s, refetching", exc, moved)
            hit = None
        if hit is not None:
            return hit.response_text

    for attempt in range(retry.attempts):
        try:
            response = transport.complete(profile, prompt)
            break
        except ProviderError as exc:
            if not _retryable(exc) or attempt == retry.attempts - 1:
                raise
            wait = retry.delay(attempt)
            logger.info("%s: %s; retrying in %.1fs", profile.provider_name, exc, wait)
            retry.sleep(wait)

    if cache is not None:
        record = CompletionRecord(
            prompt_hash(prompt),
            dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
            response,
            profile.fingerprint,
        )
        cache.put(profile, prompt, record)
    return response


# -- response handling ------------------------------------------------------------

_FENCE_RE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n?")


def extract_json_object(text: str) -> dict | None:
    """Return the first balanced ``{...}`` object in ``text`` that parses."""
    text = _FENCE_RE.sub("", text)
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = escaped = False
        for pos in range(start, len(text)):
            ch = text[pos]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    try:
                        obj = json.loads(text[start : pos + 1])
                    except ValueError:
                        break
                    if isinstance(obj, dict):
                        return obj
                    break
        start = text.find("{", start + 1)
    return None


def parse_summary_response(label: str, response: str) -> str:
    obj = extract_json_object(response)
    if obj is None:
        raise NoSummaryGenerated(label, "no JSON object in response")
    if label in obj:
        value = obj[label]
    elif len(obj) == 1:
        value = next(iter(obj.values()))
    else:
        raise NoSummaryGenerated(label, f"response keys {sorted(obj)} do not name the activity")
    if not isinstance(value, str) or not value.strip():
        raise NoSummaryGenerated(label, "empty summary")
    return value.strip()


# -- stages -------------------------------------------------------------------------


def sample_instances(
    label: str,
    paragraphs: Sequence[InstanceParagraph],
    config: SummarizationConfig,
) -> list[InstanceParagraph]:
    """Pick up to ``config.n`` paragraphs, then shrink until the prompt fits.

    Selected paragraphs keep their input order. Whole paragraphs are dropped
    from the end; a paragraph is never cut.
    """
    if not paragraphs:
        return []
    rng = random.Random(config.sample_seed)
    k = min(config.n, len(paragraphs))
    chosen = [paragraphs[i] for i in sorted(rng.sample(range(len(paragraphs)), k))]
    while chosen:
        size = prompts.estimate_tokens(prompts.build_summarization_prompt(label, chosen))
        if size <= config.token_budget:
            return chosen
        chosen.pop()
    raise PromptBudgetExceeded(
        f"{label}: a single paragraph does not fit in {config.token_budget} tokens"
    )


class Gateway:
    """Runs both LLM stages against configured transports and a shared cache."""

    def __init__(
        self,
        summarizer: ProviderProfile,
        querier: ProviderProfile,
        transports: Mapping[str, Transport],
        cache: CompletionCache | None = None,
        retry: RetryPolicy | None = None,
        max_concurrency: int = 4,
    ):
        if summarizer.role != SUMMARIZER or querier.role != QUERIER:
            raise ConfigError("profiles passed in the wrong roles")
        check_families(summarizer, querier)
        self.summarizer = summarizer
        self.querier = querier
        self.transports = dict(transports)
        self.cache = cache
        self.retry = retry or RetryPolicy()
        self.max_concurrency = max_concurrency

    def complete(self, profile: ProviderProfile, prompt: str) -> str:
        return cached_complete(profile, prompt, self.transports[profile.role], self.cache, self.retry)

    def summarize_activity(self, label: str, paragraphs: Sequence[InstanceParagraph]) -> ActivitySummary:
        prompt = prompts.build_summarization_prompt(label, paragraphs)
        response = self.complete(self.summarizer, prompt)
        text = parse_summary_response(label, response)
        return ActivitySummary(
            label,
            text,
            tuple(p.instance_ref for p in paragraphs),
            (*self.summarizer.fingerprint, prompt_hash(prompt)),
        )

    def summarize_many(
        self, batches: Mapping[str, Sequence[InstanceParagraph]]
    ) -> dict[str, ActivitySummary | Exception]:
        """Summarize several activities concurrently; failures are returned, not raised."""

        def run(label):
            try:
                return self.summarize_activity(label, batches[label])
            except (NoSummaryGenerated, ProviderError) as exc:
                return exc

        labels = list(batches)
        with ThreadPoolExecutor(max_workers=max(1, self.max_concurrency)) as pool:
            results = list(pool.map(run, labels))
        return dict(zip(labels, results))

    def query_constructs(self, summary: ActivitySummary) -> str:
        summary_provider = summary.provider_fingerprint[0]
        if summary_provider == self.querier.provider_name:
            raise SameFamilyViolation(
                f"summary for {summary.activity_label} came from {summary_provider}, "
                "the same family as the querier"
            )
        prompt = prompts.build_construct_query(summary.text)
        return self.complete(self.querier, prompt)
