"""Stage orchestration shared by the CLI subcommands."""

from __future__ import annotations

import datetime as dt
import logging
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from . import prompts
from .casas import (
    DEFAULT_OTHER_LABELS,
    ActivityInstance,
    Diagnostic,
    LabelMergeMap,
    ParseResult,
    canonicalize_labels,
    read_log,
    segment_instances,
)
from .constructs import (
    DEFAULT_RELEVANCE_THRESHOLD,
    ActivityLexicon,
    Category,
    ConstructSet,
    MarkerLexicon,
    ReviewDecision,
    apply_review,
    categorize,
    flag_relevance,
    parse_construct_list,
)
from .errors import ConfigError, ConstructMinerError, NoConstructsFound, NoSummaryGenerated, ProviderError
from .llm import (
    DEFAULT_QUERIER,
    DEFAULT_SUMMARIZER,
    ActivitySummary,
    CompletionCache,
    FixtureTransport,
    Gateway,
    ProviderProfile,
    RetryPolicy,
    SummarizationConfig,
    live_transports,
    prompt_hash,
    sample_instances,
)
from .recognizer import (
    DEFAULT_GAP_TOLERANCE,
    DEFAULT_OVERLAP,
    DEFAULT_WINDOW,
    EvaluationReport,
    MatchResult,
    Span,
    SymbolMapping,
    compile_pattern,
    evaluate,
    match_stream,
    symbolize_stream,
)
from .report import render_report
from .store import ConstructStore, DecisionLog
from .textualizer import TEMPLATE_VERSION, InstanceParagraph, LocationMap, encode_instance

logger = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    dataset: Path | None = None
    locations: Path | None = None
    merge_map: Path | None = None
    out_dir: Path = Path("out")
    cache_dir: Path | None = None
    offline: bool = False
    fixtures: Path | None = None
    summarization: SummarizationConfig = field(default_factory=SummarizationConfig)
    summarizer: ProviderProfile = DEFAULT_SUMMARIZER
    querier: ProviderProfile = DEFAULT_QUERIER
    title: str = "Identified Structural Constructs"
    other_labels: frozenset[str] = DEFAULT_OTHER_LABELS
    error_budget: int = 0
    markers: Path | None = None
    relevance_threshold: float = DEFAULT_RELEVANCE_THRESHOLD
    concurrency: int = 4
    decisions: Path | None = None
    mapping: Path | None = None
    gap_tolerance: float = DEFAULT_GAP_TOLERANCE
    window: float = DEFAULT_WINDOW
    overlap: float = DEFAULT_OVERLAP
    activities: tuple[str, ...] = ()

    def validate(self) -> None:
        if self.offline and self.fixtures is None:
            raise ConfigError("offline mode requires --fixtures")
        if not self.offline:
            missing = [
                p.credential_ref
                for p in (self.summarizer, self.querier)
                if not os.environ.get(p.credential_ref)
            ]
            if missing:
                raise ConfigError(f"live mode needs credentials in {', '.join(missing)}")

    @property
    def resolved_cache_dir(self) -> Path:
        return self.cache_dir if self.cache_dir is not None else self.out_dir / "cache"

    def path(self, name: str) -> Path:
        return self.out_dir / name


@dataclass
class IngestResult:
    parse: ParseResult
    instances: list[ActivityInstance]
    counts: Counter
    segment_diagnostics: list[Diagnostic]


def ingest(config: PipelineConfig) -> IngestResult:
    if config.dataset is None:
        raise ConfigError("no dataset given (--dataset)")
    parsed = read_log(config.dataset)
    segmented = segment_instances(parsed.events, parsed.annotations)
    merge_map = LabelMergeMap.load(config.merge_map) if config.merge_map else LabelMergeMap()
    instances, counts = canonicalize_labels(segmented.instances, merge_map, config.other_labels)
    instances = [i for i in instances if i.events]
    return IngestResult(parsed, instances, Counter(i.label for i in instances), segmented.diagnostics)


def instance_record(inst: ActivityInstance) -> dict:
    return {
        "ref": inst.ref,
        "label": inst.label,
        "start": inst.start.isoformat(),
        "end": inst.end.isoformat(),
        "truncated": inst.truncated,
        "event_count": len(inst.events),
    }


def activity_order(instances: Sequence[ActivityInstance], preferred: Sequence[str] = ()) -> list[str]:
    seen = {i.label for i in instances}
    ordered = [label for label in preferred if label in seen]
    ordered += sorted(seen - set(ordered))
    return ordered


def textualize(instances: Sequence[ActivityInstance], locations: LocationMap) -> dict[str, list[InstanceParagraph]]:
    by_label: dict[str, list[InstanceParagraph]] = defaultdict(list)
    for inst in instances:
        by_label[inst.label].append(encode_instance(inst, locations))
    return dict(by_label)


def build_gateway(config: PipelineConfig, transports=None, retry: RetryPolicy | None = None) -> Gateway:
    if transports is None:
        if config.offline:
            fixture = FixtureTransport.load(config.fixtures)
            transports = {"summarizer": fixture, "querier": fixture}
        else:
            transports = live_transports(temperature=config.summarization.temperature)
    return Gateway(
        config.summarizer,
        config.querier,
        transports,
        CompletionCache(config.resolved_cache_dir),
        retry,
        config.concurrency,
    )


def summarize(
    gateway: Gateway,
    paragraphs: Mapping[str, Sequence[InstanceParagraph]],
    config: SummarizationConfig,
) -> tuple[dict[str, ActivitySummary], dict[str, str]]:
    batches = {label: sample_instances(label, paras, config) for label, paras in paragraphs.items()}
    results = gateway.summarize_many(batches)
    summaries, failures = {}, {}
    for label, result in results.items():
        if isinstance(result, ActivitySummary):
            summaries[label] = result
        else:
            kind = "NoSummaryGenerated" if isinstance(result, NoSummaryGenerated) else type(result).__name__
            failures[label] = f"{kind}: {result}"
    return summaries, failures


def lexicon_for(label: str, instances: Sequence[ActivityInstance], locations: LocationMap | None) -> ActivityLexicon:
    places, kinds = set(), set()
    for inst in instances:
        if inst.label != label:
            continue
        for event in inst.events:
            kinds.add(event.kind.word)
            if locations is not None and event.sensor_id in locations:
                places.add(locations[event.sensor_id])
    return ActivityLexicon.build(label, sorted(places), sorted(kinds))


def extract(
    gateway: Gateway,
    summaries: Mapping[str, ActivitySummary],
    lexicons: Mapping[str, ActivityLexicon],
    markers: MarkerLexicon,
    threshold: float = DEFAULT_RELEVANCE_THRESHOLD,
) -> tuple[dict[str, ConstructSet], dict[str, str]]:
    sets, failures = {}, {}
    for label, summary in summaries.items():
        try:
            response = gateway.query_constructs(summary)
            constructs = parse_construct_list(response)
        except (NoConstructsFound, ProviderError) as exc:
            failures[label] = f"{type(exc).__name__}: {exc}"
            continue
        category = categorize(constructs, summary.text, response, markers)
        lexicon = lexicons.get(label) or ActivityLexicon.build(label)
        provider, model, phash = summary.provider_fingerprint
        query_hash = prompt_hash(prompts.build_construct_query(summary.text))
        sets[label] = ConstructSet(
            label,
            category,
            tuple(flag_relevance(constructs, lexicon, threshold)),
            {
                "summary_fingerprint": f"{provider}/{model}/{phash}",
                "querier_fingerprint": f"{gateway.querier.provider_name}/{gateway.querier.model_name}/{query_hash}",
            },
        )
    return sets, failures


def report_header(config: PipelineConfig, markers: MarkerLexicon) -> dict:
    s = config.summarization
    return {
        "seed": s.sample_seed,
        "n": s.n,
        "token_budget": s.token_budget,
        "sentence_template": TEMPLATE_VERSION,
        "prompt_template": prompts.PROMPT_VERSION,
        "marker_lexicon": markers.version,
        "summarizer": "/".join(config.summarizer.fingerprint),
        "querier": "/".join(config.querier.fingerprint),
        "mode": "offline" if config.offline else "live",
    }


def write_report(config: PipelineConfig, markers: MarkerLexicon, sets, failures, order) -> Path:
    path = config.path("report.md")
    path.write_text(
        render_report(config.title, report_header(config, markers), list(sets), failures, order),
        encoding="utf-8",
    )
    return path


# -- review ---------------------------------------------------------------------------


DecisionSource = Callable[[ConstructSet], ReviewDecision]


def review_session(
    store: ConstructStore,
    log: DecisionLog,
    decide: DecisionSource,
    include_reviewed: bool = False,
    clock: Callable[[], dt.datetime] = lambda: dt.datetime.now(dt.timezone.utc),
) -> list[str]:
    """Review each pending set; every activity is committed before the next is shown.

    An exception from ``decide`` (e.g. ``KeyboardInterrupt``) leaves that
    activity and all later ones untouched.
    """
    committed = []
    for label, rec in store.latest_records().items():
        cset = ConstructSet.from_record(rec)
        if cset.review_state.value != "machine" and not include_reviewed:
            continue
        decision = decide(cset)
        reviewed = apply_review(cset, decision)
        revision = store.append(reviewed)
        log.append(
            {
                "activity": label,
                "based_on_revision": rec["revision"],
                "revision": revision,
                "kept": [c.index for c in cset.constructs if c.index not in decision.drop],
                "category_override": decision.category.value if decision.category else None,
                "confirmed_count": decision.confirmed_count,
                "note": decision.note,
                "timestamp": clock().isoformat(timespec="seconds"),
            }
        )
        committed.append(label)
    return committed


def decision_from_record(rec: Mapping) -> ReviewDecision:
    category = rec.get("category")
    return ReviewDecision(
        drop=frozenset(int(i) for i in rec.get("drop", ())),
        category=Category(category) if category else None,
        confirmed_count=rec.get("confirmed_count"),
        note=rec.get("note", ""),
    )


# -- recognition ------------------------------------------------------------------


@dataclass
class RecognitionResult:
    matches: dict[str, list[MatchResult]]
    report: EvaluationReport
    skipped: dict[str, str]


def recognize(
    sets: Mapping[str, ConstructSet],
    mapping: SymbolMapping,
    instances: Sequence[ActivityInstance],
    events,
    locations: LocationMap,
    gap_tolerance: float = DEFAULT_GAP_TOLERANCE,
    window: float = DEFAULT_WINDOW,
    overlap: float = DEFAULT_OVERLAP,
) -> RecognitionResult:
    symbols = symbolize_stream(events, locations)
    matches: dict[str, list[MatchResult]] = {}
    skipped: dict[str, str] = {}
    for label, cset in sets.items():
        if label not in mapping:
            skipped[label] = "no symbol mapping for this activity"
            continue
        try:
            pattern = compile_pattern(cset, mapping, gap_tolerance, window)
        except ConstructMinerError as exc:
            skipped[label] = str(exc)
            continue
        matches[label] = match_stream(pattern, symbols)
    truth = [Span.from_instance(i) for i in instances if i.label in matches]
    flat = [m for ms in matches.values() for m in ms]
    return RecognitionResult(matches, evaluate(flat, truth, overlap, labels=matches), skipped)
