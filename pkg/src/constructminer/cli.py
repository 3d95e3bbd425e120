"""Command-line entry point.

Exit status: 0 success, 1 one or more activities failed, 2 configuration or
I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Sequence

from . import pipeline as pl
from .casas import Diagnostic
from .constructs import Category, ConstructSet, MarkerLexicon, Relevance, ReviewDecision
from .errors import ConfigError, ConstructMinerError
from .llm import ActivitySummary, ProviderProfile, SummarizationConfig
from .recognizer import SymbolMapping
from .store import ConstructStore, DecisionLog, dump_jsonl, read_jsonl
from .textualizer import InstanceParagraph, LocationMap

logger = logging.getLogger("constructminer")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2

PATH_KEYS = {"dataset", "locations", "merge-map", "fixtures", "cache-dir", "out-dir", "decisions", "mapping", "markers"}
BOOL_KEYS = {"offline"}


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` document; relative paths resolve against the file's directory."""
    path = Path(path)
    values = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = key.strip().replace("_", "-"), value.strip()
        if key in PATH_KEYS and value and not Path(value).is_absolute():
            value = str((path.parent / value).resolve())
        values[key] = value
    return values


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in {"1", "true", "yes", "on"}


def build_config(args: argparse.Namespace) -> pl.PipelineConfig:
    values: dict[str, object] = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key, value in vars(args).items():
        if value is not None and value is not False and key not in {"command", "config", "func", "verbose", "all"}:
            values[key.replace("_", "-")] = value

    def get(key, cast=str, default=None):
        value = values.get(key)
        if value is None or value == "":
            return default
        try:
            return cast(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc

    out_dir = get("out-dir", Path, Path("out"))
    defaults = pl.PipelineConfig()
    summ = SummarizationConfig(
        n=get("n", int, 20),
        sample_seed=get("seed", int, 42),
        token_budget=get("token-budget", int, 24_000),
    )

    def profile(base: ProviderProfile, prefix: str) -> ProviderProfile:
        return dataclasses.replace(
            base,
            provider_name=get(f"{prefix}-provider", str, base.provider_name),
            model_name=get(f"{prefix}-model", str, base.model_name),
            endpoint=get(f"{prefix}-endpoint", str, base.endpoint),
        )

    def split(value: str) -> tuple[str, ...]:
        return tuple(v.strip() for v in value.split(",") if v.strip())

    return pl.PipelineConfig(
        dataset=get("dataset", Path),
        locations=get("locations", Path),
        merge_map=get("merge-map", Path),
        out_dir=out_dir,
        cache_dir=get("cache-dir", Path),
        offline=get("offline", _parse_bool, False),
        fixtures=get("fixtures", Path),
        summarization=summ,
        summarizer=profile(defaults.summarizer, "summarizer"),
        querier=profile(defaults.querier, "querier"),
        title=get("title", str, defaults.title),
        other_labels=frozenset(get("other-labels", split, tuple(defaults.other_labels))),
        error_budget=get("error-budget", int, 0),
        markers=get("markers", Path),
        relevance_threshold=get("relevance-threshold", float, defaults.relevance_threshold),
        concurrency=get("concurrency", int, defaults.concurrency),
        decisions=get("decisions", Path),
        mapping=get("mapping", Path),
        gap_tolerance=get("gap-tolerance", float, defaults.gap_tolerance),
        window=get("window", float, defaults.window),
        overlap=get("overlap", float, defaults.overlap),
        activities=get("activities", split, ()),
    )


# -- helpers ----------------------------------------------------------------------------


def _markers(config: pl.PipelineConfig) -> MarkerLexicon:
    return MarkerLexicon.load(config.markers) if config.markers else MarkerLexicon.default()


def _locations(config: pl.PipelineConfig) -> LocationMap:
    if config.locations is None:
        raise ConfigError("no location map given (--locations)")
    return LocationMap.load(config.locations)


def _write_failures(config: pl.PipelineConfig, failures: dict[str, str], stage: str, append: bool = False) -> None:
    path = config.path("failures.jsonl")
    records = list(read_jsonl(path)) if append and path.exists() else []
    records = [r for r in records if r["activity"] not in failures]
    records += [{"activity": a, "stage": stage, "reason": r} for a, r in failures.items()]
    dump_jsonl(path, records)


def _read_failures(config: pl.PipelineConfig) -> dict[str, str]:
    path = config.path("failures.jsonl")
    if not path.exists():
        return {}
    return {r["activity"]: r["reason"] for r in read_jsonl(path)}


def _print_counts(counts) -> None:
    for label in sorted(counts):
        print(f"  {label}: {counts[label]}")


def _load_paragraphs(config: pl.PipelineConfig) -> dict[str, list[InstanceParagraph]]:
    path = config.path("paragraphs.jsonl")
    if not path.exists():
        return pl.textualize(pl.ingest(config).instances, _locations(config))
    out: dict[str, list[InstanceParagraph]] = {}
    for rec in read_jsonl(path):
        out.setdefault(rec["label"], []).append(
            InstanceParagraph(rec["label"], rec["text"], rec.get("sentence_count", 0), rec["instance_ref"])
        )
    return out


def _report_order(config: pl.PipelineConfig, labels) -> list[str]:
    preferred = [a for a in config.activities if a in labels]
    return preferred + sorted(set(labels) - set(preferred))


# -- subcommands ----------------------------------------------------------------------


def cmd_ingest(config: pl.PipelineConfig, args) -> int:
    result = pl.ingest(config)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    dump_jsonl(config.path("instances.jsonl"), map(pl.instance_record, result.instances))
    diags: list[Diagnostic] = result.parse.diagnostics + result.segment_diagnostics
    config.path("diagnostics.tsv").write_text("".join(d.format() + "\n" for d in diags), encoding="utf-8")
    print(f"parsed {len(result.parse.events)} events, {len(result.instances)} instances")
    _print_counts(result.counts)
    errors = len(result.parse.diagnostics)
    for cls, count in sorted(result.parse.error_counts.items()):
        print(f"  {cls}: {count}")
    print(f"parse diagnostics: {errors} (budget {config.error_budget}); segmentation notes: {len(result.segment_diagnostics)}")
    return EXIT_OK if errors <= config.error_budget else EXIT_PARTIAL


def cmd_textualize(config: pl.PipelineConfig, args) -> int:
    result = pl.ingest(config)
    paragraphs = pl.textualize(result.instances, _locations(config))
    config.out_dir.mkdir(parents=True, exist_ok=True)
    dump_jsonl(
        config.path("paragraphs.jsonl"),
        ({**p.to_record(), "sentence_count": p.sentence_count} for ps in paragraphs.values() for p in ps),
    )
    print(f"wrote {sum(map(len, paragraphs.values()))} paragraphs for {len(paragraphs)} activities")
    return EXIT_OK


def cmd_summarize(config: pl.PipelineConfig, args, transports=None) -> int:
    config.validate()
    paragraphs = _load_paragraphs(config)
    gateway = pl.build_gateway(config, transports)
    summaries, failures = pl.summarize(gateway, paragraphs, config.summarization)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    order = _report_order(config, summaries)
    dump_jsonl(config.path("summaries.jsonl"), (summaries[l].to_record() for l in order))
    _write_failures(config, failures, "summarize")
    for label, reason in failures.items():
        print(f"FAILED {label}: {reason}")
    print(f"summaries: {len(summaries)} ok, {len(failures)} failed")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_extract(config: pl.PipelineConfig, args, transports=None) -> int:
    config.validate()
    summaries = {
        rec["activity"]: ActivitySummary.from_record(rec) for rec in read_jsonl(config.path("summaries.jsonl"))
    }
    instances, locations = [], None
    if config.dataset is not None and config.locations is not None:
        instances = pl.ingest(config).instances
        locations = _locations(config)
    lexicons = {label: pl.lexicon_for(label, instances, locations) for label in summaries}
    markers = _markers(config)
    gateway = pl.build_gateway(config, transports)
    sets, failures = pl.extract(gateway, summaries, lexicons, markers, config.relevance_threshold)
    order = _report_order(config, sets)
    ConstructStore(config.path("constructs.jsonl")).write_initial(sets[l] for l in order)
    _write_failures(config, failures, "extract", append=True)
    for label, reason in failures.items():
        print(f"FAILED {label}: {reason}")
    print(f"construct sets: {len(sets)} ok, {len(failures)} failed")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_report(config: pl.PipelineConfig, args) -> int:
    store = ConstructStore(config.path("constructs.jsonl"))
    sets = store.latest()
    failure_map = {l: r for l, r in _read_failures(config).items() if l not in sets}
    order = _report_order(config, [*sets, *failure_map])
    path = pl.write_report(config, _markers(config), sets.values(), failure_map, order)
    print(f"report written to {path}")
    return EXIT_OK


def cmd_pipeline(config: pl.PipelineConfig, args, transports=None) -> int:
    config.validate()
    result = pl.ingest(config)
    locations = _locations(config)
    paragraphs = pl.textualize(result.instances, locations)
    gateway = pl.build_gateway(config, transports)
    summaries, failures = pl.summarize(gateway, paragraphs, config.summarization)
    lexicons = {label: pl.lexicon_for(label, result.instances, locations) for label in summaries}
    markers = _markers(config)
    ordered_summaries = {l: summaries[l] for l in _report_order(config, summaries)}
    sets, extract_failures = pl.extract(gateway, ordered_summaries, lexicons, markers, config.relevance_threshold)

    config.out_dir.mkdir(parents=True, exist_ok=True)
    dump_jsonl(config.path("instances.jsonl"), map(pl.instance_record, result.instances))
    dump_jsonl(
        config.path("paragraphs.jsonl"),
        ({**p.to_record(), "sentence_count": p.sentence_count} for ps in paragraphs.values() for p in ps),
    )
    dump_jsonl(config.path("summaries.jsonl"), (s.to_record() for s in ordered_summaries.values()))
    all_failures = {**failures, **extract_failures}
    _write_failures(config, failures, "summarize")
    _write_failures(config, extract_failures, "extract", append=True)
    set_order = _report_order(config, sets)
    ConstructStore(config.path("constructs.jsonl")).write_initial(sets[l] for l in set_order)
    order = _report_order(config, [*sets, *all_failures])
    pl.write_report(config, markers, [sets[l] for l in set_order], all_failures, order)

    for label in order:
        if label in sets:
            cset = sets[label]
            flagged = sum(c.relevance is Relevance.IRRELEVANT for c in cset.constructs)
            print(f"{label}: {len(cset.constructs)} constructs, {cset.category.value}, {flagged} flagged")
        else:
            print(f"{label}: FAILED {all_failures[label]}")
    print(f"pipeline: {len(sets)} construct sets, {len(all_failures)} failed activities")
    return EXIT_PARTIAL if all_failures else EXIT_OK


# -- review -----------------------------------------------------------------------------


def interactive_decider(ask: Callable[[str], str] = input, out=sys.stdout) -> pl.DecisionSource:
    def decide(cset: ConstructSet) -> ReviewDecision:
        print(f"\n== {cset.activity_label} ({cset.category.value}, {len(cset.constructs)} constructs)", file=out)
        drop = set()
        for c in cset.constructs:
            flag = "" if c.relevance is not Relevance.IRRELEVANT else f"  [flagged: score {c.relevance_score}]"
            answer = ask(f"  {c.index}. {c.name}{flag}  keep? [Y/n] ").strip().lower()
            if answer in {"n", "no", "drop"}:
                drop.add(c.index)
        answer = ask(f"  category is {cset.category.value}; Enter to confirm or type Event/Action: ").strip()
        category = None
        if answer:
            try:
                category = Category(answer.capitalize())
            except ValueError:
                print(f"  unknown category {answer!r}, keeping {cset.category.value}", file=out)
        kept = len(cset.constructs) - len(drop)
        answer = ask(f"  confirm {kept} constructs? [Y/n] ").strip().lower()
        if answer in {"n", "no"}:
            raise KeyboardInterrupt
        return ReviewDecision(frozenset(drop), category, kept)

    return decide


def scripted_decider(path: Path) -> pl.DecisionSource:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)

    def decide(cset: ConstructSet) -> ReviewDecision:
        return pl.decision_from_record(raw.get(cset.activity_label, {}))

    return decide


def cmd_review(config: pl.PipelineConfig, args, decide: pl.DecisionSource | None = None) -> int:
    store = ConstructStore(config.path("constructs.jsonl"))
    if not store.records():
        raise ConfigError(f"construct store {store.path} is empty; run extract or pipeline first")
    if decide is None:
        decide = scripted_decider(config.decisions) if config.decisions else interactive_decider()
    log = DecisionLog(config.path("review_log.jsonl"))
    try:
        committed = pl.review_session(store, log, decide, include_reviewed=getattr(args, "all", False))
    except KeyboardInterrupt:
        print("\nreview interrupted; committed activities are kept", file=sys.stderr)
        return EXIT_PARTIAL
    print(f"reviewed {len(committed)} activities")
    return EXIT_OK


# -- recognize ------------------------------------------------------------------------


def cmd_recognize(config: pl.PipelineConfig, args) -> int:
    if config.mapping is None:
        raise ConfigError("no symbol mapping given (--mapping)")
    store = ConstructStore(config.path("constructs.jsonl"))
    reviewed = {l: s for l, s in store.latest().items() if s.review_state.value != "machine"}
    if not reviewed:
        print(
            "no reviewed construct sets found; run `constructminer review` before `recognize`",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    mapping = SymbolMapping.load(config.mapping)
    result = pl.ingest(config)
    rec = pl.recognize(
        reviewed,
        mapping,
        result.instances,
        result.parse.events,
        _locations(config),
        config.gap_tolerance,
        config.window,
        config.overlap,
    )
    config.out_dir.mkdir(parents=True, exist_ok=True)
    dump_jsonl(
        config.path("matches.jsonl"),
        (
            {
                "activity": m.activity_label,
                "start_index": m.start_index,
                "end_index": m.end_index,
                "start_time": m.start_time,
                "end_time": m.end_time,
                "witnesses": list(m.witnesses),
            }
            for label in sorted(rec.matches)
            for m in rec.matches[label]
        ),
    )
    config.path("metrics.csv").write_text(rec.report.to_csv(), encoding="utf-8")
    for label, reason in rec.skipped.items():
        print(f"WARNING skipped {label}: {reason}", file=sys.stderr)
    print(rec.report.to_csv(), end="")
    action_skipped = [l for l in rec.skipped if reviewed[l].category is Category.ACTION]
    if not rec.matches:
        return EXIT_CONFIG
    return EXIT_PARTIAL if action_skipped else EXIT_OK


# -- argument parsing ---------------------------------------------------------------


def _common(parser: argparse.ArgumentParser) -> None:
    add = parser.add_argument
    add("--config", help="flat key = value config file; flags override it")
    add("--dataset", help="CASAS-format sensor log")
    add("--locations", help="sensor_id,location_phrase CSV")
    add("--merge-map", help="raw_label,canonical_label CSV")
    add("--offline", action="store_true", default=None, help="answer both LLM stages from --fixtures")
    add("--fixtures", help="offline fixture JSON (label -> summary/response)")
    add("--n", type=int, help="paragraphs sampled per activity (default 20)")
    add("--seed", type=int, help="sampling seed (default 42)")
    add("--token-budget", type=int, help="max estimated prompt tokens (default 24000)")
    add("--cache-dir", help="completion cache directory (default OUT_DIR/cache)")
    add("--out-dir", help="output directory (default ./out)")
    add("--decisions", help="scripted review decisions JSON")
    add("--mapping", help="construct -> symbol predicate mapping JSON")
    add("--gap-tolerance", type=float, help="max seconds between consecutive witnesses (default 300)")
    add("--window", type=float, help="max seconds spanned by a match (default 3600)")
    add("--overlap", type=float, help="true-positive overlap fraction of the shorter span (default 0.5)")
    add("--error-budget", type=int, help="parse diagnostics tolerated by ingest (default 0)")
    add("--markers", help="sequence-marker lexicon file")
    add("--relevance-threshold", type=float)
    add("--concurrency", type=int)
    add("--activities", help="comma-separated activity order for reports")
    add("--title")
    add("--other-labels", help="comma-separated background labels to drop (default Other)")
    for role in ("summarizer", "querier"):
        add(f"--{role}-provider")
        add(f"--{role}-model")
        add(f"--{role}-endpoint")
    add("-v", "--verbose", action="store_true")


COMMANDS = {
    "ingest": (cmd_ingest, "parse a log into instances and diagnostics"),
    "textualize": (cmd_textualize, "render instances as paragraphs"),
    "summarize": (cmd_summarize, "stage 1: one summary per activity"),
    "extract": (cmd_extract, "stage 2: query, parse and categorize constructs"),
    "review": (cmd_review, "confirm or edit construct sets"),
    "recognize": (cmd_recognize, "match reviewed patterns against the event stream"),
    "report": (cmd_report, "render the markdown construct table"),
    "pipeline": (cmd_pipeline, "ingest through report in one run"),
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="constructminer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        _common(p)
        if name == "review":
            p.add_argument("--all", action="store_true", help="also re-review confirmed sets")
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None, **overrides) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = build_config(args)
        return args.func(config, args, **overrides)
    except FileNotFoundError as exc:
        print(f"error: cannot read {exc.filename}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConstructMinerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
