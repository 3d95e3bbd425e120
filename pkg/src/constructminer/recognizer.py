"""Construct-based activity recognition over symbolized sensor streams.

Sensor events are projected onto ``(location, kind, value)`` symbols. Each
reviewed construct set becomes a pattern: action-based sets require their
constructs in order, each witnessed within ``gap_tolerance`` seconds of the
previous one; event-based sets require every mapped construct somewhere in a
``window``-second span.

Match selection is leftmost, non-overlapping: the earliest start that admits
any match wins, it takes the earliest possible end, and scanning resumes
after that end. Witnesses reported for a match are the lexicographically
smallest valid index tuple for its (start, end).
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .casas import ActivityInstance, SensorEvent, SensorKind
from .constructs import Category, ConstructSet, ReviewState
from .errors import ConfigError, ConstructMinerError, UnmappedConstruct, UnmappedSensor
from .textualizer import LocationMap

DEFAULT_GAP_TOLERANCE = 300.0
DEFAULT_WINDOW = 3600.0
DEFAULT_OVERLAP = 0.5
DEFAULT_EXCLUDED_KINDS = frozenset({SensorKind.TEMPERATURE})

_EPOCH = dt.datetime(1970, 1, 1)
WILDCARD = "*"


def to_seconds(ts: dt.datetime) -> float:
    return (ts - _EPOCH).total_seconds()


@dataclass(frozen=True)
class EventSymbol:
    location: str
    kind: SensorKind
    value: str

    def __str__(self) -> str:
        return f"{self.location}|{self.kind.value}|{self.value}"


@dataclass(frozen=True)
class TimedSymbol:
    time: float
    symbol: EventSymbol


@dataclass(frozen=True)
class SymbolPredicate:
    location: str = WILDCARD
    kind: str = WILDCARD
    value: str = WILDCARD

    @classmethod
    def parse(cls, text: str) -> "SymbolPredicate":
        parts = [p.strip() for p in text.split("|")]
        if len(parts) != 3 or not all(parts):
            raise ConfigError(f"predicate {text!r} is not location|kind|value")
        if parts[1] != WILDCARD and parts[1] not in {k.value for k in SensorKind}:
            raise ConfigError(f"predicate {text!r}: unknown sensor kind {parts[1]!r}")
        return cls(*parts)

    def matches(self, symbol: EventSymbol) -> bool:
        return (
            (self.location == WILDCARD or self.location == symbol.location)
            and (self.kind == WILDCARD or self.kind == symbol.kind.value)
            and (self.value == WILDCARD or self.value == symbol.value)
        )

    def __str__(self) -> str:
        return f"{self.location}|{self.kind}|{self.value}"


@dataclass(frozen=True)
class SymbolMapping:
    """activity -> construct name (case-insensitive) -> any-of predicates."""

    activities: Mapping[str, Mapping[str, tuple[SymbolPredicate, ...]]]

    @classmethod
    def from_dict(cls, raw: Mapping[str, Mapping[str, Sequence[str]]]) -> "SymbolMapping":
        activities = {}
        for activity, constructs in raw.items():
            if activity.startswith("_"):
                continue
            activities[activity] = {
                name.strip().lower(): tuple(SymbolPredicate.parse(p) for p in preds)
                for name, preds in constructs.items()
            }
        return cls(activities)

    @classmethod
    def load(cls, path: str | Path) -> "SymbolMapping":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def predicates(self, activity: str, construct_name: str) -> tuple[SymbolPredicate, ...]:
        return tuple(self.activities.get(activity, {}).get(construct_name.strip().lower(), ()))

    def __contains__(self, activity: str) -> bool:
        return activity in self.activities


@dataclass(frozen=True)
class ConstructPattern:
    activity_label: str
    category: Category
    steps: tuple[tuple[SymbolPredicate, ...], ...]
    step_names: tuple[str, ...] = ()
    gap_tolerance: float = DEFAULT_GAP_TOLERANCE
    window: float = DEFAULT_WINDOW

    def __post_init__(self):
        if not self.steps or any(not step for step in self.steps):
            raise ConfigError(f"{self.activity_label}: every pattern step needs a predicate")
        if self.category is Category.ACTION and self.gap_tolerance > self.window:
            raise ConfigError(f"{self.activity_label}: gap_tolerance exceeds window")


@dataclass(frozen=True)
class MatchResult:
    activity_label: str
    start_index: int
    end_index: int
    start_time: float
    end_time: float
    witnesses: tuple[int, ...]
    witness_symbols: tuple[EventSymbol, ...] = field(default=(), compare=False)


class UnreviewedSet(ConstructMinerError):
    pass


def symbolize_stream(
    events: Iterable[SensorEvent],
    locations: LocationMap,
    exclude: Iterable[SensorKind] = DEFAULT_EXCLUDED_KINDS,
) -> list[TimedSymbol]:
    excluded = frozenset(exclude)
    out = []
    for event in events:
        if event.kind in excluded:
            continue
        if event.sensor_id not in locations:
            raise UnmappedSensor(event.sensor_id)
        out.append(
            TimedSymbol(to_seconds(event.timestamp), EventSymbol(locations[event.sensor_id], event.kind, event.value))
        )
    return out


def compile_pattern(
    cset: ConstructSet,
    mapping: SymbolMapping,
    gap_tolerance: float = DEFAULT_GAP_TOLERANCE,
    window: float = DEFAULT_WINDOW,
) -> ConstructPattern:
    if cset.review_state is ReviewState.MACHINE:
        raise UnreviewedSet(f"{cset.activity_label} has not been reviewed")
    steps, names = [], []
    for c in cset.constructs:
        preds = mapping.predicates(cset.activity_label, c.name)
        if not preds:
            if cset.category is Category.ACTION:
                raise UnmappedConstruct(c.name, cset.activity_label)
            continue
        steps.append(preds)
        names.append(c.name)
    if not steps:
        raise UnmappedConstruct(cset.constructs[0].name, cset.activity_label)
    return ConstructPattern(cset.activity_label, cset.category, tuple(steps), tuple(names), gap_tolerance, window)


def _step_hits(pattern: ConstructPattern, symbols: Sequence[TimedSymbol]) -> list[tuple[bool, ...]]:
    cache: dict[EventSymbol, tuple[bool, ...]] = {}
    hits = []
    for ts in symbols:
        row = cache.get(ts.symbol)
        if row is None:
            row = tuple(any(p.matches(ts.symbol) for p in step) for step in pattern.steps)
            cache[ts.symbol] = row
        hits.append(row)
    return hits


def _earliest_end(start, hits, times, k, gap, window):
    # last[j]: latest index so far that can serve as step j of a match starting at `start`
    if k == 1:
        return start
    last: list[int | None] = [None] * k
    last[0] = start
    t0 = times[start]
    newest = start  # most recent index bound to any step; nothing extends past newest + gap
    for i in range(start + 1, len(times)):
        ti = times[i]
        if ti - t0 > window or ti - times[newest] > gap:
            return None
        row = hits[i]
        for j in range(k - 1, 0, -1):
            prev = last[j - 1]
            if row[j] and prev is not None and ti - times[prev] <= gap:
                if j == k - 1:
                    return i
                last[j] = i
                newest = i
    return None


def _smallest_witnesses(start, end, hits, times, k, gap) -> tuple[int, ...]:
    # reach[j]: indices usable as step j that still lead to `end` at step k-1
    reach: list[list[int]] = [[] for _ in range(k)]
    reach[k - 1] = [end]
    for j in range(k - 2, 0, -1):
        nxt = reach[j + 1]  # ascending
        ptr = len(nxt) - 1
        nearest = None
        found = []
        for i in range(nxt[-1] - 1, start, -1):
            while ptr >= 0 and nxt[ptr] > i:
                nearest = nxt[ptr]
                ptr -= 1
            if hits[i][j] and nearest is not None and times[nearest] - times[i] <= gap:
                found.append(i)
        reach[j] = found[::-1]
    chosen = [start]
    for j in range(1, k):
        prev = chosen[-1]
        chosen.append(next(i for i in reach[j] if i > prev and times[i] - times[prev] <= gap))
    return tuple(chosen)


def _match_sequence(pattern, symbols) -> list[MatchResult]:
    hits = _step_hits(pattern, symbols)
    times = [s.time for s in symbols]
    k = len(pattern.steps)
    results = []
    s = 0
    while s < len(symbols):
        if hits[s][0]:
            end = _earliest_end(s, hits, times, k, pattern.gap_tolerance, pattern.window)
            if end is not None:
                wit = _smallest_witnesses(s, end, hits, times, k, pattern.gap_tolerance)
                results.append(_result(pattern, symbols, s, end, wit))
                s = end + 1
                continue
        s += 1
    return results


def _match_containment(pattern, symbols) -> list[MatchResult]:
    hits = _step_hits(pattern, symbols)
    times = [s.time for s in symbols]
    k = len(pattern.steps)
    results = []
    s = 0
    while s < len(symbols):
        if any(hits[s]):
            first: list[int | None] = [None] * k
            missing = k
            end = None
            for i in range(s, len(symbols)):
                if times[i] - times[s] > pattern.window:
                    break
                for j, hit in enumerate(hits[i]):
                    if hit and first[j] is None:
                        first[j] = i
                        missing -= 1
                if missing == 0:
                    end = i
                    break
            if end is not None:
                results.append(_result(pattern, symbols, s, end, tuple(first)))
                s = end + 1
                continue
        s += 1
    return results


def _result(pattern, symbols, start, end, witnesses) -> MatchResult:
    return MatchResult(
        pattern.activity_label,
        start,
        end,
        symbols[start].time,
        symbols[end].time,
        witnesses,
        tuple(symbols[i].symbol for i in witnesses),
    )


def match_stream(pattern: ConstructPattern, symbols: Sequence[TimedSymbol]) -> list[MatchResult]:
    """Leftmost non-overlapping matches of ``pattern``; ``symbols`` must be time-sorted."""
    if pattern.category is Category.ACTION:
        return _match_sequence(pattern, symbols)
    return _match_containment(pattern, symbols)


# -- evaluation ---------------------------------------------------------------------


@dataclass(frozen=True)
class Span:
    label: str
    start: float
    end: float

    @classmethod
    def from_instance(cls, inst: ActivityInstance) -> "Span":
        return cls(inst.label, to_seconds(inst.start), to_seconds(inst.end))


@dataclass(frozen=True)
class LabelMetrics:
    label: str
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class EvaluationReport:
    rows: tuple[LabelMetrics, ...]

    def _macro(self, attr: str) -> float:
        return sum(getattr(r, attr) for r in self.rows) / len(self.rows) if self.rows else 0.0

    @property
    def macro_precision(self) -> float:
        return self._macro("precision")

    @property
    def macro_recall(self) -> float:
        return self._macro("recall")

    @property
    def macro_f1(self) -> float:
        return self._macro("f1")

    def row(self, label: str) -> LabelMetrics:
        return next(r for r in self.rows if r.label == label)

    def to_csv(self) -> str:
        lines = ["label,tp,fp,fn,precision,recall,f1"]
        for r in self.rows:
            lines.append(f"{r.label},{r.tp},{r.fp},{r.fn},{r.precision:.4f},{r.recall:.4f},{r.f1:.4f}")
        tp = sum(r.tp for r in self.rows)
        fp = sum(r.fp for r in self.rows)
        fn = sum(r.fn for r in self.rows)
        lines.append(
            f"macro,{tp},{fp},{fn},{self.macro_precision:.4f},{self.macro_recall:.4f},{self.macro_f1:.4f}"
        )
        return "\n".join(lines) + "\n"


def _overlaps(a_start, a_end, b_start, b_end, threshold) -> bool:
    inter = min(a_end, b_end) - max(a_start, b_start)
    if inter < 0:
        return False
    shorter = min(a_end - a_start, b_end - b_start)
    if shorter <= 0:
        return True
    return inter >= threshold * shorter


def evaluate(
    matches: Iterable[MatchResult],
    ground_truth: Iterable[Span],
    overlap: float = DEFAULT_OVERLAP,
    labels: Iterable[str] | None = None,
) -> EvaluationReport:
    """Per-label precision/recall/F1; each ground-truth span is credited at most once."""
    ordered = sorted(matches, key=lambda m: (m.activity_label, m.start_time, m.end_time, m.witnesses))
    truth = sorted(ground_truth, key=lambda g: (g.label, g.start, g.end))
    if labels is None:
        labels = {m.activity_label for m in ordered} | {g.label for g in truth}
    labels = sorted(set(labels))
    wanted = set(labels)

    used: set[int] = set()
    tp = dict.fromkeys(labels, 0)
    fp = dict.fromkeys(labels, 0)
    for m in ordered:
        if m.activity_label not in wanted:
            continue
        best = None
        best_inter = -1.0
        for gi, g in enumerate(truth):
            if gi in used or g.label != m.activity_label:
                continue
            if _overlaps(m.start_time, m.end_time, g.start, g.end, overlap):
                inter = min(m.end_time, g.end) - max(m.start_time, g.start)
                if inter > best_inter:
                    best, best_inter = gi, inter
        if best is None:
            fp[m.activity_label] += 1
        else:
            used.add(best)
            tp[m.activity_label] += 1
    totals = {label: sum(1 for g in truth if g.label == label) for label in labels}
    return EvaluationReport(tuple(LabelMetrics(l, tp[l], fp[l], totals[l] - tp[l]) for l in labels))
