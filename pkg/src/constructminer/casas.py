"""Parsing and segmentation of CASAS-style ambient sensor logs.

A log line carries ``date time sensor_id value [label marker]`` separated by
any run of whitespace, e.g.::

    2010-11-04 05:40:51.303739 M004 ON Bed_to_Toilet begin

Malformed lines never abort a parse; they are returned as diagnostics so the
caller can decide how strict to be.
"""

from __future__ import annotations

import bisect
import csv
import datetime as dt
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import MalformedLine, MergeMapError, UnknownSensorPrefix, ValueVocabulary

MARKERS = ("begin", "end")
DEFAULT_OTHER_LABELS = frozenset({"Other"})


class SensorKind(str, Enum):
    MOTION = "Motion"
    DOOR = "Door"
    TEMPERATURE = "Temperature"

    @property
    def word(self) -> str:
        return self.value.lower()


_PREFIX_KINDS = {"M": SensorKind.MOTION, "D": SensorKind.DOOR, "T": SensorKind.TEMPERATURE}
_VOCABULARY = {
    SensorKind.MOTION: frozenset({"ON", "OFF"}),
    SensorKind.DOOR: frozenset({"OPEN", "CLOSE"}),
}


@dataclass(frozen=True)
class SensorEvent:
    timestamp: dt.datetime
    sensor_id: str
    kind: SensorKind
    value: str
    # number of fractional-second digits in the source text, for round-tripping
    frac_digits: int = 0
    line_no: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ActivityAnnotation:
    label: str
    marker: str

    def __post_init__(self):
        if not self.label:
            raise ValueError("annotation label must be non-empty")
        if self.marker not in MARKERS:
            raise ValueError(f"marker must be one of {MARKERS}, got {self.marker!r}")


@dataclass(frozen=True)
class ActivityInstance:
    label: str
    events: tuple[SensorEvent, ...]
    start: dt.datetime
    end: dt.datetime
    truncated: bool = False
    ref: str = ""


@dataclass(frozen=True)
class Diagnostic:
    line_no: int
    error_class: str
    message: str

    def format(self) -> str:
        return f"{self.line_no}\t{self.error_class}\t{self.message}"


@dataclass
class ParseResult:
    events: list[SensorEvent]
    # (index into events, annotation attached to that event)
    annotations: list[tuple[int, ActivityAnnotation]]
    diagnostics: list[Diagnostic]

    @property
    def error_counts(self) -> Counter:
        return Counter(d.error_class for d in self.diagnostics)


@dataclass
class SegmentResult:
    instances: list[ActivityInstance]
    diagnostics: list[Diagnostic]


def infer_sensor_kind(sensor_id: str) -> SensorKind:
    if not sensor_id:
        raise UnknownSensorPrefix(sensor_id)
    try:
        return _PREFIX_KINDS[sensor_id[0]]
    except KeyError:
        raise UnknownSensorPrefix(sensor_id) from None


def _parse_timestamp(date_token: str, time_token: str) -> tuple[dt.datetime, int]:
    text = f"{date_token} {time_token}"
    if "." in time_token:
        frac = time_token.rsplit(".", 1)[1]
        if not frac.isdigit() or len(frac) > 6:
            raise ValueError(f"bad fractional seconds in {time_token!r}")
        return dt.datetime.strptime(text, "%Y-%m-%d %H:%M:%S.%f"), len(frac)
    return dt.datetime.strptime(text, "%Y-%m-%d %H:%M:%S"), 0


def format_timestamp(ts: dt.datetime, frac_digits: int) -> str:
    base = ts.strftime("%Y-%m-%d %H:%M:%S")
    if frac_digits:
        return f"{base}.{ts.microsecond:06d}"[: len(base) + 1 + frac_digits]
    return base


def parse_event_line(line: str, line_no: int) -> tuple[SensorEvent, ActivityAnnotation | None]:
    fields = line.split()
    if len(fields) not in (4, 6):
        raise MalformedLine(line_no, f"expected 4 or 6 fields, got {len(fields)}")
    date_token, time_token, sensor_id, value = fields[:4]
    try:
        timestamp, frac_digits = _parse_timestamp(date_token, time_token)
    except ValueError as exc:
        raise MalformedLine(line_no, f"unparseable timestamp: {exc}") from None
    try:
        kind = infer_sensor_kind(sensor_id)
    except UnknownSensorPrefix as exc:
        raise MalformedLine(line_no, str(exc)) from None

    if kind is SensorKind.TEMPERATURE:
        try:
            float(value)
        except ValueError:
            raise ValueVocabulary(line_no, f"temperature value {value!r} is not a number") from None
    elif value not in _VOCABULARY[kind]:
        raise ValueVocabulary(line_no, f"{kind.value} value {value!r} not in {sorted(_VOCABULARY[kind])}")

    annotation = None
    if len(fields) == 6:
        label, marker = fields[4], fields[5]
        if marker not in MARKERS:
            raise MalformedLine(line_no, f"unknown annotation marker {marker!r}")
        annotation = ActivityAnnotation(label, marker)
    event = SensorEvent(timestamp, sensor_id, kind, value, frac_digits, line_no)
    return event, annotation


def format_event_line(event: SensorEvent, annotation: ActivityAnnotation | None = None) -> str:
    tokens = [format_timestamp(event.timestamp, event.frac_digits), event.sensor_id, event.value]
    if annotation is not None:
        tokens += [annotation.label, annotation.marker]
    return " ".join(tokens)


def parse_stream(lines: Iterable[str]) -> ParseResult:
    """Parse every line, collecting failures instead of raising.

    Blank lines are skipped silently; anything else that fails to parse is
    recorded with its 1-based line number.
    """
    events: list[SensorEvent] = []
    annotations: list[tuple[int, ActivityAnnotation]] = []
    diagnostics: list[Diagnostic] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            event, annotation = parse_event_line(line, line_no)
        except (MalformedLine, ValueVocabulary) as exc:
            diagnostics.append(Diagnostic(line_no, exc.error_class, exc.message))
            continue
        if annotation is not None:
            annotations.append((len(events), annotation))
        events.append(event)
    return ParseResult(events, annotations, diagnostics)


def read_log(path: str | Path) -> ParseResult:
    with open(path, encoding="utf-8") as fh:
        return parse_stream(fh)


def segment_instances(
    events: Sequence[SensorEvent],
    annotations: Sequence[tuple[int, ActivityAnnotation]],
) -> SegmentResult:
    """Pair begin/end markers per label into activity instances.

    Each label has at most one open instance. Instances of different labels
    may overlap. An instance holds every event whose timestamp lies within
    ``[begin.ts, end.ts]``.
    """
    diagnostics: list[Diagnostic] = []
    order = sorted(range(len(events)), key=lambda i: events[i].timestamp)
    if any(i != j for i, j in zip(order, range(len(events)))):
        diagnostics.append(Diagnostic(0, "UnsortedInput", "events re-sorted by timestamp"))
    ordered = [events[i] for i in order]
    new_pos = {old: new for new, old in enumerate(order)}
    markers = sorted(
        ((new_pos[idx], seq, ann) for seq, (idx, ann) in enumerate(annotations)),
        key=lambda item: (item[0], item[1]),
    )
    timestamps = [e.timestamp for e in ordered]

    spans: list[tuple[str, dt.datetime, dt.datetime, bool]] = []
    open_: dict[str, dt.datetime] = {}
    for pos, _, ann in markers:
        ts = timestamps[pos]
        line_no = ordered[pos].line_no
        if ann.marker == "begin":
            if ann.label in open_:
                diagnostics.append(
                    Diagnostic(line_no, "NestedBegin", f"{ann.label} re-opened; previous instance truncated")
                )
                spans.append((ann.label, open_[ann.label], ts, True))
            open_[ann.label] = ts
        elif ann.label in open_:
            spans.append((ann.label, open_.pop(ann.label), ts, False))
        else:
            diagnostics.append(Diagnostic(line_no, "UnmatchedEnd", f"end of {ann.label} without begin"))
    if open_:
        last = timestamps[-1]
        for label, start in open_.items():
            diagnostics.append(Diagnostic(0, "UnclosedBegin", f"{label} still open at end of stream"))
            spans.append((label, start, last, True))

    spans.sort(key=lambda s: (s[1], s[2], s[0]))
    ordinals: Counter = Counter()
    instances = []
    for label, start, end, truncated in spans:
        lo = bisect.bisect_left(timestamps, start)
        hi = bisect.bisect_right(timestamps, end)
        ordinals[label] += 1
        instances.append(
            ActivityInstance(
                label=label,
                events=tuple(ordered[lo:hi]),
                start=start,
                end=end,
                truncated=truncated,
                ref=f"{label}#{ordinals[label]:04d}",
            )
        )
    return SegmentResult(instances, diagnostics)


@dataclass(frozen=True)
class LabelMergeMap:
    """Raw-to-canonical activity label rewrite, identity for unknown labels."""

    mapping: Mapping[str, str] = field(default_factory=dict)
    canonical_labels: frozenset[str] | None = None

    def __post_init__(self):
        for raw, canon in self.mapping.items():
            target = self.mapping.get(canon, canon)
            if target != canon:
                raise MergeMapError(f"{raw} -> {canon} -> {target}: merge map must be one hop")
            if self.canonical_labels is not None and canon not in self.canonical_labels:
                raise MergeMapError(f"{canon!r} is not a declared canonical label")

    def canonical(self, label: str) -> str:
        return self.mapping.get(label, label)

    @classmethod
    def load(cls, path: str | Path, canonical_labels: Iterable[str] | None = None) -> "LabelMergeMap":
        mapping: dict[str, str] = {}
        with open(path, encoding="utf-8", newline="") as fh:
            for row_no, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].startswith("#"):
                    continue
                if len(row) != 2:
                    raise MergeMapError(f"{path}:{row_no}: expected raw_label,canonical_label")
                raw, canon = row[0].strip(), row[1].strip()
                if row_no == 1 and (raw.lower(), canon.lower()) == ("raw_label", "canonical_label"):
                    continue
                mapping[raw] = canon
        return cls(mapping, frozenset(canonical_labels) if canonical_labels is not None else None)


def canonicalize_labels(
    instances: Iterable[ActivityInstance],
    merge_map: LabelMergeMap,
    other_labels: Iterable[str] = DEFAULT_OTHER_LABELS,
) -> tuple[list[ActivityInstance], Counter]:
    """Rewrite labels through ``merge_map`` and drop the background class."""
    other = frozenset(other_labels)
    kept = []
    for inst in instances:
        label = merge_map.canonical(inst.label)
        if label in other:
            continue
        kept.append(inst if label == inst.label else replace(inst, label=label))
    return kept, Counter(inst.label for inst in kept)
