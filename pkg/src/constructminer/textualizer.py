"""Render activity instances as plain-English paragraphs for the summarizer."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .casas import ActivityInstance, SensorEvent
from .errors import EmptyInstance, UnmappedSensor

TEMPLATE_VERSION = "sentence-v1"
DEFAULT_LONG_GAP_SECONDS = 3600


@dataclass(frozen=True)
class LocationMap:
    mapping: Mapping[str, str]

    def __post_init__(self):
        empty = [sid for sid, phrase in self.mapping.items() if not phrase.strip()]
        if empty:
            raise ValueError(f"empty location phrase for {empty}")

    def __contains__(self, sensor_id: str) -> bool:
        return sensor_id in self.mapping

    def __getitem__(self, sensor_id: str) -> str:
        try:
            return self.mapping[sensor_id]
        except KeyError:
            raise UnmappedSensor(sensor_id) from None

    @classmethod
    def load(cls, path: str | Path) -> "LocationMap":
        mapping = {}
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#"):
                    continue
                if len(row) != 2:
                    raise ValueError(f"{path}: expected sensor_id,location_phrase, got {row}")
                mapping[row[0].strip()] = row[1].strip()
        mapping.pop("sensor_id", None)
        return cls(mapping)


@dataclass(frozen=True)
class InstanceParagraph:
    activity_label: str
    text: str
    sentence_count: int
    instance_ref: str

    def to_record(self) -> dict:
        return {"label": self.activity_label, "instance_ref": self.instance_ref, "text": self.text}


def location_clause(phrase: str) -> str:
    # "between the X and Y" phrases carry their own preposition
    if phrase.lower().startswith("between the "):
        return f"between the {phrase[len('between the '):]}"
    return f"in the {phrase}"


def _format_gap(seconds: int, long_gap: int) -> str:
    if seconds >= long_gap:
        hours, rem = divmod(seconds, 3600)
        return f"{hours} hours and {rem // 60} minutes"
    return f"{seconds} seconds"


def encode_event(
    event: SensorEvent,
    prev_timestamp: dt.datetime | None,
    locations: LocationMap,
    long_gap_seconds: int = DEFAULT_LONG_GAP_SECONDS,
) -> str:
    phrase = locations[event.sensor_id]
    clock = event.timestamp.strftime("%I:%M %p")
    sentence = (
        f"At {clock}, the {event.kind.word} sensor {location_clause(phrase)} "
        f"fired with the value {event.value}"
    )
    if prev_timestamp is not None:
        gap = max(0, int((event.timestamp - prev_timestamp).total_seconds() // 1))
        sentence += f", {_format_gap(gap, long_gap_seconds)} after the previous event"
    return sentence + "."


def encode_instance(
    instance: ActivityInstance,
    locations: LocationMap,
    long_gap_seconds: int = DEFAULT_LONG_GAP_SECONDS,
) -> InstanceParagraph:
    if not instance.events:
        raise EmptyInstance(f"instance {instance.ref or instance.label} has no events")
    sentences = []
    prev = None
    for event in instance.events:
        sentences.append(encode_event(event, prev, locations, long_gap_seconds))
        prev = event.timestamp
    return InstanceParagraph(
        activity_label=instance.label,
        text=" ".join(sentences),
        sentence_count=len(sentences),
        instance_ref=instance.ref,
    )
