"""Synthetic data: CASAS-format logs from activity templates, and planted symbol streams.

Used to build the shipped sample datasets and the recognition test fixtures.
Everything is driven by an explicit seed.
"""

from __future__ import annotations

import datetime as dt
import random
from dataclasses import dataclass
from typing import Iterator, Sequence

from .casas import SensorKind, format_timestamp, infer_sensor_kind
from .recognizer import EventSymbol, Span, TimedSymbol


# -- CASAS-format logs -------------------------------------------------------------


@dataclass(frozen=True)
class ActivityTemplate:
    """How one activity shows up in the sensors.

    ``steps`` is an ordered list of sensor-id groups; each instance fires one
    sensor from every group in order, ``repeats`` times through the list. A
    plain id fires an ON/OFF (or OPEN/CLOSE) pair; ``"D001=OPEN"`` fires the
    single given value.
    """

    raw_label: str
    steps: tuple[tuple[str, ...], ...]
    hours: tuple[int, ...]
    repeats: tuple[int, int] = (1, 1)
    step_gap: tuple[float, float] = (2.0, 40.0)


def _value_pair(sensor_id: str) -> tuple[str, str]:
    kind = infer_sensor_kind(sensor_id)
    return ("OPEN", "CLOSE") if kind is SensorKind.DOOR else ("ON", "OFF")


def generate_log(
    templates: Sequence[ActivityTemplate],
    background_sensors: Sequence[str],
    temperature_sensors: Sequence[str],
    days: int,
    seed: int,
    start: dt.datetime = dt.datetime(2010, 11, 4),
) -> list[str]:
    """Render ``days`` of annotated sensor lines, one scheduled instance per template hour."""
    rng = random.Random(seed)
    rows: list[tuple[dt.datetime, str, str, str, int]] = []

    def emit(ts, sensor, value, annotation=""):
        rows.append((ts, sensor, value, annotation, rng.choice((0, 6, 6, 6))))

    for day in range(days):
        base = start + dt.timedelta(days=day)
        for template in templates:
            for hour in template.hours:
                if rng.random() < 0.15:
                    continue
                ts = base + dt.timedelta(hours=hour, minutes=rng.randrange(60), seconds=rng.randrange(60))
                fired = []
                for _ in range(rng.randint(*template.repeats)):
                    for group in template.steps:
                        sensor = rng.choice(group)
                        fired.append((ts, sensor))
                        ts += dt.timedelta(seconds=rng.uniform(*template.step_gap))
                for pos, (when, step) in enumerate(fired):
                    sensor, _, fixed = step.partition("=")
                    begin = f"{template.raw_label} begin" if pos == 0 else ""
                    end = f"{template.raw_label} end" if pos == len(fired) - 1 else ""
                    if fixed:
                        if begin and end:
                            emit(when, sensor, fixed, begin)
                            emit(when + dt.timedelta(seconds=1), sensor, fixed, end)
                        else:
                            emit(when, sensor, fixed, begin or end)
                        continue
                    on, off = _value_pair(sensor)
                    emit(when, sensor, on, begin)
                    emit(when + dt.timedelta(seconds=rng.uniform(0.5, 3.0)), sensor, off, end)
        # untagged background movement and periodic temperature readings
        for _ in range(rng.randint(10, 20)):
            ts = base + dt.timedelta(seconds=rng.uniform(0, 86_400))
            sensor = rng.choice(background_sensors)
            on, off = _value_pair(sensor)
            emit(ts, sensor, on)
            emit(ts + dt.timedelta(seconds=rng.uniform(1, 5)), sensor, off)
        for hour in range(0, 24, 2):
            for sensor in temperature_sensors:
                ts = base + dt.timedelta(hours=hour, seconds=rng.uniform(0, 3600))
                emit(ts, sensor, f"{rng.uniform(18.0, 25.0):.1f}")

    rows.sort(key=lambda r: r[0])
    # drop annotations that would make same-label instances overlap
    lines = []
    open_labels: set[str] = set()
    for ts, sensor, value, annotation, digits in rows:
        if annotation:
            label, marker = annotation.split()
            if marker == "begin":
                if label in open_labels:
                    annotation = ""
                else:
                    open_labels.add(label)
            elif label in open_labels:
                open_labels.discard(label)
            else:
                annotation = ""
        stamp = format_timestamp(ts, digits)
        lines.append(" ".join(filter(None, (stamp, sensor, value, annotation))))
    return lines


# -- planted symbol streams ----------------------------------------------------------


@dataclass(frozen=True)
class PlantSpec:
    """One activity to plant: the concrete symbol witnessing each step, in order."""

    label: str
    witnesses: tuple[EventSymbol, ...]
    count: int
    spurious: int = 0


@dataclass
class PlantedStream:
    symbols: list[TimedSymbol]
    truth: list[Span]
    spurious: list[Span]


def plant_stream(
    specs: Sequence[PlantSpec],
    distractors: Sequence[EventSymbol],
    seed: int,
    gap_tolerance: float,
    noise_ratio: int = 10,
    separation: float | None = None,
) -> PlantedStream:
    """Interleave planted witness sequences with ``noise_ratio`` distractors per witness.

    Consecutive witnesses are at most ``0.9 * gap_tolerance`` apart. Spurious
    plants are full witness sequences that are *not* recorded as ground truth.
    Planted sequences are separated by ``separation`` seconds of pure noise.
    """
    rng = random.Random(seed)
    separation = separation if separation is not None else 4 * gap_tolerance
    jobs = [(spec, False) for spec in specs for _ in range(spec.count)]
    jobs += [(spec, True) for spec in specs for _ in range(spec.spurious)]
    rng.shuffle(jobs)

    symbols: list[TimedSymbol] = []
    truth: list[Span] = []
    spurious: list[Span] = []
    t = 0.0

    def noise_between(lo: float, hi: float, count: int) -> None:
        for when in sorted(rng.uniform(lo, hi) for _ in range(count)):
            symbols.append(TimedSymbol(when, rng.choice(distractors)))

    for spec, is_spurious in jobs:
        gap_noise = t + separation
        noise_between(t + 1e-3, gap_noise, noise_ratio * len(spec.witnesses))
        t = gap_noise + 1.0
        first = t
        for pos, symbol in enumerate(spec.witnesses):
            if pos:
                step = rng.uniform(0.1, 0.9) * gap_tolerance
                noise_between(t + 1e-3, t + step - 1e-3, noise_ratio)
                t += step
            symbols.append(TimedSymbol(t, symbol))
        span = Span(spec.label, first, t)
        (spurious if is_spurious else truth).append(span)
    noise_between(t + 1e-3, t + separation, noise_ratio)
    symbols.sort(key=lambda s: s.time)
    return PlantedStream(symbols, truth, spurious)


def random_symbol_stream(
    rng: random.Random, alphabet: Sequence[EventSymbol], length: int, max_step: float
) -> list[TimedSymbol]:
    t = 0.0
    out = []
    for _ in range(length):
        t += rng.uniform(0.0, max_step)
        out.append(TimedSymbol(round(t, 3), rng.choice(alphabet)))
    return out


def symbol_alphabet(size: int) -> list[EventSymbol]:
    kinds = (SensorKind.MOTION, SensorKind.DOOR)
    out = []
    for i in range(size):
        kind = kinds[i % 2]
        value = ("ON", "OFF")[i // 2 % 2] if kind is SensorKind.MOTION else ("OPEN", "CLOSE")[i // 2 % 2]
        out.append(EventSymbol(f"room{i // 4:02d}", kind, value))
    return out


def iter_marker_sequences(labels: Sequence[str], max_len: int) -> Iterator[tuple[tuple[str, str], ...]]:
    """Every begin/end marker sequence over ``labels`` up to ``max_len`` markers."""
    alphabet = [(label, marker) for label in labels for marker in ("begin", "end")]

    def rec(prefix):
        yield tuple(prefix)
        if len(prefix) == max_len:
            return
        for item in alphabet:
            prefix.append(item)
            yield from rec(prefix)
            prefix.pop()

    yield from rec([])

