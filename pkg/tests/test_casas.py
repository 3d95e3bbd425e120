from __future__ import annotations

import datetime as dt

import pytest

from constructminer.casas import (
    ActivityAnnotation,
    ActivityInstance,
    LabelMergeMap,
    SensorKind,
    canonicalize_labels,
    format_event_line,
    format_timestamp,
    infer_sensor_kind,
    parse_event_line,
    parse_stream,
    read_log,
    segment_instances,
)
from constructminer.errors import MalformedLine, MergeMapError, UnknownSensorPrefix, ValueVocabulary


@pytest.mark.parametrize(
    "sensor_id, kind",
    [("M004", SensorKind.MOTION), ("D002", SensorKind.DOOR), ("T001", SensorKind.TEMPERATURE)],
)
def test_infer_sensor_kind(sensor_id, kind):
    assert infer_sensor_kind(sensor_id) is kind


@pytest.mark.parametrize("sensor_id", ["X001", "", "m004"])
def test_infer_sensor_kind_rejects_unknown_prefix(sensor_id):
    with pytest.raises(UnknownSensorPrefix):
        infer_sensor_kind(sensor_id)


def test_parse_annotated_motion_line():
    event, ann = parse_event_line("2010-11-04 05:40:51.303739 M004 ON Bed_to_Toilet begin", 7)
    assert event.timestamp == dt.datetime(2010, 11, 4, 5, 40, 51, 303739)
    assert event.kind is SensorKind.MOTION
    assert event.value == "ON"
    assert event.frac_digits == 6
    assert event.line_no == 7
    assert ann == ActivityAnnotation("Bed_to_Toilet", "begin")


def test_parse_whole_second_temperature_line():
    event, ann = parse_event_line("2010-11-04 05:40:43 T001 21.5", 1)
    assert event.kind is SensorKind.TEMPERATURE
    assert event.value == "21.5"
    assert event.frac_digits == 0
    assert ann is None


def test_door_vocabulary_error():
    with pytest.raises(ValueVocabulary) as info:
        parse_event_line("2010-11-04 05:40:43 D001 ON", 3)
    assert info.value.line_no == 3


@pytest.mark.parametrize(
    "line",
    [
        "2010-11-04 05:40:43 M001",
        "2010-11-04 05:40:43 M001 ON Sleeping",
        "2010-11-04 05:40:43 M001 ON Sleeping middle",
        "yesterday 05:40:43 M001 ON",
        "2010-11-04 05:40:43.1234567 M001 ON",
        "2010-11-04 05:40:43 Z001 ON",
    ],
)
def test_malformed_lines(line):
    with pytest.raises(MalformedLine):
        parse_event_line(line, 1)


@pytest.mark.parametrize(
    "line",
    [
        "2010-11-04 05:40:43 T001 21.5",
        "2010-11-04 05:40:43.1 M001 OFF",
        "2010-11-04 05:40:43.000100 D003 CLOSE Leave_Home end",
        "2011-01-31 23:59:59.999999 M031 ON Relax begin",
    ],
)
def test_round_trip_is_byte_identical(line):
    event, ann = parse_event_line(line, 1)
    assert format_event_line(event, ann) == line


def test_format_timestamp_keeps_digit_count():
    ts = dt.datetime(2010, 1, 2, 3, 4, 5, 120000)
    assert format_timestamp(ts, 0) == "2010-01-02 03:04:05"
    assert format_timestamp(ts, 2) == "2010-01-02 03:04:05.12"
    assert format_timestamp(ts, 6) == "2010-01-02 03:04:05.120000"


def test_parse_stream_collects_diagnostics_and_skips_blank_lines():
    lines = [
        "2010-11-04 05:40:43 M001 ON Relax begin",
        "",
        "2010-11-04 05:40:44 M001 MAYBE",
        "2010-11-04 05:40:45 M001 OFF Relax end",
    ]
    result = parse_stream(lines)
    assert len(result.events) == 2
    assert [(d.line_no, d.error_class) for d in result.diagnostics] == [(3, "ValueVocabulary")]
    assert result.annotations == [(0, ActivityAnnotation("Relax", "begin")), (1, ActivityAnnotation("Relax", "end"))]
    assert result.error_counts == {"ValueVocabulary": 1}
    assert result.diagnostics[0].format().startswith("3\tValueVocabulary\t")


def _stream(*specs):
    lines = []
    for second, marker in enumerate(specs):
        line = f"2010-11-04 06:00:{second:02d} M001 ON"
        if marker:
            line += " " + marker
        lines.append(line)
    return parse_stream(lines)


def test_segment_simple_instance():
    parsed = _stream("Relax begin", None, "Relax end", None)
    result = segment_instances(parsed.events, parsed.annotations)
    assert len(result.instances) == 1
    inst = result.instances[0]
    assert (inst.label, len(inst.events), inst.truncated, inst.ref) == ("Relax", 3, False, "Relax#0001")
    assert result.diagnostics == []


def test_segment_overlapping_labels_are_independent():
    parsed = _stream("Relax begin", "Work begin", "Relax end", "Work end")
    result = segment_instances(parsed.events, parsed.annotations)
    assert [(i.label, len(i.events)) for i in result.instances] == [("Relax", 3), ("Work", 3)]


def test_segment_nested_begin_truncates_previous():
    parsed = _stream("Relax begin", None, "Relax begin", "Relax end")
    result = segment_instances(parsed.events, parsed.annotations)
    assert [(len(i.events), i.truncated) for i in result.instances] == [(3, True), (2, False)]
    assert [d.error_class for d in result.diagnostics] == ["NestedBegin"]
    assert result.diagnostics[0].line_no == 3


def test_segment_unmatched_end_and_unclosed_begin():
    parsed = _stream("Work end", "Relax begin", None)
    result = segment_instances(parsed.events, parsed.annotations)
    assert [d.error_class for d in result.diagnostics] == ["UnmatchedEnd", "UnclosedBegin"]
    (inst,) = result.instances
    assert inst.truncated and inst.end == parsed.events[-1].timestamp


def test_segment_sorts_unsorted_input():
    lines = [
        "2010-11-04 06:00:05 M001 OFF Relax end",
        "2010-11-04 06:00:01 M001 ON Relax begin",
        "2010-11-04 06:00:03 M002 ON",
    ]
    parsed = parse_stream(lines)
    result = segment_instances(parsed.events, parsed.annotations)
    assert result.diagnostics[0].error_class == "UnsortedInput"
    (inst,) = result.instances
    assert [e.timestamp.second for e in inst.events] == [1, 3, 5]


def test_merge_map_one_hop_rule():
    LabelMergeMap({"Sleep": "Sleeping", "Eve_Meds": "Take_Medicine"})
    with pytest.raises(MergeMapError):
        LabelMergeMap({"A": "B", "B": "C"})
    with pytest.raises(MergeMapError):
        LabelMergeMap({"Sleep": "Sleeping"}, frozenset({"Relax"}))


def test_merge_map_load_skips_header(tmp_path):
    path = tmp_path / "merge.csv"
    path.write_text("raw_label,canonical_label\nSleep,Sleeping\n")
    assert LabelMergeMap.load(path).canonical("Sleep") == "Sleeping"
    assert LabelMergeMap.load(path).canonical("Relax") == "Relax"
    path.write_text("Sleep,Sleeping,extra\n")
    with pytest.raises(MergeMapError):
        LabelMergeMap.load(path)


def _instance(label):
    ts = dt.datetime(2010, 1, 1)
    return ActivityInstance(label, (), ts, ts)


def test_canonicalize_merges_and_drops_other():
    merge = LabelMergeMap({"Eve_Meds": "Take_Medicine", "Morning_Meds": "Take_Medicine", "Chores": "Other"})
    kept, counts = canonicalize_labels(
        [_instance("Eve_Meds"), _instance("Morning_Meds"), _instance("Chores"), _instance("Other"), _instance("Read")],
        merge,
    )
    assert [i.label for i in kept] == ["Take_Medicine", "Take_Medicine", "Read"]
    assert counts == {"Take_Medicine": 2, "Read": 1}


def test_shipped_sample_logs_parse_cleanly(data_dir):
    for name in ("aruba", "milan"):
        result = read_log(data_dir / f"{name}_sample.log")
        assert result.diagnostics == []
        segmented = segment_instances(result.events, result.annotations)
        assert segmented.instances
        assert not [d for d in segmented.diagnostics if d.error_class != "UnsortedInput"]
