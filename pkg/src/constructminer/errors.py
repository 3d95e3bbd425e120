"""Exception hierarchy shared across the pipeline stages."""

from __future__ import annotations


class ConstructMinerError(Exception):
    """Base class for every error raised by this package."""


# -- ingest -----------------------------------------------------------------


class UnknownSensorPrefix(ConstructMinerError):
    def __init__(self, sensor_id: str):
        super().__init__(f"unknown sensor prefix in {sensor_id!r}")
        self.sensor_id = sensor_id


class LineError(ConstructMinerError):
    """A log line that could not be turned into an event."""

    error_class = "LineError"

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
        self.message = message


class MalformedLine(LineError):
    error_class = "MalformedLine"


class ValueVocabulary(LineError):
    error_class = "ValueVocabulary"


class MergeMapError(ConstructMinerError):
    pass


# -- textualizer / recognizer -------------------------------------------------


class UnmappedSensor(ConstructMinerError):
    def __init__(self, sensor_id: str):
        super().__init__(f"sensor {sensor_id!r} has no location entry")
        self.sensor_id = sensor_id


class EmptyInstance(ConstructMinerError):
    pass


# -- llm gateway ----------------------------------------------------------------


class EmptyInput(ConstructMinerError):
    pass


class MixedLabels(ConstructMinerError):
    pass


class PromptBudgetExceeded(ConstructMinerError):
    pass


class NoSummaryGenerated(ConstructMinerError):
    def __init__(self, label: str, reason: str = "no summary in response"):
        super().__init__(f"{label}: {reason}")
        self.label = label
        self.reason = reason


class ProviderError(ConstructMinerError):
    def __init__(self, status: int | None, message: str = ""):
        super().__init__(f"provider error (status={status}) {message}".rstrip())
        self.status = status


class SameFamilyViolation(ConstructMinerError):
    pass


class CacheCorrupt(ConstructMinerError):
    def __init__(self, entry: str, reason: str = ""):
        super().__init__(f"corrupt cache entry {entry}: {reason}")
        self.entry = entry


class ConfigError(ConstructMinerError):
    pass


# -- constructs -------------------------------------------------------------------


class NoConstructsFound(ConstructMinerError):
    pass


class EmptyLexicon(ConstructMinerError):
    pass


class IndexOutOfRange(ConstructMinerError):
    pass


class CountMismatch(ConstructMinerError):
    pass


class UnmappedConstruct(ConstructMinerError):
    def __init__(self, name: str, activity: str = ""):
        where = f" ({activity})" if activity else ""
        super().__init__(f"construct {name!r}{where} has no symbol mapping")
        self.name = name
        self.activity = activity
