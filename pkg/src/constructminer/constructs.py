"""Construct lists: parsing querier output, categorization, relevance, review."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import CountMismatch, EmptyLexicon, IndexOutOfRange, NoConstructsFound

DEFAULT_RELEVANCE_THRESHOLD = 0.2


class Category(str, Enum):
    EVENT = "Event"
    ACTION = "Action"


class Relevance(str, Enum):
    RELEVANT = "relevant"
    IRRELEVANT = "irrelevant"
    UNREVIEWED = "unreviewed"


class ReviewState(str, Enum):
    MACHINE = "machine"
    CONFIRMED = "confirmed"
    EDITED = "edited"


@dataclass(frozen=True)
class Construct:
    index: int
    name: str
    detail: str | None = None
    relevance: Relevance = Relevance.UNREVIEWED
    relevance_score: float | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("construct name must be non-empty")

    def to_record(self) -> dict:
        return {
            "index": self.index,
            "name": self.name,
            "detail": self.detail,
            "relevance": self.relevance.value,
            "relevance_score": self.relevance_score,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "Construct":
        return cls(
            rec["index"],
            rec["name"],
            rec.get("detail"),
            Relevance(rec.get("relevance", "unreviewed")),
            rec.get("relevance_score"),
        )


@dataclass(frozen=True)
class ConstructSet:
    activity_label: str
    category: Category
    constructs: tuple[Construct, ...]
    provenance: Mapping[str, str] = field(default_factory=dict)
    review_state: ReviewState = ReviewState.MACHINE

    def __post_init__(self):
        if not self.constructs:
            raise ValueError(f"{self.activity_label}: construct set is empty")
        for pos, c in enumerate(self.constructs, start=1):
            if c.index != pos:
                raise ValueError(f"{self.activity_label}: construct {c.name!r} has index {c.index}, expected {pos}")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.constructs]

    def to_record(self) -> dict:
        return {
            "activity": self.activity_label,
            "category": self.category.value,
            "constructs": [c.to_record() for c in self.constructs],
            "provenance": dict(self.provenance),
            "review_state": self.review_state.value,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "ConstructSet":
        return cls(
            rec["activity"],
            Category(rec["category"]),
            tuple(Construct.from_record(c) for c in rec["constructs"]),
            dict(rec.get("provenance", {})),
            ReviewState(rec.get("review_state", "machine")),
        )


# -- parsing --------------------------------------------------------------------------

_NUMBER_RE = re.compile(r"(?:^|(?<=[\s;,*]))(\d{1,2})[.)](?!\d)\s*")
_BULLET_RE = re.compile(r"^\s*(?:[-*•+])\s+(.+?)\s*$", re.MULTILINE)
_DECORATION = " \t\r\n;:*_.,-"


def _numbered_items(text: str) -> list[str]:
    # accept markers only while they count up 1, 2, 3, ... so stray numbers stay in the text
    starts: list[tuple[int, int]] = []
    expected = None
    for m in _NUMBER_RE.finditer(text):
        number = int(m.group(1))
        if expected is None and number in (0, 1) or number == expected:
            starts.append((m.start(), m.end()))
            expected = number + 1
    items = []
    for k, (_, body_start) in enumerate(starts):
        body_end = starts[k + 1][0] if k + 1 < len(starts) else len(text)
        items.append(text[body_start:body_end])
    if starts:
        # prose after the last item ends at the first blank line
        items[-1] = re.split(r"\n\s*\n", items[-1], maxsplit=1)[0]
    return items


def _split_item(item: str) -> tuple[str, str | None]:
    item = " ".join(item.replace("**", "").split()).strip(_DECORATION)
    cut = len(item)
    for sep in ("(", ";", ":"):
        pos = item.find(sep)
        if 0 < pos < cut:
            cut = pos
    name = item[:cut].strip(_DECORATION)
    detail = item[cut:].strip()
    if detail.startswith("("):
        detail = detail[1:]
        if detail.endswith(")") and detail.count("(") < detail.count(")"):
            detail = detail[:-1]
    detail = detail.strip(_DECORATION)
    return name or item, detail or None


def parse_construct_list(response: str) -> list[Construct]:
    """Extract the ordered sub-actions from a free-text response.

    Recognizes ``1. foo; 2. bar`` lists (on one line or many); falls back to
    markdown bullets when no numbered items exist. Parenthesised or
    post-colon text becomes the construct's ``detail``.
    """
    items = _numbered_items(response)
    if not items:
        items = _BULLET_RE.findall(response)
    constructs = []
    for raw in items:
        name, detail = _split_item(raw)
        if name:
            constructs.append(Construct(len(constructs) + 1, name, detail))
    if not constructs:
        raise NoConstructsFound("response contains no list of sub-actions")
    return constructs


# -- categorization ----------------------------------------------------------------


@dataclass(frozen=True)
class MarkerLexicon:
    version: str
    markers: tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "MarkerLexicon":
        version = "unversioned"
        markers = []
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition(":")
                if key.strip().lower() == "version":
                    version = value.strip()
                continue
            if line:
                markers.append(line.lower())
        return cls(version, tuple(markers))

    @classmethod
    def load(cls, path: str | Path) -> "MarkerLexicon":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def default(cls) -> "MarkerLexicon":
        text = resources.files("constructminer.data").joinpath("sequence_markers.txt").read_text("utf-8")
        return cls.parse(text)

    def find(self, text: str) -> list[str]:
        norm = " ".join(text.lower().split())
        return [
            m for m in self.markers
            if re.search(r"\b" + r"\s+".join(map(re.escape, m.split())) + r"\b", norm)
        ]


def categorize(
    constructs: Sequence[Construct],
    summary_text: str,
    response_text: str = "",
    lexicon: MarkerLexicon | None = None,
) -> Category:
    """Action iff there are at least two constructs and the text reads as a sequence.

    Markers count in the summary and in the response's details and prose. A
    marker inside a construct *name* ("Go to bed") names the sub-action itself
    and says nothing about ordering between sub-actions, so names are masked.
    """
    if len(constructs) < 2:
        return Category.EVENT
    lexicon = lexicon or MarkerLexicon.default()
    if lexicon.find(summary_text) or lexicon.find(mask_names(response_text, constructs)):
        return Category.ACTION
    return Category.EVENT


def mask_names(response_text: str, constructs: Sequence[Construct]) -> str:
    """Blank out the first occurrence of each construct name, in list order."""
    text = " ".join(response_text.split())
    pos = 0
    for c in constructs:
        hit = text.lower().find(c.name.lower(), pos)
        if hit == -1:
            continue
        text = text[:hit] + " | " + text[hit + len(c.name):]
        pos = hit + 3
    return text


# -- relevance --------------------------------------------------------------------

STOP_WORDS = frozenset(
    """a an the and or of to in on at for with from by as is are was were be been
    this that these those it its into near up out about over some any other e g
    etc s""".split()
)


def _strip_suffix(word: str) -> str:
    for suffix in ("ing", "ed"):
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            return word[: -len(suffix)]
    if word.endswith("s") and not word.endswith("ss") and len(word) > 3:
        return word[:-1]
    return word


def stems(text: str, stop_words: Iterable[str] = STOP_WORDS) -> set[str]:
    stop = frozenset(stop_words)
    return {_strip_suffix(w) for w in re.findall(r"[a-z0-9]+", text.lower()) if w not in stop}


@dataclass(frozen=True)
class ActivityLexicon:
    activity_label: str
    keywords: frozenset[str]

    @classmethod
    def build(
        cls,
        activity_label: str,
        locations: Iterable[str] = (),
        sensor_kinds: Iterable[str] = (),
        extra: Iterable[str] = (),
    ) -> "ActivityLexicon":
        words = [activity_label.replace("_", " "), *locations, *sensor_kinds, *extra]
        return cls(activity_label, frozenset(s for w in words for s in stems(w)))


def score_relevance(
    construct: Construct,
    lexicon: ActivityLexicon,
    stop_words: Iterable[str] = STOP_WORDS,
) -> float:
    """Fraction of the construct's stems found in the activity lexicon."""
    if not lexicon.keywords:
        raise EmptyLexicon(f"lexicon for {lexicon.activity_label} is empty")
    words = stems(f"{construct.name} {construct.detail or ''}", stop_words)
    if not words:
        return 0.0
    return min(1.0, max(0.0, len(words & lexicon.keywords) / len(words)))


def flag_relevance(
    constructs: Sequence[Construct],
    lexicon: ActivityLexicon,
    threshold: float = DEFAULT_RELEVANCE_THRESHOLD,
) -> list[Construct]:
    flagged = []
    for c in constructs:
        score = round(score_relevance(c, lexicon), 6)
        relevance = Relevance.IRRELEVANT if score < threshold else Relevance.RELEVANT
        flagged.append(replace(c, relevance=relevance, relevance_score=score))
    return flagged


# -- review -------------------------------------------------------------------------


@dataclass(frozen=True)
class ReviewDecision:
    drop: frozenset[int] = frozenset()
    category: Category | None = None
    confirmed_count: int | None = None
    note: str = ""

    @property
    def is_empty(self) -> bool:
        return not self.drop and self.category is None and self.confirmed_count is None


def apply_review(cset: ConstructSet, decision: ReviewDecision) -> ConstructSet:
    n = len(cset.constructs)
    bad = sorted(i for i in decision.drop if not 1 <= i <= n)
    if bad:
        raise IndexOutOfRange(f"{cset.activity_label}: indices {bad} outside 1..{n}")
    kept = [c for c in cset.constructs if c.index not in decision.drop]
    if not kept:
        raise CountMismatch(f"{cset.activity_label}: review would drop every construct")
    if decision.confirmed_count is not None and decision.confirmed_count != len(kept):
        raise CountMismatch(
            f"{cset.activity_label}: reviewer confirmed {decision.confirmed_count} constructs, {len(kept)} remain"
        )
    category = decision.category or cset.category
    edited = bool(decision.drop) or category != cset.category
    return replace(
        cset,
        category=category,
        constructs=tuple(replace(c, index=pos) for pos, c in enumerate(kept, start=1)),
        review_state=ReviewState.EDITED if edited else ReviewState.CONFIRMED,
    )
