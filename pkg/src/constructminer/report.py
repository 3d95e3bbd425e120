"""Markdown report laid out like the construct tables: Activity | Constructs | Type."""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .constructs import ConstructSet, Relevance

NO_SUMMARY_TEXT = "No summary generated from LLM1"


def _cell(text: str) -> str:
    return text.replace("|", "\\|").replace("\n", " ")


def render_constructs(cset: ConstructSet) -> str:
    parts = []
    for c in cset.constructs:
        item = f"{c.index}. {c.name}"
        if c.detail:
            item += f" ({c.detail})"
        if c.relevance is Relevance.IRRELEVANT:
            item = f"~~{item}~~ [not relevant]"
        parts.append(item)
    return "; ".join(parts)


def render_table(
    sets: Sequence[ConstructSet],
    failures: Mapping[str, str] | None = None,
    order: Iterable[str] | None = None,
) -> str:
    failures = dict(failures or {})
    by_label = {s.activity_label: s for s in sets}
    labels = list(order) if order is not None else [*by_label, *failures]
    lines = [
        "| Activity | Identified Structural Constructs | Type |",
        "|---|---|---|",
    ]
    for label in labels:
        if label in by_label:
            cset = by_label[label]
            lines.append(f"| {_cell(label)} | {_cell(render_constructs(cset))} | {cset.category.value} |")
        elif label in failures:
            lines.append(f"| {_cell(label)} | {NO_SUMMARY_TEXT} | -- |")
    return "\n".join(lines) + "\n"


def render_report(
    title: str,
    header: Mapping[str, object],
    sets: Sequence[ConstructSet],
    failures: Mapping[str, str] | None = None,
    order: Iterable[str] | None = None,
) -> str:
    lines = [f"# {title}", ""]
    lines += [f"- {key}: {value}" for key, value in header.items()]
    lines += ["", render_table(sets, failures, order)]
    if failures:
        lines.append("Failed activities:")
        lines += [f"- {label}: {reason}" for label, reason in failures.items()]
        lines.append("")
    return "\n".join(lines)
