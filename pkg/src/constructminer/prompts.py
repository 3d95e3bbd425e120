"""Prompt templates for the two LLM stages.

The fixed text of both templates is kept verbatim, including the stray
closing quotes of the construct query, so that recorded prompts and cache
keys stay stable. ``(activity)`` and ``(summary)`` are placeholders.
"""

from __future__ import annotations

import math
import re
from typing import Sequence

from .errors import EmptyInput, MixedLabels
from .textualizer import InstanceParagraph

PROMPT_VERSION = "prompts-v1"

SUMMARIZATION_PREAMBLE = (
    "You are an AI assistant that is helping in generating a summary from diverse texts "
    "and adding a context to each sensor readings leveraging world knowledge"
)
SUMMARIZATION_INSTRUCTIONS = (
    "Please generate short summarized text (1) from the paragraphs of given activity descriptions.\n"
    "Ignore the temperature sensors.\n"
    "Retain the time of occurrence of activity.\n"
    "You will be given different paragraphs of the activity."
)
SUMMARIZATION_FORMAT = (
    "The input has format: (Paragraph: Text detailing sensor event triggers for given activity). "
    "The output should be a json (key: (activity)) containing the summarized paragraph."
)

CONSTRUCT_QUERY_TEMPLATE = (
    'You are an AI assistant helping with identifying categories of a summarized activity '
    'leveraging world knowledge."\n'
    'The summary of the given activity is (summary)."\n'
    'Can you provide the sub-actions that make up this activity?"'
)

_FORMAT_LABEL_RE = re.compile(r"The output should be a json \(key: (?P<label>\S+?)\) containing")


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


def build_summarization_prompt(label: str, paragraphs: Sequence[InstanceParagraph]) -> str:
    if not paragraphs:
        raise EmptyInput(f"no paragraphs for {label}")
    foreign = sorted({p.activity_label for p in paragraphs} - {label})
    if foreign:
        raise MixedLabels(f"paragraphs for {foreign} passed while summarizing {label}")
    frames = "\n".join(f"(Paragraph: {p.text})" for p in paragraphs)
    fmt = SUMMARIZATION_FORMAT.replace("(activity)", label)
    return f"{SUMMARIZATION_PREAMBLE}\n\n{SUMMARIZATION_INSTRUCTIONS}\n\n{fmt}\n\n{frames}\n"


def summarization_label(prompt: str) -> str | None:
    """Recover the activity label a summarization prompt asks for."""
    match = _FORMAT_LABEL_RE.search(prompt)
    return match.group("label") if match else None


def build_construct_query(summary_text: str) -> str:
    if not summary_text.strip():
        raise EmptyInput("summary text is empty")
    return CONSTRUCT_QUERY_TEMPLATE.replace("(summary)", summary_text)


def template_regions(prompt: str, summary_text: str) -> list[str]:
    """Split a construct query into the parts contributed by the template."""
    head, sep, tail = prompt.partition(summary_text)
    if not sep:
        raise ValueError("summary text not found in prompt")
    return [head, tail]
