"""Parse generated markdown reviews into structured fields.

Parsing is total: any input string yields a GeneratedReview. Quality problems
surface as ``missing_fields`` rather than exceptions. Section headings are
matched to template field names case-insensitively, ignoring emphasis markers
and surrounding punctuation, so "## **rating:**" still matches a field named
"Rating". Sections that match no template field are kept verbatim under the
reserved "_unmatched" key.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .templates import FieldKind, ReviewTemplate

UNMATCHED_KEY = "_unmatched"

_SECTION_RE = re.compile(r"^##(?!#)[ \t]*(.+?)[ \t]*$", re.MULTILINE)
# Integer tokens that are not part of a decimal ("6.5" yields none, "3." yields 3).
_INT_TOKEN_RE = re.compile(r"(?<![\d.])(\d+)(?!\.?\d)")


class RecommendationMissing(ValueError):
    """No scale member could be extracted from the recommendation text."""


@dataclass
class GeneratedReview:
    paper_id: str
    model_id: str
    raw_markdown: str
    field_contents: dict[str, str]
    recommendation_raw: int | None = None
    missing_fields: list[str] = field(default_factory=list)


def _normalize_heading(text: str) -> str:
    return re.sub(r"\s+", " ", text.strip().strip("#*_:.- \t").lower())


def parse_review(
    raw_markdown: str,
    template: ReviewTemplate,
    paper_id: str = "",
    model_id: str = "",
) -> GeneratedReview:
    """Split a markdown review on ``##`` headings keyed by the template."""
    by_normalized = {_normalize_heading(f.name): f.name for f in template.fields}

    contents: dict[str, str] = {}
    unmatched: list[str] = []
    matches = list(_SECTION_RE.finditer(raw_markdown))
    for i, match in enumerate(matches):
        body_start = match.end()
        body_end = matches[i + 1].start() if i + 1 < len(matches) else len(raw_markdown)
        body = raw_markdown[body_start:body_end].strip()
        name = by_normalized.get(_normalize_heading(match.group(1)))
        if name is not None and name not in contents:
            contents[name] = body
        else:
            unmatched.append(f"## {match.group(1)}\n{body}".rstrip())
    if unmatched:
        contents[UNMATCHED_KEY] = "\n\n".join(unmatched)

    missing = [f.name for f in template.fields if f.name not in contents]

    recommendation = None
    rec_name = template.recommendation_field
    if rec_name in contents:
        try:
            recommendation = extract_recommendation(
                contents[rec_name], template.recommendation_scale
            )
        except RecommendationMissing:
            recommendation = None

    return GeneratedReview(
        paper_id=paper_id,
        model_id=model_id,
        raw_markdown=raw_markdown,
        field_contents=contents,
        recommendation_raw=recommendation,
        missing_fields=missing,
    )


def extract_recommendation(field_text: str, scale) -> int:
    """Return the first integer token in the text that is on the scale.

    Integers not on the scale (a "10-point scale" aside, a year) are skipped.
    Emphasis markers, colons, and parenthesized labels need no special
    handling since only integer tokens are inspected.
    """
    values = set(int(v) for v in scale)
    for token in _INT_TOKEN_RE.finditer(field_text):
        value = int(token.group(1))
        if value in values:
            return value
    raise RecommendationMissing(
        f"recommendation missing: no scale member {sorted(values)} found in {field_text!r}"
    )


def render_review_markdown(template: ReviewTemplate, field_contents: dict[str, str]) -> str:
    """Serialize per-field bodies back into a template-conformant review.

    ``parse_review(render_review_markdown(t, m), t).field_contents == m`` for
    any map over the template's fields with heading-free bodies.
    """
    parts = ["# Review"]
    for f in template.fields:
        if f.name in field_contents:
            parts.append(f"## {f.name}\n{field_contents[f.name]}".rstrip())
    return "\n\n".join(parts) + "\n"


def conformant_field_contents(template: ReviewTemplate, rating_values: dict[str, int]) -> dict[str, str]:
    """Filler bodies for every template field; ratings use ``rating_values``."""
    contents = {}
    for f in template.fields:
        if f.kind is FieldKind.NUMERIC_RATING:
            value = rating_values[f.name]
            label = dict(f.scale or ()).get(value, "")
            contents[f.name] = f"{value}: {label}" if label else str(value)
        else:
            contents[f.name] = f"{f.name} content."
    return contents
