"""Venue review templates: the ordered review sections and rating scales.

A template drives two things: the ``{review_fields}`` block substituted into
the reviewer and judge prompts, and the section headings used to parse
generated reviews back into structured fields.

Templates are stored as a line-oriented plain-text file format so they stay
hand-editable::

    venue: <venue_id>
    field: <name>
      kind: text | rating
      recommendation: true
      description: <one line>
      scale: <v1>=<label1>, <v2>=<label2>, ...

``recommendation`` and ``scale`` apply to rating fields only. Unknown keys
are an error. Field order is significant. Scale labels may contain commas;
entries are split before the next integer-initial item. Labels are required
for the first and last scale value, optional in between.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum


class TemplateError(ValueError):
    """Raised for malformed template files or invalid template structure."""


class FieldKind(str, Enum):
    FREE_TEXT = "free_text"
    NUMERIC_RATING = "numeric_rating"


@dataclass(frozen=True)
class ReviewField:
    """One review section: a free-text block or a numeric rating."""

    name: str
    kind: FieldKind
    description: str = ""
    scale: tuple[tuple[int, str], ...] | None = None
    is_recommendation: bool = False

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise TemplateError("field name must be nonempty")
        if "\n" in self.description:
            raise TemplateError(f"field {self.name!r}: description must be a single line")
        if self.kind is FieldKind.NUMERIC_RATING:
            if self.scale is None:
                raise TemplateError(f"rating field {self.name!r} requires a scale")
            _validate_scale(self.name, self.scale)
        else:
            if self.scale is not None:
                raise TemplateError(f"text field {self.name!r} cannot carry a scale")
            if self.is_recommendation:
                raise TemplateError(f"recommendation field {self.name!r} must be a rating field")

    @property
    def scale_values(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.scale) if self.scale else ()


def _validate_scale(name: str, scale: tuple[tuple[int, str], ...]) -> None:
    if len(scale) < 2:
        raise TemplateError(f"field {name!r}: scale needs at least 2 entries")
    values = [v for v, _ in scale]
    if any(b <= a for a, b in zip(values, values[1:])):
        raise TemplateError(f"field {name!r}: scale values must be strictly increasing")
    if not scale[0][1].strip() or not scale[-1][1].strip():
        raise TemplateError(f"field {name!r}: scale endpoints must be labeled")


@dataclass(frozen=True)
class ReviewTemplate:
    """An ordered set of review fields with exactly one recommendation field."""

    venue_id: str
    fields: tuple[ReviewField, ...]

    def __post_init__(self) -> None:
        if not self.venue_id.strip():
            raise TemplateError("venue_id must be nonempty")
        names = [f.name for f in self.fields]
        seen: set[str] = set()
        for name in names:
            if name in seen:
                raise TemplateError(f"duplicate field name {name!r}")
            seen.add(name)
        rec = [f.name for f in self.fields if f.is_recommendation]
        if len(rec) == 0:
            raise TemplateError("no recommendation field defined")
        if len(rec) > 1:
            raise TemplateError(f"multiple recommendation fields: {', '.join(rec)}")

    @property
    def recommendation_field(self) -> str:
        return next(f.name for f in self.fields if f.is_recommendation)

    @property
    def recommendation_scale(self) -> tuple[int, ...]:
        return next(f for f in self.fields if f.is_recommendation).scale_values

    def field(self, name: str) -> ReviewField:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)


# Scale entries are comma separated, but labels may themselves contain commas
# ("reject, not good enough"). Split only before an integer-initial entry.
_SCALE_SPLIT = re.compile(r",\s*(?=-?\d+\s*(?:=|,|$))")

_FIELD_KEYS = ("kind", "recommendation", "description", "scale")


def _parse_scale_line(field_name: str, text: str) -> tuple[tuple[int, str], ...]:
    parts = [p.strip() for p in _SCALE_SPLIT.split(text.strip()) if p.strip()]
    if not parts:
        raise TemplateError(f"field {field_name!r}: malformed scale line (no entries)")
    entries: list[tuple[int, str]] = []
    for part in parts:
        value_str, sep, label = part.partition("=")
        try:
            value = int(value_str.strip())
        except ValueError:
            raise TemplateError(
                f"field {field_name!r}: malformed scale entry {part!r}"
            ) from None
        entries.append((value, label.strip() if sep else ""))
    return tuple(entries)


def parse_template(text: str) -> ReviewTemplate:
    """Parse the template file format into a validated ReviewTemplate."""
    lines = text.replace("\r\n", "\n").split("\n")
    venue_id: str | None = None
    raw_fields: list[dict] = []
    current: dict | None = None

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise TemplateError(f"line {lineno}: expected 'key: value', got {line!r}")
        key = key.strip()
        value = value.strip()
        if key == "venue":
            if venue_id is not None:
                raise TemplateError(f"line {lineno}: duplicate venue line")
            if current is not None:
                raise TemplateError(f"line {lineno}: venue line must precede fields")
            venue_id = value
        elif key == "field":
            current = {"name": value}
            raw_fields.append(current)
        elif key in _FIELD_KEYS:
            if current is None:
                raise TemplateError(f"line {lineno}: {key!r} outside a field block")
            if key in current:
                raise TemplateError(f"line {lineno}: duplicate key {key!r} in field block")
            current[key] = value
        else:
            raise TemplateError(f"line {lineno}: unknown key {key!r}")

    if venue_id is None and not raw_fields:
        raise TemplateError("empty template file")
    if venue_id is None:
        raise TemplateError("missing venue line")
    if not raw_fields:
        raise TemplateError("template defines no fields")

    fields = []
    for spec in raw_fields:
        name = spec["name"]
        kind_str = spec.get("kind", "")
        if kind_str == "text":
            kind = FieldKind.FREE_TEXT
        elif kind_str == "rating":
            kind = FieldKind.NUMERIC_RATING
        else:
            raise TemplateError(f"field {name!r}: kind must be 'text' or 'rating', got {kind_str!r}")
        rec_str = spec.get("recommendation", "false").lower()
        if rec_str not in ("true", "false"):
            raise TemplateError(f"field {name!r}: recommendation must be true or false")
        if "recommendation" in spec and kind is not FieldKind.NUMERIC_RATING:
            raise TemplateError(f"field {name!r}: recommendation applies to rating fields only")
        if "scale" in spec and kind is not FieldKind.NUMERIC_RATING:
            raise TemplateError(f"field {name!r}: scale applies to rating fields only")
        scale = None
        if kind is FieldKind.NUMERIC_RATING:
            if "scale" not in spec:
                raise TemplateError(f"rating field {name!r} is missing its scale line")
            scale = _parse_scale_line(name, spec["scale"])
        fields.append(
            ReviewField(
                name=name,
                kind=kind,
                description=spec.get("description", ""),
                scale=scale,
                is_recommendation=rec_str == "true",
            )
        )
    return ReviewTemplate(venue_id=venue_id, fields=tuple(fields))


def render_template(template: ReviewTemplate) -> str:
    """Serialize a template back to the template file format.

    ``parse_template(render_template(t)) == t`` for every valid template.
    """
    out = [f"venue: {template.venue_id}"]
    for f in template.fields:
        out.append(f"field: {f.name}")
        out.append(f"  kind: {'rating' if f.kind is FieldKind.NUMERIC_RATING else 'text'}")
        if f.is_recommendation:
            out.append("  recommendation: true")
        out.append(f"  description: {f.description}".rstrip())
        if f.scale is not None:
            entries = ", ".join(f"{v}={label}" if label else str(v) for v, label in f.scale)
            out.append(f"  scale: {entries}")
    return "\n".join(out) + "\n"


def render_review_fields(template: ReviewTemplate) -> str:
    """Render the markdown block that fills the ``{review_fields}`` placeholder.

    One ``##`` heading per field, followed by its guidance text and, for
    rating fields, a single line enumerating the allowed values with labels.
    """
    blocks = []
    for f in template.fields:
        lines = [f"## {f.name}"]
        if f.description:
            lines.append(f.description)
        if f.scale is not None:
            entries = ", ".join(f"{v} ({label})" if label else str(v) for v, label in f.scale)
            lines.append(f"Possible values: {entries}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


_ICLR_RATING = (
    (1, "strong reject"),
    (3, "reject, not good enough"),
    (5, "marginally below the acceptance threshold"),
    (6, "marginally above the acceptance threshold"),
    (8, "accept, good paper"),
    (10, "strong accept, should be highlighted at the conference"),
)

_FOUR_POINT = ((1, "poor"), (2, "fair"), (3, "good"), (4, "excellent"))

_TEN_POINT = tuple(
    (v, {1: "strong reject", 10: "strong accept"}.get(v, "")) for v in range(1, 11)
)


def _rating(name: str, description: str, scale, recommendation: bool = False) -> ReviewField:
    return ReviewField(
        name=name,
        kind=FieldKind.NUMERIC_RATING,
        description=description,
        scale=tuple(scale),
        is_recommendation=recommendation,
    )


def _text(name: str, description: str) -> ReviewField:
    return ReviewField(name=name, kind=FieldKind.FREE_TEXT, description=description)


def builtin_templates() -> list[ReviewTemplate]:
    """Default venue templates bundled so the demo works out of the box.

    These are reconstructions of typical ICLR- and NeurIPS-style review forms
    (section names and scales as used by those venues), not copies of any
    official template text.
    """
    iclr = ReviewTemplate(
        venue_id="iclr-default",
        fields=(
            _text("Summary", "Briefly summarize the paper and its contributions."),
            _rating("Soundness", "Assign a rating for the soundness of the technical claims.", _FOUR_POINT),
            _rating("Presentation", "Assign a rating for the quality of the presentation.", _FOUR_POINT),
            _rating("Contribution", "Assign a rating for the significance of the contribution.", _FOUR_POINT),
            _text("Strengths", "List the strong points of the paper."),
            _text("Weaknesses", "List the weak points of the paper."),
            _text("Questions", "List questions you would like the authors to answer."),
            _rating("Rating", "Give this paper an overall recommendation.", _ICLR_RATING, recommendation=True),
        ),
    )
    neurips = ReviewTemplate(
        venue_id="neurips-default",
        fields=(
            _text("Summary", "Briefly summarize the paper and its contributions."),
            _text("Strengths", "List the strong points of the paper."),
            _text("Weaknesses", "List the weak points of the paper."),
            _text("Questions", "List questions and suggestions for the authors."),
            _text("Limitations", "Discuss whether the authors adequately addressed the limitations of their work."),
            _rating("Soundness", "Assign a rating for the soundness of the technical claims.", _FOUR_POINT),
            _rating("Presentation", "Assign a rating for the quality of the presentation.", _FOUR_POINT),
            _rating("Contribution", "Assign a rating for the significance of the contribution.", _FOUR_POINT),
            _rating("Rating", "Give this paper an overall recommendation.", _TEN_POINT, recommendation=True),
        ),
    )
    return [iclr, neurips]
