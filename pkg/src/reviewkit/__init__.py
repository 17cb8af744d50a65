"""reviewkit: generate structured peer reviews via any chat-completions
endpoint and evaluate them against human reviews."""

__version__ = "0.1.0"

from .templates import (  # noqa: F401
    FieldKind,
    ReviewField,
    ReviewTemplate,
    TemplateError,
    builtin_templates,
    parse_template,
    render_review_fields,
    render_template,
)
