"""Chat message construction for the reviewer and the pairwise judge.

The prompt texts live as golden files under ``reviewkit/prompts/`` with
``{name}`` placeholders; builders substitute placeholders and verify nothing
is left unresolved. The reviewer user prompt is deliberately minimal: the
instruction line, a blank line, then the full paper text.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources

from .corpus import HumanReview
from .templates import ReviewTemplate, render_review_fields

DEFAULT_MAX_CONTEXT_TOKENS = 131072
DEFAULT_RESERVED_OUTPUT_TOKENS = 4096

_KNOWN_PLACEHOLDERS = (
    "review_fields",
    "paper_text",
    "n_expert_reviews",
    "expert_reviews",
    "review_a",
    "review_b",
)
_UNRESOLVED_RE = re.compile(r"\{(" + "|".join(_KNOWN_PLACEHOLDERS) + r")\}")


class PromptError(ValueError):
    """Raised for empty inputs or unresolved placeholders."""


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user"
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user"):
            raise PromptError(f"unsupported role {self.role!r}")
        if not self.content:
            raise PromptError("message content must be nonempty")


@dataclass(frozen=True)
class PromptBundle:
    messages: tuple[ChatMessage, ...]
    approx_token_count: int

    def __post_init__(self) -> None:
        if not self.messages or self.messages[0].role != "system":
            raise PromptError("bundle must start with a system message")
        if sum(1 for m in self.messages if m.role == "system") != 1:
            raise PromptError("bundle must contain exactly one system message")


def load_prompt_text(name: str) -> str:
    """Read one of the bundled golden prompt files (no trailing newline)."""
    return resources.files("reviewkit.prompts").joinpath(f"{name}.txt").read_text("utf-8")


def approx_tokens(char_count: int) -> int:
    """chars/4, rounded up: a documented approximation, not tokenizer-exact."""
    return math.ceil(char_count / 4)


def _bundle(system: str, user: str) -> PromptBundle:
    for content in (system, user):
        leftover = _UNRESOLVED_RE.search(content)
        if leftover:
            raise PromptError(f"unresolved placeholder {{{leftover.group(1)}}} in prompt")
    messages = (ChatMessage("system", system), ChatMessage("user", user))
    return PromptBundle(
        messages=messages,
        approx_token_count=approx_tokens(sum(len(m.content) for m in messages)),
    )


def build_reviewer_messages(template: ReviewTemplate, paper_text: str) -> PromptBundle:
    """System prompt with the rendered review fields; user prompt with the paper."""
    if not paper_text.strip():
        raise PromptError("paper_text must be nonempty")
    system = load_prompt_text("reviewer_system").replace(
        "{review_fields}", render_review_fields(template)
    )
    user = load_prompt_text("reviewer_user").replace("{paper_text}", paper_text)
    return _bundle(system, user)


def serialize_expert_reviews(template: ReviewTemplate, reviews: list[HumanReview]) -> str:
    """Render expert reviews in template field order inside numbered XML tags."""
    blocks = []
    for i, review in enumerate(reviews, start=1):
        sections = []
        for f in template.fields:
            if f.name in review.field_contents:
                sections.append(f"## {f.name}\n{review.field_contents[f.name]}")
        body = "\n\n".join(sections)
        blocks.append(f"<expert_review_{i}>\n{body}\n</expert_review_{i}>")
    return "\n\n".join(blocks)


def build_judge_messages(
    template: ReviewTemplate,
    expert_reviews: list[HumanReview],
    review_a: str,
    review_b: str,
) -> PromptBundle:
    """Judge prompt comparing reviews A and B against the expert reviews."""
    if not expert_reviews:
        raise PromptError("at least one expert review is required")
    if not review_a.strip() or not review_b.strip():
        raise PromptError("review_a and review_b must be nonempty")
    system = (
        load_prompt_text("judge_system")
        .replace("{n_expert_reviews}", str(len(expert_reviews)))
        .replace("{review_fields}", render_review_fields(template))
    )
    user = (
        load_prompt_text("judge_user")
        .replace("{expert_reviews}", serialize_expert_reviews(template, expert_reviews))
        .replace("{review_a}", review_a)
        .replace("{review_b}", review_b)
    )
    return _bundle(system, user)


@dataclass(frozen=True)
class BudgetCheck:
    fits: bool
    approx_token_count: int


def check_context_budget(
    bundle: PromptBundle,
    max_tokens: int = DEFAULT_MAX_CONTEXT_TOKENS,
    reserved_output_tokens: int = DEFAULT_RESERVED_OUTPUT_TOKENS,
) -> BudgetCheck:
    """Whether the prompt plus a reserved generation budget fits the context."""
    count = bundle.approx_token_count
    return BudgetCheck(fits=count + reserved_output_tokens <= max_tokens, approx_token_count=count)
