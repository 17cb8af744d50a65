"""Papers, human reviews, and the curation filters applied before training/eval.

The persistent format is JSONL: one object per line, discriminated by a
``kind`` key in {"template", "paper", "review", "generated_review"}. Field
names match the dataclasses below (snake_case). Cross-references (review ->
paper, paper -> venue template) are validated on load.
"""

from __future__ import annotations

import json
import re
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import requests

from .parsing import GeneratedReview
from .templates import (
    FieldKind,
    ReviewField,
    ReviewTemplate,
    TemplateError,
)

DEFAULT_LENGTH_QUANTILE = 0.01
DEFAULT_CONFIDENCE_THRESHOLD = 4  # "confident, but not absolutely certain" on a 1-5 scale

PAPER_SOURCES = ("converted_pdf", "pasted_markdown", "fetched")


class CorpusError(ValueError):
    """Raised for malformed corpus files or broken cross-references."""


class FetchError(RuntimeError):
    """Raised when the remote notes endpoint cannot be read."""

    def __init__(self, message: str, status_code: int | None = None):
        super().__init__(message)
        self.status_code = status_code


def count_words(text: str) -> int:
    """Whitespace-token count; the length measure used by the curation filters."""
    return len(text.split())


@dataclass
class PaperRecord:
    paper_id: str
    venue_id: str
    title: str
    markdown_text: str
    word_count: int
    revision_timestamp: int
    source: str

    def __post_init__(self) -> None:
        if not self.markdown_text:
            raise CorpusError(f"paper {self.paper_id!r}: markdown_text must be nonempty")
        if self.word_count != count_words(self.markdown_text):
            raise CorpusError(
                f"paper {self.paper_id!r}: word_count {self.word_count} does not match "
                f"text ({count_words(self.markdown_text)} tokens)"
            )
        if self.source not in PAPER_SOURCES:
            raise CorpusError(f"paper {self.paper_id!r}: unknown source {self.source!r}")


def make_paper_record(
    paper_id: str,
    venue_id: str,
    title: str,
    markdown_text: str,
    revision_timestamp: int = 0,
    source: str = "pasted_markdown",
) -> PaperRecord:
    """Construct a PaperRecord with word_count derived from the text."""
    return PaperRecord(
        paper_id=paper_id,
        venue_id=venue_id,
        title=title,
        markdown_text=markdown_text,
        word_count=count_words(markdown_text),
        revision_timestamp=revision_timestamp,
        source=source,
    )


@dataclass
class HumanReview:
    review_id: str
    paper_id: str
    field_contents: dict[str, str]
    recommendation_raw: int
    confidence_raw: int


@dataclass
class Corpus:
    """In-memory corpus; treat as immutable after load."""

    templates: dict[str, ReviewTemplate] = field(default_factory=dict)
    papers: dict[str, PaperRecord] = field(default_factory=dict)
    reviews_by_paper: dict[str, list[HumanReview]] = field(default_factory=dict)
    generated_reviews: list[GeneratedReview] = field(default_factory=list)

    @property
    def reviews(self) -> list[HumanReview]:
        return [r for rs in self.reviews_by_paper.values() for r in rs]

    def venue_of(self, review: HumanReview) -> str:
        return self.papers[review.paper_id].venue_id

    def template_for_paper(self, paper_id: str) -> ReviewTemplate:
        return self.templates[self.papers[paper_id].venue_id]

    def validate(self) -> None:
        for paper in self.papers.values():
            if paper.venue_id not in self.templates:
                raise CorpusError(
                    f"paper {paper.paper_id!r} references unknown venue {paper.venue_id!r}"
                )
        for reviews in self.reviews_by_paper.values():
            for review in reviews:
                if review.paper_id not in self.papers:
                    raise CorpusError(
                        f"review {review.review_id!r} references unknown paper {review.paper_id!r}"
                    )
                scale = self.template_for_paper(review.paper_id).recommendation_scale
                if review.recommendation_raw not in scale:
                    raise CorpusError(
                        f"review {review.review_id!r}: recommendation {review.recommendation_raw} "
                        f"is not on the venue scale {list(scale)}"
                    )
        for gen in self.generated_reviews:
            if gen.paper_id not in self.papers:
                raise CorpusError(
                    f"generated review for unknown paper {gen.paper_id!r} (model {gen.model_id!r})"
                )


# --- curation ---------------------------------------------------------------


def select_earliest_revision(revisions: Sequence[tuple[int, str]]) -> str:
    """Pick the locator of the earliest revision; ties go to the smallest locator."""
    if not revisions:
        raise CorpusError("no revisions to select from")
    return min(revisions, key=lambda tl: (tl[0], tl[1]))[1]


# A heading counts as the start of the appendix when its text starts with
# "appendix", or, after a References heading, when it looks like a LaTeX
# appendix section ("A Implementation Details", "B.1 Proofs", ...).
_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*?)\s*$", re.MULTILINE)
_LETTER_SECTION_RE = re.compile(r"^[A-Z](?:\.\d+)*\s+\S")


def strip_appendix(markdown: str) -> str:
    """Drop everything from the first appendix heading onward.

    Returns a prefix of the input; the input itself when no appendix heading
    is found. Detection is heading-based, so documents without markdown
    headings pass through unchanged.
    """
    seen_references = False
    for match in _HEADING_RE.finditer(markdown):
        text = match.group(2).strip().strip("*_").strip()
        lowered = text.lower()
        if lowered.startswith("appendix"):
            return markdown[: match.start()]
        if lowered.startswith("reference"):
            seen_references = True
            continue
        if seen_references and _LETTER_SECTION_RE.match(text):
            return markdown[: match.start()]
    return markdown


def filter_by_length(
    items: Sequence,
    q: float = DEFAULT_LENGTH_QUANTILE,
    key: Callable[[Any], int] | None = None,
) -> list:
    """Drop the floor(q*N) shortest and floor(q*N) longest items.

    Selection sorts stably by word count, so ties at a cut boundary are
    resolved by input order. Survivors are returned in their original order.
    """
    if not 0 <= q < 0.5:
        raise ValueError(f"q must be in [0, 0.5), got {q}")
    if key is None:
        key = lambda item: item.word_count
    n = len(items)
    k = int(q * n)
    if k == 0:
        return list(items)
    order = sorted(range(n), key=lambda i: key(items[i]))
    dropped = set(order[:k]) | set(order[n - k :])
    return [item for i, item in enumerate(items) if i not in dropped]


def filter_by_confidence(
    reviews: Sequence[HumanReview],
    threshold_by_venue: Mapping[str, int],
    venue_of: Callable[[HumanReview], str],
) -> list[HumanReview]:
    """Keep reviews whose confidence meets their venue's threshold."""
    kept = []
    for review in reviews:
        venue = venue_of(review)
        if venue not in threshold_by_venue:
            raise CorpusError(f"no confidence threshold configured for venue {venue!r}")
        if review.confidence_raw >= threshold_by_venue[venue]:
            kept.append(review)
    return kept


def review_word_count(review: HumanReview) -> int:
    return count_words(" ".join(review.field_contents.values()))


@dataclass
class CurationReport:
    papers_in: int = 0
    papers_dropped_by_length: int = 0
    reviews_in: int = 0
    reviews_dropped_by_length: int = 0
    reviews_dropped_by_confidence: int = 0
    reviews_dropped_orphaned: int = 0
    appendix_stripped: int = 0


def curate(
    corpus: Corpus,
    q: float = DEFAULT_LENGTH_QUANTILE,
    threshold_by_venue: Mapping[str, int] | None = None,
) -> tuple[Corpus, CurationReport]:
    """Apply the full curation pipeline and return a new corpus plus counts.

    Steps: strip appendices from paper text, length-filter papers and reviews
    separately (q per tail), then confidence-filter reviews. Reviews whose
    paper was dropped are removed to keep cross-references intact.
    """
    report = CurationReport(papers_in=len(corpus.papers), reviews_in=len(corpus.reviews))
    thresholds = dict(threshold_by_venue or {})
    for venue_id in corpus.templates:
        thresholds.setdefault(venue_id, DEFAULT_CONFIDENCE_THRESHOLD)

    papers = []
    for paper in corpus.papers.values():
        stripped = strip_appendix(paper.markdown_text)
        if stripped != paper.markdown_text:
            report.appendix_stripped += 1
            paper = replace(paper, markdown_text=stripped, word_count=count_words(stripped))
        papers.append(paper)

    kept_papers = filter_by_length(papers, q=q)
    report.papers_dropped_by_length = len(papers) - len(kept_papers)
    paper_ids = {p.paper_id for p in kept_papers}

    reviews = corpus.reviews
    with_paper = [r for r in reviews if r.paper_id in paper_ids]
    report.reviews_dropped_orphaned = len(reviews) - len(with_paper)

    by_length = filter_by_length(with_paper, q=q, key=review_word_count)
    report.reviews_dropped_by_length = len(with_paper) - len(by_length)

    venue_of = lambda r: corpus.papers[r.paper_id].venue_id
    confident = filter_by_confidence(by_length, thresholds, venue_of)
    report.reviews_dropped_by_confidence = len(by_length) - len(confident)

    reviews_by_paper: dict[str, list[HumanReview]] = {}
    for review in confident:
        reviews_by_paper.setdefault(review.paper_id, []).append(review)
    curated = Corpus(
        templates=dict(corpus.templates),
        papers={p.paper_id: p for p in kept_papers},
        reviews_by_paper=reviews_by_paper,
        generated_reviews=[g for g in corpus.generated_reviews if g.paper_id in paper_ids],
    )
    curated.validate()
    return curated, report


# --- JSONL persistence -------------------------------------------------------


def _template_to_json(t: ReviewTemplate) -> dict:
    return {
        "kind": "template",
        "venue_id": t.venue_id,
        "recommendation_field": t.recommendation_field,
        "fields": [
            {
                "name": f.name,
                "kind": f.kind.value,
                "description": f.description,
                "scale": [[v, label] for v, label in f.scale] if f.scale else None,
                "is_recommendation": f.is_recommendation,
            }
            for f in t.fields
        ],
    }


def _template_from_json(obj: dict) -> ReviewTemplate:
    fields = tuple(
        ReviewField(
            name=f["name"],
            kind=FieldKind(f["kind"]),
            description=f.get("description", ""),
            scale=tuple((int(v), str(label)) for v, label in f["scale"]) if f.get("scale") else None,
            is_recommendation=bool(f.get("is_recommendation", False)),
        )
        for f in obj["fields"]
    )
    template = ReviewTemplate(venue_id=obj["venue_id"], fields=fields)
    declared = obj.get("recommendation_field")
    if declared is not None and declared != template.recommendation_field:
        raise TemplateError(
            f"template {template.venue_id!r}: recommendation_field {declared!r} does not "
            f"match the flagged field {template.recommendation_field!r}"
        )
    return template


def _paper_to_json(p: PaperRecord) -> dict:
    return {
        "kind": "paper",
        "paper_id": p.paper_id,
        "venue_id": p.venue_id,
        "title": p.title,
        "markdown_text": p.markdown_text,
        "word_count": p.word_count,
        "revision_timestamp": p.revision_timestamp,
        "source": p.source,
    }


def _review_to_json(r: HumanReview) -> dict:
    return {
        "kind": "review",
        "review_id": r.review_id,
        "paper_id": r.paper_id,
        "field_contents": r.field_contents,
        "recommendation_raw": r.recommendation_raw,
        "confidence_raw": r.confidence_raw,
    }


def _generated_to_json(g: GeneratedReview) -> dict:
    return {
        "kind": "generated_review",
        "paper_id": g.paper_id,
        "model_id": g.model_id,
        "raw_markdown": g.raw_markdown,
        "field_contents": g.field_contents,
        "recommendation_raw": g.recommendation_raw,
        "missing_fields": g.missing_fields,
    }


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for template in corpus.templates.values():
            fh.write(json.dumps(_template_to_json(template), ensure_ascii=False) + "\n")
        for paper in corpus.papers.values():
            fh.write(json.dumps(_paper_to_json(paper), ensure_ascii=False) + "\n")
        for reviews in corpus.reviews_by_paper.values():
            for review in reviews:
                fh.write(json.dumps(_review_to_json(review), ensure_ascii=False) + "\n")
        for gen in corpus.generated_reviews:
            fh.write(json.dumps(_generated_to_json(gen), ensure_ascii=False) + "\n")


def load_corpus(path: str | Path) -> Corpus:
    """Load and validate a JSONL corpus. Malformed lines are reported by number."""
    path = Path(path)
    corpus = Corpus()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                _load_record(corpus, obj)
            except (CorpusError, TemplateError, KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    corpus.validate()
    return corpus


def _load_record(corpus: Corpus, obj: dict) -> None:
    kind = obj.get("kind")
    if kind == "template":
        template = _template_from_json(obj)
        corpus.templates[template.venue_id] = template
    elif kind == "paper":
        paper = PaperRecord(
            paper_id=obj["paper_id"],
            venue_id=obj["venue_id"],
            title=obj.get("title", ""),
            markdown_text=obj["markdown_text"],
            word_count=int(obj["word_count"]),
            revision_timestamp=int(obj.get("revision_timestamp", 0)),
            source=obj.get("source", "pasted_markdown"),
        )
        corpus.papers[paper.paper_id] = paper
    elif kind == "review":
        review = HumanReview(
            review_id=obj["review_id"],
            paper_id=obj["paper_id"],
            field_contents=dict(obj.get("field_contents", {})),
            recommendation_raw=int(obj["recommendation_raw"]),
            confidence_raw=int(obj["confidence_raw"]),
        )
        corpus.reviews_by_paper.setdefault(review.paper_id, []).append(review)
    elif kind == "generated_review":
        corpus.generated_reviews.append(
            GeneratedReview(
                paper_id=obj["paper_id"],
                model_id=obj["model_id"],
                raw_markdown=obj["raw_markdown"],
                field_contents=dict(obj.get("field_contents", {})),
                recommendation_raw=obj.get("recommendation_raw"),
                missing_fields=list(obj.get("missing_fields", [])),
            )
        )
    else:
        raise CorpusError(f"unknown record kind {kind!r}")


# --- minimal record-fetch client ---------------------------------------------
#
# Read-only client for a public review-platform notes API:
#   GET <endpoint>/notes?forum=<id>  ->  {"notes": [...]}
#
# Mapping onto the corpus types:
#   * the note whose id equals the forum id (or with no replyto) is the
#     submission; content.title -> title, content.abstract -> markdown_text
#     (full text comes from PDF conversion, not this endpoint), cdate ->
#     revision_timestamp, source = "fetched".
#   * every other note carrying a rating and confidence is a review;
#     "rating"/"recommendation" and "confidence" values may be plain ints or
#     strings like "6: marginally above ..." (the leading integer is used);
#     remaining string content fields map to field_contents in note order.
#   * notes missing rating or confidence are skipped and counted.
# Content values wrapped as {"value": ...} (API v2) are unwrapped.


@dataclass
class FetchResult:
    paper: PaperRecord
    reviews: list[HumanReview]
    skipped: int


def _unwrap(value):
    if isinstance(value, dict) and "value" in value:
        return value["value"]
    return value


def _leading_int(value) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        m = re.match(r"\s*(-?\d+)", value)
        if m:
            return int(m.group(1))
    return None


def fetch_forum_records(
    endpoint_url: str,
    forum_id: str,
    venue_id: str = "iclr-default",
    timeout: float = 30.0,
    session: requests.Session | None = None,
) -> FetchResult:
    """Fetch one forum's submission and review notes. Never writes remotely."""
    url = endpoint_url.rstrip("/") + "/notes"
    http = session or requests
    response = http.get(url, params={"forum": forum_id}, timeout=timeout)
    if response.status_code != 200:
        raise FetchError(
            f"GET {url}?forum={forum_id} returned {response.status_code}",
            status_code=response.status_code,
        )
    notes = response.json().get("notes", [])

    submission = None
    for note in notes:
        if note.get("id") == forum_id or note.get("replyto") in (None, ""):
            submission = note
            break
    if submission is None:
        raise FetchError(f"forum {forum_id!r}: no submission note found")

    content = {k: _unwrap(v) for k, v in submission.get("content", {}).items()}
    title = str(content.get("title", forum_id))
    text = str(content.get("abstract") or title)
    paper = make_paper_record(
        paper_id=str(submission.get("id", forum_id)),
        venue_id=venue_id,
        title=title,
        markdown_text=text,
        revision_timestamp=int(submission.get("cdate", 0)),
        source="fetched",
    )

    reviews: list[HumanReview] = []
    skipped = 0
    for note in notes:
        if note is submission:
            continue
        note_content = {k: _unwrap(v) for k, v in note.get("content", {}).items()}
        rating = _leading_int(note_content.get("rating", note_content.get("recommendation")))
        confidence = _leading_int(note_content.get("confidence"))
        if rating is None or confidence is None:
            skipped += 1
            continue
        fields = {
            k: str(v)
            for k, v in note_content.items()
            if isinstance(v, str) and k not in ("rating", "recommendation", "confidence")
        }
        reviews.append(
            HumanReview(
                review_id=str(note.get("id", f"{forum_id}-r{len(reviews)}")),
                paper_id=paper.paper_id,
                field_contents=fields,
                recommendation_raw=rating,
                confidence_raw=confidence,
            )
        )
    return FetchResult(paper=paper, reviews=reviews, skipped=skipped)
