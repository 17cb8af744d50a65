import random

import pytest
from hypothesis import given, strategies as st

from reviewkit.parsing import (
    UNMATCHED_KEY,
    RecommendationMissing,
    conformant_field_contents,
    extract_recommendation,
    parse_review,
    render_review_markdown,
)
from reviewkit.templates import builtin_templates

from conftest import random_template

ICLR = builtin_templates()[0]

CONFORMANT = """# Review

## Summary
The paper proposes sparse widgets.

## Soundness
3: good

## Presentation
3: good

## Contribution
2: fair

## Strengths
- Clear method.

## Weaknesses
- Small-scale experiments.

## Questions
How does it scale?

## Rating
6: marginally above the acceptance threshold
"""


def test_conformant_review_has_no_missing_fields():
    review = parse_review(CONFORMANT, ICLR)
    assert review.missing_fields == []
    assert review.field_contents["Summary"] == "The paper proposes sparse widgets."
    assert review.recommendation_raw == 6


def test_missing_section_is_reported():
    text = CONFORMANT.replace("## Questions\nHow does it scale?\n\n", "")
    review = parse_review(text, ICLR)
    assert review.missing_fields == ["Questions"]
    assert "Strengths" in review.field_contents
    assert review.recommendation_raw == 6


def test_heading_match_ignores_case_and_emphasis():
    text = "# Review\n\n## **summary:**\nBody.\n\n## RATING\n8 (accept, good paper)\n"
    review = parse_review(text, ICLR)
    assert review.field_contents["Summary"] == "Body."
    assert review.recommendation_raw == 8


def test_extra_headings_preserved_under_unmatched():
    text = CONFORMANT + "\n## Random Thoughts\nSomething else.\n"
    review = parse_review(text, ICLR)
    assert "Random Thoughts" in review.field_contents[UNMATCHED_KEY]
    assert "Something else." in review.field_contents[UNMATCHED_KEY]


def test_duplicate_heading_first_wins():
    text = CONFORMANT + "\n## Rating\n1: strong reject\n"
    review = parse_review(text, ICLR)
    assert review.recommendation_raw == 6
    assert "1: strong reject" in review.field_contents[UNMATCHED_KEY]


def test_subsections_stay_inside_their_field():
    text = "# Review\n\n## Summary\nIntro.\n\n### Detail\nMore.\n\n## Rating\n6\n"
    review = parse_review(text, ICLR)
    assert "### Detail" in review.field_contents["Summary"]


@given(st.text(max_size=3000))
def test_parse_is_total_and_covers_all_fields(text):
    review = parse_review(text, ICLR)
    names = {f.name for f in ICLR.fields}
    covered = (set(review.field_contents) - {UNMATCHED_KEY}) | set(review.missing_fields)
    assert covered == names
    if review.recommendation_raw is not None:
        assert review.recommendation_raw in ICLR.recommendation_scale


def test_round_trip_over_randomized_templates():
    rng = random.Random(42)
    for _ in range(50):
        template = random_template(rng)
        ratings = {
            f.name: rng.choice(f.scale_values)
            for f in template.fields
            if f.scale is not None
        }
        contents = conformant_field_contents(template, ratings)
        review = parse_review(render_review_markdown(template, contents), template)
        assert review.missing_fields == []
        assert review.field_contents == contents
        assert review.recommendation_raw == ratings[template.recommendation_field]


def test_parse_of_serialization_is_idempotent():
    review = parse_review(CONFORMANT, ICLR)
    contents = {k: v for k, v in review.field_contents.items() if k != UNMATCHED_KEY}
    again = parse_review(render_review_markdown(ICLR, contents), ICLR)
    assert again.field_contents == contents
    assert again.recommendation_raw == review.recommendation_raw


# --- recommendation extraction ------------------------------------------------


def test_extract_leading_score_with_label():
    scale = (1, 3, 5, 6, 8, 10)
    assert extract_recommendation("Rating: 6: marginally above the acceptance threshold", scale) == 6


def test_extract_strips_emphasis():
    assert extract_recommendation("**8 (accept)**", (1, 3, 5, 6, 8, 10)) == 8


def test_extract_no_integer_is_missing():
    with pytest.raises(RecommendationMissing):
        extract_recommendation("I lean positive", (1, 3, 5, 6, 8, 10))


def test_extract_skips_out_of_scale_integers():
    assert extract_recommendation("On a 10-point scale I would say 3.", (1, 3)) == 3


def test_extract_ignores_decimals():
    assert extract_recommendation("confidence 6.5, final 8", (1, 3, 5, 6, 8, 10)) == 8


def test_extract_result_always_on_scale():
    rng = random.Random(0)
    scale = (1, 3, 5, 6, 8, 10)
    for _ in range(200):
        text = " ".join(str(rng.randint(0, 12)) for _ in range(rng.randint(1, 8)))
        try:
            assert extract_recommendation(text, scale) in scale
        except RecommendationMissing:
            assert not any(int(tok) in scale for tok in text.split())
