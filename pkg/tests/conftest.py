import random
from pathlib import Path

import pytest

from reviewkit.corpus import Corpus, HumanReview, make_paper_record
from reviewkit.inference import GenerationConfig
from reviewkit.mock_inference import MockInferenceServer
from reviewkit.templates import FieldKind, ReviewField, ReviewTemplate, builtin_templates

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def iclr_template() -> ReviewTemplate:
    return builtin_templates()[0]


@pytest.fixture(scope="session")
def judge_example_text() -> str:
    return (DATA_DIR / "judge_example_output.md").read_text("utf-8")


@pytest.fixture(scope="session")
def sample_paper_text() -> str:
    return (DATA_DIR / "sample_paper.md").read_text("utf-8")


@pytest.fixture()
def mock_server():
    with MockInferenceServer() as server:
        yield server


def make_gen_config(url: str, model_id: str = "mock-model", **overrides) -> GenerationConfig:
    overrides.setdefault("retry_backoff", 0.0)
    overrides.setdefault("request_timeout", 10.0)
    return GenerationConfig(endpoint_url=url, model_id=model_id, **overrides)


_SECTION_NAMES = [
    "Summary", "Strengths", "Weaknesses", "Questions", "Clarity", "Novelty",
    "Impact", "Rigor", "Limitations", "Reproducibility", "Significance", "Ethics",
]
_LABELS = [
    "poor", "fair", "good", "excellent", "strong reject", "weak accept",
    "strong accept", "reject, not good enough", "accept, good paper",
]


def random_scale(rng: random.Random) -> tuple[tuple[int, str], ...]:
    values = sorted(rng.sample(range(1, 15), rng.randint(2, 7)))
    entries = []
    for i, value in enumerate(values):
        endpoint = i == 0 or i == len(values) - 1
        label = rng.choice(_LABELS) if endpoint or rng.random() < 0.5 else ""
        entries.append((value, label))
    return tuple(entries)


def random_template(rng: random.Random, venue_id: str = "venue-x") -> ReviewTemplate:
    names = rng.sample(_SECTION_NAMES, rng.randint(2, 8))
    rec_index = rng.randrange(len(names))
    fields = []
    for i, name in enumerate(names):
        if i == rec_index or rng.random() < 0.25:
            fields.append(
                ReviewField(
                    name=name,
                    kind=FieldKind.NUMERIC_RATING,
                    description=f"Rate the {name.lower()}.",
                    scale=random_scale(rng),
                    is_recommendation=i == rec_index,
                )
            )
        else:
            fields.append(
                ReviewField(
                    name=name,
                    kind=FieldKind.FREE_TEXT,
                    description=f"Discuss the {name.lower()}.",
                )
            )
    return ReviewTemplate(venue_id=venue_id, fields=tuple(fields))


def make_human_review(
    review_id: str, paper_id: str, recommendation: int, confidence: int = 4
) -> HumanReview:
    return HumanReview(
        review_id=review_id,
        paper_id=paper_id,
        field_contents={
            "Summary": "The paper studies widgets.",
            "Strengths": "Clear writing and a sensible method.",
            "Weaknesses": "Evaluation is limited to synthetic data.",
            "Rating": f"{recommendation}: overall recommendation",
        },
        recommendation_raw=recommendation,
        confidence_raw=confidence,
    )


def make_small_corpus(template: ReviewTemplate, n_papers: int = 2, reviews_per_paper: int = 3) -> Corpus:
    corpus = Corpus(templates={template.venue_id: template})
    scale = template.recommendation_scale
    for i in range(n_papers):
        pid = f"paper-{i}"
        corpus.papers[pid] = make_paper_record(
            paper_id=pid,
            venue_id=template.venue_id,
            title=f"Paper {i}",
            markdown_text=f"# Paper {i}\n\nBody of paper {i} about widgets. " + "word " * (20 + i),
        )
        corpus.reviews_by_paper[pid] = [
            make_human_review(f"{pid}-r{j}", pid, scale[(i + j) % len(scale)])
            for j in range(reviews_per_paper)
        ]
    corpus.validate()
    return corpus
