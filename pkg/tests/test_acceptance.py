"""Acceptance suite: one test per release criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the PASS/FAIL lines.
"""

import math
import random
import re
import time
from contextlib import contextmanager

from fastapi.testclient import TestClient

from reviewkit.config import AppConfig
from reviewkit.corpus import filter_by_confidence, filter_by_length, save_corpus, strip_appendix
from reviewkit.evaluation import (
    ArenaOutcome,
    ArenaVerdict,
    aggregate,
    make_eval_row,
    normalize_score,
    parse_verdict,
    win_rates,
)
from reviewkit.inference import chat_complete, chat_stream
from reviewkit.mock_inference import MockInferenceServer, planted_rating
from reviewkit.parsing import parse_review
from reviewkit.prompting import (
    build_judge_messages,
    build_reviewer_messages,
    load_prompt_text,
    serialize_expert_reviews,
)
from reviewkit.service import create_app
from reviewkit.templates import builtin_templates, parse_template, render_review_fields

from conftest import (
    make_gen_config,
    make_human_review,
    make_small_corpus,
    random_template,
)

TEN_POINT = tuple(range(1, 11))
ICLR_SCALE = (1, 3, 5, 6, 8, 10)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAIL: {name}")
        raise
    print(f"ACCEPTANCE PASS: {name}")


# --- metrics oracle equivalence -------------------------------------------------


def _oracle_metrics(cases):
    """Naive double-loop recomputation, independent of the evaluation module."""

    def norm(raw, scale):
        lo, hi = min(scale), max(scale)
        return 1.0 + 9.0 * (raw - lo) / (hi - lo)

    included = []
    for gen_raw, human_raws, scale in cases:
        if gen_raw is None or not human_raws:
            continue
        g = norm(gen_raw, scale)
        hs = [norm(h, scale) for h in human_raws]
        em = False
        for h in hs:
            if abs(g - h) <= 1e-9:
                em = True
        err = abs(g - sum(hs) / len(hs))
        included.append((g, em, err))

    n = len(included)
    em_percent = 100.0 * sum(1 for _, em, _ in included if em) / n
    errs = [err for _, _, err in included]
    recs = [g for g, _, _ in included]

    def mean(xs):
        return sum(xs) / len(xs)

    def sample_std(xs):
        m = mean(xs)
        return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))

    return em_percent, mean(errs), sample_std(errs), mean(recs), sample_std(recs)


def test_metrics_oracle_equivalence():
    with criterion("metrics oracle equivalence on 200-paper synthetic corpus (<1s, 1e-12)"):
        rng = random.Random(20260809)
        cases = []
        for i in range(200):
            scale = TEN_POINT if i % 2 == 0 else ICLR_SCALE
            humans = [rng.choice(scale) for _ in range(rng.randint(1, 5))]
            gen = None if rng.random() < 0.1 else rng.choice(scale)
            cases.append((gen, humans, scale))

        start = time.perf_counter()
        rows = [
            make_eval_row(f"p{i}", gen, humans, scale)
            for i, (gen, humans, scale) in enumerate(cases)
        ]
        report = aggregate(rows, model_id="synthetic")
        oracle = _oracle_metrics(cases)
        elapsed = time.perf_counter() - start

        assert abs(report.em_percent - oracle[0]) <= 1e-12
        assert abs(report.avg_error_mean - oracle[1]) <= 1e-12
        assert abs(report.avg_error_std - oracle[2]) <= 1e-12
        assert abs(report.avg_recommendation_mean - oracle[3]) <= 1e-12
        assert abs(report.avg_recommendation_std - oracle[4]) <= 1e-12
        assert report.n_excluded == sum(1 for gen, _, _ in cases if gen is None)
        assert elapsed < 1.0, f"metrics took {elapsed:.3f}s"


# --- normalization properties ------------------------------------------------------


def test_normalization_properties():
    with criterion("normalization endpoints/monotonicity/identity properties"):
        rng = random.Random(7)
        for _ in range(1000):
            values = sorted(rng.sample(range(1, 60), rng.randint(2, 10)))
            assert normalize_score(values[0], values) == 1.0
            assert normalize_score(values[-1], values) == 10.0
            a = rng.randint(values[0], values[-1] - 1)
            b = rng.randint(a + 1, values[-1])
            assert normalize_score(a, values) < normalize_score(b, values)
        for raw in TEN_POINT:
            assert normalize_score(raw, TEN_POINT) == float(raw)
        assert normalize_score(3, (1, 2, 3, 4, 5)) == 5.5


# --- recommendation regression over the judge example ratings ------------------------


def test_judge_example_regression(judge_example_text):
    with criterion("judge-example regression: ratings {6,6,8,3}, verdict A"):
        humans = [normalize_score(h, ICLR_SCALE) for h in (6, 6, 8, 3)]
        gen6 = normalize_score(6, ICLR_SCALE)
        gen8 = normalize_score(8, ICLR_SCALE)
        row6 = make_eval_row("p", 6, [6, 6, 8, 3], ICLR_SCALE)
        row8 = make_eval_row("p", 8, [6, 6, 8, 3], ICLR_SCALE)
        assert gen6 == 6.0 and gen8 == 8.0 and humans == [6.0, 6.0, 8.0, 3.0]
        assert row6.em is True and row6.abs_error == 0.25
        assert row8.em is True and row8.abs_error == 2.25
        assert parse_verdict(judge_example_text) is ArenaOutcome.A


# --- prompt golden files ---------------------------------------------------------------


def test_prompt_golden_files():
    with criterion("prompts byte-equal golden files after substitution (3 templates)"):
        fixtures = builtin_templates() + [
            parse_template(
                "venue: fixture-three\n"
                "field: Summary\n  kind: text\n  description: Summarize.\n"
                "field: Rating\n  kind: rating\n  recommendation: true\n"
                "  description: Overall.\n  scale: 1=awful, 2, 3=great\n"
            )
        ]
        assert len(fixtures) == 3
        experts = [make_human_review(f"r{i}", "p", 6) for i in range(2)]
        for template in fixtures:
            rendered = render_review_fields(template)
            bundle = build_reviewer_messages(template, "PAPER BODY")
            assert bundle.messages[0].content == load_prompt_text("reviewer_system").replace(
                "{review_fields}", rendered
            )
            assert bundle.messages[1].content == load_prompt_text("reviewer_user").replace(
                "{paper_text}", "PAPER BODY"
            )
            judge = build_judge_messages(template, experts, "REVIEW A BODY", "REVIEW B BODY")
            assert judge.messages[0].content == (
                load_prompt_text("judge_system")
                .replace("{n_expert_reviews}", "2")
                .replace("{review_fields}", rendered)
            )
            assert judge.messages[1].content == (
                load_prompt_text("judge_user")
                .replace("{expert_reviews}", serialize_expert_reviews(template, experts))
                .replace("{review_a}", "REVIEW A BODY")
                .replace("{review_b}", "REVIEW B BODY")
            )


# --- template round trip through the mock LLM --------------------------------------------


def test_mock_review_round_trip_50_templates():
    with criterion("mock reviews parse back losslessly for 50 randomized templates"):
        rng = random.Random(13)
        with MockInferenceServer() as server:
            config = make_gen_config(server.url)
            for i in range(50):
                template = random_template(rng, venue_id=f"venue-{i}")
                paper_text = f"Round-trip paper {i} about widgets."
                bundle = build_reviewer_messages(template, paper_text)
                text = chat_complete(config, bundle)
                review = parse_review(text, template)
                assert review.missing_fields == [], (i, review.missing_fields)
                rec_field = template.field(template.recommendation_field)
                planted = planted_rating(
                    paper_text, rec_field.name, list(rec_field.scale_values)
                )
                assert review.recommendation_raw == planted, (i, review.recommendation_raw)


# --- streaming contract -----------------------------------------------------------------


def test_streaming_contract_100_responses(iclr_template):
    with criterion("stream deltas concat == blocking completion for 100 random responses"):
        rng = random.Random(101)
        alphabet = "abcdefghij \nXYZé中"
        texts = {
            f"case {i:03d}": "".join(rng.choices(alphabet, k=rng.randint(1, 300)))
            for i in range(100)
        }

        def responder(request):
            user = next(m["content"] for m in request["messages"] if m["role"] == "user")
            key = user.rsplit("\n\n", 1)[1]
            return texts[key]

        with MockInferenceServer(responder=responder) as server:
            config = make_gen_config(server.url)
            for key, expected in texts.items():
                bundle = build_reviewer_messages(iclr_template, key)
                blocking = chat_complete(config, bundle)
                events = []
                streamed = chat_stream(config, bundle, events.append)
                assert blocking == expected
                assert streamed == blocking
                terminals = [e for e in events if e.kind in ("done", "error")]
                assert len(terminals) == 1
                assert events[-1] is terminals[0]  # nothing after the terminal event


# --- curation ------------------------------------------------------------------------------


class _Record:
    def __init__(self, word_count):
        self.word_count = word_count


def _appendix_fixture_docs():
    docs = []
    for i in range(20):
        body = f"# Title {i}\n\nIntro paragraph {i}.\n\n## Method\n\nDetails {i}.\n\n"
        refs = "# References\n\n[1] Someone.\n\n"
        tail = [
            "# Appendix\n\nProofs.\n",
            "# Appendix A\n\nStuff.\n\n# Appendix B\n\nMore.\n",
            "## Appendix: extra results\n\nTables.\n",
            "## A Implementation Details\n\nBatch sizes.\n",
            "",  # no appendix at all
        ][i % 5]
        docs.append(body + refs + tail)
    return docs


def _contains_appendix_heading(doc):
    seen_refs = False
    for line in doc.splitlines():
        m = re.match(r"^(#{1,6})\s+(.*?)\s*$", line)
        if not m:
            continue
        text = m.group(2).strip().strip("*_").strip()
        if text.lower().startswith("appendix"):
            return True
        if text.lower().startswith("reference"):
            seen_refs = True
        elif seen_refs and re.match(r"^[A-Z](?:\.\d+)*\s+\S", text):
            return True
    return False


def test_curation_criteria():
    with criterion("curation: length tails {1,100}, confidence >=4, appendix stripping"):
        records = [_Record(c) for c in range(1, 101)]
        kept = filter_by_length(records, q=0.01)
        removed = {r.word_count for r in records} - {r.word_count for r in kept}
        assert removed == {1, 100}

        reviews = [make_human_review(f"r{c}", "p", 6, confidence=c) for c in (1, 2, 3, 4, 5)]
        kept_reviews = filter_by_confidence(reviews, {"v": 4}, lambda r: "v")
        assert [r.confidence_raw for r in kept_reviews] == [4, 5]

        docs = _appendix_fixture_docs()
        assert len(docs) == 20
        for doc in docs:
            out = strip_appendix(doc)
            assert doc.startswith(out)
            assert not _contains_appendix_heading(out)


# --- arena tabulation ------------------------------------------------------------------------


def test_arena_tabulation_criteria():
    with criterion("arena: 60/10/30 -> 0.65 exactly; flip symmetry on 1000 sets"):
        verdicts = (
            [ArenaVerdict(f"p{i}", "a", "b", ArenaOutcome.A, "") for i in range(60)]
            + [ArenaVerdict(f"t{i}", "a", "b", ArenaOutcome.TIE, "") for i in range(10)]
            + [ArenaVerdict(f"l{i}", "a", "b", ArenaOutcome.B, "") for i in range(30)]
        )
        assert win_rates(verdicts)["b"].win_share == 0.65

        rng = random.Random(23)
        flip = {ArenaOutcome.A: ArenaOutcome.B, ArenaOutcome.B: ArenaOutcome.A,
                ArenaOutcome.TIE: ArenaOutcome.TIE}
        for _ in range(1000):
            outcomes = [rng.choice(list(ArenaOutcome)) for _ in range(rng.randint(1, 40))]
            forward = [
                ArenaVerdict(f"p{i}", "a", "b", o, "") for i, o in enumerate(outcomes)
            ]
            backward = [
                ArenaVerdict(f"p{i}", "b", "a", flip[o], "") for i, o in enumerate(outcomes)
            ]
            total = win_rates(forward)["b"].win_share + win_rates(backward)["a"].win_share
            assert abs(total - 1.0) <= 1e-12


# --- end-to-end offline smoke -------------------------------------------------------------------


def test_end_to_end_offline_smoke(tmp_path, iclr_template, sample_paper_text):
    with criterion("offline smoke: serve + mock endpoint, generate/eval/report < 5s"):
        start = time.perf_counter()
        with MockInferenceServer() as server:
            corpus = make_small_corpus(iclr_template, n_papers=2, reviews_per_paper=3)
            corpus_path = tmp_path / "corpus.jsonl"
            save_corpus(corpus, corpus_path)
            config = AppConfig(
                inference=make_gen_config(server.url),
                judge=make_gen_config(server.url, model_id="mock-judge"),
                templates_dir=tmp_path / "templates",
                corpus_path=corpus_path,
                results_dir=tmp_path / "results",
            )
            client = TestClient(create_app(config))

            generated = client.post(
                "/reviews/generate",
                json={"paper_text": sample_paper_text, "template_id": "iclr-default"},
            )
            assert generated.status_code == 200
            body = generated.json()
            assert body["parsed"]["missing_fields"] == []
            assert body["recommendation_raw"] in ICLR_SCALE

            run = client.post("/eval/run", json={"model_id": "mock-model"})
            assert run.status_code == 200
            report = client.get(f"/eval/report/{run.json()['report_id']}")
            assert report.status_code == 200
            # Table-shaped row: EM% with one decimal, error as mean±std
            assert re.search(
                r"\| mock-model \| \d+\.\d \| \d+\.\d\d±\d+\.\d\d \|", report.text
            ), report.text
            assert re.search(r"\| mock-model \| \d+\.\d±\d+\.\d \|", report.text)
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"smoke took {elapsed:.2f}s"
