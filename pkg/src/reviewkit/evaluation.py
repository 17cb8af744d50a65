"""Recommendation metrics, the pairwise judge arena, and report rendering.

Recommendations are normalized onto [1, 10] (1 = strong reject, 10 = strong
accept) with an affine map over the venue scale's range, so exact match and
average error are comparable across venues. A generated review matches when
its normalized recommendation equals at least one human reviewer's (within a
tiny epsilon, i.e. raw equality when scales coincide). Papers whose generated
review has no extractable recommendation are excluded from the statistics and
counted.
"""

from __future__ import annotations

import re
import statistics
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

from .corpus import Corpus, HumanReview
from .inference import GenerationConfig, InferenceClient
from .parsing import GeneratedReview
from .prompting import build_judge_messages
from .templates import ReviewTemplate

EM_EPSILON = 1e-9


class EvaluationError(ValueError):
    pass


class VerdictParseError(EvaluationError):
    """The judge response contains no decision literal."""


def normalize_score(raw: float, scale: Sequence[int]) -> float:
    """Affine map of a raw recommendation onto [1, 10].

    ``raw`` may be any value within the scale's range (not only a listed
    point) so averaged inputs normalize too.
    """
    lo, hi = min(scale), max(scale)
    if hi == lo:
        raise EvaluationError(f"degenerate scale {list(scale)}")
    if not lo <= raw <= hi:
        raise EvaluationError(f"raw score {raw} outside scale range [{lo}, {hi}]")
    return 1.0 + 9.0 * (raw - lo) / (hi - lo)


def exact_match(gen: float, humans: Sequence[float], eps: float = EM_EPSILON) -> bool:
    """True iff the generated score equals at least one human score."""
    if not humans:
        raise EvaluationError("exact_match requires at least one human score")
    return any(abs(gen - h) <= eps for h in humans)


def avg_error(gen: float, humans: Sequence[float]) -> float:
    """Absolute distance between the generated score and the human mean."""
    if not humans:
        raise EvaluationError("avg_error requires at least one human score")
    return abs(gen - statistics.fmean(humans))


@dataclass
class PaperEvalRow:
    paper_id: str
    generated_norm: float | None
    human_norms: list[float]
    em: bool | None = None
    abs_error: float | None = None

    def __post_init__(self) -> None:
        has_metrics = self.generated_norm is not None and bool(self.human_norms)
        if has_metrics != (self.em is not None) or has_metrics != (self.abs_error is not None):
            raise EvaluationError(
                f"row {self.paper_id!r}: em/abs_error must be present exactly when "
                "a generated score and human scores both exist"
            )


def make_eval_row(
    paper_id: str,
    generated_raw: int | None,
    human_raws: Sequence[int],
    scale: Sequence[int],
) -> PaperEvalRow:
    """Normalize raw scores and compute the per-paper metrics."""
    human_norms = [normalize_score(r, scale) for r in human_raws]
    if generated_raw is None or not human_norms:
        gen_norm = None if generated_raw is None else normalize_score(generated_raw, scale)
        return PaperEvalRow(paper_id, gen_norm, human_norms)
    gen_norm = normalize_score(generated_raw, scale)
    return PaperEvalRow(
        paper_id,
        gen_norm,
        human_norms,
        em=exact_match(gen_norm, human_norms),
        abs_error=avg_error(gen_norm, human_norms),
    )


@dataclass
class EvalReport:
    model_id: str
    n_papers: int
    n_excluded: int
    em_percent: float | None
    avg_error_mean: float | None
    avg_error_std: float | None
    avg_recommendation_mean: float | None
    avg_recommendation_std: float | None


def _mean_std(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else None
    return mean, std


def aggregate(rows: Sequence[PaperEvalRow], model_id: str = "") -> EvalReport:
    """Fold per-paper rows into the per-model report.

    Rows without a usable generated recommendation or without human scores
    are counted as excluded and omitted from every statistic. Standard
    deviations are sample (n-1) estimates; undefined statistics stay None.
    """
    scored = [r for r in rows if r.em is not None]
    excluded = len(rows) - len(scored)
    em_percent = 100.0 * sum(1 for r in scored if r.em) / len(scored) if scored else None
    err_mean, err_std = _mean_std([r.abs_error for r in scored])
    rec_mean, rec_std = _mean_std([r.generated_norm for r in scored])
    return EvalReport(
        model_id=model_id,
        n_papers=len(rows),
        n_excluded=excluded,
        em_percent=em_percent,
        avg_error_mean=err_mean,
        avg_error_std=err_std,
        avg_recommendation_mean=rec_mean,
        avg_recommendation_std=rec_std,
    )


def evaluate_generated_reviews(
    corpus: Corpus, generated: Sequence[GeneratedReview], model_id: str
) -> tuple[EvalReport, list[PaperEvalRow]]:
    """Score one model's generated reviews against the corpus's human reviews."""
    rows = []
    for gen in sorted(generated, key=lambda g: g.paper_id):
        if gen.model_id != model_id:
            continue
        scale = corpus.template_for_paper(gen.paper_id).recommendation_scale
        humans = [r.recommendation_raw for r in corpus.reviews_by_paper.get(gen.paper_id, [])]
        rows.append(make_eval_row(gen.paper_id, gen.recommendation_raw, humans, scale))
    return aggregate(rows, model_id=model_id), rows


# --- judge arena --------------------------------------------------------------


class ArenaOutcome(str, Enum):
    A = "A"
    B = "B"
    TIE = "Tie"


@dataclass
class ArenaVerdict:
    paper_id: str
    model_a: str
    model_b: str
    outcome: ArenaOutcome
    rationale: str
    order_swapped: bool = False


_DECISION_ANCHOR_RE = re.compile(r"decision", re.IGNORECASE)
_LITERAL_RE = re.compile(r"\b(review\s+a|review\s+b|tie)\b", re.IGNORECASE)


def parse_verdict(judge_text: str) -> ArenaOutcome:
    """Extract the decision literal from the judge's free-form response.

    Looks at the text after the last occurrence of "decision" (the whole text
    when absent) and takes the last standalone "Review A" / "Review B" /
    "Tie" found there.
    """
    anchors = list(_DECISION_ANCHOR_RE.finditer(judge_text))
    region = judge_text[anchors[-1].end() :] if anchors else judge_text
    matches = list(_LITERAL_RE.finditer(region))
    if not matches:
        raise VerdictParseError(f"unparseable verdict: no decision literal in {region[:120]!r}")
    literal = re.sub(r"\s+", " ", matches[-1].group(1).lower())
    return {"review a": ArenaOutcome.A, "review b": ArenaOutcome.B, "tie": ArenaOutcome.TIE}[literal]


def _flip(outcome: ArenaOutcome) -> ArenaOutcome:
    if outcome is ArenaOutcome.A:
        return ArenaOutcome.B
    if outcome is ArenaOutcome.B:
        return ArenaOutcome.A
    return ArenaOutcome.TIE


def run_arena_pair(
    paper_id: str,
    template: ReviewTemplate,
    experts: list[HumanReview],
    review_a_text: str,
    review_b_text: str,
    judge_config: GenerationConfig,
    model_a: str = "model_a",
    model_b: str = "model_b",
    swap_order: bool = False,
    client: InferenceClient | None = None,
) -> ArenaVerdict:
    """One judge call; the verdict is always expressed for (model_a, model_b).

    With ``swap_order`` the candidates are presented to the judge in reverse
    and the parsed outcome is flipped back.
    """
    if not experts:
        raise EvaluationError("arena requires at least one expert review")
    first, second = (review_b_text, review_a_text) if swap_order else (review_a_text, review_b_text)
    bundle = build_judge_messages(template, experts, first, second)
    judge = client or InferenceClient(judge_config)
    rationale = judge.complete(bundle)
    outcome = parse_verdict(rationale)
    if swap_order:
        outcome = _flip(outcome)
    return ArenaVerdict(
        paper_id=paper_id,
        model_a=model_a,
        model_b=model_b,
        outcome=outcome,
        rationale=rationale,
        order_swapped=swap_order,
    )


def run_arena(
    corpus: Corpus,
    model_a: str,
    model_b: str,
    judge_config: GenerationConfig,
    both_orders: bool = False,
) -> list[ArenaVerdict]:
    """Judge every paper with generated reviews from both models.

    Calls fan out across papers up to the judge client's concurrency bound;
    verdicts are returned sorted by paper_id for determinism.
    """
    reviews_a = {g.paper_id: g for g in corpus.generated_reviews if g.model_id == model_a}
    reviews_b = {g.paper_id: g for g in corpus.generated_reviews if g.model_id == model_b}
    paper_ids = sorted(
        pid
        for pid in reviews_a.keys() & reviews_b.keys()
        if corpus.reviews_by_paper.get(pid)
    )
    client = InferenceClient(judge_config)

    def judge_paper(pid: str) -> list[ArenaVerdict]:
        template = corpus.template_for_paper(pid)
        experts = corpus.reviews_by_paper[pid]
        orders = (False, True) if both_orders else (False,)
        return [
            run_arena_pair(
                pid,
                template,
                experts,
                reviews_a[pid].raw_markdown,
                reviews_b[pid].raw_markdown,
                judge_config,
                model_a=model_a,
                model_b=model_b,
                swap_order=swapped,
                client=client,
            )
            for swapped in orders
        ]

    with ThreadPoolExecutor(max_workers=judge_config.max_concurrency) as pool:
        nested = pool.map(judge_paper, paper_ids)
    return [v for batch in nested for v in batch]


@dataclass
class WinRateRow:
    opponent: str
    wins: int
    ties: int
    losses: int

    @property
    def win_share(self) -> float:
        total = self.wins + self.ties + self.losses
        return (self.wins + 0.5 * self.ties) / total if total else 0.0


def win_rates(verdicts: Sequence[ArenaVerdict]) -> dict[str, WinRateRow]:
    """Tabulate wins/ties/losses for model_a against each opponent."""
    rows: dict[str, WinRateRow] = {}
    for verdict in verdicts:
        row = rows.setdefault(verdict.model_b, WinRateRow(verdict.model_b, 0, 0, 0))
        if verdict.outcome is ArenaOutcome.A:
            row.wins += 1
        elif verdict.outcome is ArenaOutcome.B:
            row.losses += 1
        else:
            row.ties += 1
    return rows


# --- report rendering ----------------------------------------------------------


def _fmt(value: float | None, digits: int) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def _fmt_pm(mean: float | None, std: float | None, digits: int) -> str:
    if mean is None:
        return "n/a"
    return f"{_fmt(mean, digits)}±{_fmt(std, digits)}" if std is not None else _fmt(mean, digits)


def render_report(
    reports: Sequence[EvalReport],
    arena_tables: dict[str, dict[str, WinRateRow]] | None = None,
) -> str:
    """Markdown report: recommendation-metric tables plus arena tables."""
    lines = ["# Evaluation Report", ""]
    lines += ["## Recommendation Metrics", ""]
    lines += ["| Model | EM (%) | Avg. Error | Papers | Excluded |", "| --- | --- | --- | --- | --- |"]
    for r in reports:
        lines.append(
            f"| {r.model_id} | {_fmt(r.em_percent, 1)} | "
            f"{_fmt_pm(r.avg_error_mean, r.avg_error_std, 2)} | {r.n_papers} | {r.n_excluded} |"
        )
    lines += ["", "## Average Recommendation", "", "| Model | Avg. Recommendation |", "| --- | --- |"]
    for r in reports:
        lines.append(
            f"| {r.model_id} | {_fmt_pm(r.avg_recommendation_mean, r.avg_recommendation_std, 1)} |"
        )
    for model_id, table in (arena_tables or {}).items():
        lines += ["", f"## Arena: {model_id} vs. opponents", ""]
        lines += ["| Opponent | Wins | Ties | Losses | Win share |", "| --- | --- | --- | --- | --- |"]
        for opponent in sorted(table):
            row = table[opponent]
            lines.append(
                f"| {opponent} | {row.wins} | {row.ties} | {row.losses} | {row.win_share:.3f} |"
            )
    return "\n".join(lines) + "\n"


# --- results persistence (JSONL record shapes) ---------------------------------


def eval_row_to_json(row: PaperEvalRow) -> dict:
    return {
        "kind": "eval_row",
        "paper_id": row.paper_id,
        "generated_norm": row.generated_norm,
        "human_norms": row.human_norms,
        "em": row.em,
        "abs_error": row.abs_error,
    }


def arena_verdict_to_json(verdict: ArenaVerdict) -> dict:
    return {
        "kind": "arena_verdict",
        "paper_id": verdict.paper_id,
        "model_a": verdict.model_a,
        "model_b": verdict.model_b,
        "outcome": verdict.outcome.value,
        "rationale": verdict.rationale,
        "order_swapped": verdict.order_swapped,
    }
