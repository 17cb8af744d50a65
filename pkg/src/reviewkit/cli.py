"""Command-line interface.

Subcommands: convert, generate, curate, evaluate, arena, serve. Machine-
readable outputs land in a timestamped run directory under results_dir;
human-readable summaries go to stdout. Operation failures exit 1 with the
reason on stderr; usage errors exit 2.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import AppConfig, ConfigError, load_config
from .corpus import (
    CorpusError,
    curate,
    load_corpus,
    save_corpus,
    _generated_to_json,
)
from .evaluation import (
    EvaluationError,
    arena_verdict_to_json,
    eval_row_to_json,
    evaluate_generated_reviews,
    render_report,
    run_arena,
    win_rates,
)
from .inference import InferenceError, chat_stream
from .parsing import parse_review
from .prompting import PromptError, build_reviewer_messages, check_context_budget
from .results import new_run_dir, write_jsonl
from .service import ConversionError, convert_pdf, serve
from .templates import TemplateError, builtin_templates

_ERRORS = (
    ConfigError,
    ConversionError,
    CorpusError,
    EvaluationError,
    InferenceError,
    PromptError,
    TemplateError,
    OSError,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reviewkit", description=__doc__)
    parser.add_argument("--config", help="path to a JSON config file")
    parser.add_argument("--results-dir", help="override results_dir")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="run the configured PDF-to-markdown converter")
    p.add_argument("pdf", help="input file path")

    p = sub.add_parser("generate", help="stream a review for a markdown paper")
    p.add_argument("paper", help="markdown paper file")
    p.add_argument("--template", default="iclr-default", help="template venue id")
    p.add_argument("--endpoint", help="override inference endpoint URL")
    p.add_argument("--model", help="override inference model id")

    p = sub.add_parser("curate", help="apply the curation filters to a raw corpus")
    p.add_argument("corpus", help="raw corpus JSONL file")
    p.add_argument("--q", type=float, default=0.01, help="length quantile per tail")
    p.add_argument("--confidence-threshold", type=int, help="confidence threshold for all venues")

    p = sub.add_parser("evaluate", help="score a model's generated reviews in a corpus")
    p.add_argument("corpus", help="corpus JSONL with generated_review records")
    p.add_argument("--model", required=True, help="model id to evaluate")

    p = sub.add_parser("arena", help="pairwise judge arena between two models")
    p.add_argument("corpus", help="corpus JSONL with generated_review records")
    p.add_argument("--a", required=True, dest="model_a", help="subject model id")
    p.add_argument("--b", required=True, dest="model_b", help="opponent model id")
    p.add_argument("--judge-endpoint", help="override judge endpoint URL")
    p.add_argument("--judge-model", help="override judge model id")
    p.add_argument("--both-orders", action="store_true", help="judge each pair in both orders")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--listen", help="override listen address host:port")

    return parser


def _app_config(args) -> AppConfig:
    overrides = {"results_dir": args.results_dir}
    if getattr(args, "endpoint", None):
        overrides["inference.endpoint_url"] = args.endpoint
    if getattr(args, "model", None) and args.command == "generate":
        overrides["inference.model_id"] = args.model
    if getattr(args, "judge_endpoint", None):
        overrides["judge.endpoint_url"] = args.judge_endpoint
    if getattr(args, "judge_model", None):
        overrides["judge.model_id"] = args.judge_model
    if getattr(args, "listen", None):
        overrides["listen_address"] = args.listen
    return load_config(args.config, overrides)


def _cmd_convert(args, config: AppConfig) -> int:
    markdown = convert_pdf(args.pdf, config.converter_command)
    run_dir = new_run_dir(config.results_dir, "convert")
    (run_dir / "converted.md").write_text(markdown, "utf-8")
    sys.stdout.write(markdown)
    print(f"\n[saved to {run_dir / 'converted.md'}]", file=sys.stderr)
    return 0


def _cmd_generate(args, config: AppConfig) -> int:
    paper_text = Path(args.paper).read_text("utf-8")
    template = next(
        (t for t in builtin_templates() if t.venue_id == args.template), None
    )
    if template is None:
        candidate = config.templates_dir / f"{args.template}.txt"
        if candidate.exists():
            from .templates import parse_template

            template = parse_template(candidate.read_text("utf-8"))
        else:
            print(f"unknown template {args.template!r}", file=sys.stderr)
            return 1
    bundle = build_reviewer_messages(template, paper_text)
    budget = check_context_budget(bundle)
    if not budget.fits:
        print(f"paper too long (~{budget.approx_token_count} tokens)", file=sys.stderr)
        return 1

    def on_event(event):
        if event.kind == "delta":
            sys.stdout.write(event.text)
            sys.stdout.flush()

    text = chat_stream(config.inference, bundle, on_event)
    sys.stdout.write("\n")
    review = parse_review(text, template, model_id=config.inference.model_id)
    run_dir = new_run_dir(config.results_dir, "generate")
    (run_dir / "review.md").write_text(text, "utf-8")
    write_jsonl(run_dir / "review.jsonl", [_generated_to_json(review)])
    print(
        f"recommendation: {review.recommendation_raw}; "
        f"missing fields: {review.missing_fields or 'none'}; saved to {run_dir}"
    )
    return 0


def _cmd_curate(args, config: AppConfig) -> int:
    corpus = load_corpus(args.corpus)
    thresholds = None
    if args.confidence_threshold is not None:
        thresholds = {venue: args.confidence_threshold for venue in corpus.templates}
    curated, report = curate(corpus, q=args.q, threshold_by_venue=thresholds)
    run_dir = new_run_dir(config.results_dir, "curate")
    save_corpus(curated, run_dir / "curated.jsonl")
    print(f"Appendix stripping: rewrote {report.appendix_stripped} papers.")
    print(f"Length filter: removed {report.papers_dropped_by_length} of {report.papers_in} papers.")
    print(
        f"Length filter: removed {report.reviews_dropped_by_length} of "
        f"{report.reviews_in} reviews."
    )
    print(f"Confidence filter: removed {report.reviews_dropped_by_confidence} reviews.")
    if report.reviews_dropped_orphaned:
        print(f"Dropped {report.reviews_dropped_orphaned} reviews of removed papers.")
    kept_reviews = sum(len(rs) for rs in curated.reviews_by_paper.values())
    print(f"Kept {len(curated.papers)} papers and {kept_reviews} reviews.")
    print(f"Curated corpus written to {run_dir / 'curated.jsonl'}")
    return 0


def _cmd_evaluate(args, config: AppConfig) -> int:
    corpus = load_corpus(args.corpus)
    generated = [g for g in corpus.generated_reviews if g.model_id == args.model]
    if not generated:
        print(f"nothing to evaluate: no generated reviews for model {args.model!r}", file=sys.stderr)
        return 1
    report, rows = evaluate_generated_reviews(corpus, generated, args.model)
    markdown = render_report([report])
    run_dir = new_run_dir(config.results_dir, f"eval-{args.model}")
    (run_dir / "report.md").write_text(markdown, "utf-8")
    write_jsonl(run_dir / "results.jsonl", [eval_row_to_json(r) for r in rows])
    sys.stdout.write(markdown)
    print(f"[report saved to {run_dir / 'report.md'}]", file=sys.stderr)
    return 0


def _cmd_arena(args, config: AppConfig) -> int:
    corpus = load_corpus(args.corpus)
    verdicts = run_arena(
        corpus, args.model_a, args.model_b, config.judge, both_orders=args.both_orders
    )
    if not verdicts:
        print(
            f"nothing to judge: no papers with generated reviews from both "
            f"{args.model_a!r} and {args.model_b!r}",
            file=sys.stderr,
        )
        return 1
    table = win_rates(verdicts)
    markdown = render_report([], arena_tables={args.model_a: table})
    run_dir = new_run_dir(config.results_dir, f"arena-{args.model_a}-vs-{args.model_b}")
    (run_dir / "report.md").write_text(markdown, "utf-8")
    write_jsonl(run_dir / "verdicts.jsonl", [arena_verdict_to_json(v) for v in verdicts])
    row = table[args.model_b]
    print(
        f"{args.model_a} vs {args.model_b}: {row.wins} wins / {row.ties} ties / "
        f"{row.losses} losses (win share {row.win_share:.3f})"
    )
    print(f"[verdicts saved to {run_dir / 'verdicts.jsonl'}]", file=sys.stderr)
    return 0


def _cmd_serve(args, config: AppConfig) -> int:
    serve(config)
    return 0


_COMMANDS = {
    "convert": _cmd_convert,
    "generate": _cmd_generate,
    "curate": _cmd_curate,
    "evaluate": _cmd_evaluate,
    "arena": _cmd_arena,
    "serve": _cmd_serve,
}


def cli_main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _app_config(args)
        return _COMMANDS[args.command](args, config)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
