"""HTTP service tying the pipeline together.

Endpoints (JSON bodies unless noted):

* ``POST /papers/convert``            multipart {pdf} -> {markdown}
* ``POST /reviews/generate``          {paper_text, template_id, stream} ->
                                      SSE StreamEvent frames, or
                                      {review_markdown, parsed, recommendation_raw}
* ``GET /templates``                  template summaries
* ``GET/PUT /templates/{venue_id}``   template file format as the body
* ``POST /eval/run``                  {model_id} -> {report_id}
* ``GET /eval/report/{report_id}``    rendered markdown report

Every error response carries a stable machine-readable ``code`` field.
PDF conversion is delegated to an external command so the core stays free of
document-AI dependencies.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from pydantic import BaseModel

from .config import AppConfig
from .corpus import load_corpus, _generated_to_json
from .evaluation import eval_row_to_json, evaluate_generated_reviews, render_report
from .inference import InferenceClient, InferenceError
from .parsing import parse_review
from .prompting import PromptError, build_reviewer_messages, check_context_budget
from .results import is_safe_run_id, new_run_dir, write_jsonl
from .templates import (
    ReviewTemplate,
    TemplateError,
    builtin_templates,
    parse_template,
    render_template,
)


class ConversionError(RuntimeError):
    pass


def convert_pdf(pdf_path: str | Path, converter_command: str) -> str:
    """Run the external converter with {input} substituted; stdout is markdown."""
    pdf_path = Path(pdf_path)
    if not pdf_path.exists():
        raise ConversionError(f"input file not found: {pdf_path}")
    argv = [
        part.replace("{input}", str(pdf_path))
        for part in shlex.split(converter_command)
    ]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True)
    except FileNotFoundError as exc:
        raise ConversionError(f"converter command not found: {argv[0]!r}") from exc
    if proc.returncode != 0:
        stderr = (proc.stderr or "").strip()[:400]
        raise ConversionError(f"converter exited with {proc.returncode}: {stderr}")
    if not proc.stdout.strip():
        raise ConversionError("empty conversion output")
    return proc.stdout


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class GenerateRequest(BaseModel):
    paper_text: str
    template_id: str = "iclr-default"
    stream: bool = False


class EvalRunRequest(BaseModel):
    model_id: str


class ServiceState:
    def __init__(self, config: AppConfig):
        self.config = config
        self.templates: dict[str, ReviewTemplate] = {t.venue_id: t for t in builtin_templates()}
        self._write_lock = threading.Lock()  # serializes template/corpus writes
        if config.templates_dir.is_dir():
            for path in sorted(config.templates_dir.glob("*.txt")):
                template = parse_template(path.read_text("utf-8"))
                self.templates[template.venue_id] = template
        self.inference = InferenceClient(config.inference)
        self.judge = InferenceClient(config.judge)

    def template(self, venue_id: str) -> ReviewTemplate:
        try:
            return self.templates[venue_id]
        except KeyError:
            raise ApiError(404, "unknown_template", f"no template {venue_id!r}") from None

    def put_template(self, template: ReviewTemplate) -> None:
        with self._write_lock:
            self.config.templates_dir.mkdir(parents=True, exist_ok=True)
            path = self.config.templates_dir / f"{template.venue_id}.txt"
            path.write_text(render_template(template), "utf-8")
            self.templates[template.venue_id] = template


def _sse_frame(payload: dict) -> str:
    return f"data: {json.dumps(payload, ensure_ascii=False)}\n\n"


def _stream_review(state: ServiceState, bundle) -> StreamingResponse:
    events: queue.Queue = queue.Queue()
    sentinel = object()
    failure: dict = {}

    def worker():
        try:
            state.inference.stream(bundle, events.put)
        except InferenceError as exc:
            failure["error"] = exc
        finally:
            events.put(sentinel)

    threading.Thread(target=worker, daemon=True).start()

    def frames():
        error_seen = False
        while True:
            item = events.get()
            if item is sentinel:
                break
            if item.kind == "delta":
                yield _sse_frame({"kind": "delta", "text": item.text})
            elif item.kind == "done":
                yield _sse_frame({"kind": "done", "finish_reason": item.finish_reason})
            else:
                error_seen = True  # detail arrives once the worker finishes
        if error_seen or "error" in failure:
            message = str(failure.get("error", "stream failed"))
            yield _sse_frame({"kind": "error", "code": "upstream_error", "message": message})

    return StreamingResponse(frames(), media_type="text/event-stream")


def create_app(config: AppConfig | None = None) -> FastAPI:
    config = config or AppConfig()
    state = ServiceState(config)
    app = FastAPI(title="reviewkit", version="0.1.0")
    app.state.service = state
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(ApiError)
    async def handle_api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422, content={"code": "invalid_request", "message": str(exc.errors())}
        )

    @app.exception_handler(Exception)
    async def handle_unexpected(_request: Request, exc: Exception):
        return JSONResponse(
            status_code=500, content={"code": "internal_error", "message": str(exc)}
        )

    @app.get("/templates")
    def list_templates():
        return {
            "templates": [
                {
                    "venue_id": t.venue_id,
                    "fields": [f.name for f in t.fields],
                    "recommendation_field": t.recommendation_field,
                }
                for t in state.templates.values()
            ]
        }

    @app.get("/templates/{venue_id}")
    def get_template(venue_id: str):
        return PlainTextResponse(render_template(state.template(venue_id)))

    @app.put("/templates/{venue_id}")
    async def put_template(venue_id: str, request: Request):
        body = (await request.body()).decode("utf-8")
        try:
            template = parse_template(body)
        except TemplateError as exc:
            raise ApiError(400, "invalid_template", str(exc)) from exc
        if template.venue_id != venue_id:
            raise ApiError(
                400,
                "venue_mismatch",
                f"template body declares venue {template.venue_id!r}, path says {venue_id!r}",
            )
        state.put_template(template)
        return {"venue_id": venue_id, "fields": [f.name for f in template.fields]}

    @app.post("/papers/convert")
    def papers_convert(pdf: UploadFile):
        suffix = Path(pdf.filename or "upload.pdf").suffix or ".pdf"
        with tempfile.NamedTemporaryFile(suffix=suffix, delete=False) as tmp:
            tmp.write(pdf.file.read())
            tmp_path = Path(tmp.name)
        try:
            markdown = convert_pdf(tmp_path, config.converter_command)
        except ConversionError as exc:
            raise ApiError(422, "conversion_failed", str(exc)) from exc
        finally:
            tmp_path.unlink(missing_ok=True)
        return {"markdown": markdown}

    @app.post("/reviews/generate")
    def reviews_generate(body: GenerateRequest):
        if not body.paper_text.strip():
            raise ApiError(400, "empty_paper", "paper_text must be nonempty")
        template = state.template(body.template_id)
        try:
            bundle = build_reviewer_messages(template, body.paper_text)
        except PromptError as exc:
            raise ApiError(400, "invalid_prompt", str(exc)) from exc
        budget = check_context_budget(bundle)
        if not budget.fits:
            raise ApiError(
                413,
                "context_too_long",
                f"prompt is ~{budget.approx_token_count} tokens and exceeds the context budget",
            )
        if body.stream:
            return _stream_review(state, bundle)
        try:
            text = state.inference.complete(bundle)
        except InferenceError as exc:
            raise ApiError(502, "upstream_error", str(exc)) from exc
        review = parse_review(text, template, model_id=config.inference.model_id)
        return {
            "review_markdown": text,
            "parsed": {
                "field_contents": review.field_contents,
                "missing_fields": review.missing_fields,
            },
            "recommendation_raw": review.recommendation_raw,
        }

    @app.post("/eval/run")
    def eval_run(body: EvalRunRequest):
        if not config.corpus_path.exists():
            raise ApiError(404, "no_corpus", f"corpus file not found: {config.corpus_path}")
        corpus = load_corpus(config.corpus_path)
        paper_ids = sorted(corpus.papers)
        if not paper_ids:
            raise ApiError(400, "empty_corpus", "corpus contains no papers")

        def generate(paper_id: str):
            paper = corpus.papers[paper_id]
            # corpus template first: its recommendation scale is the one the
            # stored human reviews were recorded on
            template = corpus.templates.get(paper.venue_id) or state.template(paper.venue_id)
            bundle = build_reviewer_messages(template, paper.markdown_text)
            text = state.inference.complete(bundle)
            return parse_review(text, template, paper_id=paper_id, model_id=body.model_id)

        try:
            with ThreadPoolExecutor(max_workers=config.max_concurrency) as pool:
                generated = list(pool.map(generate, paper_ids))
        except InferenceError as exc:
            raise ApiError(502, "upstream_error", str(exc)) from exc

        report, rows = evaluate_generated_reviews(corpus, generated, body.model_id)
        run_dir = new_run_dir(config.results_dir, f"eval-{body.model_id}")
        (run_dir / "report.md").write_text(render_report([report]), "utf-8")
        write_jsonl(
            run_dir / "results.jsonl",
            [_generated_to_json(g) for g in generated] + [eval_row_to_json(r) for r in rows],
        )
        return {"report_id": run_dir.name}

    @app.get("/eval/report/{report_id}")
    def eval_report(report_id: str):
        if not is_safe_run_id(report_id):
            raise ApiError(400, "invalid_report_id", f"bad report id {report_id!r}")
        path = config.results_dir / report_id / "report.md"
        if not path.exists():
            raise ApiError(404, "unknown_report", f"no report {report_id!r}")
        return PlainTextResponse(path.read_text("utf-8"), media_type="text/markdown")

    if config.static_dir and Path(config.static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(config.static_dir), html=True), name="ui")

    return app


def serve(config: AppConfig) -> None:
    """Run the service with uvicorn; blocks until interrupted."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
