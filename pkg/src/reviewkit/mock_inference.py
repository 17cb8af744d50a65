"""Deterministic mock chat-completions server for offline runs and tests.

Speaks the same wire protocol as the real endpoint (POST /chat/completions,
blocking JSON or SSE streaming). Responses are pure functions of the request:

* reviewer prompts get a template-conformant review whose sections are read
  straight out of the rendered review-fields block in the system prompt, so
  editing the template changes the next mock review;
* judge prompts get a canned rationale ending in a fixed decision literal.

Rating values are planted deterministically from a digest of the paper text,
and `planted_rating` exposes the rule so tests can predict them.
"""

from __future__ import annotations

import argparse
import json
import re
import threading
import zlib
from collections.abc import Callable
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

_SECTION_RE = re.compile(r"^##(?!#)[ \t]*(.+?)[ \t]*$", re.MULTILINE)
_VALUES_LINE_RE = re.compile(r"^Possible values:\s*(.+)$", re.MULTILINE)
_VALUE_SPLIT_RE = re.compile(r",\s*(?=-?\d+\s*(?:\(|,|$))")

JUDGE_MARKER = "expert meta-reviewer"

DEFAULT_VERDICT_TEXT = (
    "### Analysis\n\n"
    "Review A's numerical ratings track the expert consensus closely, while "
    "Review B is more optimistic than most of the expert reviews. The strengths "
    "and weaknesses raised in Review A overlap more with the points the experts "
    "emphasized.\n\n"
    "### Decision\n"
    "**Final Decision**: **Review {decision}** aligns better with the expert reviews.\n"
)


def _digest(text: str) -> str:
    return format(zlib.crc32(text.encode("utf-8")) & 0xFFFFFFFF, "08x")


@dataclass
class PromptSection:
    name: str
    values: list[int] | None = None  # rating fields only


def parse_prompt_sections(system_content: str) -> list[PromptSection]:
    """Recover section names and rating scales from the rendered fields block."""
    sections: list[PromptSection] = []
    matches = list(_SECTION_RE.finditer(system_content))
    for i, match in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(system_content)
        body = system_content[match.end() : end]
        values = None
        values_match = _VALUES_LINE_RE.search(body)
        if values_match:
            parts = _VALUE_SPLIT_RE.split(values_match.group(1).strip())
            values = [int(re.match(r"-?\d+", p.strip()).group(0)) for p in parts if p.strip()]
        sections.append(PromptSection(name=match.group(1), values=values))
    return sections


def planted_rating(paper_text: str, section_name: str, values: list[int]) -> int:
    """The in-scale value the mock writes for a rating section; deterministic."""
    seed = zlib.crc32(f"{_digest(paper_text)}:{section_name}".encode("utf-8"))
    return values[seed % len(values)]


def canned_review(system_content: str, user_content: str) -> str:
    """A review that conforms to whatever template the system prompt carries."""
    paper_text = user_content.partition("Review the following paper:")[2].strip() or user_content
    digest = _digest(paper_text)
    parts = ["# Review"]
    for section in parse_prompt_sections(system_content):
        if section.values:
            value = planted_rating(paper_text, section.name, section.values)
            body = f"{value}: assigned by the mock reviewer."
        else:
            body = f"Mock {section.name.lower()} for paper {digest}."
        parts.append(f"## {section.name}\n{body}")
    return "\n\n".join(parts) + "\n"


def canned_verdict(decision: str = "A") -> str:
    return DEFAULT_VERDICT_TEXT.replace("{decision}", decision)


def default_responder(request: dict, judge_decision: str = "A") -> str:
    """Route a chat-completions request to the review or verdict generator."""
    system = next((m["content"] for m in request.get("messages", []) if m["role"] == "system"), "")
    user = next((m["content"] for m in request.get("messages", []) if m["role"] == "user"), "")
    if JUDGE_MARKER in system:
        return canned_verdict(judge_decision)
    return canned_review(system, user)


def chunk_text(text: str) -> list[str]:
    """Deterministic uneven chunking used for the streamed deltas."""
    seed = zlib.crc32(text.encode("utf-8"))
    chunks = []
    i = 0
    step = 0
    while i < len(text):
        size = 1 + (seed + step) % 13
        chunks.append(text[i : i + size])
        i += size
        step += 1
    return chunks


def _completion_body(model: str, text: str) -> dict:
    return {
        "id": f"mock-{_digest(text)}",
        "object": "chat.completion",
        "model": model,
        "choices": [
            {
                "index": 0,
                "message": {"role": "assistant", "content": text},
                "finish_reason": "stop",
            }
        ],
    }


def sse_frames(model: str, text: str) -> list[str]:
    """The ``data:`` payloads for one streamed completion, including [DONE]."""
    frames = [
        json.dumps(
            {
                "object": "chat.completion.chunk",
                "model": model,
                "choices": [{"index": 0, "delta": {"role": "assistant"}, "finish_reason": None}],
            }
        )
    ]
    for chunk in chunk_text(text):
        frames.append(
            json.dumps(
                {
                    "object": "chat.completion.chunk",
                    "model": model,
                    "choices": [{"index": 0, "delta": {"content": chunk}, "finish_reason": None}],
                }
            )
        )
    frames.append(
        json.dumps(
            {
                "object": "chat.completion.chunk",
                "model": model,
                "choices": [{"index": 0, "delta": {}, "finish_reason": "stop"}],
            }
        )
    )
    frames.append("[DONE]")
    return frames


class MockInferenceServer:
    """Threaded HTTP server bound to an ephemeral port; use as a context manager.

    Test hooks:
      responder       maps the request JSON to the completion text
      status_script   HTTP statuses consumed one per request (then 200)
      frames_override maps (request, text) to raw SSE data payloads, allowing
                      malformed frames or streams cut off before [DONE]
    """

    def __init__(
        self,
        responder: Callable[[dict], str] | None = None,
        judge_decision: str = "A",
        status_script: list[int] | None = None,
        frames_override: Callable[[dict, str], list[str]] | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self.responder = responder or (lambda req: default_responder(req, judge_decision))
        self.status_script = list(status_script or [])
        self.frames_override = frames_override
        self.request_log: list[dict] = []
        self.header_log: list[dict] = []
        self._lock = threading.Lock()
        self._httpd = ThreadingHTTPServer((host, port), self._make_handler())
        self._thread = threading.Thread(
            target=lambda: self._httpd.serve_forever(poll_interval=0.05), daemon=True
        )

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockInferenceServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self) -> "MockInferenceServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _next_status(self) -> int:
        with self._lock:
            return self.status_script.pop(0) if self.status_script else 200

    def _make_handler(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):  # keep test output quiet
                pass

            def do_POST(self):
                if self.path.rstrip("/").endswith("/chat/completions"):
                    self._handle_completion()
                else:
                    self._send_json(404, {"error": f"no route {self.path}"})

            def _handle_completion(self):
                length = int(self.headers.get("Content-Length", "0"))
                request = json.loads(self.rfile.read(length) or b"{}")
                with server._lock:
                    server.request_log.append(request)
                    server.header_log.append(dict(self.headers.items()))
                status = server._next_status()
                if status != 200:
                    self._send_json(status, {"error": f"scripted status {status}"})
                    return
                text = server.responder(request)
                if request.get("stream"):
                    self._send_stream(request, text)
                else:
                    self._send_json(200, _completion_body(request.get("model", "mock"), text))

            def _send_json(self, status: int, body: dict):
                payload = json.dumps(body).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def _send_stream(self, request: dict, text: str):
                if server.frames_override is not None:
                    frames = server.frames_override(request, text)
                else:
                    frames = sse_frames(request.get("model", "mock"), text)
                self.send_response(200)
                self.send_header("Content-Type", "text/event-stream")
                self.send_header("Connection", "close")
                self.end_headers()
                for frame in frames:
                    self.wfile.write(f"data: {frame}\n\n".encode("utf-8"))
                    self.wfile.flush()

        return Handler


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Run the offline mock inference endpoint.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8790)
    parser.add_argument("--judge-decision", default="A", choices=["A", "B", "Tie"])
    args = parser.parse_args(argv)
    server = MockInferenceServer(
        judge_decision=args.judge_decision, host=args.host, port=args.port
    )
    print(f"mock inference endpoint listening on {server.url} (POST /chat/completions)")
    try:
        server.start()._thread.join()
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
