/**
 * Client for the reviewkit service HTTP API. The browser talks only to the
 * service, never to an inference endpoint directly, so no secrets ever reach
 * the client.
 *
 * The generate endpoint streams over POST, which rules out EventSource;
 * streaming responses are read with fetch + ReadableStream instead.
 */

import { sseDataPayloads } from "./sse.js";

export type StreamFrame =
  | { kind: "delta"; text: string }
  | { kind: "done"; finish_reason?: string }
  | { kind: "error"; code?: string; message?: string };

export interface TemplateSummary {
  venue_id: string;
  fields: string[];
  recommendation_field: string;
}

export interface GenerateResult {
  review_markdown: string;
  parsed: { field_contents: Record<string, string>; missing_fields: string[] };
  recommendation_raw: number | null;
}

export class ServiceError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed wrapper over the service routes. */
export class ServiceClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let code = `http_${response.status}`;
      let message = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.code === "string") code = body.code;
        if (body && typeof body.message === "string") message = body.message;
      } catch {
        // non-JSON error body; keep the status fallback
      }
      throw new ServiceError(code, message, response.status);
    }
    return response;
  }

  async convert(file: Blob, filename: string): Promise<string> {
    const form = new FormData();
    form.append("pdf", file, filename);
    const response = await this.request("/papers/convert", { method: "POST", body: form });
    const body = await response.json();
    return body.markdown as string;
  }

  async listTemplates(): Promise<TemplateSummary[]> {
    const response = await this.request("/templates");
    const body = await response.json();
    return body.templates as TemplateSummary[];
  }

  async getTemplate(venueId: string): Promise<string> {
    const response = await this.request(`/templates/${encodeURIComponent(venueId)}`);
    return response.text();
  }

  async putTemplate(venueId: string, text: string): Promise<void> {
    await this.request(`/templates/${encodeURIComponent(venueId)}`, {
      method: "PUT",
      headers: { "Content-Type": "text/plain; charset=utf-8" },
      body: text,
    });
  }

  async generate(paperText: string, templateId: string): Promise<GenerateResult> {
    const response = await this.request("/reviews/generate", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ paper_text: paperText, template_id: templateId, stream: false }),
    });
    return (await response.json()) as GenerateResult;
  }

  /**
   * Stream a review; `onFrame` fires for every SSE frame in order. Resolves
   * to the concatenation of all delta texts (the full review markdown).
   */
  async generateStream(
    paperText: string,
    templateId: string,
    onFrame: (frame: StreamFrame) => void,
  ): Promise<string> {
    const response = await this.request("/reviews/generate", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ paper_text: paperText, template_id: templateId, stream: true }),
    });
    if (!response.body) {
      throw new ServiceError("no_stream", "response carried no body to stream", 502);
    }
    let text = "";
    let terminated = false;
    for await (const payload of sseDataPayloads(response.body)) {
      const frame = JSON.parse(payload) as StreamFrame;
      onFrame(frame);
      if (frame.kind === "delta") text += frame.text;
      if (frame.kind === "done" || frame.kind === "error") {
        terminated = true;
        break;
      }
    }
    if (!terminated) {
      onFrame({ kind: "error", code: "disconnected", message: "stream ended unexpectedly" });
    }
    return text;
  }
}
