import { describe, expect, it } from "vitest";

import { ServiceClient, ServiceError, type StreamFrame } from "../src/api.js";

type Call = { input: string; init?: RequestInit };

function fakeFetch(responder: (input: string, init?: RequestInit) => Response) {
  const calls: Call[] = [];
  const fetchFn = async (input: string, init?: RequestInit) => {
    calls.push({ input, init });
    return responder(input, init);
  };
  return { calls, fetchFn };
}

function sseResponse(frames: string[]): Response {
  const encoder = new TextEncoder();
  const stream = new ReadableStream<Uint8Array>({
    start(controller) {
      for (const frame of frames) controller.enqueue(encoder.encode(`data: ${frame}\n\n`));
      controller.close();
    },
  });
  return new Response(stream, { status: 200, headers: { "content-type": "text/event-stream" } });
}

describe("ServiceClient", () => {
  it("surfaces the service's machine-readable error code", async () => {
    const { fetchFn } = fakeFetch(
      () => new Response(JSON.stringify({ code: "empty_paper", message: "nope" }), { status: 400 }),
    );
    const client = new ServiceClient("", fetchFn);
    await expect(client.generate("", "iclr-default")).rejects.toMatchObject({
      code: "empty_paper",
      status: 400,
    });
  });

  it("falls back to an http_<status> code for non-JSON errors", async () => {
    const { fetchFn } = fakeFetch(() => new Response("boom", { status: 503 }));
    const client = new ServiceClient("", fetchFn);
    const error = await client.listTemplates().catch((e) => e);
    expect(error).toBeInstanceOf(ServiceError);
    expect(error.code).toBe("http_503");
  });

  it("posts generate requests with the exact body keys", async () => {
    const { calls, fetchFn } = fakeFetch(
      () =>
        new Response(
          JSON.stringify({
            review_markdown: "# Review",
            parsed: { field_contents: {}, missing_fields: [] },
            recommendation_raw: 6,
          }),
          { status: 200 },
        ),
    );
    const client = new ServiceClient("http://svc", fetchFn);
    const result = await client.generate("paper body", "neurips-default");
    expect(result.recommendation_raw).toBe(6);
    expect(calls[0]?.input).toBe("http://svc/reviews/generate");
    expect(JSON.parse(String(calls[0]?.init?.body))).toEqual({
      paper_text: "paper body",
      template_id: "neurips-default",
      stream: false,
    });
  });

  it("streams frames in order and returns the concatenated deltas", async () => {
    const frames = [
      '{"kind":"delta","text":"# Re"}',
      '{"kind":"delta","text":"view"}',
      '{"kind":"done","finish_reason":"stop"}',
    ];
    const { fetchFn } = fakeFetch(() => sseResponse(frames));
    const client = new ServiceClient("", fetchFn);
    const seen: StreamFrame[] = [];
    const text = await client.generateStream("p", "iclr-default", (frame) => seen.push(frame));
    expect(text).toBe("# Review");
    expect(seen.map((f) => f.kind)).toEqual(["delta", "delta", "done"]);
  });

  it("synthesizes an error frame when the stream ends without a terminal", async () => {
    const { fetchFn } = fakeFetch(() => sseResponse(['{"kind":"delta","text":"partial"}']));
    const client = new ServiceClient("", fetchFn);
    const seen: StreamFrame[] = [];
    const text = await client.generateStream("p", "iclr-default", (frame) => seen.push(frame));
    expect(text).toBe("partial");
    expect(seen.at(-1)).toMatchObject({ kind: "error", code: "disconnected" });
  });

  it("uploads files as multipart form data", async () => {
    const { calls, fetchFn } = fakeFetch(
      () => new Response(JSON.stringify({ markdown: "# Converted" }), { status: 200 }),
    );
    const client = new ServiceClient("", fetchFn);
    const markdown = await client.convert(new Blob(["%PDF"]), "paper.pdf");
    expect(markdown).toBe("# Converted");
    expect(calls[0]?.init?.body).toBeInstanceOf(FormData);
    const form = calls[0]?.init?.body as FormData;
    expect(form.get("pdf")).toBeInstanceOf(Blob);
  });

  it("round-trips template text through PUT and GET", async () => {
    const stored = new Map<string, string>();
    const { fetchFn } = fakeFetch((input, init) => {
      const venue = decodeURIComponent(input.split("/templates/")[1] ?? "");
      if (init?.method === "PUT") {
        stored.set(venue, String(init.body));
        return new Response(JSON.stringify({ venue_id: venue }), { status: 200 });
      }
      return new Response(stored.get(venue) ?? "", { status: stored.has(venue) ? 200 : 404 });
    });
    const client = new ServiceClient("", fetchFn);
    await client.putTemplate("custom", "venue: custom\nfield: X\n  kind: text\n");
    expect(await client.getTemplate("custom")).toContain("field: X");
  });
});
